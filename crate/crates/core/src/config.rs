//! Experiment configuration and the deterministic fixture corpus.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apfun::{ApFunction, ApFunctionJson, Term};
use crate::error::{Error, Result};
use crate::kernels::QuadratureConfig;
use crate::summability::RowFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inequality {
    Prop4,
    Thm5,
    Thm6,
    Thm3,
    Thm2,
    Remark7,
}

impl Inequality {
    pub const ALL: [Inequality; 6] = [
        Inequality::Prop4,
        Inequality::Thm5,
        Inequality::Thm6,
        Inequality::Thm3,
        Inequality::Thm2,
        Inequality::Remark7,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Inequality::Prop4 => "prop4",
            Inequality::Thm5 => "thm5",
            Inequality::Thm6 => "thm6",
            Inequality::Thm3 => "thm3",
            Inequality::Thm2 => "thm2",
            Inequality::Remark7 => "remark7",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|i| i.id() == s)
            .ok_or_else(|| Error::arg("inequality", format!("unknown inequality `{s}`")))
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Constant,
    Exponential,
    Cosine,
    Lacunary,
    Random,
}

/// Parameters of a named generator; unused fields are ignored by the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_terms")]
    pub terms: usize,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_terms() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionSource {
    Inline(ApFunctionJson),
    Generator(GeneratorSpec),
    /// Path to a JSON function or fixture file, relative to the config file.
    File(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub id: String,
    #[serde(flatten)]
    pub source: FunctionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowFamilySpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl RowFamilySpec {
    pub fn family(&self) -> Result<RowFamily> {
        RowFamily::from_name(&self.family, &self.params)
    }
}

/// Inclusive range of row indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NRange {
    pub start: usize,
    pub end: usize,
}

impl Default for NRange {
    fn default() -> Self {
        Self { start: 0, end: 256 }
    }
}

impl NRange {
    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XGrid {
    /// Equally spaced points over one quasi-period of each function.
    Points(usize),
    Values(Vec<f64>),
}

impl Default for XGrid {
    fn default() -> Self {
        XGrid::Points(17)
    }
}

impl XGrid {
    pub fn resolve(&self, f: &ApFunction) -> Vec<f64> {
        match self {
            XGrid::Points(n) => {
                let period = quasi_period(f);
                (0..*n).map(|j| j as f64 * period / *n as f64).collect()
            }
            XGrid::Values(v) => v.clone(),
        }
    }
}

/// The fundamental period when it is at most 100π, otherwise `2π/α`.
pub fn quasi_period(f: &ApFunction) -> f64 {
    match f.fundamental_period() {
        Some(p) if p <= 100.0 * PI => p,
        _ => 2.0 * PI / f.alpha(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonDivergence {
    pub factor: f64,
    /// Smallest `n` entering the lower half.
    pub n_min: usize,
}

impl Default for NonDivergence {
    fn default() -> Self {
        Self { factor: 3.0, n_min: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    #[serde(default = "default_csv_name")]
    pub csv: String,
    #[serde(default = "default_summary_name")]
    pub summary: String,
}

fn default_csv_name() -> String {
    "ratios.csv".into()
}

fn default_summary_name() -> String {
    "summary.json".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub functions: Vec<FunctionSpec>,
    #[serde(default = "default_rows")]
    pub rows: Vec<RowFamilySpec>,
    #[serde(default)]
    pub n_range: NRange,
    #[serde(default = "default_q_list")]
    pub q_list: Vec<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub x_grid: XGrid,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_inequalities")]
    pub inequalities: Vec<Inequality>,
    #[serde(default = "default_delta_points")]
    pub delta_grid_points: usize,
    /// Exponent of the Stepanov norm in the norm-level comparison.
    #[serde(default = "default_norm_p")]
    pub norm_p: f64,
    #[serde(default)]
    pub non_divergence: NonDivergence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

fn default_rows() -> Vec<RowFamilySpec> {
    ["cesaro", "riesz", "abel"]
        .into_iter()
        .map(|f| RowFamilySpec {
            family: f.into(),
            params: BTreeMap::new(),
        })
        .collect()
}

fn default_q_list() -> Vec<f64> {
    vec![1.0, 2.0]
}

fn default_c() -> f64 {
    2.0
}

fn default_inequalities() -> Vec<Inequality> {
    vec![
        Inequality::Prop4,
        Inequality::Thm5,
        Inequality::Thm6,
        Inequality::Thm3,
        Inequality::Remark7,
    ]
}

fn default_delta_points() -> usize {
    61
}

fn default_norm_p() -> f64 {
    2.0
}

impl ExperimentConfig {
    /// A config over the given functions with every other field defaulted.
    pub fn with_functions(functions: Vec<FunctionSpec>) -> Self {
        Self {
            seed: 0,
            functions,
            rows: default_rows(),
            n_range: NRange::default(),
            q_list: default_q_list(),
            c: default_c(),
            x_grid: XGrid::default(),
            quadrature: QuadratureConfig::default(),
            inequalities: default_inequalities(),
            delta_grid_points: default_delta_points(),
            norm_p: default_norm_p(),
            non_divergence: NonDivergence::default(),
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    /// Checks every field; errors carry the path of the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(Error::config("functions", "must list at least one function"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, spec) in self.functions.iter().enumerate() {
            if !seen.insert(spec.id.as_str()) {
                return Err(Error::config(format!("functions[{i}].id"), format!("duplicate id `{}`", spec.id)));
            }
            match &spec.source {
                FunctionSource::Inline(json) => {
                    ApFunction::try_from(json.clone())
                        .map_err(|e| Error::config(format!("functions[{i}].inline"), e.to_string()))?;
                }
                FunctionSource::Generator(g) => {
                    if !(g.alpha > 0.0) || !g.alpha.is_finite() {
                        return Err(Error::config(format!("functions[{i}].generator.alpha"), "must be positive"));
                    }
                    if g.kind == GeneratorKind::Random && g.terms == 0 {
                        return Err(Error::config(format!("functions[{i}].generator.terms"), "must be at least 1"));
                    }
                }
                FunctionSource::File(p) => {
                    if p.is_empty() {
                        return Err(Error::config(format!("functions[{i}].file"), "path is empty"));
                    }
                }
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            row.family()
                .map_err(|e| Error::config(format!("rows[{i}].family"), e.to_string()))?;
        }
        if self.n_range.start > self.n_range.end {
            return Err(Error::config("n_range", "start must not exceed end"));
        }
        if self.q_list.is_empty() {
            return Err(Error::config("q_list", "must be nonempty"));
        }
        for (i, q) in self.q_list.iter().enumerate() {
            if !(*q > 0.0) || !q.is_finite() {
                return Err(Error::config(format!("q_list[{i}]"), format!("must be positive, got {q}")));
            }
        }
        if !(self.c > 1.0) || !self.c.is_finite() {
            return Err(Error::config("c", format!("must be > 1, got {}", self.c)));
        }
        match &self.x_grid {
            XGrid::Points(0) => return Err(Error::config("x_grid.points", "must be at least 1")),
            XGrid::Values(v) if v.is_empty() || v.iter().any(|x| !x.is_finite()) => {
                return Err(Error::config("x_grid.values", "must be nonempty and finite"))
            }
            _ => {}
        }
        self.quadrature
            .validate()
            .map_err(|e| Error::config("quadrature", e.to_string()))?;
        if self.delta_grid_points < 2 {
            return Err(Error::config("delta_grid_points", "must be at least 2"));
        }
        if !(self.norm_p >= 1.0) || !self.norm_p.is_finite() {
            return Err(Error::config("norm_p", "must be finite and >= 1"));
        }
        if !(self.non_divergence.factor > 0.0) {
            return Err(Error::config("non_divergence.factor", "must be positive"));
        }
        Ok(())
    }

    /// Builds every function; `base` resolves relative file paths.
    pub fn resolve_functions(&self, base: &Path) -> Result<Vec<NamedFunction>> {
        self.functions
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let f = match &spec.source {
                    FunctionSource::Inline(json) => ApFunction::try_from(json.clone()),
                    FunctionSource::Generator(g) => generate(g),
                    FunctionSource::File(p) => read_function_file(&base.join(p)),
                }
                .map_err(|e| Error::config(format!("functions[{i}]"), e.to_string()))?;
                Ok(NamedFunction {
                    id: spec.id.clone(),
                    f,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedFunction {
    pub id: String,
    pub f: ApFunction,
}

/// Accepts either a bare function or a fixture file with a `function` field.
pub fn read_function_file(path: &Path) -> Result<ApFunction> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let inner = value.get("function").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner)?)
}

/// One fixture: its generator, seed and the generated function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub id: String,
    pub generator: GeneratorSpec,
    pub function: ApFunction,
}

impl Fixture {
    pub fn named(&self) -> NamedFunction {
        NamedFunction {
            id: self.id.clone(),
            f: self.function.clone(),
        }
    }

    pub fn spec(&self) -> FunctionSpec {
        FunctionSpec {
            id: self.id.clone(),
            source: FunctionSource::Generator(self.generator.clone()),
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds the function a generator describes.
pub fn generate(g: &GeneratorSpec) -> Result<ApFunction> {
    let alpha = g.alpha;
    match g.kind {
        GeneratorKind::Constant => ApFunction::constant(c(1.5, 0.0), alpha),
        GeneratorKind::Exponential => ApFunction::new(alpha, vec![Term::new(2f64.sqrt(), c(3.0, 0.0), c(0.0, 0.0))]),
        GeneratorKind::Cosine => ApFunction::new(alpha, vec![Term::new(1.0, c(0.5, 0.0), c(0.5, 0.0))]),
        GeneratorKind::Lacunary => {
            // exponents (2^j − 1)α, real cosine-type terms with decaying amplitudes
            let terms = (1..=g.terms.max(1))
                .map(|j| {
                    let a = 0.5 * 0.6f64.powi(j as i32 - 1);
                    Term::new(((1u64 << j) - 1) as f64 * alpha, c(a, 0.0), c(a, 0.0))
                })
                .collect();
            ApFunction::new(alpha, terms)
        }
        GeneratorKind::Random => random_function(g.seed, alpha, g.terms),
    }
}

/// Random α-separated sum: gaps `α(1 + u)` with `u ∈ [0.05, 1.5)`, a constant
/// term below 1 in modulus and amplitudes of term `j` below `2^{-j}`.
/// Draws are repeated until the result is a valid member (which the gap rule
/// already guarantees), so `Σ|A_ν| ≤ 5`.
fn random_function(seed: u64, alpha: f64, count: usize) -> Result<ApFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let mut terms = vec![Term::zero_frequency(polar(&mut rng, 1.0))];
        let mut lambda = 0.0;
        for j in 1..=count.max(1) {
            lambda += alpha * (1.0 + rng.gen_range(0.05..1.5));
            let scale = 0.5f64.powi(j as i32 - 1);
            terms.push(Term::new(lambda, polar(&mut rng, scale), polar(&mut rng, scale)));
        }
        if let Ok(f) = ApFunction::new(alpha, terms) {
            if f.check_omega_membership(alpha) && f.amplitude_sum() <= 10.0 {
                return Ok(f);
            }
        }
    }
    Err(Error::arg("seed", format!("no admissible function drawn for seed {seed}")))
}

fn polar(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    let r = scale * rng.gen::<f64>();
    Complex64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
}

/// The deterministic corpus: constant, single exponential, cosine, lacunary
/// sum, then random α-separated sums with seeds drawn from `seed`.
pub fn generate_fixtures(seed: u64, count: usize) -> Result<Vec<Fixture>> {
    let fixed = [
        ("constant", GeneratorKind::Constant, 1.0, 1),
        ("exponential", GeneratorKind::Exponential, 1.0, 1),
        ("cosine", GeneratorKind::Cosine, 1.0, 1),
        ("lacunary", GeneratorKind::Lacunary, 0.5, 6),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let (id, generator) = match fixed.get(i) {
            Some(&(id, kind, alpha, terms)) => (
                id.to_string(),
                GeneratorSpec {
                    kind,
                    seed: 0,
                    alpha,
                    terms,
                },
            ),
            None => {
                let j = i - fixed.len();
                (
                    format!("random-{j}"),
                    GeneratorSpec {
                        kind: GeneratorKind::Random,
                        seed: rng.gen(),
                        alpha: if j % 2 == 0 { 1.0 } else { 0.5 },
                        terms: 3 + j % 4,
                    },
                )
            }
        };
        let function = generate(&generator)?;
        out.push(Fixture { id, generator, function });
    }
    Ok(out)
}

/// Writes one `<id>.json` per fixture and returns the paths.
pub fn write_fixtures(fixtures: &[Fixture], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    fixtures
        .iter()
        .map(|fx| {
            let path = dir.join(format!("{}.json", fx.id));
            let mut text = serde_json::to_string_pretty(fx)?;
            text.push('\n');
            std::fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}
