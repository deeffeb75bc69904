//! Left and right sides of the approximation inequalities as numbers, their
//! ratios, and sweeps over functions, points, rows, `n` and `q`.
//!
//! A bounded ratio across `n` is the executable reading of `≪`. Right sides
//! that involve `E_σ` are evaluated at both ends of the bracket; the ratio
//! column uses the lower end.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apfun::{default_u_grid, stepanov_norm, ApFunction, LpExponent, WindowRule};
use crate::config::{ExperimentConfig, Inequality, NRange, NamedFunction, NonDivergence};
use crate::error::{Error, Result};
use crate::kernels::QuadratureConfig;
use crate::moduli::{best_approx_bracket, default_delta_grid, fit_modulus, ModulusFunction, OmegaProfile};
use crate::strong_means::{block_strong_mean_of, deviations_at, strong_mean_of, DeviationSequence};
use crate::summability::{check_row_stochastic, generate_row, gm2beta_constant, ms_check, MatrixRow, RowFamily};

/// Infinite right-hand sums stop once the remaining mass times the largest
/// remaining term is below this.
pub const TAIL_TOL: f64 = 1e-12;

const MAX_TAIL_TERMS: usize = 10_000_000;

pub const FLAG_NOT_GM2BETA: &str = "not_gm2beta";
pub const FLAG_TAIL_INCOMPLETE: &str = "tail_incomplete";

/// `lhs / rhs_lower`, undefined for `0/0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Value(f64),
    Undefined,
}

impl Ratio {
    pub fn of(lhs: f64, rhs: f64) -> Self {
        match (lhs == 0.0, rhs == 0.0) {
            (true, true) => Ratio::Undefined,
            (true, false) => Ratio::Value(0.0),
            (false, true) => Ratio::Value(f64::INFINITY),
            (false, false) => Ratio::Value(lhs / rhs),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Value(v) => Some(v),
            Ratio::Undefined => None,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub inequality: Inequality,
    pub f_id: String,
    pub x: Option<f64>,
    pub n: usize,
    pub q: f64,
    pub c: Option<f64>,
    pub row_family: String,
    pub lhs: f64,
    pub rhs_lower: f64,
    pub rhs_upper: f64,
    pub ratio: Ratio,
    pub flags: Vec<&'static str>,
    /// Bound on the part of an infinite right-hand sum that was not added.
    pub truncation_bound: f64,
}

impl RatioReport {
    pub const CSV_HEADER: [&'static str; 12] = [
        "inequality_id",
        "f_id",
        "x",
        "n",
        "q",
        "c",
        "row_family",
        "lhs",
        "rhs_lower",
        "rhs_upper",
        "ratio",
        "flags",
    ];

    fn new(inequality: Inequality, n: usize, q: f64, lhs: f64, rhs_lower: f64, rhs_upper: f64) -> Self {
        Self {
            inequality,
            f_id: String::new(),
            x: None,
            n,
            q,
            c: None,
            row_family: String::new(),
            lhs,
            rhs_lower,
            rhs_upper,
            ratio: Ratio::of(lhs, rhs_lower),
            flags: Vec::new(),
            truncation_bound: 0.0,
        }
    }

    pub fn csv_record(&self) -> [String; 12] {
        [
            self.inequality.id().to_string(),
            self.f_id.clone(),
            self.x.map_or_else(String::new, fmt_f64),
            self.n.to_string(),
            fmt_f64(self.q),
            self.c.map_or_else(String::new, fmt_f64),
            self.row_family.clone(),
            fmt_f64(self.lhs),
            fmt_f64(self.rhs_lower),
            fmt_f64(self.rhs_upper),
            match self.ratio {
                Ratio::Value(v) => fmt_f64(v),
                Ratio::Undefined => "undefined".into(),
            },
            self.flags.join(";"),
        ]
    }
}

/// Writes `# key=value` comment lines, then the CSV table.
pub fn write_reports_csv<W: Write>(mut out: W, comments: &[String], reports: &[RatioReport]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RatioReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

fn pow_q(v: f64, q: f64) -> f64 {
    if q == 1.0 {
        v
    } else if q == 2.0 {
        v * v
    } else {
        v.powf(q)
    }
}

fn check_q_range(q: f64, lo_open: f64, hi: f64) -> Result<()> {
    if !(q > lo_open && q <= hi) {
        return Err(Error::arg("q", format!("must lie in ({lo_open}, {hi}], got {q}")));
    }
    Ok(())
}

fn require_stochastic(row: &MatrixRow) -> Result<()> {
    if check_row_stochastic(row) {
        Ok(())
    } else {
        Err(Error::NotStochastic {
            n: row.n(),
            sum: row.sum(),
        })
    }
}

/// `{Σ_k a_k b_k^q}^{1/q}` with `b_k = base(k)` nonincreasing from index
/// `k+1` on; infinite rows stop when `tail_mass(K)·b_{K+1}^q < TAIL_TOL`.
/// Returns the sum and the bound on what was left out.
fn weighted_power_sum(row: &MatrixRow, q: f64, mut base: impl FnMut(usize) -> (f64, f64)) -> (f64, f64, f64, bool) {
    let (mut lo, mut up) = (0.0, 0.0);
    match row.support_end() {
        Some(end) => {
            for k in 0..=end {
                let a = row.entry(k);
                if a > 0.0 {
                    let (bl, bu) = base(k);
                    lo += a * pow_q(bl, q);
                    up += a * pow_q(bu, q);
                }
            }
            (lo.powf(1.0 / q), up.powf(1.0 / q), 0.0, true)
        }
        None => {
            let mut k = 0;
            loop {
                let (bl, bu) = base(k);
                let a = row.entry(k);
                lo += a * pow_q(bl, q);
                up += a * pow_q(bu, q);
                let next = base(k + 1).1;
                let bound = row.tail_mass(k) * pow_q(next, q);
                if bound < TAIL_TOL {
                    return (lo.powf(1.0 / q), up.powf(1.0 / q), bound, true);
                }
                k += 1;
                if k >= MAX_TAIL_TERMS {
                    return (lo.powf(1.0 / q), up.powf(1.0 / q), bound, false);
                }
            }
        }
    }
}

/// `[w(π/(k+1)) + E_σ]` at both bracket ends.
fn rhs_term(f: &ApFunction, w: &ModulusFunction, k: usize, sigma: f64) -> (f64, f64) {
    let wk = w.value(PI / (k + 1) as f64);
    let b = best_approx_bracket(f, sigma).expect("sigma is nonnegative");
    (wk + b.lower, wk + b.upper)
}

/// `{(1/(n+1))Σ_{k=n}^{2n}|S_{αk/2}f(x) − f(x)|^q}^{1/q}` against
/// `w(π/(n+1)) + E_{αn/2}(f)_{S¹}`.
pub fn prop4_ratio(f: &ApFunction, x: f64, n: usize, q: f64, w: &ModulusFunction) -> Result<RatioReport> {
    prop4_with(f, &deviations_at(f, x), x, n, q, w)
}

fn prop4_with(f: &ApFunction, dev: &DeviationSequence, x: f64, n: usize, q: f64, w: &ModulusFunction) -> Result<RatioReport> {
    check_q_range(q, 0.0, 2.0)?;
    let lhs = block_strong_mean_of(dev, n, q)?;
    let (lo, up) = rhs_term(f, w, n, f.alpha() * n as f64 / 2.0);
    let mut r = RatioReport::new(Inequality::Prop4, n, q, lhs, lo, up);
    r.x = Some(x);
    Ok(r)
}

/// `E`-argument of the Theorem 5 right side: `αk/2^{1+[c]}`.
pub fn thm5_sigma(alpha: f64, k: usize, c: f64) -> f64 {
    alpha * k as f64 / 2f64.powi(1 + c.floor() as i32)
}

/// `H^q_{n,A}f(x)` against `{Σ_k a_{n,k}[w(π/(k+1)) + E_{αk/2^{1+[c]}}]^q}^{1/q}`.
/// A row outside GM(₂β) for this `c` is flagged, not rejected.
pub fn thm5_ratio(
    f: &ApFunction,
    x: f64,
    n: usize,
    q: f64,
    row: &MatrixRow,
    c: f64,
    w: &ModulusFunction,
) -> Result<RatioReport> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::arg("c", format!("must be > 1, got {c}")));
    }
    let member = gm2beta_constant(row, c, row.default_m_max())?.member;
    thm5_with(f, &deviations_at(f, x), x, n, q, row, c, w, member)
}

#[allow(clippy::too_many_arguments)]
fn thm5_with(
    f: &ApFunction,
    dev: &DeviationSequence,
    x: f64,
    n: usize,
    q: f64,
    row: &MatrixRow,
    c: f64,
    w: &ModulusFunction,
    gm2beta: bool,
) -> Result<RatioReport> {
    check_q_range(q, 0.0, 2.0)?;
    require_stochastic(row)?;
    let lhs = strong_mean_of(dev, row, q)?;
    let alpha = f.alpha();
    let (lo, up, bound, complete) = weighted_power_sum(row, q, |k| rhs_term(f, w, k, thm5_sigma(alpha, k, c)));
    let mut r = RatioReport::new(Inequality::Thm5, n, q, lhs, lo, up);
    r.x = Some(x);
    r.c = Some(c);
    r.row_family = row.label().to_string();
    r.truncation_bound = bound;
    if !gm2beta {
        r.flags.push(FLAG_NOT_GM2BETA);
    }
    if !complete {
        r.flags.push(FLAG_TAIL_INCOMPLETE);
    }
    Ok(r)
}

/// As Theorem 5 with `E_{αk/2}`; the row must be nonincreasing.
pub fn thm6_ratio(f: &ApFunction, x: f64, n: usize, q: f64, row: &MatrixRow, w: &ModulusFunction) -> Result<RatioReport> {
    thm6_with(f, &deviations_at(f, x), x, n, q, row, w)
}

fn thm6_rhs(f: &ApFunction, q: f64, row: &MatrixRow, w: &ModulusFunction) -> (f64, f64, f64, bool) {
    let alpha = f.alpha();
    weighted_power_sum(row, q, |k| rhs_term(f, w, k, alpha * k as f64 / 2.0))
}

fn thm6_with(
    f: &ApFunction,
    dev: &DeviationSequence,
    x: f64,
    n: usize,
    q: f64,
    row: &MatrixRow,
    w: &ModulusFunction,
) -> Result<RatioReport> {
    check_q_range(q, 0.0, 2.0)?;
    let ms = ms_check(row);
    if !ms.member {
        return Err(Error::arg(
            "row",
            format!("row {} is not nonincreasing (first increase at k = {:?})", row.n(), ms.witness_m),
        ));
    }
    require_stochastic(row)?;
    let lhs = strong_mean_of(dev, row, q)?;
    let (lo, up, bound, complete) = thm6_rhs(f, q, row, w);
    let mut r = RatioReport::new(Inequality::Thm6, n, q, lhs, lo, up);
    r.x = Some(x);
    r.row_family = row.label().to_string();
    r.truncation_bound = bound;
    if !complete {
        r.flags.push(FLAG_TAIL_INCOMPLETE);
    }
    Ok(r)
}

/// Data shared by the norm-level comparisons for one function.
pub struct NormData {
    sup_omega: OmegaProfile,
    sup_norm: f64,
}

impl NormData {
    pub fn new(f: &ApFunction, u_grid: &[f64]) -> Result<Self> {
        let sup_omega = OmegaProfile::new(f, LpExponent::Infinite, u_grid, PI)?;
        let sup_norm = stepanov_norm(f, LpExponent::Infinite, u_grid)?;
        Ok(Self {
            sup_omega,
            sup_norm,
        })
    }

    /// `{(1/(n+1))Σ_{k≤n} ω(π/(k+1))_{S^∞}^q}^{1/q} + ‖f‖_{S^∞}/(n+1)^{1/q}`.
    pub fn thm3_rhs(&self, n: usize, q: f64) -> f64 {
        let s: f64 = (0..=n)
            .map(|k| pow_q(self.sup_omega.value(PI / (k + 1) as f64).expect("within π"), q))
            .sum();
        (s / (n + 1) as f64).powf(1.0 / q) + self.sup_norm / ((n + 1) as f64).powf(1.0 / q)
    }
}

/// `max_x H^q_{n,C}f(x)` over `x_grid` (Cesàro row `n`) against the
/// uniform-norm bound built from `ω f(·)_{S^∞}` and `‖f‖_{S^∞}`.
pub fn thm3_comparison(f: &ApFunction, n: usize, q: f64, x_grid: &[f64], u_grid: &[f64]) -> Result<RatioReport> {
    if !(q >= 2.0) || !q.is_finite() {
        return Err(Error::arg("q", format!("must be >= 2, got {q}")));
    }
    if x_grid.is_empty() {
        return Err(Error::arg("x_grid", "must be nonempty"));
    }
    let data = NormData::new(f, u_grid)?;
    let devs: Vec<DeviationSequence> = x_grid.iter().map(|&x| deviations_at(f, x)).collect();
    thm3_with(&data, &devs, n, q)
}

fn thm3_with(data: &NormData, devs: &[DeviationSequence], n: usize, q: f64) -> Result<RatioReport> {
    let row = generate_row(&RowFamily::Cesaro, n)?;
    let mut lhs: f64 = 0.0;
    for d in devs {
        lhs = lhs.max(strong_mean_of(d, &row, q)?);
    }
    let rhs = data.thm3_rhs(n, q);
    let mut r = RatioReport::new(Inequality::Thm3, n, q, lhs, rhs, rhs);
    r.row_family = "cesaro".into();
    Ok(r)
}

/// `max_x` of the Theorem 6 right side (lower bracket end, `q = 2`, Cesàro
/// row `n`) against the Theorem 3 right side.
pub fn remark7_ratio(
    f: &ApFunction,
    n: usize,
    moduli: &[ModulusFunction],
    u_grid: &[f64],
) -> Result<RatioReport> {
    let data = NormData::new(f, u_grid)?;
    remark7_with(f, &data, moduli, n)
}

fn remark7_with(f: &ApFunction, data: &NormData, moduli: &[ModulusFunction], n: usize) -> Result<RatioReport> {
    let row = generate_row(&RowFamily::Cesaro, n)?;
    let lhs = moduli.iter().map(|w| thm6_rhs(f, 2.0, &row, w).0).fold(0.0, f64::max);
    let rhs = data.thm3_rhs(n, 2.0);
    let mut r = RatioReport::new(Inequality::Remark7, n, 2.0, lhs, rhs, rhs);
    r.row_family = "cesaro".into();
    Ok(r)
}

/// Strong-mean deviations at the nodes of a window rule, for the
/// `S^p` norm of `x ↦ H^q_{n,A}f(x)`.
pub struct NormLevel {
    rule: WindowRule,
    devs: Vec<DeviationSequence>,
    omega: OmegaProfile,
    p: f64,
}

impl NormLevel {
    pub fn new(f: &ApFunction, p: f64, u_grid: &[f64]) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::arg("p", format!("must be finite and >= 1, got {p}")));
        }
        let rule = WindowRule::new(u_grid, f.lambda_max());
        let devs = rule.nodes().iter().map(|&x| deviations_at(f, x)).collect();
        let omega = OmegaProfile::new(f, LpExponent::Finite(p), u_grid, PI)?;
        Ok(Self { rule, devs, omega, p })
    }
}

/// `‖H^q_{n,A}f‖_{S^p}` against `{Σ_k a_{n,k} ω f(π/(k+1))_{S^p}^q}^{1/q}`.
pub fn thm2_norm_ratio(f: &ApFunction, n: usize, q: f64, row: &MatrixRow, c: f64, p: f64, u_grid: &[f64]) -> Result<RatioReport> {
    let level = NormLevel::new(f, p, u_grid)?;
    let member = gm2beta_constant(row, c, row.default_m_max())?.member;
    thm2_with(&level, n, q, row, c, member)
}

fn thm2_with(level: &NormLevel, n: usize, q: f64, row: &MatrixRow, c: f64, gm2beta: bool) -> Result<RatioReport> {
    if !(q > 0.0 && q <= level.p) {
        return Err(Error::arg("q", format!("must lie in (0, p = {}], got {q}", level.p)));
    }
    require_stochastic(row)?;
    let values: Vec<f64> = level
        .devs
        .iter()
        .map(|d| strong_mean_of(d, row, q).map(|h| h.powf(level.p)))
        .collect::<Result<_>>()?;
    let lhs = level.rule.max_mean(&values).powf(1.0 / level.p);
    let (rhs, _, bound, complete) = weighted_power_sum(row, q, |k| {
        let v = level.omega.value(PI / (k + 1) as f64).expect("within π");
        (v, v)
    });
    let mut r = RatioReport::new(Inequality::Thm2, n, q, lhs, rhs, rhs);
    r.c = Some(c);
    r.row_family = row.label().to_string();
    r.truncation_bound = bound;
    if !gm2beta {
        r.flags.push(FLAG_NOT_GM2BETA);
    }
    if !complete {
        r.flags.push(FLAG_TAIL_INCOMPLETE);
    }
    Ok(r)
}

/// Per-point data: deviations and the fitted modulus.
struct PointData {
    x: f64,
    dev: DeviationSequence,
    w: ModulusFunction,
}

struct RowInfo {
    family: String,
    rows: Vec<MatrixRow>,
    gm2beta: Vec<bool>,
    ms: Vec<bool>,
}

fn row_infos(cfg: &ExperimentConfig) -> Result<Vec<RowInfo>> {
    cfg.rows
        .iter()
        .map(|spec| {
            let family = spec.family()?;
            let rows: Vec<MatrixRow> = cfg.n_range.iter().map(|n| generate_row(&family, n)).collect::<Result<_>>()?;
            let gm2beta = rows
                .iter()
                .map(|r| gm2beta_constant(r, cfg.c, r.default_m_max()).map(|rep| rep.member))
                .collect::<Result<_>>()?;
            let ms = rows.iter().map(|r| ms_check(r).member).collect();
            Ok(RowInfo {
                family: family.name().to_string(),
                rows,
                gm2beta,
                ms,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub f_id: String,
    pub x: Option<f64>,
    pub q: f64,
    pub row_family: String,
    pub lower_max: f64,
    pub upper_max: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySummary {
    pub records: usize,
    /// `null` when every ratio is undefined or unbounded.
    pub max_ratio: Option<f64>,
    pub unbounded: usize,
    pub flagged: usize,
    pub groups: usize,
    pub divergent_groups: Vec<GroupStat>,
    pub max_upper_over_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub seed: u64,
    pub tol: f64,
    pub quadrature: QuadratureConfig,
    pub n_range: NRange,
    pub q_list: Vec<f64>,
    pub c: f64,
    pub delta_grid_points: usize,
    pub norm_p: f64,
    pub non_divergence: NonDivergence,
    pub tail_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metadata: SweepMetadata,
    pub inequalities: BTreeMap<String, InequalitySummary>,
    /// Block means that were not exactly 0 although `αn/2 ≥ λ_max`.
    pub exactness_violations: usize,
    /// Rows left out of the Theorem 6 sweep because they increase somewhere.
    pub skipped_non_monotone: usize,
    /// `a_{N,0}` for the last row of each family (should tend to 0).
    pub first_entry_at_end: BTreeMap<String, f64>,
}

pub struct SweepOutput {
    pub reports: Vec<RatioReport>,
    pub summary: Summary,
}

impl SweepOutput {
    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        write_reports_csv(out, comments, &self.reports)
    }
}

/// Every requested inequality for one function, grouped by inequality.
fn sweep_function(cfg: &ExperimentConfig, nf: &NamedFunction, rows: &[RowInfo]) -> Result<(Vec<Vec<RatioReport>>, usize)> {
    let f = &nf.f;
    let xs = cfg.x_grid.resolve(f);
    let grid = default_delta_grid(cfg.delta_grid_points);
    let points: Vec<PointData> = xs
        .iter()
        .map(|&x| {
            Ok(PointData {
                x,
                dev: deviations_at(f, x),
                w: fit_modulus(f, x, &grid)?,
            })
        })
        .collect::<Result<_>>()?;
    let u_grid = default_u_grid(f);
    let needs_sup = cfg
        .inequalities
        .iter()
        .any(|i| matches!(i, Inequality::Thm3 | Inequality::Remark7));
    let norm_data = if needs_sup { Some(NormData::new(f, &u_grid)?) } else { None };
    let mut skipped = 0;
    let mut out = Vec::with_capacity(cfg.inequalities.len());
    for &ineq in &cfg.inequalities {
        let mut reports = Vec::new();
        match ineq {
            Inequality::Prop4 => {
                for p in &points {
                    for n in cfg.n_range.iter() {
                        for &q in cfg.q_list.iter().filter(|&&q| q <= 2.0) {
                            reports.push(prop4_with(f, &p.dev, p.x, n, q, &p.w)?);
                        }
                    }
                }
            }
            Inequality::Thm5 | Inequality::Thm6 => {
                for p in &points {
                    for info in rows {
                        for (i, row) in info.rows.iter().enumerate() {
                            if ineq == Inequality::Thm6 && !info.ms[i] {
                                skipped += 1;
                                continue;
                            }
                            for &q in cfg.q_list.iter().filter(|&&q| q <= 2.0) {
                                reports.push(if ineq == Inequality::Thm5 {
                                    thm5_with(f, &p.dev, p.x, row.n(), q, row, cfg.c, &p.w, info.gm2beta[i])?
                                } else {
                                    thm6_with(f, &p.dev, p.x, row.n(), q, row, &p.w)?
                                });
                            }
                        }
                    }
                }
            }
            Inequality::Thm3 => {
                let data = norm_data.as_ref().expect("computed above");
                let devs: Vec<DeviationSequence> = points.iter().map(|p| p.dev.clone()).collect();
                for n in cfg.n_range.iter() {
                    for &q in cfg.q_list.iter().filter(|&&q| q >= 2.0) {
                        reports.push(thm3_with(data, &devs, n, q)?);
                    }
                }
            }
            Inequality::Remark7 => {
                let data = norm_data.as_ref().expect("computed above");
                let moduli: Vec<ModulusFunction> = points.iter().map(|p| p.w.clone()).collect();
                for n in cfg.n_range.iter() {
                    reports.push(remark7_with(f, data, &moduli, n)?);
                }
            }
            Inequality::Thm2 => {
                let level = NormLevel::new(f, cfg.norm_p, &u_grid)?;
                for info in rows {
                    for (i, row) in info.rows.iter().enumerate() {
                        for &q in cfg.q_list.iter().filter(|&&q| q <= cfg.norm_p) {
                            reports.push(thm2_with(&level, row.n(), q, row, cfg.c, info.gm2beta[i])?);
                        }
                    }
                }
            }
        }
        for r in &mut reports {
            r.f_id = nf.id.clone();
        }
        out.push(reports);
    }
    Ok((out, skipped))
}

/// Runs every configured inequality over every function. Functions are
/// processed in parallel; the output order is fixed by the config (inequality,
/// function, x, row family, n, q).
pub fn sweep(cfg: &ExperimentConfig, functions: &[NamedFunction]) -> Result<SweepOutput> {
    cfg.validate()?;
    if functions.is_empty() {
        return Err(Error::config("functions", "must list at least one function"));
    }
    let rows = row_infos(cfg)?;
    let per_function: Vec<(Vec<Vec<RatioReport>>, usize)> = functions
        .par_iter()
        .map(|nf| sweep_function(cfg, nf, &rows))
        .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for i in 0..cfg.inequalities.len() {
        for (per_ineq, _) in &per_function {
            reports.extend(per_ineq[i].iter().cloned());
        }
    }
    let skipped = per_function.iter().map(|p| p.1).sum();
    let summary = summarize(cfg, functions, &reports, &rows, skipped);
    Ok(SweepOutput { reports, summary })
}

fn summarize(
    cfg: &ExperimentConfig,
    functions: &[NamedFunction],
    reports: &[RatioReport],
    rows: &[RowInfo],
    skipped: usize,
) -> Summary {
    let mut inequalities = BTreeMap::new();
    for &ineq in &cfg.inequalities {
        let rs: Vec<&RatioReport> = reports.iter().filter(|r| r.inequality == ineq).collect();
        let finite: Vec<f64> = rs.iter().filter_map(|r| r.ratio.value()).collect();
        let unbounded = finite.iter().filter(|v| v.is_infinite()).count();
        let max_ratio = (unbounded == 0).then(|| finite.iter().copied().fold(0.0, f64::max)).filter(|_| !finite.is_empty());
        let groups = non_divergence(&rs, cfg.n_range.end, cfg.non_divergence);
        let max_upper_over_lower = groups
            .iter()
            .filter(|g| g.lower_max > 0.0)
            .map(|g| g.upper_max / g.lower_max)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        inequalities.insert(
            ineq.id().to_string(),
            InequalitySummary {
                records: rs.len(),
                max_ratio,
                unbounded,
                flagged: rs.iter().filter(|r| !r.flags.is_empty()).count(),
                groups: groups.len(),
                divergent_groups: groups.iter().filter(|g| !g.holds).cloned().collect(),
                max_upper_over_lower,
            },
        );
    }
    let by_id: BTreeMap<&str, &ApFunction> = functions.iter().map(|nf| (nf.id.as_str(), &nf.f)).collect();
    let exactness_violations = reports
        .iter()
        .filter(|r| r.inequality == Inequality::Prop4)
        .filter(|r| {
            let f = by_id[r.f_id.as_str()];
            f.alpha() * r.n as f64 / 2.0 >= f.lambda_max() && r.lhs != 0.0
        })
        .count();
    let first_entry_at_end = rows
        .iter()
        .filter_map(|info| info.rows.last().map(|r| (info.family.clone(), r.entry(0))))
        .collect();
    Summary {
        metadata: SweepMetadata {
            seed: cfg.seed,
            tol: cfg.quadrature.abs_tolerance,
            quadrature: cfg.quadrature,
            n_range: cfg.n_range,
            q_list: cfg.q_list.clone(),
            c: cfg.c,
            delta_grid_points: cfg.delta_grid_points,
            norm_p: cfg.norm_p,
            non_divergence: cfg.non_divergence,
            tail_tol: TAIL_TOL,
        },
        inequalities,
        exactness_violations,
        skipped_non_monotone: skipped,
        first_entry_at_end,
    }
}

/// Groups records by everything but `n` and compares the largest ratio for
/// `n ∈ [N/2, N]` with `factor ×` the largest for `n ∈ [n_min, N/2]`.
/// Undefined ratios are skipped.
pub fn non_divergence(reports: &[&RatioReport], n_end: usize, nd: NonDivergence) -> Vec<GroupStat> {
    let half = n_end / 2;
    type GroupKey = (String, Option<u64>, u64, String);
    let mut groups: BTreeMap<GroupKey, (f64, f64)> = BTreeMap::new();
    for r in reports {
        let Some(v) = r.ratio.value() else { continue };
        let key = (r.f_id.clone(), r.x.map(f64::to_bits), r.q.to_bits(), r.row_family.clone());
        let entry = groups.entry(key).or_insert((0.0, 0.0));
        if r.n >= nd.n_min && r.n <= half {
            entry.0 = entry.0.max(v);
        }
        if r.n >= half && r.n <= n_end {
            entry.1 = entry.1.max(v);
        }
    }
    groups
        .into_iter()
        .map(|((f_id, x, q, row_family), (lower_max, upper_max))| GroupStat {
            f_id,
            x: x.map(f64::from_bits),
            q: f64::from_bits(q),
            row_family,
            lower_max,
            upper_max,
            holds: upper_max <= nd.factor * lower_max || upper_max == 0.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfun::Term;
    use crate::config::{FunctionSource, FunctionSpec, GeneratorKind, GeneratorSpec, XGrid};
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cosine() -> ApFunction {
        ApFunction::new(1.0, vec![Term::new(1.0, c(0.5), c(0.5))]).unwrap()
    }

    #[test]
    fn ratio_rules() {
        assert_eq!(Ratio::of(0.0, 0.0), Ratio::Undefined);
        assert_eq!(Ratio::of(0.0, 2.0), Ratio::Value(0.0));
        assert_eq!(Ratio::of(1.0, 0.0), Ratio::Value(f64::INFINITY));
        assert_eq!(Ratio::of(1.0, 4.0), Ratio::Value(0.25));
    }

    #[test]
    fn prop4_cosine_example() {
        let f = cosine();
        let grid = default_delta_grid(21);
        let w = fit_modulus(&f, 0.0, &grid).unwrap();
        let r = prop4_ratio(&f, 0.0, 1, 2.0, &w).unwrap();
        assert!((r.lhs - 0.5f64.sqrt()).abs() < 1e-15);
        let wv = w.value(PI / 2.0);
        assert!((r.rhs_lower - (wv + 0.5)).abs() < 1e-15);
        assert!((r.rhs_upper - (wv + 1.0)).abs() < 1e-15);
        // αn/2 ≥ λ_max: exact reproduction
        let r = prop4_ratio(&f, 0.3, 2, 1.0, &w).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(prop4_ratio(&f, 0.0, 1, 2.5, &w).is_err());
        let k = ApFunction::constant(c(1.0), 1.0).unwrap();
        let wk = fit_modulus(&k, 0.0, &grid).unwrap();
        let r = prop4_ratio(&k, 0.0, 3, 1.0, &wk).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.ratio, Ratio::Undefined);
    }

    #[test]
    fn thm5_sigma_uses_integer_part() {
        for (c, k) in [(2.0, 8), (2.5, 16), (1.01, 4), (3.99, 32)] {
            let expected = 1.5 * k as f64 / 2f64.powi(1 + (c as i32));
            assert_eq!(thm5_sigma(1.5, k, c), expected);
        }
        assert_eq!(thm5_sigma(1.0, 8, 2.0), 1.0);
    }

    #[test]
    fn thm5_and_thm6_on_cesaro_are_exact_sums() {
        let f = ApFunction::new(0.5, vec![Term::new(0.5, c(0.3), c(0.1)), Term::new(1.5, c(0.2), c(0.0))]).unwrap();
        let grid = default_delta_grid(21);
        let x = 0.7;
        let w = fit_modulus(&f, x, &grid).unwrap();
        let n = 6;
        let row = generate_row(&RowFamily::Cesaro, n).unwrap();
        let r5 = thm5_ratio(&f, x, n, 1.0, &row, 2.0, &w).unwrap();
        let r6 = thm6_ratio(&f, x, n, 1.0, &row, &w).unwrap();
        let direct = |sigma: &dyn Fn(usize) -> f64| -> f64 {
            (0..=n)
                .map(|k| (w.value(PI / (k + 1) as f64) + best_approx_bracket(&f, sigma(k)).unwrap().lower) / (n + 1) as f64)
                .sum()
        };
        assert!((r5.rhs_lower - direct(&|k| 0.5 * k as f64 / 8.0)).abs() < 1e-14);
        assert!((r6.rhs_lower - direct(&|k| 0.5 * k as f64 / 2.0)).abs() < 1e-14);
        assert!(r5.flags.is_empty());
        assert_eq!(r5.truncation_bound, 0.0);
        let riesz = generate_row(&RowFamily::Riesz { exponent: 1.0 }, 4).unwrap();
        assert!(thm6_ratio(&f, x, 4, 1.0, &riesz, &w).is_err());
    }

    #[test]
    fn thm5_abel_truncation_is_bounded() {
        let f = cosine();
        let grid = default_delta_grid(21);
        let w = fit_modulus(&f, 0.2, &grid).unwrap();
        let row = generate_row(&RowFamily::Abel { r: None }, 20).unwrap();
        let r = thm5_ratio(&f, 0.2, 20, 2.0, &row, 2.0, &w).unwrap();
        assert!(r.truncation_bound < TAIL_TOL);
        assert!(r.flags.is_empty());
        assert!(r.rhs_lower <= r.rhs_upper);
    }

    #[test]
    fn thm3_constant_function() {
        let k = ApFunction::constant(c(2.0), 1.0).unwrap();
        let u: Vec<f64> = (0..8).map(|j| j as f64).collect();
        let r = thm3_comparison(&k, 3, 2.0, &[0.0, 1.0], &u).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!((r.rhs_lower - 2.0 / 2.0).abs() < 1e-12);
        assert!(thm3_comparison(&k, 3, 1.5, &[0.0], &u).is_err());
    }

    #[test]
    fn thm2_constant_and_single_exponential() {
        let u: Vec<f64> = (0..16).map(|j| j as f64 * PI / 8.0).collect();
        let k = ApFunction::constant(c(2.0), 1.0).unwrap();
        let row = generate_row(&RowFamily::Cesaro, 4).unwrap();
        let r = thm2_norm_ratio(&k, 4, 1.0, &row, 2.0, 2.0, &u).unwrap();
        assert_eq!(r.lhs, 0.0);
        // e^{2ix} with α = 1: d_k = 1 for k < 4, so H^1 = 4/5 for every x,
        // and ‖e^{2i(·+t)} − e^{2i·}‖ = 2|sin t|
        let e = ApFunction::new(1.0, vec![Term::new(2.0, c(1.0), c(0.0))]).unwrap();
        let r = thm2_norm_ratio(&e, 4, 1.0, &row, 2.0, 2.0, &u).unwrap();
        assert!((r.lhs - 0.8).abs() < 1e-12);
        // ω is a maximum over a fixed shift grid, so the oracle uses the
        // largest grid shift below each δ
        let shifts = crate::moduli::shift_grid(2.0, PI);
        let want: f64 = (0..=4)
            .map(|k| {
                let d = PI / (k + 1) as f64;
                let t = shifts.iter().copied().filter(|&t| t <= d * (1.0 + 1e-12)).fold(0.0, f64::max);
                2.0 * t.min(PI / 2.0).sin() / 5.0
            })
            .sum();
        assert!((r.rhs_lower - want).abs() < 1e-6 * want, "{} vs {want}", r.rhs_lower);
    }

    fn small_config() -> ExperimentConfig {
        let spec = |id: &str, kind| FunctionSpec {
            id: id.into(),
            source: FunctionSource::Generator(GeneratorSpec {
                kind,
                seed: 0,
                alpha: 1.0,
                terms: 1,
            }),
        };
        let mut cfg = ExperimentConfig::with_functions(vec![spec("k", GeneratorKind::Constant), spec("cos", GeneratorKind::Cosine)]);
        cfg.n_range = NRange { start: 0, end: 8 };
        cfg.x_grid = XGrid::Points(3);
        cfg.delta_grid_points = 11;
        cfg.inequalities = Inequality::ALL.to_vec();
        cfg
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let cfg = small_config();
        let fs = cfg.resolve_functions(std::path::Path::new(".")).unwrap();
        let a = sweep(&cfg, &fs).unwrap();
        let b = sweep(&cfg, &fs).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca, &["seed=0".into()]).unwrap();
        b.write_csv(&mut cb, &["seed=0".into()]).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with("# seed=0\ninequality_id,f_id,x,n,q,c,row_family,lhs,rhs_lower,rhs_upper,ratio,flags\n"));
        let ids: Vec<&str> = a.reports.iter().map(|r| r.inequality.id()).collect();
        let mut sorted = ids.clone();
        sorted.sort_by_key(|id| Inequality::ALL.iter().position(|i| i.id() == *id));
        assert_eq!(ids, sorted);
        assert!(a.reports.iter().filter(|r| r.f_id == "k").all(|r| r.lhs == 0.0));
        assert_eq!(a.summary.exactness_violations, 0);
        assert!(a.summary.skipped_non_monotone > 0);
    }

    #[test]
    fn sweep_rejects_empty_function_list() {
        let mut cfg = small_config();
        cfg.functions.clear();
        assert!(matches!(sweep(&cfg, &[]), Err(Error::Config { .. })));
    }
}
