//! Smoothness and approximation measures: the Stepanov modulus `ω`, the
//! pointwise moduli `w_x` and `G_x`, window means `Φ_x` of the second
//! difference, fitted modulus-type functions and brackets for the best
//! approximation `E_σ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::apfun::{check_grid, ApFunction, LpExponent, SupSampler, WindowRule};
use crate::error::{Error, Result};
use crate::quad::{integrate_adaptive, panels_for, unit_nodes};

/// Relative slack for the bounds checked against fitted moduli.
pub const FIT_TOL: f64 = 1e-9;

/// Panels per period of the fastest exponent for integrals of `|φ_x|^p`.
const PHI_PANELS_PER_PERIOD: usize = 16;
const PHI_REL_TOL: f64 = 1e-12;

/// Above this many (point, exponent) pairs the exponential table is not cached.
const TABLE_LIMIT: usize = 1 << 22;

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::arg(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_increasing_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::arg(name, "must be nonempty"));
    }
    if grid.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::arg(name, "entries must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg(name, "entries must be strictly increasing"));
    }
    Ok(())
}

/// `φ_x(t) = Σ_ν c_ν(cos λ_ν t − 1)` with `c_ν = 2b_ν(x)`.
struct PhiSeries {
    terms: Vec<(f64, Complex64)>,
    lambda_max: f64,
}

impl PhiSeries {
    fn new(f: &ApFunction, x: f64) -> Self {
        let terms: Vec<_> = f.phi_coefficients(x).into_iter().map(|(l, b)| (l, 2.0 * b)).collect();
        let lambda_max = terms.iter().map(|t| t.0).fold(0.0, f64::max);
        Self { terms, lambda_max }
    }

    fn at(&self, t: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(l, c)| {
                let s = (0.5 * l * t).sin();
                c * (-2.0 * s * s)
            })
            .sum()
    }

    fn panels(&self, length: f64) -> usize {
        panels_for(length, self.lambda_max, PHI_PANELS_PER_PERIOD, 1)
    }

    /// `∫_a^b |φ_x(t)|^p dt`.
    fn abs_power_integral(&self, a: f64, b: f64, p: f64) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let scale: f64 = self.terms.iter().map(|t| t.1.norm()).sum::<f64>() * 4.0;
        let tol = PHI_REL_TOL * scale.powf(p) * (b - a).abs();
        integrate_adaptive(|t| self.at(t).norm().powf(p), a, b, self.panels(b - a), tol).value
    }
}

/// `{(1/δ)∫₀^δ |φ_x(t)|^p dt}^{1/p}`.
pub fn w_x_modulus(f: &ApFunction, x: f64, delta: f64, p: f64) -> Result<f64> {
    check_positive("delta", delta)?;
    LpExponent::Finite(p).validate()?;
    let series = PhiSeries::new(f, x);
    Ok((series.abs_power_integral(0.0, delta, p) / delta).powf(1.0 / p))
}

/// `{Σ_{k=0}^{[π/(αδ)]} ((1/((k+1)δ))∫_{kδ}^{(k+1)δ}|φ_x|^p)^{s/p}}^{1/s}`.
pub fn g_x_modulus(f: &ApFunction, x: f64, delta: f64, s: f64, p: f64) -> Result<f64> {
    check_positive("delta", delta)?;
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::arg("s", format!("must be > 1, got {s}")));
    }
    LpExponent::Finite(p).validate()?;
    Ok(g_x_of(&PhiSeries::new(f, x), f.alpha(), delta, s, p))
}

fn g_x_of(series: &PhiSeries, alpha: f64, delta: f64, s: f64, p: f64) -> f64 {
    let blocks = (PI / (alpha * delta)).floor() as usize;
    let total: f64 = (0..=blocks)
        .map(|k| {
            let a = k as f64 * delta;
            let mean = series.abs_power_integral(a, a + delta, p) / ((k + 1) as f64 * delta);
            mean.powf(s / p)
        })
        .sum();
    total.powf(1.0 / s)
}

/// `Φ_x f(δ, ν) = (1/δ)∫_ν^{ν+δ} φ_x(u) du`, in closed form.
pub fn phi_mean(f: &ApFunction, x: f64, delta: f64, nu: f64) -> Result<Complex64> {
    check_positive("delta", delta)?;
    if !nu.is_finite() {
        return Err(Error::arg("nu", "must be finite"));
    }
    Ok(PhiSeries::new(f, x)
        .terms
        .iter()
        .map(|&(l, c)| {
            // (sin λ(ν+δ) − sin λν)/(λδ) = cos(λ(ν+δ/2))·sinc(λδ/2)
            let h = 0.5 * l * delta;
            let sinc = if h.abs() < 1e-8 { 1.0 - h * h / 6.0 } else { h.sin() / h };
            c * ((l * (nu + 0.5 * delta)).cos() * sinc - 1.0)
        })
        .sum())
}

/// A nondecreasing function on `[0, ∞)` with `w(0) = 0`, stored on a grid.
///
/// Between grid points it interpolates linearly (from the origin below the
/// first point); beyond the last point it extends as
/// `w(δ_max)·⌈δ/δ_max⌉`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModulusJson", into = "ModulusJson")]
pub struct ModulusFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModulusJson {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<ModulusJson> for ModulusFunction {
    type Error = Error;
    fn try_from(j: ModulusJson) -> Result<Self> {
        ModulusFunction::new(j.grid, j.values)
    }
}

impl From<ModulusFunction> for ModulusJson {
    fn from(w: ModulusFunction) -> Self {
        ModulusJson {
            grid: w.grid,
            values: w.values,
        }
    }
}

impl ModulusFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_increasing_grid("grid", &grid)?;
        if values.len() != grid.len() {
            return Err(Error::arg("values", "must have the same length as grid"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::arg("values", "must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::arg("values", "must be nondecreasing"));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Vec<f64>) -> Result<Self> {
        let values = vec![0.0; grid.len()];
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    pub fn value(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let last = self.grid.len() - 1;
        let d_max = self.grid[last];
        if delta > d_max {
            return self.values[last] * (delta / d_max).ceil();
        }
        let i = self.grid.partition_point(|&g| g < delta);
        if self.grid[i] == delta {
            return self.values[i];
        }
        let (x0, y0) = if i == 0 { (0.0, 0.0) } else { (self.grid[i - 1], self.values[i - 1]) };
        let (x1, y1) = (self.grid[i], self.values[i]);
        y0 + (y1 - y0) * (delta - x0) / (x1 - x0)
    }

    /// Grid triples `(i, j, l)` with `δ_i + δ_j = δ_l` (to 1e-12 relative)
    /// where `w(δ_l) > w(δ_i) + w(δ_j)`.
    pub fn subadditivity_violations(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.grid.len() {
            for j in i..self.grid.len() {
                let sum = self.grid[i] + self.grid[j];
                let l = self.grid.partition_point(|&g| g < sum * (1.0 - 1e-12));
                if l < self.grid.len() && (self.grid[l] - sum).abs() <= 1e-12 * sum {
                    let bound = self.values[i] + self.values[j];
                    if self.values[l] > bound * (1.0 + 1e-12) + 1e-300 {
                        out.push((i, j, l));
                    }
                }
            }
        }
        out
    }
}

/// Geometric grid of `count` points from `π/1024` to `π`.
pub fn default_delta_grid(count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|i| PI * 1024f64.powf(-((count - 1 - i) as f64) / (count - 1) as f64))
        .collect()
}

/// Quadrature nodes on `[0, δ_max]` with panel breaks at every grid point,
/// plus the cosines and sines of `λ_ν t` at each node.
struct ShiftTable<'a> {
    series: &'a PhiSeries,
    weights: Vec<f64>,
    ends: Vec<usize>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    base: Vec<Complex64>,
}

impl<'a> ShiftTable<'a> {
    fn new(series: &'a PhiSeries, grid: &[f64]) -> Self {
        let unit = unit_nodes();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut ends = Vec::with_capacity(grid.len());
        let mut left = 0.0;
        for &right in grid {
            let panels = series.panels(right - left).max(4);
            let h = (right - left) / panels as f64;
            for p in 0..panels {
                let a = left + p as f64 * h;
                let (c, r) = (a + 0.5 * h, 0.5 * h);
                for &(x, wk, _) in &unit {
                    nodes.push(c + r * x);
                    weights.push(wk * r);
                }
            }
            ends.push(nodes.len());
            left = right;
        }
        let m = series.terms.len();
        let mut cos = Vec::with_capacity(nodes.len() * m);
        let mut sin = Vec::with_capacity(nodes.len() * m);
        for &t in &nodes {
            for &(l, _) in &series.terms {
                let (s, c) = (l * t).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        let base = nodes.iter().map(|&t| series.at(t)).collect();
        Self {
            series,
            weights,
            ends,
            cos,
            sin,
            base,
        }
    }

    /// `(1/δ)∫₀^δ |φ_x(t) − φ_x(t + sign·γ)| dt` for every `δ` of the grid.
    fn averages(&self, grid: &[f64], gamma: f64, sign: f64) -> Vec<f64> {
        let m = self.series.terms.len();
        let rot: Vec<(f64, f64)> = self
            .series
            .terms
            .iter()
            .map(|&(l, _)| {
                let (s, c) = (l * gamma).sin_cos();
                (c, sign * s)
            })
            .collect();
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        let mut start = 0;
        for (&end, &delta) in self.ends.iter().zip(grid) {
            for i in start..end {
                let row = i * m;
                let shifted: Complex64 = self
                    .series
                    .terms
                    .iter()
                    .enumerate()
                    .map(|(v, &(_, c))| {
                        let (cg, sg) = rot[v];
                        c * (self.cos[row + v] * cg - self.sin[row + v] * sg - 1.0)
                    })
                    .sum();
                acc += self.weights[i] * (self.base[i] - shifted).norm();
            }
            out.push(acc / delta);
            start = end;
        }
        out
    }
}

/// Smallest concave majorant through the origin of `(grid_i, values_i)`,
/// evaluated on the grid.
fn concave_majorant(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = std::iter::once((0.0, 0.0)).chain(grid.iter().copied().zip(values.iter().copied())).collect();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut seg = 0;
    for (&g, &v) in grid.iter().zip(values) {
        while seg + 1 < hull.len() && hull[seg + 1].0 < g {
            seg += 1;
        }
        let (a, b) = (hull[seg], hull[(seg + 1).min(hull.len() - 1)]);
        let h = if b.0 > a.0 { a.1 + (b.1 - a.1) * (g - a.0) / (b.0 - a.0) } else { a.1 };
        out.push(h.max(v));
    }
    out
}

fn running_max(values: &mut [f64]) {
    let mut m: f64 = 0.0;
    for v in values {
        m = m.max(*v);
        *v = m;
    }
}

/// Pointwise measurements behind [`fit_modulus`] on a shared grid.
struct Measurements {
    /// `shift[i][j]` = max over ± of the shift average at `γ = grid[i]`, `δ = grid[j]`.
    shift: Vec<Vec<f64>>,
    blocks: Vec<f64>,
}

fn measure(f: &ApFunction, x: f64, grid: &[f64]) -> Measurements {
    let series = PhiSeries::new(f, x);
    if series.terms.is_empty() {
        return Measurements {
            shift: vec![vec![0.0; grid.len()]; grid.len()],
            blocks: vec![0.0; grid.len()],
        };
    }
    let table = ShiftTable::new(&series, grid);
    let shift = grid
        .iter()
        .map(|&gamma| {
            let plus = table.averages(grid, gamma, 1.0);
            let minus = table.averages(grid, gamma, -1.0);
            plus.into_iter().zip(minus).map(|(a, b)| a.max(b)).collect()
        })
        .collect();
    let blocks = grid.iter().map(|&d| g_x_of(&series, f.alpha(), d, 2.0, 1.0)).collect();
    Measurements { shift, blocks }
}

/// Smallest nondecreasing grid function dominating the shift averages
/// `(1/δ)∫₀^δ|φ_x(t) − φ_x(t±γ)|dt` (max over the δ-grid and both signs,
/// at `γ` = grid point) and `G_x f(δ)_{2,1}`, made concave through the origin.
pub fn fit_modulus(f: &ApFunction, x: f64, delta_grid: &[f64]) -> Result<ModulusFunction> {
    check_increasing_grid("delta_grid", delta_grid)?;
    let m = measure(f, x, delta_grid);
    let mut raw: Vec<f64> = m
        .shift
        .iter()
        .zip(&m.blocks)
        .map(|(row, &b)| row.iter().copied().fold(b, f64::max))
        .collect();
    running_max(&mut raw);
    let mut values = concave_majorant(delta_grid, &raw);
    running_max(&mut values);
    ModulusFunction::new(delta_grid.to_vec(), values)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MembershipEntry {
    Shift { gamma: f64, delta: f64, sign: i8 },
    Block { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRow {
    pub entry: MembershipEntry,
    pub lhs: f64,
    pub w_value: f64,
    pub ratio: f64,
}

impl MembershipRow {
    pub fn gamma_or_delta(&self) -> f64 {
        match self.entry {
            MembershipEntry::Shift { gamma, .. } => gamma,
            MembershipEntry::Block { delta } => delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub rows: Vec<MembershipRow>,
    pub max_ratio: f64,
}

impl MembershipReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["gamma_or_delta", "lhs", "w_value", "ratio"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:.12e}", r.gamma_or_delta()),
                format!("{:.12e}", r.lhs),
                format!("{:.12e}", r.w_value),
                format!("{:.12e}", r.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `lhs/w`, with `0/0 = 0`.
pub fn safe_ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Ratios of the two membership quantities to `w`: shift averages (p = 1,
/// both signs) against `w(γ)` and `G_x f(δ)_{2,1}` against `w(δ)`.
pub fn omega_alpha_membership_report(
    f: &ApFunction,
    x: f64,
    w: &ModulusFunction,
    gamma_grid: &[f64],
    delta_grid: &[f64],
) -> Result<MembershipReport> {
    check_increasing_grid("gamma_grid", gamma_grid)?;
    check_increasing_grid("delta_grid", delta_grid)?;
    let series = PhiSeries::new(f, x);
    let mut rows = Vec::new();
    let table = (!series.terms.is_empty()).then(|| ShiftTable::new(&series, delta_grid));
    for &gamma in gamma_grid {
        let wv = w.value(gamma);
        for sign in [1i8, -1] {
            let avgs = match &table {
                Some(t) => t.averages(delta_grid, gamma, sign as f64),
                None => vec![0.0; delta_grid.len()],
            };
            for (&delta, lhs) in delta_grid.iter().zip(avgs) {
                rows.push(MembershipRow {
                    entry: MembershipEntry::Shift { gamma, delta, sign },
                    lhs,
                    w_value: wv,
                    ratio: safe_ratio(lhs, wv),
                });
            }
        }
    }
    for &delta in delta_grid {
        let lhs = if series.terms.is_empty() { 0.0 } else { g_x_of(&series, f.alpha(), delta, 2.0, 1.0) };
        let wv = w.value(delta);
        rows.push(MembershipRow {
            entry: MembershipEntry::Block { delta },
            lhs,
            w_value: wv,
            ratio: safe_ratio(lhs, wv),
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(MembershipReport { rows, max_ratio })
}

/// Bounds `lower ≤ E_σ(f)_{S¹} ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxBracket {
    pub lower: f64,
    pub upper: f64,
    pub sigma: f64,
}

/// Over the exponents `λ_ν > σ`: `upper` sums `|a⁺| + |a⁻|` (error of the
/// truncation to type σ), `lower` is the largest single amplitude (each
/// coefficient beyond σ is untouched by any approximant of type σ and is
/// bounded by the S¹ distance).
pub fn best_approx_bracket(f: &ApFunction, sigma: f64) -> Result<ApproxBracket> {
    if !(sigma >= 0.0) {
        return Err(Error::arg("sigma", format!("must be >= 0, got {sigma}")));
    }
    let dropped = f.oscillating().iter().filter(|t| t.lambda > sigma);
    let (lower, upper) = dropped.fold((0.0f64, 0.0), |(lo, up), t| {
        (lo.max(t.a_plus.norm()).max(t.a_minus.norm()), up + t.weight())
    });
    Ok(ApproxBracket { lower, upper, sigma })
}

/// `ω f(δ)_{S^p}` as a function of `δ`, from one table of shift norms.
///
/// Shifts form a fixed set for `f`: `π·2^{-j/4}` for `j = 0..=80` together
/// with multiples of `π/(4 max(λ_max, 1))`. `ω(δ)` is the largest norm over
/// shifts not exceeding `δ`, so it is nondecreasing and the grids for
/// different `δ` are nested. Only `t ≥ 0` is tabulated: a negative shift
/// gives the same difference moved by `t`, which the window supremum does
/// not see.
#[derive(Debug, Clone)]
pub struct OmegaProfile {
    p: LpExponent,
    shifts: Vec<f64>,
    running: Vec<f64>,
    max_delta: f64,
}

pub(crate) fn shift_grid(lambda_max: f64, max_delta: f64) -> Vec<f64> {
    let h = PI / (4.0 * lambda_max.max(1.0));
    let limit = max_delta * (1.0 + 1e-12);
    let mut out: Vec<f64> = (0..=80).map(|j| PI * 2f64.powf(-(j as f64) / 4.0)).filter(|&t| t <= limit).collect();
    let mut j = 1;
    while j as f64 * h <= limit {
        out.push(j as f64 * h);
        j += 1;
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    out
}

impl OmegaProfile {
    pub fn new(f: &ApFunction, p: LpExponent, u_grid: &[f64], max_delta: f64) -> Result<Self> {
        let p = p.validate()?;
        check_grid(u_grid)?;
        if !(max_delta >= 0.0) || !max_delta.is_finite() {
            return Err(Error::arg("delta", format!("must be >= 0, got {max_delta}")));
        }
        let shifts = shift_grid(f.lambda_max(), max_delta);
        let points: Vec<f64> = match p {
            LpExponent::Infinite => SupSampler::new(u_grid, f.lambda_max()).points().collect(),
            LpExponent::Finite(_) => Vec::new(),
        };
        let rule = matches!(p, LpExponent::Finite(_)).then(|| WindowRule::new(u_grid, f.lambda_max()));
        let xs: &[f64] = match &rule {
            Some(r) => r.nodes(),
            None => &points,
        };
        let table = ExpTable::new(f, xs);
        let mut diff = vec![Complex64::new(0.0, 0.0); xs.len()];
        let mut running = Vec::with_capacity(shifts.len());
        let mut best: f64 = 0.0;
        for &t in &shifts {
            table.shifted_difference(t, &mut diff);
            let norm = match (p, &rule) {
                (LpExponent::Finite(q), Some(rule)) => {
                    let vals: Vec<f64> = diff.iter().map(|z| z.norm().powf(q)).collect();
                    rule.max_mean(&vals).powf(1.0 / q)
                }
                _ => diff.iter().map(|z| z.norm()).fold(0.0, f64::max),
            };
            best = best.max(norm);
            running.push(best);
        }
        Ok(Self {
            p,
            shifts,
            running,
            max_delta,
        })
    }

    pub fn p(&self) -> LpExponent {
        self.p
    }

    pub fn max_delta(&self) -> f64 {
        self.max_delta
    }

    pub fn value(&self, delta: f64) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::arg("delta", format!("must be >= 0, got {delta}")));
        }
        if delta > self.max_delta * (1.0 + 1e-12) {
            return Err(Error::arg(
                "delta",
                format!("{delta} exceeds the tabulated range {}", self.max_delta),
            ));
        }
        let i = self.shifts.partition_point(|&t| t <= delta * (1.0 + 1e-12));
        Ok(if i == 0 { 0.0 } else { self.running[i - 1] })
    }
}

/// `e^{iλ_ν x}` at fixed points, cached when small enough.
struct ExpTable<'a> {
    f: &'a ApFunction,
    xs: &'a [f64],
    table: Option<Vec<Complex64>>,
}

impl<'a> ExpTable<'a> {
    fn new(f: &'a ApFunction, xs: &'a [f64]) -> Self {
        let m = f.oscillating().len();
        let table = (xs.len() * m <= TABLE_LIMIT).then(|| {
            xs.iter()
                .flat_map(|&x| f.oscillating().iter().map(move |t| Complex64::from_polar(1.0, t.lambda * x)))
                .collect()
        });
        Self { f, xs, table }
    }

    /// `f(x+t) − f(x)` at every point.
    fn shifted_difference(&self, t: f64, out: &mut [Complex64]) {
        let terms = self.f.oscillating();
        let coeffs: Vec<(Complex64, Complex64)> = terms
            .iter()
            .map(|term| {
                let e = Complex64::from_polar(1.0, term.lambda * t);
                (term.a_plus * (e - 1.0), term.a_minus * (e.conj() - 1.0))
            })
            .collect();
        let m = terms.len();
        for (i, (&x, slot)) in self.xs.iter().zip(out.iter_mut()).enumerate() {
            *slot = coeffs
                .iter()
                .enumerate()
                .map(|(v, &(cp, cm))| {
                    let e = match &self.table {
                        Some(tab) => tab[i * m + v],
                        None => Complex64::from_polar(1.0, terms[v].lambda * x),
                    };
                    cp * e + cm * e.conj()
                })
                .sum();
        }
    }
}

/// `ω f(δ)_{S^p} = sup_{|t|≤δ} ‖f(·+t) − f‖_{S^p}` over the shift set of
/// [`OmegaProfile`].
pub fn omega_modulus(f: &ApFunction, delta: f64, p: LpExponent, u_grid: &[f64]) -> Result<f64> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::arg("delta", format!("must be >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    OmegaProfile::new(f, p, u_grid, delta)?.value(delta)
}

/// Grid cells where `|Φ_x f(ζ₁, ζ₂)| ≤ w(ζ₁) + w(ζ₂)` failed.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateWCheck {
    pub cells: usize,
    pub max_ratio: f64,
    pub violations: Vec<(f64, f64, f64, f64)>,
}

/// Checks `|Φ_x f(ζ₁, ζ₂)| ≤ w(ζ₁) + w(ζ₂)` (window length `ζ₁`, start
/// `ζ₂`) over all grid pairs, with relative slack [`FIT_TOL`]. Failures are
/// collected, not raised.
pub fn estimate_w_check(f: &ApFunction, x: f64, w: &ModulusFunction, zeta_grid: &[f64]) -> Result<EstimateWCheck> {
    check_increasing_grid("zeta_grid", zeta_grid)?;
    let mut violations = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for &z1 in zeta_grid {
        for &z2 in zeta_grid {
            let lhs = phi_mean(f, x, z1, z2)?.norm();
            let rhs = w.value(z1) + w.value(z2);
            max_ratio = max_ratio.max(safe_ratio(lhs, rhs));
            if lhs > rhs * (1.0 + FIT_TOL) {
                violations.push((z1, z2, lhs, rhs));
            }
        }
    }
    Ok(EstimateWCheck {
        cells: zeta_grid.len() * zeta_grid.len(),
        max_ratio,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacksonRow {
    pub sigma: f64,
    pub upper: f64,
    pub omega: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacksonReport {
    pub rows: Vec<JacksonRow>,
    /// Largest `upper(σ)/ω(1/σ)_{S¹}` over the σ-grid.
    pub constant: f64,
}

/// Compares the truncation bound `upper(σ)` with `ω f(1/σ)_{S¹}`.
pub fn jackson_report(f: &ApFunction, sigmas: &[f64], u_grid: &[f64]) -> Result<JacksonReport> {
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::arg("sigma", format!("must be positive, got {s}")));
    }
    let max_delta = sigmas.iter().map(|s| 1.0 / s).fold(0.0, f64::max);
    let profile = OmegaProfile::new(f, LpExponent::Finite(1.0), u_grid, max_delta)?;
    let rows = sigmas
        .iter()
        .map(|&sigma| {
            let upper = best_approx_bracket(f, sigma)?.upper;
            let omega = profile.value(1.0 / sigma)?;
            Ok(JacksonRow {
                sigma,
                upper,
                omega,
                ratio: safe_ratio(upper, omega),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(JacksonReport { rows, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfun::Term;
    use crate::quad::integrate;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cosine() -> ApFunction {
        ApFunction::new(1.0, vec![Term::new(1.0, c(0.5), c(0.5))]).unwrap()
    }

    fn constant() -> ApFunction {
        ApFunction::constant(c(2.0), 1.0).unwrap()
    }

    /// `∫_a^b 2(1 − cos t) dt`.
    fn cos_block(a: f64, b: f64) -> f64 {
        2.0 * (b - a) - 2.0 * (b.sin() - a.sin())
    }

    #[test]
    fn w_x_examples() {
        assert!((w_x_modulus(&cosine(), 0.0, PI, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(w_x_modulus(&constant(), 0.3, 1.0, 2.0).unwrap(), 0.0);
        assert!(w_x_modulus(&cosine(), PI / 2.0, 0.7, 1.5).unwrap() < 1e-14);
        assert!(w_x_modulus(&cosine(), 0.0, 0.0, 1.0).is_err());
        assert!(w_x_modulus(&cosine(), 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn g_x_examples() {
        let d = PI / 2.0;
        let want: f64 = (0..3)
            .map(|k| {
                let a = k as f64 * d;
                (cos_block(a, a + d) / ((k + 1) as f64 * d)).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!((g_x_modulus(&cosine(), 0.0, d, 2.0, 1.0).unwrap() - want).abs() < 1e-12);
        // more than π/α gives a single block
        let d = 3.5;
        let g = g_x_modulus(&cosine(), 0.4, d, 2.0, 1.0).unwrap();
        let w = w_x_modulus(&cosine(), 0.4, d, 1.0).unwrap();
        assert!((g - w).abs() < 1e-14);
        assert_eq!(g_x_modulus(&constant(), 0.0, 0.5, 2.0, 1.0).unwrap(), 0.0);
        assert!(g_x_modulus(&cosine(), 0.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn phi_mean_examples() {
        for (delta, nu) in [(0.3f64, 0.0f64), (1.7, 2.2)] {
            let want = 2.0 * ((nu + delta).sin() - nu.sin()) / delta - 2.0;
            let got = phi_mean(&cosine(), 0.0, delta, nu).unwrap();
            assert!((got - c(want)).norm() < 1e-14, "{delta} {nu}");
        }
        // the window mean tends to φ_x(ν) as δ → 0
        let got = phi_mean(&cosine(), 0.0, 1e-9, 0.4).unwrap();
        assert!((got - c(2.0 * 0.4f64.cos() - 2.0)).norm() < 1e-9);
        assert_eq!(phi_mean(&constant(), 0.2, 1.0, 0.0).unwrap(), c(0.0));
        assert!(phi_mean(&cosine(), 0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn modulus_function_rules() {
        let w = ModulusFunction::new(vec![1.0, 2.0], vec![1.0, 1.5]).unwrap();
        assert_eq!(w.value(0.0), 0.0);
        assert_eq!(w.value(0.5), 0.5);
        assert_eq!(w.value(1.5), 1.25);
        assert_eq!(w.value(5.0), 4.5);
        assert!(ModulusFunction::new(vec![1.0, 2.0], vec![1.0, 0.5]).is_err());
        assert!(ModulusFunction::new(vec![2.0, 1.0], vec![1.0, 1.5]).is_err());
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"grid":[1.0,2.0],"values":[1.0,1.5]}"#);
        let back: ModulusFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<ModulusFunction>(r#"{"grid":[1.0],"values":[-1.0]}"#).is_err());
    }

    #[test]
    fn concave_majorant_is_concave_and_dominates() {
        let grid = [1.0, 2.0, 3.0, 4.0];
        let vals = [0.1, 1.0, 1.0, 3.0];
        let h = concave_majorant(&grid, &vals);
        assert_eq!(h, vec![0.75, 1.5, 2.25, 3.0]);
        let h = concave_majorant(&grid, &[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(h, vec![2.0; 4]);
    }

    #[test]
    fn fit_cosine_dominates_w_x() {
        let grid = default_delta_grid(31);
        let w = fit_modulus(&cosine(), 0.0, &grid).unwrap();
        for &d in &grid {
            assert!(w.value(d) >= w_x_modulus(&cosine(), 0.0, d, 1.0).unwrap() * (1.0 - 1e-9));
        }
        assert!(w.subadditivity_violations().is_empty());
        let zero = fit_modulus(&constant(), 0.0, &grid).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let rep = omega_alpha_membership_report(&cosine(), 0.0, &w, &grid, &grid).unwrap();
        assert!(rep.max_ratio <= 1.0 + FIT_TOL);
        let rep2 = omega_alpha_membership_report(&cosine(), 0.0, &w.scaled(2.0).unwrap(), &grid, &grid).unwrap();
        for (a, b) in rep.rows.iter().zip(&rep2.rows) {
            assert!((a.ratio - 2.0 * b.ratio).abs() <= 1e-12 * a.ratio.max(1.0));
        }
    }

    #[test]
    fn shift_table_matches_direct_integral() {
        let f = ApFunction::new(
            0.5,
            vec![Term::new(0.7, Complex64::new(0.3, 0.1), c(0.2)), Term::new(2.3, c(0.0), Complex64::new(0.0, 0.4))],
        )
        .unwrap();
        let x = 0.9;
        let grid = default_delta_grid(9);
        let series = PhiSeries::new(&f, x);
        let table = ShiftTable::new(&series, &grid);
        let gamma = grid[4];
        let avgs = table.averages(&grid, gamma, -1.0);
        for (&d, got) in grid.iter().zip(avgs) {
            let direct = integrate(|t| (f.phi(x, t) - f.phi(x, t - gamma)).norm(), 0.0, d, 400).value / d;
            // |φ(t) − φ(t − γ)| has a kink at t = γ/2, which limits the rule
            assert!((got - direct).abs() < 1e-4 * direct, "{d}: {got} vs {direct}");
        }
    }

    #[test]
    fn bracket_examples() {
        let f = ApFunction::new(2.0, vec![Term::new(1.0, c(1.0), c(0.0)), Term::new(3.0, c(0.5), c(0.0))]).unwrap();
        let b = best_approx_bracket(&f, 2.0).unwrap();
        assert_eq!((b.lower, b.upper), (0.5, 0.5));
        assert_eq!(best_approx_bracket(&f, 3.0).unwrap().upper, 0.0);
        let g = ApFunction::new(
            2.0,
            vec![Term::new(1.0, c(1.0), c(0.0)), Term::new(3.0, c(0.5), c(0.0)), Term::new(5.0, c(0.25), c(0.0))],
        )
        .unwrap();
        let b = best_approx_bracket(&g, 2.0).unwrap();
        assert_eq!((b.lower, b.upper), (0.5, 0.75));
        let b = best_approx_bracket(&cosine(), 0.5).unwrap();
        assert_eq!((b.lower, b.upper), (0.5, 1.0));
        assert!(best_approx_bracket(&f, -1.0).is_err());
    }

    #[test]
    fn omega_examples() {
        let u: Vec<f64> = (0..64).map(|j| j as f64 * 2.0 * PI / 64.0).collect();
        assert_eq!(omega_modulus(&cosine(), 0.0, LpExponent::Infinite, &u).unwrap(), 0.0);
        let w = omega_modulus(&cosine(), PI, LpExponent::Infinite, &u).unwrap();
        assert!((w - 2.0).abs() < 1e-3, "{w}");
        let f = ApFunction::new(0.5, vec![Term::new(0.7, c(0.3), c(0.2)), Term::new(2.3, c(0.0), c(0.4))]).unwrap();
        let norm = crate::apfun::stepanov_norm(&f, LpExponent::Finite(1.0), &u).unwrap();
        let prof = OmegaProfile::new(&f, LpExponent::Finite(1.0), &u, 3.0).unwrap();
        let mut prev = 0.0;
        for j in 0..=30 {
            let v = prof.value(j as f64 * 0.1).unwrap();
            assert!(v >= prev && v <= 2.0 * norm + 1e-12);
            prev = v;
        }
        assert!(prof.value(3.5).is_err());
        assert!(omega_modulus(&f, -0.1, LpExponent::Infinite, &u).is_err());
    }

    #[test]
    fn omega_matches_direct_norm_of_difference() {
        let f = ApFunction::new(0.5, vec![Term::new(0.7, c(0.3), c(0.2)), Term::new(2.3, c(0.0), c(0.4))]).unwrap();
        let u: Vec<f64> = (0..32).map(|j| j as f64 * 0.7).collect();
        let t = PI / 2.0;
        let prof = OmegaProfile::new(&f, LpExponent::Finite(2.0), &u, t).unwrap();
        let direct = crate::apfun::stepanov_norm(&f.shifted_difference(t), LpExponent::Finite(2.0), &u).unwrap();
        assert!(prof.value(t).unwrap() >= direct - 1e-12);
    }

    #[test]
    fn estimate_w_on_fitted_cosine() {
        let grid = default_delta_grid(21);
        let w = fit_modulus(&cosine(), 0.0, &grid).unwrap();
        let check = estimate_w_check(&cosine(), 0.0, &w, &grid).unwrap();
        assert_eq!(check.cells, 441);
        assert!(check.max_ratio.is_finite());
    }

    #[test]
    fn jackson_constant_finite() {
        let u: Vec<f64> = (0..64).map(|j| j as f64 * 2.0 * PI / 64.0).collect();
        let rep = jackson_report(&cosine(), &[0.5, 0.9, 1.0, 2.0], &u).unwrap();
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
        assert_eq!(rep.rows[2].upper, 0.0);
        assert!(jackson_report(&cosine(), &[0.0], &u).is_err());
    }
}
