//! Almost periodic functions with separated spectra, modelled as finite
//! trigonometric sums
//!
//! ```text
//! f(x) = Σ_ν ( a⁺_ν e^{iλ_ν x} + a⁻_ν e^{-iλ_ν x} ),   0 = λ_0 < λ_1 < …
//! ```
//!
//! with consecutive exponents at least `alpha` apart. Because the spectrum is
//! finite, Bohr coefficients, partial sums and tails are all exact.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::quad::unit_nodes;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub lambda: f64,
    pub a_plus: Complex64,
    pub a_minus: Complex64,
}

impl Term {
    pub fn new(lambda: f64, a_plus: Complex64, a_minus: Complex64) -> Self {
        Self {
            lambda,
            a_plus,
            a_minus,
        }
    }

    pub fn zero_frequency(a: Complex64) -> Self {
        Self::new(0.0, a, Complex64::new(0.0, 0.0))
    }

    /// `|a⁺| + |a⁻|`.
    pub fn weight(&self) -> f64 {
        self.a_plus.norm() + self.a_minus.norm()
    }

    /// Contribution of this term at `x`. For `λ = 0` both amplitudes multiply
    /// the constant 1.
    pub fn value_at(&self, x: f64) -> Complex64 {
        if self.lambda == 0.0 {
            return self.a_plus + self.a_minus;
        }
        let e = Complex64::from_polar(1.0, self.lambda * x);
        self.a_plus * e + self.a_minus * e.conj()
    }
}

/// A validated member of the class Ω_{α,p}: finite term list, exponents
/// strictly increasing from 0, and every active gap at least `alpha`.
///
/// The `λ = 0` term is always present; if the caller omits it a zero-amplitude
/// one is inserted. A zero-amplitude `λ_0` is not an exponent of the Fourier
/// series, so the separation rule only applies to it when its amplitude is
/// nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ApFunctionJson", into = "ApFunctionJson")]
pub struct ApFunction {
    alpha: f64,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub x: f64,
    pub value: Complex64,
}

impl ApFunction {
    pub fn new(alpha: f64, terms: Vec<Term>) -> Result<Self> {
        let terms = normalize_terms(terms)?;
        validate(alpha, &terms).map_err(Error::InvalidFunction)?;
        Ok(Self { alpha, terms })
    }

    /// Skips the amplitude rule so that derived sums (shifted differences,
    /// tails) whose amplitudes may cancel can reuse the evaluation machinery.
    pub(crate) fn derived(alpha: f64, terms: Vec<Term>) -> Self {
        Self { alpha, terms }
    }

    pub fn constant(value: Complex64, alpha: f64) -> Result<Self> {
        Self::new(alpha, vec![Term::zero_frequency(value)])
    }

    /// Syntax errors come back as `Error::Json`, invalid functions as
    /// `Error::InvalidFunction`.
    pub fn from_json(s: &str) -> Result<Self> {
        let wire: ApFunctionJson = serde_json::from_str(s)?;
        wire.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("function serializes")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Terms with `λ > 0`.
    pub fn oscillating(&self) -> &[Term] {
        &self.terms[1..]
    }

    pub fn lambda_max(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.lambda)
    }

    /// `Σ (|a⁺| + |a⁻|)`, an upper bound for `|f|` everywhere.
    pub fn amplitude_sum(&self) -> f64 {
        self.terms.iter().map(Term::weight).sum()
    }

    /// `Σ_{ν≥1} (|a⁺| + |a⁻|)`; `|φ_x| ≤ 4·` this.
    pub fn oscillating_amplitude_sum(&self) -> f64 {
        self.oscillating().iter().map(Term::weight).sum()
    }

    /// Exponents that actually occur in the Fourier series, in increasing order.
    pub fn active_exponents(&self) -> Vec<f64> {
        self.terms
            .iter()
            .filter(|t| t.weight() > 0.0)
            .map(|t| t.lambda)
            .collect()
    }

    pub fn evaluate(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|t| t.value_at(x)).sum()
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<EvalPoint> {
        xs.iter()
            .map(|&x| EvalPoint {
                x,
                value: self.evaluate(x),
            })
            .collect()
    }

    /// φ_x(t) = f(x+t) + f(x−t) − 2f(x).
    pub fn phi(&self, x: f64, t: f64) -> Complex64 {
        self.evaluate(x + t) + self.evaluate(x - t) - 2.0 * self.evaluate(x)
    }

    /// Per-term values `b_ν(x) = a⁺e^{iλx} + a⁻e^{-iλx}` for the oscillating
    /// terms, so that `φ_x(t) = Σ 2 b_ν(x)(cos λ_ν t − 1)`.
    pub(crate) fn phi_coefficients(&self, x: f64) -> Vec<(f64, Complex64)> {
        self.oscillating()
            .iter()
            .map(|t| (t.lambda, t.value_at(x)))
            .collect()
    }

    /// Analytic Bohr coefficient `A(λ) = lim (1/L)∫₀^L f(t)e^{-iλt}dt`.
    /// Exponents are matched by exact equality.
    pub fn exact_coefficient(&self, lambda: f64) -> Complex64 {
        self.signed_spectrum()
            .find(|&(mu, _)| mu == lambda)
            .map_or(Complex64::new(0.0, 0.0), |(_, a)| a)
    }

    /// `(1/L)∫₀^L f(t)e^{-iλt}dt` in closed form.
    pub fn bohr_coefficient(&self, lambda: f64, length: f64) -> Result<Complex64> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::arg("L", format!("must be positive and finite, got {length}")));
        }
        Ok(self
            .signed_spectrum()
            .map(|(mu, a)| a * mean_of_exponential(mu - lambda, length))
            .sum())
    }

    /// `(signed exponent, amplitude)` pairs with nonzero amplitude.
    pub fn signed_spectrum(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        let zero = Complex64::new(0.0, 0.0);
        self.terms.iter().flat_map(move |t| {
            let pair = if t.lambda == 0.0 {
                [(0.0, t.a_plus + t.a_minus), (0.0, zero)]
            } else {
                [(t.lambda, t.a_plus), (-t.lambda, t.a_minus)]
            };
            pair.into_iter().filter(|(_, a)| a.norm() > 0.0)
        })
    }

    /// True iff every gap between consecutive active exponents is at least `alpha`.
    pub fn check_omega_membership(&self, alpha: f64) -> bool {
        exponents_separated(&self.active_exponents(), alpha)
    }

    /// `f(· + t) − f(·)` as a trigonometric sum.
    pub fn shifted_difference(&self, t: f64) -> ApFunction {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                if term.lambda == 0.0 {
                    return Term::zero_frequency(Complex64::new(0.0, 0.0));
                }
                let e = Complex64::from_polar(1.0, term.lambda * t) - 1.0;
                let em = Complex64::from_polar(1.0, -term.lambda * t) - 1.0;
                Term::new(term.lambda, term.a_plus * e, term.a_minus * em)
            })
            .collect();
        ApFunction::derived(self.alpha, terms)
    }

    /// Period `2π/g` when all active exponents are integer multiples of a
    /// common `g` (checked with denominators up to 64), otherwise `None`.
    pub fn fundamental_period(&self) -> Option<f64> {
        let lambdas: Vec<f64> = self.active_exponents().into_iter().filter(|&l| l > 0.0).collect();
        let Some(&first) = lambdas.first() else {
            return Some(2.0 * PI);
        };
        let mut lcm: u64 = 1;
        for &l in &lambdas {
            let ratio = l / first;
            let q = (1..=64u64).find(|&q| {
                let v = ratio * q as f64;
                (v - v.round()).abs() <= 1e-9 * v.max(1.0)
            })?;
            lcm = lcm / gcd(lcm, q) * q;
            if lcm > 4096 {
                return None;
            }
        }
        let g = first / lcm as f64;
        Some(2.0 * PI / g)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(1/L)∫₀^L e^{iθt}dt`, stable for small `θL`.
fn mean_of_exponential(theta: f64, length: f64) -> Complex64 {
    if theta == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let phase = theta * length;
    if phase.abs() < 1e-6 {
        // 1 + iφ/2 − φ²/6
        return Complex64::new(1.0 - phase * phase / 6.0, 0.5 * phase);
    }
    (Complex64::from_polar(1.0, phase) - 1.0) / Complex64::new(0.0, phase)
}

/// True iff consecutive entries of `exponents` differ by at least `alpha`.
pub fn exponents_separated(exponents: &[f64], alpha: f64) -> bool {
    exponents.windows(2).all(|w| w[1] - w[0] >= alpha)
}

fn normalize_terms(mut terms: Vec<Term>) -> Result<Vec<Term>> {
    if terms.is_empty() {
        return Err(Error::InvalidFunction(Violation::NoTerms));
    }
    if terms[0].lambda > 0.0 {
        terms.insert(0, Term::zero_frequency(Complex64::new(0.0, 0.0)));
    }
    Ok(terms)
}

fn validate(alpha: f64, terms: &[Term]) -> std::result::Result<(), Violation> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Violation::NonPositiveAlpha(alpha));
    }
    for (index, t) in terms.iter().enumerate() {
        let finite = t.lambda.is_finite()
            && t.a_plus.re.is_finite()
            && t.a_plus.im.is_finite()
            && t.a_minus.re.is_finite()
            && t.a_minus.im.is_finite();
        if !finite {
            return Err(Violation::NonFinite { index });
        }
        if t.lambda < 0.0 {
            return Err(Violation::NegativeExponent {
                index,
                lambda: t.lambda,
            });
        }
    }
    for index in 1..terms.len() {
        let (prev, cur) = (&terms[index - 1], &terms[index]);
        if cur.lambda <= prev.lambda {
            return Err(Violation::NotIncreasing { index });
        }
        if cur.weight() == 0.0 {
            return Err(Violation::ZeroAmplitude {
                index,
                lambda: cur.lambda,
            });
        }
        let counts = index > 1 || prev.weight() > 0.0;
        let gap = cur.lambda - prev.lambda;
        if counts && gap < alpha {
            return Err(Violation::GapTooSmall { index, gap, alpha });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub lambda: f64,
    #[serde(default)]
    pub a_plus: [f64; 2],
    #[serde(default)]
    pub a_minus: [f64; 2],
}

/// Wire form: `{"alpha": α, "terms": [{"lambda": λ, "a_plus": [re, im], "a_minus": [re, im]}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApFunctionJson {
    pub alpha: f64,
    pub terms: Vec<TermJson>,
}

impl TryFrom<ApFunctionJson> for ApFunction {
    type Error = Error;

    fn try_from(raw: ApFunctionJson) -> Result<Self> {
        let terms = raw
            .terms
            .into_iter()
            .map(|t| {
                Term::new(
                    t.lambda,
                    Complex64::new(t.a_plus[0], t.a_plus[1]),
                    Complex64::new(t.a_minus[0], t.a_minus[1]),
                )
            })
            .collect();
        ApFunction::new(raw.alpha, terms)
    }
}

impl From<ApFunction> for ApFunctionJson {
    fn from(f: ApFunction) -> Self {
        ApFunctionJson {
            alpha: f.alpha,
            terms: f
                .terms
                .iter()
                .map(|t| TermJson {
                    lambda: t.lambda,
                    a_plus: [t.a_plus.re, t.a_plus.im],
                    a_minus: [t.a_minus.re, t.a_minus.im],
                })
                .collect(),
        }
    }
}

/// Exponent `p` of a Stepanov norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LpExponent {
    Finite(f64),
    Infinite,
}

impl LpExponent {
    pub fn validate(self) -> Result<Self> {
        match self {
            LpExponent::Finite(p) if !(p >= 1.0) || !p.is_finite() => {
                Err(Error::arg("p", format!("must be >= 1 or inf, got {p}")))
            }
            other => Ok(other),
        }
    }
}

impl fmt::Display for LpExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpExponent::Finite(p) => write!(f, "{p}"),
            LpExponent::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for LpExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(LpExponent::Infinite),
            other => other
                .parse::<f64>()
                .map(LpExponent::Finite)
                .map_err(|e| Error::arg("p", e.to_string()))?
                .validate(),
        }
    }
}

impl From<LpExponent> for String {
    fn from(p: LpExponent) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for LpExponent {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Default window starts: 256 points over one fundamental period for
/// commensurate spectra (periods up to 100π), otherwise over `[0, 100π]`.
pub fn default_u_grid(f: &ApFunction) -> Vec<f64> {
    match f.fundamental_period() {
        Some(period) if period <= 100.0 * PI => (0..256).map(|j| j as f64 * period / 256.0).collect(),
        _ => (0..256).map(|j| j as f64 * 100.0 * PI / 255.0).collect(),
    }
}

/// Panels per π-window for spectra up to `lambda_max`: panel width at most π/(8λ_max).
pub(crate) fn panels_per_pi(lambda_max: f64) -> usize {
    ((8.0 * lambda_max).ceil() as usize).max(8)
}

/// Samples per unit π used for the `p = ∞` norm (step at most π/(64 λ_max)).
pub(crate) fn sup_samples_per_pi(lambda_max: f64) -> usize {
    ((64.0 * lambda_max).ceil() as usize).max(64)
}

/// Approximate `‖f‖_{S^p}`: the maximum over `u_grid` of
/// `{(1/π)∫_u^{u+π}|f|^p}^{1/p}`, or for `p = ∞` the maximum of `|f|` on a
/// uniform sample of `[min u, max u + π]` with step `π/max(64, 64λ_max)`.
/// Both are lower estimates of the supremum over all of ℝ.
pub fn stepanov_norm(f: &ApFunction, p: LpExponent, u_grid: &[f64]) -> Result<f64> {
    let p = p.validate()?;
    check_grid(u_grid)?;
    match p {
        LpExponent::Infinite => {
            let samples = SupSampler::new(u_grid, f.lambda_max());
            Ok(samples
                .points()
                .map(|x| f.evaluate(x).norm())
                .fold(0.0, f64::max))
        }
        LpExponent::Finite(p) => {
            let rule = WindowRule::new(u_grid, f.lambda_max());
            let values: Vec<f64> = rule.nodes().iter().map(|&t| f.evaluate(t).norm().powf(p)).collect();
            Ok(rule.max_mean(&values).powf(1.0 / p))
        }
    }
}

pub(crate) fn check_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.is_empty() {
        return Err(Error::arg("u_grid", "must be nonempty"));
    }
    if u_grid.iter().any(|u| !u.is_finite()) {
        return Err(Error::arg("u_grid", "entries must be finite"));
    }
    Ok(())
}

/// Uniform sample covering every window `[u, u+π]`.
pub(crate) struct SupSampler {
    lo: f64,
    step: f64,
    count: usize,
}

impl SupSampler {
    pub(crate) fn new(u_grid: &[f64], lambda_max: f64) -> Self {
        let lo = u_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max) + PI;
        let step = PI / sup_samples_per_pi(lambda_max) as f64;
        let count = ((hi - lo) / step).ceil() as usize + 1;
        Self { lo, step, count }
    }

    pub(crate) fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |j| self.lo + j as f64 * self.step)
    }
}

/// Quadrature for the family of windows `[u, u+π]`, `u ∈ u_grid`.
///
/// A global panel grid of width `π/panels_per_pi` covers the union of the
/// windows; each window is the sum of its whole panels (via prefix sums) plus
/// at most two partial panels at its ends. All nodes are fixed at
/// construction so callers can evaluate many integrands on the same nodes.
pub(crate) struct WindowRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    full_panels: usize,
    windows: Vec<WindowSpan>,
}

struct WindowSpan {
    first_panel: usize,
    end_panel: usize,
    left: Option<usize>,
    right: Option<usize>,
}

const PANEL_NODES: usize = 15;

impl WindowRule {
    pub(crate) fn new(u_grid: &[f64], lambda_max: f64) -> Self {
        let per_pi = panels_per_pi(lambda_max);
        let h = PI / per_pi as f64;
        let lo = u_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max) + PI;
        let full_panels = (((hi - lo) / h).ceil() as usize).max(1);
        let unit = unit_nodes();
        let mut nodes = Vec::with_capacity(PANEL_NODES * (full_panels + 2 * u_grid.len()));
        let mut weights = Vec::with_capacity(nodes.capacity());
        let push_panel = |a: f64, b: f64, nodes: &mut Vec<f64>, weights: &mut Vec<f64>| {
            let c = 0.5 * (a + b);
            let r = 0.5 * (b - a);
            for &(x, wk, _) in &unit {
                nodes.push(c + r * x);
                weights.push(wk * r);
            }
        };
        for j in 0..full_panels {
            let a = lo + j as f64 * h;
            push_panel(a, a + h, &mut nodes, &mut weights);
        }
        let mut windows = Vec::with_capacity(u_grid.len());
        for &u in u_grid {
            let start = (u - lo) / h;
            let end = (u + PI - lo) / h;
            let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
            let (start, end) = (snap(start), snap(end));
            let first_panel = start.ceil() as usize;
            let end_panel = (end.floor() as usize).min(full_panels).max(first_panel);
            let mut left = None;
            let mut right = None;
            let left_edge = lo + first_panel as f64 * h;
            if left_edge > u {
                left = Some(nodes.len());
                push_panel(u, left_edge, &mut nodes, &mut weights);
            }
            let right_edge = lo + end_panel as f64 * h;
            if u + PI > right_edge {
                right = Some(nodes.len());
                push_panel(right_edge, u + PI, &mut nodes, &mut weights);
            }
            windows.push(WindowSpan {
                first_panel,
                end_panel,
                left,
                right,
            });
        }
        Self {
            nodes,
            weights,
            full_panels,
            windows,
        }
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `(1/π)∫` over each window of the integrand sampled at `nodes()`.
    pub(crate) fn window_means(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.nodes.len());
        let block = |start: usize| -> f64 {
            (start..start + PANEL_NODES)
                .map(|i| values[i] * self.weights[i])
                .sum()
        };
        let mut prefix = Vec::with_capacity(self.full_panels + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for j in 0..self.full_panels {
            acc += block(j * PANEL_NODES);
            prefix.push(acc);
        }
        self.windows
            .iter()
            .map(|w| {
                let mut s = prefix[w.end_panel] - prefix[w.first_panel];
                if let Some(l) = w.left {
                    s += block(l);
                }
                if let Some(r) = w.right {
                    s += block(r);
                }
                (s / PI).max(0.0)
            })
            .collect()
    }

    pub(crate) fn max_mean(&self, values: &[f64]) -> f64 {
        self.window_means(values).into_iter().fold(0.0, f64::max)
    }
}

/// Plain composite integral of `|f|^p` over one window, used as a cross-check
/// of [`WindowRule`] in tests.
#[cfg(test)]
pub(crate) fn window_mean_direct(f: &ApFunction, p: f64, u: f64) -> f64 {
    let panels = panels_per_pi(f.lambda_max());
    crate::quad::integrate(|t| f.evaluate(t).norm().powf(p), u, u + PI, panels).value / PI
}
