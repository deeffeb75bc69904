//! Partial-sum kernels and the kernel-integral form of partial sums.
//!
//! For `0 ≤ λ < η`
//!
//! ```text
//! Ψ_{λ,η}(t) = 2 sin((η−λ)t/2) sin((η+λ)t/2) / (π(η−λ)t²)
//! Ψ_k(t)     = Ψ_{αk/2, α(k+1)/2}(t) = 4 sin(αt/4) sin(α(2k+1)t/4) / (απt²)
//! ```
//!
//! `∫₀^∞ 2cos(μt)Ψ_{λ,η}(t)dt` equals 1 for `μ ≤ λ`, 0 for `μ ≥ η` and is
//! linear in between, so integrating `φ_x` against `Ψ_k` reproduces the
//! threshold partial sum whenever no exponent falls strictly inside
//! `(αk/2, α(k+1)/2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::apfun::ApFunction;
use crate::error::{Error, Result};
use crate::quad::unit_nodes;

/// Below this `|t|` the kernels use their second-order Taylor expansion.
pub const SMALL_T: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    lambda: f64,
    eta: f64,
}

impl KernelParams {
    pub fn new(lambda: f64, eta: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda < eta && eta.is_finite()) {
            return Err(Error::arg(
                "kernel",
                format!("need 0 <= lambda < eta, got lambda = {lambda}, eta = {eta}"),
            ));
        }
        Ok(Self { lambda, eta })
    }

    /// Parameters of `Ψ_k`: `(αk/2, α(k+1)/2)`.
    pub fn for_index(alpha: f64, k: usize) -> Result<Self> {
        Self::new(alpha * k as f64 / 2.0, alpha * (k + 1) as f64 / 2.0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// `Ψ_{λ,η}(t)`, even in `t`, with the removable singularity at 0 filled in.
pub fn psi(params: KernelParams, t: f64) -> f64 {
    let KernelParams { lambda, eta } = params;
    let t = t.abs();
    if t <= SMALL_T {
        return (eta + lambda) / (2.0 * PI) * (1.0 - (eta * eta + lambda * lambda) * t * t / 12.0);
    }
    let d = eta - lambda;
    2.0 * (0.5 * d * t).sin() * (0.5 * (eta + lambda) * t).sin() / (PI * d * t * t)
}

/// `Ψ_k(t)` evaluated from its own closed form.
pub fn psi_k(alpha: f64, k: usize, t: f64) -> f64 {
    let t = t.abs();
    let m = (2 * k + 1) as f64;
    if t <= SMALL_T {
        return alpha * m / (4.0 * PI) * (1.0 - alpha * alpha * (1.0 + m * m) * t * t / 96.0);
    }
    4.0 * (0.25 * alpha * t).sin() * (0.25 * alpha * m * t).sin() / (alpha * PI * t * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Upper limit replacing ∞. `None` selects `max(10⁴/α, 10³(k+1)/α)`.
    pub tail_cutoff: Option<f64>,
    pub panels_per_oscillation: usize,
    pub abs_tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            tail_cutoff: None,
            panels_per_oscillation: 4,
            abs_tolerance: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tail_cutoff {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::arg("tail_cutoff", format!("must be positive, got {t}")));
            }
        }
        if self.panels_per_oscillation < 4 {
            return Err(Error::arg(
                "panels_per_oscillation",
                format!("must be at least 4, got {}", self.panels_per_oscillation),
            ));
        }
        if !(self.abs_tolerance > 0.0) {
            return Err(Error::arg(
                "abs_tolerance",
                format!("must be positive, got {}", self.abs_tolerance),
            ));
        }
        Ok(())
    }

    pub fn cutoff(&self, alpha: f64, k: usize) -> f64 {
        self.tail_cutoff
            .unwrap_or_else(|| (1e4 / alpha).max(1e3 * (k + 1) as f64 / alpha))
    }
}

/// `∫₀^T 2(cos λt − 1) Ψ_k(t) dt` for one exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub lambda: f64,
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Refinements (each doubling the panel count) tried before giving up.
const MAX_REFINEMENTS: usize = 2;

pub fn kernel_moment(alpha: f64, k: usize, lambda: f64, cfg: &QuadratureConfig) -> Result<Moment> {
    cfg.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::arg("alpha", "must be positive"));
    }
    if lambda == 0.0 {
        return Ok(Moment {
            lambda,
            value: 0.0,
            error: 0.0,
            converged: true,
        });
    }
    let cutoff = cfg.cutoff(alpha, k);
    let omega = lambda + alpha * (k + 1) as f64 / 2.0;
    let mut per_osc = cfg.panels_per_oscillation;
    let mut last = None;
    for _ in 0..=MAX_REFINEMENTS {
        let panels = ((cutoff * omega * per_osc as f64 / (2.0 * PI)).ceil() as usize).max(16);
        let (value, error) = moment_panels(alpha, k, lambda, cutoff, panels);
        let converged = error <= cfg.abs_tolerance;
        last = Some(Moment {
            lambda,
            value,
            error,
            converged,
        });
        if converged {
            break;
        }
        per_osc *= 2;
    }
    Ok(last.expect("at least one pass"))
}

/// Composite G7/K15 over `panels` equal panels of `[0, cutoff]`.
///
/// The three oscillating factors are advanced panel to panel by complex
/// rotation and resynchronised from exact phases every 64 panels, so each
/// node costs a handful of multiplications.
fn moment_panels(alpha: f64, k: usize, lambda: f64, cutoff: f64, panels: usize) -> (f64, f64) {
    const RESYNC: usize = 64;
    let h = cutoff / panels as f64;
    let half = 0.5 * h;
    let nodes = unit_nodes();
    let freqs = [lambda, 0.25 * alpha, 0.25 * alpha * (2 * k + 1) as f64];
    let scale = 4.0 / (alpha * PI);

    // e^{iν s_j} for the node offsets s_j inside a panel
    let mut offsets = [[Complex64::new(0.0, 0.0); 15]; 3];
    for (f, row) in freqs.iter().zip(offsets.iter_mut()) {
        for (j, &(x, _, _)) in nodes.iter().enumerate() {
            row[j] = Complex64::from_polar(1.0, f * half * (1.0 + x));
        }
    }
    let steps = freqs.map(|f| Complex64::from_polar(1.0, f * h));
    let mut phase = [Complex64::new(1.0, 0.0); 3];

    let mut total = 0.0;
    let mut error = 0.0;
    for p in 0..panels {
        if p % RESYNC == 0 {
            let start = p as f64 * h;
            phase = freqs.map(|f| Complex64::from_polar(1.0, f * start));
        }
        let start = p as f64 * h;
        let mut kron = 0.0;
        let mut gauss = 0.0;
        for (j, &(x, wk, wg)) in nodes.iter().enumerate() {
            let t = start + half * (1.0 + x);
            let c = phase[0] * offsets[0][j];
            let s1 = phase[1] * offsets[1][j];
            let s2 = phase[2] * offsets[2][j];
            let kernel = if t <= SMALL_T {
                psi_k(alpha, k, t)
            } else {
                scale * s1.im * s2.im / (t * t)
            };
            let g = 2.0 * (c.re - 1.0) * kernel;
            kron += wk * g;
            gauss += wg * g;
        }
        total += half * kron;
        error += half * (kron - gauss).abs();
        for (ph, st) in phase.iter_mut().zip(steps.iter()) {
            *ph *= st;
        }
    }
    (total, error)
}

/// Result of [`kernel_partial_sum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSum {
    /// `f(x) + ∫₀^T φ_x(t)Ψ_k(t)dt`.
    pub value: Complex64,
    /// Bound on the discarded `∫_T^∞` part: `8·sup|φ_x|/(απT)`.
    pub tail_bound: f64,
    /// Accumulated panel error estimate.
    pub quad_error: f64,
    pub converged: bool,
}

/// Moments of `Ψ_k` against every exponent of `f`. They do not depend on `x`,
/// so one instance serves partial sums at any number of points.
#[derive(Debug, Clone)]
pub struct KernelMoments {
    k: usize,
    moments: Vec<Moment>,
    tail_bound: f64,
}

impl KernelMoments {
    pub fn new(f: &ApFunction, k: usize, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let alpha = f.alpha();
        let moments = f
            .oscillating()
            .iter()
            .map(|t| kernel_moment(alpha, k, t.lambda, cfg))
            .collect::<Result<Vec<_>>>()?;
        let sup_phi = 4.0 * f.oscillating_amplitude_sum();
        let tail_bound = 8.0 * sup_phi / (alpha * PI * cfg.cutoff(alpha, k));
        Ok(Self {
            k,
            moments,
            tail_bound,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn moments(&self) -> &[Moment] {
        &self.moments
    }

    pub fn partial_sum(&self, f: &ApFunction, x: f64) -> KernelSum {
        // φ_x(t) = Σ_{ν≥1} 2 b_ν(x)(cos λ_ν t − 1)
        let mut value = f.evaluate(x);
        let mut quad_error = 0.0;
        for ((_, b), m) in f.phi_coefficients(x).into_iter().zip(&self.moments) {
            value += b * m.value;
            quad_error += b.norm() * m.error;
        }
        KernelSum {
            value,
            tail_bound: self.tail_bound,
            quad_error,
            converged: self.moments.iter().all(|m| m.converged),
        }
    }
}

/// `f(x) + ∫₀^T φ_x(t)Ψ_k(t)dt` by panel quadrature, with the tail bound.
pub fn kernel_partial_sum(f: &ApFunction, x: f64, k: usize, cfg: &QuadratureConfig) -> Result<KernelSum> {
    Ok(KernelMoments::new(f, k, cfg)?.partial_sum(f, x))
}

/// Closed form of `Σ_{k≥0} r^k sin(y(2k+1)/2) sin(z(2k+1)/2)` for `0 ≤ r < 1`.
pub fn geometric_sine_sum_closed(r: f64, y: f64, z: f64) -> Result<f64> {
    check_ratio(r)?;
    let one_m = 1.0 - r;
    let numerator = (0.5 * y).sin() * (0.5 * z).sin() * one_m * ((1.0 + r).powi(2) + 2.0 * r * (y.cos() + z.cos()));
    let sp = (0.5 * (y + z)).sin();
    let sm = (0.5 * (y - z)).sin();
    let denominator = (one_m * one_m + 4.0 * r * sp * sp) * (one_m * one_m + 4.0 * r * sm * sm);
    if denominator < 1e-30 {
        return Err(Error::arg(
            "r",
            format!("denominator {denominator:e} too small (r near 1 with y = ±z mod 2π)"),
        ));
    }
    Ok(numerator / denominator)
}

/// First `n` terms of the same series; truncation error at most `r^n/(1−r)`.
pub fn geometric_sine_sum_direct(r: f64, y: f64, z: f64, n: usize) -> Result<f64> {
    check_ratio(r)?;
    if n == 0 {
        return Err(Error::arg("N", "must be at least 1"));
    }
    let mut power = 1.0;
    let mut sum = 0.0;
    for k in 0..n {
        let m = (2 * k + 1) as f64;
        sum += power * (0.5 * y * m).sin() * (0.5 * z * m).sin();
        power *= r;
    }
    Ok(sum)
}

fn check_ratio(r: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::arg("r", format!("must satisfy 0 <= r < 1, got {r}")));
    }
    Ok(())
}
