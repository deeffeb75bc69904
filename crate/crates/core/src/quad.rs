//! Composite Gauss–Kronrod (7/15) panel quadrature.
//!
//! Every integral in the crate is split into fixed panels decided up front from
//! the oscillation of the integrand, so results never depend on evaluation
//! order. The Kronrod sum is the value; `|K15 - G7|` summed over panels is the
//! error estimate.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Abscissae of the 15-point Kronrod rule on [-1, 1] (nonnegative half).
/// Odd indices are the 7-point Gauss nodes.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
pub(crate) const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Nodes of the 15-point rule on [-1, 1] in increasing order with their
/// Kronrod weight and (where the node is shared) Gauss weight.
pub(crate) fn unit_nodes() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        out[j] = (-XGK[j], WGK[j], wg);
        out[14 - j] = (XGK[j], WGK[j], wg);
    }
    out[7] = (0.0, WGK[7], WG[3]);
    out
}

pub(crate) trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    #[cfg_attr(not(test), allow(dead_code))]
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

/// One Gauss–Kronrod panel on [a, b].
pub(crate) fn gk15<T: Scalar>(mut f: impl FnMut(f64) -> T, a: f64, b: f64) -> Estimate<T> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    Estimate {
        value: k * h,
        error: (k - g).magnitude() * h.abs(),
    }
}

#[cfg(test)]
/// Composite rule with `panels` equal panels over [a, b].
pub(crate) fn integrate<T: Scalar>(mut f: impl FnMut(f64) -> T, a: f64, b: f64, panels: usize) -> Estimate<T> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut value = T::zero();
    let mut error = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        let e = gk15(&mut f, lo, hi);
        value = value + e.value;
        error += e.error;
    }
    Estimate { value, error }
}

/// Panel count so that each panel spans at most `1/per_period` of the period
/// of the fastest frequency `omega` present in the integrand.
/// Composite rule whose panels are bisected until each one's error estimate
/// falls below its share of `abs_tol`. Handles integrands with kinks.
pub(crate) fn integrate_adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize, abs_tol: f64) -> Estimate<f64> {
    const MAX_DEPTH: u32 = 40;
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let density = abs_tol / (b - a).abs().max(f64::MIN_POSITIVE);
    let mut value = 0.0;
    let mut error = 0.0;
    let mut stack = Vec::new();
    for p in (0..panels).rev() {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        stack.push((lo, hi, 0u32));
    }
    while let Some((lo, hi, depth)) = stack.pop() {
        let e = gk15(&mut f, lo, hi);
        if e.error <= density * (hi - lo).abs() || depth >= MAX_DEPTH {
            value += e.value;
            error += e.error;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Estimate { value, error }
}

pub(crate) fn panels_for(length: f64, omega: f64, per_period: usize, min: usize) -> usize {
    if omega <= 0.0 || length <= 0.0 {
        return min.max(1);
    }
    let h = std::f64::consts::TAU / (omega * per_period as f64);
    ((length / h).ceil() as usize).max(min).max(1)
}
