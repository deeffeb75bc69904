//! Threshold partial sums `S_γ f` at `γ_k = αk/2` and strong means of their
//! deviations from `f`.

use num_complex::Complex64;

use crate::apfun::ApFunction;
use crate::error::{Error, Result};
use crate::kernels::{KernelMoments, KernelSum, QuadratureConfig};
use crate::summability::{check_row_stochastic, MatrixRow};

/// `Σ_{λ_ν ≤ γ}` of the terms of `f` at `x`, both signs included.
pub fn threshold_partial_sum(f: &ApFunction, x: f64, gamma: f64) -> Complex64 {
    f.terms()
        .iter()
        .filter(|t| t.lambda <= gamma)
        .map(|t| t.value_at(x))
        .sum()
}

/// Smallest `k` with `αk/2 ≥ λ_max`.
pub fn stop_index(lambda_max: f64, alpha: f64) -> usize {
    let mut k = (2.0 * lambda_max / alpha).ceil().max(0.0) as usize;
    while k > 0 && alpha * (k - 1) as f64 / 2.0 >= lambda_max {
        k -= 1;
    }
    while alpha * k as f64 / 2.0 < lambda_max {
        k += 1;
    }
    k
}

/// `d_k = |S_{αk/2}f(x) − f(x)|` for `k ≤ k_stop`; every later entry is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSequence {
    values: Vec<f64>,
}

impl DeviationSequence {
    pub fn k_stop(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// Entries `0..=k_stop`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Deviations up to `k_stop`. The dropped part is summed directly (rather
/// than subtracting from `f(x)`), so `d_{k_stop} = 0` exactly.
pub fn deviation_sequence(f: &ApFunction, x: f64, alpha: f64, k_max: usize) -> Result<DeviationSequence> {
    check_alpha(alpha)?;
    let k_stop = stop_index(f.lambda_max(), alpha);
    if k_max < k_stop {
        return Err(Error::arg(
            "k_max",
            format!("must be at least {k_stop} so that all exponents are covered, got {k_max}"),
        ));
    }
    Ok(deviations(f, x, alpha, k_stop))
}

fn full_deviations(f: &ApFunction, x: f64, alpha: f64) -> Result<DeviationSequence> {
    check_alpha(alpha)?;
    Ok(deviations(f, x, alpha, stop_index(f.lambda_max(), alpha)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::arg("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(())
}

fn deviations(f: &ApFunction, x: f64, alpha: f64, k_stop: usize) -> DeviationSequence {
    let terms: Vec<(f64, Complex64)> = f.terms().iter().map(|t| (t.lambda, t.value_at(x))).collect();
    let values = (0..=k_stop)
        .map(|k| {
            let gamma = alpha * k as f64 / 2.0;
            terms
                .iter()
                .filter(|(lambda, _)| *lambda > gamma)
                .map(|(_, v)| *v)
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    DeviationSequence { values }
}

/// Deviations of `f` at `x` with `γ_k = α_f k/2`.
pub fn deviations_at(f: &ApFunction, x: f64) -> DeviationSequence {
    deviations(f, x, f.alpha(), stop_index(f.lambda_max(), f.alpha()))
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::arg("q", format!("must be positive and finite, got {q}")));
    }
    Ok(())
}

/// `{Σ_k a_{n,k} d_k^q}^{1/q}` over precomputed deviations.
pub fn strong_mean_of(dev: &DeviationSequence, row: &MatrixRow, q: f64) -> Result<f64> {
    check_q(q)?;
    if !check_row_stochastic(row) {
        return Err(Error::NotStochastic {
            n: row.n(),
            sum: row.sum(),
        });
    }
    let weights = row.entries(dev.values.len());
    let s: f64 = dev.values.iter().zip(weights).map(|(d, a)| a * d.powf(q)).sum();
    Ok(s.powf(1.0 / q))
}

/// `H^q_{n,A}f(x) = {Σ_k a_{n,k}|S_{αk/2}f(x) − f(x)|^q}^{1/q}`. Terms past
/// `k_stop` vanish, so infinite rows are summed exactly.
pub fn strong_mean(f: &ApFunction, x: f64, row: &MatrixRow, q: f64, alpha: f64) -> Result<f64> {
    check_q(q)?;
    let dev = full_deviations(f, x, alpha)?;
    strong_mean_of(&dev, row, q)
}

/// `{(1/(n+1)) Σ_{k=n}^{2n} d_k^q}^{1/q}` over precomputed deviations.
pub fn block_strong_mean_of(dev: &DeviationSequence, n: usize, q: f64) -> Result<f64> {
    check_q(q)?;
    let s: f64 = (n..=2 * n).map(|k| dev.get(k).powf(q)).sum();
    Ok((s / (n + 1) as f64).powf(1.0 / q))
}

pub fn block_strong_mean(f: &ApFunction, x: f64, n: usize, q: f64, alpha: f64) -> Result<f64> {
    check_q(q)?;
    let dev = full_deviations(f, x, alpha)?;
    block_strong_mean_of(&dev, n, q)
}

/// Kernel representations of `S_{αk/2}f` for `k ≤ k_max`.
///
/// The kernel of index `k` passes every exponent up to `αk/2` and damps
/// those in `(αk/2, α(k+1)/2)`. When that interval holds an exponent (at most
/// one, by separation) the sum is taken from index `k+1` with that single
/// term removed.
pub struct StarredSums {
    moments: Vec<KernelMoments>,
    alpha: f64,
}

impl StarredSums {
    pub fn new(f: &ApFunction, k_max: usize, cfg: &QuadratureConfig) -> Result<Self> {
        let moments = (0..=k_max + 1)
            .map(|k| KernelMoments::new(f, k, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            moments,
            alpha: f.alpha(),
        })
    }

    pub fn k_max(&self) -> usize {
        self.moments.len() - 2
    }

    /// Exponent inside `(αk/2, α(k+1)/2)`, if any.
    pub fn straddling(&self, f: &ApFunction, k: usize) -> Option<usize> {
        let lo = self.alpha * k as f64 / 2.0;
        let hi = self.alpha * (k + 1) as f64 / 2.0;
        f.terms().iter().position(|t| t.lambda > lo && t.lambda < hi)
    }

    pub fn partial_sum(&self, f: &ApFunction, x: f64, k: usize) -> Result<KernelSum> {
        if k > self.k_max() {
            return Err(Error::arg("k", format!("must be at most {}, got {k}", self.k_max())));
        }
        Ok(match self.straddling(f, k) {
            None => self.moments[k].partial_sum(f, x),
            Some(i) => {
                let mut s = self.moments[k + 1].partial_sum(f, x);
                s.value -= f.terms()[i].value_at(x);
                s
            }
        })
    }
}

/// One-off κ-adjusted kernel sum for `S_{αk/2}f(x)`.
pub fn starred_partial_sum(f: &ApFunction, x: f64, k: usize, cfg: &QuadratureConfig) -> Result<KernelSum> {
    let sums = StarredSums {
        moments: vec![KernelMoments::new(f, k, cfg)?, KernelMoments::new(f, k + 1, cfg)?],
        alpha: f.alpha(),
    };
    match sums.straddling(f, k) {
        None => Ok(sums.moments[0].partial_sum(f, x)),
        Some(i) => {
            let mut s = sums.moments[1].partial_sum(f, x);
            s.value -= f.terms()[i].value_at(x);
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfun::Term;
    use crate::summability::{generate_row, RowFamily};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cosine() -> ApFunction {
        ApFunction::new(1.0, vec![Term::new(1.0, c(0.5), c(0.5))]).unwrap()
    }

    fn two_exp() -> ApFunction {
        ApFunction::new(2.0, vec![Term::new(1.0, c(1.0), c(0.0)), Term::new(3.0, c(0.5), c(0.0))]).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let f = two_exp();
        assert!((threshold_partial_sum(&f, 0.0, 2.0) - c(1.0)).norm() < 1e-15);
        assert_eq!(threshold_partial_sum(&f, 0.7, 10.0), f.evaluate(0.7));
        let g = ApFunction::new(1.0, vec![Term::zero_frequency(c(2.0)), Term::new(1.0, c(1.0), c(0.0))]).unwrap();
        assert_eq!(threshold_partial_sum(&g, 1.3, 0.0), c(2.0));
    }

    #[test]
    fn stop_index_edges() {
        assert_eq!(stop_index(1.0, 1.0), 2);
        assert_eq!(stop_index(0.0, 1.0), 0);
        assert_eq!(stop_index(3.0, 2.0), 3);
        assert_eq!(stop_index(1.1, 1.0), 3);
    }

    #[test]
    fn deviation_examples() {
        let d = deviation_sequence(&cosine(), 0.0, 1.0, 5).unwrap();
        assert_eq!(d.values(), &[1.0, 1.0, 0.0]);
        assert_eq!(d.k_stop(), 2);
        assert_eq!(d.get(40), 0.0);
        assert!(deviation_sequence(&cosine(), 0.0, 1.0, 1).is_err());
        let k = ApFunction::constant(c(3.0), 1.0).unwrap();
        assert!(deviation_sequence(&k, 0.4, 1.0, 0).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strong_mean_examples() {
        let dev = DeviationSequence { values: vec![0.0, 2.0] };
        let row = MatrixRow::explicit(1, vec![0.5, 0.5]).unwrap();
        assert!((strong_mean_of(&dev, &row, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((strong_mean_of(&dev, &row, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let cesaro = generate_row(&RowFamily::Cesaro, 3).unwrap();
        let h = strong_mean(&cosine(), 0.0, &cesaro, 2.0, 1.0).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(strong_mean(&cosine(), 0.0, &cesaro, 0.0, 1.0).is_err());
        let bad = MatrixRow::explicit(0, vec![0.5, 0.25]).unwrap();
        assert!(matches!(
            strong_mean(&cosine(), 0.0, &bad, 1.0, 1.0),
            Err(Error::NotStochastic { .. })
        ));
        let abel = generate_row(&RowFamily::Abel { r: Some(0.5) }, 0).unwrap();
        // weights 1/2, 1/4 on deviations 1, 1
        assert!((strong_mean(&cosine(), 0.0, &abel, 1.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn block_examples() {
        let f = cosine();
        assert!((block_strong_mean(&f, 0.0, 1, 2.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(block_strong_mean(&f, 0.0, 0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(block_strong_mean(&f, 0.3, 2, 1.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn starred_sums_match_thresholds() {
        let f = ApFunction::new(1.0, vec![Term::new(1.3, c(1.0), c(0.2)), Term::new(2.9, c(0.5), c(0.0))]).unwrap();
        let cfg = QuadratureConfig::default();
        let sums = StarredSums::new(&f, 7, &cfg).unwrap();
        assert_eq!(sums.straddling(&f, 2), Some(1));
        assert_eq!(sums.straddling(&f, 3), None);
        assert_eq!(sums.straddling(&f, 5), Some(2));
        for k in 0..=7 {
            for x in [0.0, 0.9, 2.5] {
                let s = sums.partial_sum(&f, x, k).unwrap();
                let exact = threshold_partial_sum(&f, x, k as f64 / 2.0);
                assert!(
                    (s.value - exact).norm() <= cfg.abs_tolerance + s.tail_bound,
                    "k={k} x={x}"
                );
            }
        }
        let one = starred_partial_sum(&f, 0.9, 5, &cfg).unwrap();
        assert!((one.value - sums.partial_sum(&f, 0.9, 5).unwrap().value).norm() < 1e-14);
        assert!(sums.partial_sum(&f, 0.0, 8).is_err());
    }
}
