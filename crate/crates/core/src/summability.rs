//! Rows of summability matrices and the sequence classes
//! MS ⊂ RBVS ⊂ GM ⊂ GM(₂β).
//!
//! Every class condition has the shape `N(m) ≤ K·D(m)` for `m ≥ 1`. The scan
//! reports the smallest admissible `K` over `1 ≤ m ≤ m_max`; a block with
//! `D(m) = 0 < N(m)` makes the row a non-member, `0/0` blocks are skipped.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum tolerance for row-stochasticity.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default scan bound for rows with infinite support.
pub const GENERATOR_M_MAX: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub enum RowFamily {
    /// `a_{n,k} = 1/(n+1)` for `k ≤ n`.
    Cesaro,
    /// `a_{n,k} = p_k / Σ_{j≤n} p_j` with `p_k = (k+1)^exponent`.
    Riesz { exponent: f64 },
    /// `a_{n,k} = (1−r) r^k`; `r = 1 − 1/(n+1)` unless fixed.
    Abel { r: Option<f64> },
}

impl RowFamily {
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        match name {
            "cesaro" => Ok(RowFamily::Cesaro),
            "riesz" => Ok(RowFamily::Riesz {
                exponent: params.get("exponent").copied().unwrap_or(1.0),
            }),
            "abel" => Ok(RowFamily::Abel {
                r: params.get("r").copied(),
            }),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RowFamily::Cesaro => "cesaro",
            RowFamily::Riesz { .. } => "riesz",
            RowFamily::Abel { .. } => "abel",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match self {
            RowFamily::Cesaro => {}
            RowFamily::Riesz { exponent } => {
                out.insert("exponent".into(), *exponent);
            }
            RowFamily::Abel { r } => {
                if let Some(r) = r {
                    out.insert("r".into(), *r);
                }
            }
        }
        out
    }

    /// Whether every row of the family is nonincreasing.
    pub fn is_monotone(&self) -> bool {
        match self {
            RowFamily::Cesaro | RowFamily::Abel { .. } => true,
            RowFamily::Riesz { exponent } => *exponent <= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum RowSource {
    Finite(Vec<f64>),
    Geometric { r: f64 },
}

/// Row `n` of a nonnegative matrix, finite or geometric.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    n: usize,
    label: String,
    source: RowSource,
}

impl MatrixRow {
    pub fn explicit(n: usize, entries: Vec<f64>) -> Result<Self> {
        if let Some(k) = entries.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::arg("entries", format!("entry {k} must be finite and >= 0")));
        }
        Ok(Self {
            n,
            label: "explicit".into(),
            source: RowSource::Finite(entries),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entry(&self, k: usize) -> f64 {
        match &self.source {
            RowSource::Finite(v) => v.get(k).copied().unwrap_or(0.0),
            RowSource::Geometric { r } => (1.0 - r) * r.powi(k as i32),
        }
    }

    /// Last index with a nonzero entry; `None` for infinite support.
    pub fn support_end(&self) -> Option<usize> {
        match &self.source {
            RowSource::Finite(v) => Some(v.iter().rposition(|&a| a > 0.0).unwrap_or(0)),
            RowSource::Geometric { r } if *r == 0.0 => Some(0),
            RowSource::Geometric { .. } => None,
        }
    }

    /// First `len` entries.
    pub fn entries(&self, len: usize) -> Vec<f64> {
        match &self.source {
            RowSource::Finite(v) => (0..len).map(|k| v.get(k).copied().unwrap_or(0.0)).collect(),
            RowSource::Geometric { r } => {
                let mut out = Vec::with_capacity(len);
                let mut a = 1.0 - r;
                for _ in 0..len {
                    out.push(a);
                    a *= r;
                }
                out
            }
        }
    }

    /// `Σ_k a_{n,k}`, in closed form for geometric rows.
    pub fn sum(&self) -> f64 {
        match &self.source {
            RowSource::Finite(v) => v.iter().sum(),
            RowSource::Geometric { .. } => 1.0,
        }
    }

    /// `Σ_{k>K} a_{n,k}`.
    pub fn tail_mass(&self, after: usize) -> f64 {
        match &self.source {
            RowSource::Finite(v) => v.iter().skip(after + 1).sum(),
            RowSource::Geometric { r } => r.powi(after as i32 + 1),
        }
    }

    pub fn default_m_max(&self) -> usize {
        match self.support_end() {
            Some(end) if matches!(self.source, RowSource::Finite(_)) => (2 * end).max(1),
            _ => GENERATOR_M_MAX,
        }
    }

    pub fn to_spec(&self) -> RowSpec {
        match &self.source {
            RowSource::Finite(v) if self.label == "explicit" => RowSpec::Explicit {
                n: self.n,
                explicit: v.clone(),
            },
            RowSource::Geometric { r } => RowSpec::Family {
                family: "abel".into(),
                n: self.n,
                params: BTreeMap::from([("r".to_string(), *r)]),
            },
            RowSource::Finite(_) => RowSpec::Family {
                family: self.label.clone(),
                n: self.n,
                params: BTreeMap::new(),
            },
        }
    }
}

/// Wire form of a row: `{"family": name, "n": n, "params": {...}}` or
/// `{"explicit": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowSpec {
    Family {
        family: String,
        n: usize,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Explicit {
        #[serde(default)]
        n: usize,
        explicit: Vec<f64>,
    },
}

impl RowSpec {
    pub fn build(&self) -> Result<MatrixRow> {
        match self {
            RowSpec::Family { family, n, params } => generate_row(&RowFamily::from_name(family, params)?, *n),
            RowSpec::Explicit { n, explicit } => MatrixRow::explicit(*n, explicit.clone()),
        }
    }
}

pub fn generate_row(family: &RowFamily, n: usize) -> Result<MatrixRow> {
    let source = match family {
        RowFamily::Cesaro => RowSource::Finite(vec![1.0 / (n + 1) as f64; n + 1]),
        RowFamily::Riesz { exponent } => {
            if !exponent.is_finite() {
                return Err(Error::arg("exponent", "must be finite"));
            }
            let weights: Vec<f64> = (0..=n).map(|k| ((k + 1) as f64).powf(*exponent)).collect();
            let total: f64 = weights.iter().sum();
            RowSource::Finite(weights.into_iter().map(|w| w / total).collect())
        }
        RowFamily::Abel { r } => {
            let r = r.unwrap_or(1.0 - 1.0 / (n + 1) as f64);
            if !(0.0..1.0).contains(&r) {
                return Err(Error::arg("r", format!("must satisfy 0 <= r < 1, got {r}")));
            }
            RowSource::Geometric { r }
        }
    };
    Ok(MatrixRow {
        n,
        label: family.name().to_string(),
        source,
    })
}

pub fn check_row_stochastic(row: &MatrixRow) -> bool {
    (row.sum() - 1.0).abs() <= STOCHASTIC_TOL
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassName {
    Ms,
    Rbvs,
    Gm,
    /// GM(₂β) with parameter `c`.
    Gm2Beta(f64),
    /// GM(₁β + ₂β) with parameter `c`.
    GmBetaSum(f64),
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassName::Ms => write!(f, "MS"),
            ClassName::Rbvs => write!(f, "RBVS"),
            ClassName::Gm => write!(f, "GM"),
            ClassName::Gm2Beta(c) => write!(f, "GM2BETA({c})"),
            ClassName::GmBetaSum(c) => write!(f, "GM1BETA+2BETA({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub n: usize,
    pub class: ClassName,
    pub member: bool,
    /// Smallest admissible constant over the scanned range; `None` iff not a member.
    pub k: Option<f64>,
    /// For members the `m` attaining `K`; for non-members the first failing `m`.
    pub witness_m: Option<usize>,
    pub m_max: usize,
}

impl ClassReport {
    pub fn csv_header() -> [&'static str; 5] {
        ["n", "class", "member", "K", "witness_m"]
    }

    pub fn csv_record(&self) -> [String; 5] {
        [
            self.n.to_string(),
            self.class.to_string(),
            self.member.to_string(),
            self.k.map_or_else(|| "inf".to_string(), |k| format!("{k:.12e}")),
            self.witness_m.map_or_else(String::new, |m| m.to_string()),
        ]
    }
}

/// Member iff nonincreasing. Members report `K = 1` (the constant they carry
/// into RBVS and GM); non-members report the first increasing index.
pub fn ms_check(row: &MatrixRow) -> ClassReport {
    let first_increase = match &row.source {
        RowSource::Geometric { .. } => None,
        RowSource::Finite(v) => (0..v.len()).find(|&k| row.entry(k) < row.entry(k + 1)),
    };
    ClassReport {
        n: row.n,
        class: ClassName::Ms,
        member: first_increase.is_none(),
        k: first_increase.is_none().then_some(1.0),
        witness_m: first_increase,
        m_max: row.support_end().map_or(usize::MAX, |e| e + 1),
    }
}

fn check_m_max(m_max: usize) -> Result<()> {
    if m_max == 0 {
        return Err(Error::arg("m_max", "must be at least 1"));
    }
    Ok(())
}

/// `Σ_{k≥m}|a_k − a_{k+1}| ≤ K a_m`.
pub fn rbvs_constant(row: &MatrixRow, m_max: usize) -> Result<ClassReport> {
    check_m_max(m_max)?;
    let report = match &row.source {
        RowSource::Geometric { r } => {
            // rest variation telescopes to a_m
            scan(row.n, ClassName::Rbvs, m_max, |m| {
                let a = (1.0 - r) * r.powi(m as i32);
                (a, a)
            })
        }
        RowSource::Finite(v) => {
            let len = v.len().max(m_max + 2);
            let a = row.entries(len + 1);
            let mut rest = vec![0.0; len + 1];
            for k in (0..len).rev() {
                rest[k] = rest[k + 1] + (a[k] - a[k + 1]).abs();
            }
            scan(row.n, ClassName::Rbvs, m_max, |m| (rest[m], a[m]))
        }
    };
    Ok(report)
}

/// `Σ_{k=m}^{2m−1}|a_k − a_{k+1}| ≤ K a_m`.
pub fn gm_constant(row: &MatrixRow, m_max: usize) -> Result<ClassReport> {
    check_m_max(m_max)?;
    let report = match &row.source {
        RowSource::Geometric { r } => scan(row.n, ClassName::Gm, m_max, |m| {
            let a = (1.0 - r) * r.powi(m as i32);
            (a * (1.0 - r.powi(m as i32)), a)
        }),
        RowSource::Finite(_) => {
            let a = row.entries(2 * m_max + 2);
            scan(row.n, ClassName::Gm, m_max, |m| (block_variation(&a, m), a[m]))
        }
    };
    Ok(report)
}

/// `Σ_{k=m}^{2m−1}|a_k − a_{k+1}| ≤ K Σ_{k=[m/c]}^{[cm]} a_k/k`, inner sum
/// starting at `max(1, [m/c])`.
pub fn gm2beta_constant(row: &MatrixRow, c: f64, m_max: usize) -> Result<ClassReport> {
    beta_scan(row, c, m_max, ClassName::Gm2Beta(c), false)
}

/// Same block variation against `a_m + ₂β_m`.
pub fn gm_beta_sum_constant(row: &MatrixRow, c: f64, m_max: usize) -> Result<ClassReport> {
    beta_scan(row, c, m_max, ClassName::GmBetaSum(c), true)
}

fn beta_scan(row: &MatrixRow, c: f64, m_max: usize, class: ClassName, with_first: bool) -> Result<ClassReport> {
    check_m_max(m_max)?;
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::arg("c", format!("must be > 1, got {c}")));
    }
    let upper = |m: usize| (c * m as f64).floor() as usize;
    let lower = |m: usize| ((m as f64 / c).floor() as usize).max(1);
    let len = upper(m_max).max(2 * m_max) + 2;
    let a = row.entries(len + 1);
    let variation: Box<dyn Fn(usize) -> f64> = match &row.source {
        RowSource::Geometric { r } => {
            let r = *r;
            Box::new(move |m| (1.0 - r) * r.powi(m as i32) * (1.0 - r.powi(m as i32)))
        }
        RowSource::Finite(_) => {
            let a = a.clone();
            Box::new(move |m| block_variation(&a, m))
        }
    };
    // suffix sums of a_k/k keep relative accuracy on decaying rows
    let mut tail = vec![0.0; len + 2];
    for k in (1..=len).rev() {
        tail[k] = tail[k + 1] + a[k] / k as f64;
    }
    Ok(scan(row.n, class, m_max, |m| {
        let (lo, hi) = (lower(m), upper(m));
        let beta = if hi >= lo { (tail[lo] - tail[hi + 1]).max(0.0) } else { 0.0 };
        let beta = if with_first { beta + a[m] } else { beta };
        (variation(m), beta)
    }))
}

fn block_variation(a: &[f64], m: usize) -> f64 {
    (m..2 * m).map(|k| (a[k] - a[k + 1]).abs()).sum()
}

/// Max of `N(m)/D(m)` over `1 ≤ m ≤ m_max`; ties keep the smallest `m`.
fn scan(n: usize, class: ClassName, m_max: usize, mut block: impl FnMut(usize) -> (f64, f64)) -> ClassReport {
    let mut best = 0.0;
    let mut witness = None;
    for m in 1..=m_max {
        let (num, den) = block(m);
        if den > 0.0 {
            let ratio = num / den;
            if ratio > best {
                best = ratio;
                witness = Some(m);
            }
        } else if num > 0.0 {
            return ClassReport {
                n,
                class,
                member: false,
                k: None,
                witness_m: Some(m),
                m_max,
            };
        }
    }
    ClassReport {
        n,
        class,
        member: true,
        k: Some(best),
        witness_m: witness,
        m_max,
    }
}

/// Runs MS, RBVS, GM and GM(₂β)(c) and checks that each membership implies
/// the next one (with `K ≤ 1` for RBVS when MS holds).
pub fn hierarchy_check(row: &MatrixRow, c: f64, m_max: usize) -> Result<Vec<ClassReport>> {
    let reports = vec![
        ms_check(row),
        rbvs_constant(row, m_max)?,
        gm_constant(row, m_max)?,
        gm2beta_constant(row, c, m_max)?,
    ];
    let violation = |i: usize| Error::HierarchyViolation {
        n: row.n,
        stronger: reports[i].class.to_string(),
        weaker: reports[i + 1].class.to_string(),
    };
    if reports[0].member && reports[1].k.is_none_or(|k| k > 1.0 + 1e-12) {
        return Err(violation(0));
    }
    for i in 1..3 {
        if reports[i].member && !reports[i + 1].member {
            return Err(violation(i));
        }
    }
    Ok(reports)
}
