//! Site frequency spectra, tail curves and goodness-of-fit distances.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;

use crate::distributions::{ld_pmf, sample_gen_ld, GenLdParams, LdParams};
use crate::error::{Error, Result};
use crate::simulate::SimOutcome;

/// Number of sites per mutant-cell count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalSfs {
    pub counts: BTreeMap<u64, u64>,
    pub n: u64,
    pub sites: u64,
}

impl EmpiricalSfs {
    pub fn from_counts(b: &[u32], n: u64) -> Self {
        let mut counts = BTreeMap::new();
        for &k in b {
            *counts.entry(k as u64).or_insert(0) += 1;
        }
        Self {
            counts,
            n,
            sites: b.len() as u64,
        }
    }

    pub fn count(&self, k: u64) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    /// Share of sites with exactly `k` mutant cells.
    pub fn normalized(&self, k: u64) -> f64 {
        if self.sites == 0 {
            0.0
        } else {
            self.count(k) as f64 / self.sites as f64
        }
    }

    /// Sites mutated in more than a fraction `a` of the cells.
    pub fn tail_count(&self, a: f64) -> u64 {
        let n = self.n as f64;
        self.counts
            .iter()
            .filter(|(&k, _)| k as f64 > a * n)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Adds another spectrum over the same `n`.
    pub fn merge(&mut self, other: &EmpiricalSfs) {
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.sites += other.sites;
    }

    /// `k,count` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "count"])?;
        for (k, c) in &self.counts {
            w.write_record([k.to_string(), c.to_string()])?;
        }
        w.flush()
    }
}

pub fn empirical_sfs(outcome: &SimOutcome) -> EmpiricalSfs {
    EmpiricalSfs::from_counts(&outcome.b, outcome.n as u64)
}

/// `(a, sites with B_i/n > a)` for each grid point.
pub fn sfs_tail_curve(outcome: &SimOutcome, grid: &[f64]) -> Result<Vec<(f64, u64)>> {
    if let Some(a) = grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::domain(format!("tail grid point {a} is not inside (0, 1)")));
    }
    let sfs = empirical_sfs(outcome);
    Ok(grid.iter().map(|&a| (a, sfs.tail_count(a))).collect())
}

/// `count` points log-spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (l + (h - l) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default fraction grid: 50 log-spaced points on `[0.05, 0.95]`.
pub fn default_fraction_grid() -> Vec<f64> {
    log_grid(0.05, 0.95, 50)
}

/// One row of `tail.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub a: f64,
    pub count: f64,
    pub theory_mean: f64,
}

/// `a,count,theory_mean` rows.
pub fn write_tail_csv<W: Write>(rows: &[TailRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "count", "theory_mean"])?;
    for r in rows {
        w.write_record([r.a.to_string(), r.count.to_string(), r.theory_mean.to_string()])?;
    }
    w.flush()
}

/// Sup distance between the empirical CDF of `sample` and the CDF of `pmf`.
///
/// Mass missing from a truncated `pmf` is placed just beyond its last entry.
pub fn ks_distance(sample: &[u64], pmf: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::domain("KS distance needs a nonempty sample"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable();
    let total = sorted.len() as f64;
    let last = *sorted.last().unwrap() as usize;
    let upto = last.max(pmf.len());
    let mut model_cdf = 0.0;
    let mut seen = 0usize;
    let mut worst: f64 = 0.0;
    for k in 0..=upto {
        model_cdf = if k < pmf.len() { model_cdf + pmf[k] } else { 1.0 };
        while seen < sorted.len() && sorted[seen] as usize <= k {
            seen += 1;
        }
        let emp = seen as f64 / total;
        worst = worst.max((emp - model_cdf.min(1.0)).abs());
    }
    Ok(worst)
}

/// Two-sample KS distance between integer samples.
pub fn two_sample_ks(x: &[u64], y: &[u64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("KS distance needs nonempty samples"));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_unstable();
    ys.sort_unstable();
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        worst = worst.max((i as f64 / nx - j as f64 / ny).abs());
    }
    Ok(worst)
}

/// Weighted mixture of generalised Luria-Delbrück laws.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTarget {
    components: Vec<(f64, GenLdParams)>,
}

impl MixtureTarget {
    pub fn new(components: Vec<(f64, GenLdParams)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("mixture needs at least one component"));
        }
        if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("mixture weights must be finite and >= 0"));
        }
        let s: f64 = components.iter().map(|c| c.0).sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("mixture weights sum to {s}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, GenLdParams)] {
        &self.components
    }
}

/// Mixture mass function with per-entry Monte Carlo standard errors
/// (zero where every contributing component is exact).
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePmf {
    pub mass: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Mass function of the mixture on `0..=m_max`.
///
/// Components that reduce to the classical law use the exact recursion;
/// the rest are estimated from `mc_draws` samples.
pub fn mixture_pmf<R: Rng + ?Sized>(
    target: &MixtureTarget,
    m_max: usize,
    mc_draws: usize,
    rng: &mut R,
) -> Result<MixturePmf> {
    let mut mass = vec![0.0; m_max + 1];
    let mut var = vec![0.0; m_max + 1];
    for &(w, p) in &target.components {
        if w == 0.0 {
            continue;
        }
        if p.is_classical() {
            let exact = ld_pmf(&LdParams::new(p.c)?, m_max);
            for (m, v) in exact.iter().enumerate() {
                mass[m] += w * v;
            }
            continue;
        }
        if mc_draws == 0 {
            return Err(Error::domain("a non-classical component needs mc_draws > 0"));
        }
        let mut hist = vec![0u64; m_max + 1];
        for _ in 0..mc_draws {
            let b = sample_gen_ld(&p, rng) as usize;
            if b <= m_max {
                hist[b] += 1;
            }
        }
        let d = mc_draws as f64;
        for (m, &h) in hist.iter().enumerate() {
            let f = h as f64 / d;
            mass[m] += w * f;
            var[m] += w * w * f * (1.0 - f) / d;
        }
    }
    Ok(MixturePmf {
        mass,
        std_err: var.into_iter().map(f64::sqrt).collect(),
    })
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance with its standard error under a normal-theory
/// fourth-moment estimate.
pub fn variance_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    (var, se)
}
