//! The Luria-Delbrück family and the birth-death time-t law behind it.
//!
//! `B = Y_1 + ... + Y_K` with `K ~ Poisson(c)` and `P[Y = j] = 1/(j(j+1))`
//! is the classical Luria-Delbrück law. The generalised law replaces each
//! `Y_k` by the size of a birth-death clone observed after an exponential
//! seeding age.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric, Poisson};

use crate::error::{Error, Result};

/// Parameters of the Luria-Delbrück distribution: `c` is the mean clone count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdParams {
    c: f64,
}

impl LdParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::domain(format!(
                "LD parameter c must be finite and >= 0, got {c}"
            )));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Parameters `(lambda, a, b, c)` of the generalised Luria-Delbrück law.
///
/// `lambda` is the rate of the exponential seeding age, `a`/`b` the clone
/// birth/death rates and `c` the Poisson mean of the clone count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenLdParams {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GenLdParams {
    pub fn new(lambda: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        let finite = [lambda, a, b, c].iter().all(|v| v.is_finite());
        if !finite || lambda <= 0.0 || a < 0.0 || b < 0.0 || c < 0.0 {
            return Err(Error::domain(format!(
                "generalised LD needs lambda > 0 and a, b, c >= 0 (got {lambda}, {a}, {b}, {c})"
            )));
        }
        Ok(Self { lambda, a, b, c })
    }

    /// True when the parameters reduce to the classical law `LD(c)`.
    pub fn is_classical(&self) -> bool {
        self.b == 0.0 && self.a == self.lambda
    }
}

/// Time-`t` law of a birth-death process started from a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdTimeLaw {
    pub birth: f64,
    pub death: f64,
    pub t: f64,
}

impl BdTimeLaw {
    pub fn new(birth: f64, death: f64, t: f64) -> Result<Self> {
        let finite = birth.is_finite() && death.is_finite() && t.is_finite();
        if !finite || birth < 0.0 || death < 0.0 || t < 0.0 {
            return Err(Error::domain(format!(
                "birth-death law needs finite nonnegative rates and time (got {birth}, {death}, {t})"
            )));
        }
        Ok(Self { birth, death, t })
    }

    /// `(alpha_t, beta_t)`: `P[Y(t) = 0] = alpha_t` and, given survival,
    /// `Y(t)` is geometric on `{1, 2, ...}` with `P[Y = k] ∝ beta_t^(k-1)`.
    pub fn extinction_and_ratio(&self) -> (f64, f64) {
        let (a, b, t) = (self.birth, self.death, self.t);
        if t == 0.0 || (a == 0.0 && b == 0.0) {
            return (0.0, 0.0);
        }
        let lambda = a - b;
        if lambda == 0.0 {
            let r = a * t / (1.0 + a * t);
            return (r, r);
        }
        if lambda > 0.0 {
            // divide through by e^{lambda t} to stay finite for large t
            let g = (-lambda * t).exp();
            let one_minus_g = -(-lambda * t).exp_m1();
            let denom = a - b * g;
            (b * one_minus_g / denom, a * one_minus_g / denom)
        } else {
            let f = (lambda * t).exp();
            let f_minus_1 = (lambda * t).exp_m1();
            let denom = a * f - b;
            (b * f_minus_1 / denom, a * f_minus_1 / denom)
        }
    }

    /// `E[Y(t)] = e^{(birth - death) t}`.
    pub fn mean(&self) -> f64 {
        ((self.birth - self.death) * self.t).exp()
    }
}

/// Uniform on `(0, 1]`.
#[inline]
fn open_closed_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Clone size from a uniform `u` in `(0, 1]`: `floor(1/u)`, inverting `P[Y >= j] = 1/j`.
#[inline]
pub fn y_from_uniform(u: f64) -> u64 {
    let y = (1.0 / u).floor();
    if y >= u64::MAX as f64 {
        u64::MAX
    } else {
        y as u64
    }
}

/// Draws `Y` with `P[Y = j] = 1/(j(j+1))`, `j >= 1`.
pub fn sample_y<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    y_from_uniform(open_closed_unit(rng))
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // rand_distr only rejects non-positive or non-finite means
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// One draw from `LD(c)`.
pub fn sample_ld<R: Rng + ?Sized>(p: &LdParams, rng: &mut R) -> u64 {
    let k = sample_poisson(p.c, rng);
    (0..k).fold(0u64, |acc, _| acc.saturating_add(sample_y(rng)))
}

/// Generating function `E[z^B] = (1 - z)^{c (1/z - 1)}` on `[0, 1]`.
pub fn ld_pgf(p: &LdParams, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!("pgf argument must lie in [0, 1], got {z}")));
    }
    if p.c == 0.0 || z == 1.0 {
        return Ok(1.0);
    }
    if z == 0.0 {
        return Ok((-p.c).exp());
    }
    Ok((p.c * (1.0 / z - 1.0) * (-z).ln_1p()).exp())
}

/// Exact mass function `P[B = m]`, `m = 0..=m_max`, by the compound-Poisson
/// recursion `P[B=m] = (c/m) * sum_j j q_j P[B=m-j]` with `j q_j = 1/(j+1)`.
pub fn ld_pmf(p: &LdParams, m_max: usize) -> Vec<f64> {
    let c = p.c;
    let mut pmf = Vec::with_capacity(m_max + 1);
    pmf.push((-c).exp());
    for m in 1..=m_max {
        let s: f64 = (1..=m).map(|j| pmf[m - j] / (j as f64 + 1.0)).sum();
        pmf.push(c / m as f64 * s);
    }
    pmf
}

/// Upper tail `P[B >= m]` from a mass function computed up to at least `m - 1`.
pub fn tail_from_pmf(pmf: &[f64], m: usize) -> f64 {
    let head: f64 = pmf.iter().take(m).sum();
    (1.0 - head).max(0.0)
}

/// Power-law approximation `P[B >= m] ≈ c/m`; `m P[B >= m] -> c` as `m -> ∞`.
pub fn ld_tail_asymptote(p: &LdParams, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("tail asymptote needs m >= 1"));
    }
    Ok(p.c / m as f64)
}

/// Draws `Y(t)` for a birth-death process started from one cell.
pub fn bd_time_law_sample<R: Rng + ?Sized>(law: &BdTimeLaw, rng: &mut R) -> u64 {
    if law.t == 0.0 || (law.birth == 0.0 && law.death == 0.0) {
        return 1;
    }
    let (extinct, ratio) = law.extinction_and_ratio();
    if rng.random::<f64>() < extinct {
        return 0;
    }
    if ratio <= 0.0 {
        return 1;
    }
    let success = (1.0 - ratio).clamp(f64::MIN_POSITIVE, 1.0);
    let extra = Geometric::new(success).expect("probability in (0, 1]").sample(rng);
    extra.saturating_add(1)
}

/// One draw from the generalised Luria-Delbrück law.
pub fn sample_gen_ld<R: Rng + ?Sized>(p: &GenLdParams, rng: &mut R) -> u64 {
    let k = sample_poisson(p.c, rng);
    if k == 0 {
        return 0;
    }
    let age = Exp::new(p.lambda).expect("lambda > 0");
    let mut total = 0u64;
    for _ in 0..k {
        let law = BdTimeLaw {
            birth: p.a,
            death: p.b,
            t: age.sample(rng),
        };
        total = total.saturating_add(bd_time_law_sample(&law, rng));
    }
    total
}

/// Generating function of the generalised law for a supercritical clone (`a > b`):
/// `exp(c (b/a - 1) F[1, λ/(a-b); 1 + λ/(a-b); (b/a - z)/(1 - z)])`.
pub fn gen_ld_pgf(p: &GenLdParams, z: f64) -> Result<f64> {
    if p.a <= p.b {
        return Err(Error::domain(format!(
            "closed-form generalised LD pgf needs a > b (got a = {}, b = {})",
            p.a, p.b
        )));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!("pgf argument must lie in [0, 1], got {z}")));
    }
    // clones are finite at finite ages, so the law is proper
    if p.c == 0.0 || z == 1.0 {
        return Ok(1.0);
    }
    let ratio = p.b / p.a;
    let order = p.lambda / (p.a - p.b);
    let x = (ratio - z) / (1.0 - z);
    let f = hyp2f1_special(order, x)?;
    Ok((p.c * (ratio - 1.0) * f).exp())
}

const HYP_TOL: f64 = 1e-12;
const HYP_MAX_TERMS: usize = 1_000_000;

/// `F[1, p; 1 + p; x] = p * sum_k x^k / (p + k)` for `x < 1`.
///
/// For `x < -1/2` the Pfaff transformation
/// `F[1, p; 1+p; x] = (1 - x)^{-1} F[1, 1; 1+p; x/(x-1)]` moves the argument
/// into `(1/3, 1)`, where the series has positive terms; the direct series
/// alternates and converges too slowly near `x = -1`.
pub fn hyp2f1_special(p: f64, x: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::domain(format!("hypergeometric order must be > 0, got {p}")));
    }
    if x >= 1.0 || x.is_nan() {
        return Err(Error::domain(format!("hypergeometric argument must be < 1, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x >= -0.5 {
        direct_series(p, x)
    } else {
        let w = x / (x - 1.0);
        Ok(pfaff_series(p, w)? / (1.0 - x))
    }
}

fn direct_series(p: f64, x: f64) -> Result<f64> {
    let ax = x.abs();
    let mut sum = 0.0;
    let mut power = 1.0;
    for k in 0..HYP_MAX_TERMS {
        let term = power * p / (p + k as f64);
        sum += term;
        power *= x;
        // |remainder| <= |x|^{k+1} p/(p+k+1) / (1 - |x|)
        let bound = power.abs() * p / (p + k as f64 + 1.0) / (1.0 - ax);
        if bound < HYP_TOL {
            return Ok(sum);
        }
    }
    Err(Error::Convergence(format!(
        "F[1, {p}; {}; {x}] did not reach {HYP_TOL} within {HYP_MAX_TERMS} terms",
        1.0 + p
    )))
}

/// `F[1, 1; 1+p; w]` for `w` in `[0, 1)`; terms `k!/(1+p)_k w^k`.
fn pfaff_series(p: f64, w: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 0..HYP_MAX_TERMS {
        sum += term;
        term *= (k as f64 + 1.0) / (k as f64 + 1.0 + p) * w;
        // later terms shrink by at least a factor w each
        if term / (1.0 - w) < HYP_TOL {
            return Ok(sum);
        }
    }
    Err(Error::Convergence(format!(
        "F[1, 1; {}; {w}] did not reach {HYP_TOL} within {HYP_MAX_TERMS} terms",
        1.0 + p
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;

    fn ld(c: f64) -> LdParams {
        LdParams::new(c).unwrap()
    }

    /// P[B = m] by conditioning on K and convolving the clone-size law.
    fn convolution_oracle(c: f64, m_max: usize) -> Vec<f64> {
        let q: Vec<f64> = (0..=m_max)
            .map(|j| {
                if j == 0 {
                    0.0
                } else {
                    1.0 / (j as f64 * (j as f64 + 1.0))
                }
            })
            .collect();
        let mut out = vec![0.0; m_max + 1];
        let mut conv = vec![0.0; m_max + 1];
        conv[0] = 1.0;
        let mut weight = (-c).exp();
        for k in 0..=m_max {
            for m in 0..=m_max {
                out[m] += weight * conv[m];
            }
            let mut next = vec![0.0; m_max + 1];
            for (i, &ci) in conv.iter().enumerate() {
                if ci == 0.0 {
                    continue;
                }
                for j in 1..=(m_max - i) {
                    next[i + j] += ci * q[j];
                }
            }
            conv = next;
            weight *= c / (k as f64 + 1.0);
        }
        out
    }

    #[test]
    fn y_inversion_examples() {
        assert_eq!(y_from_uniform(0.6), 1);
        assert_eq!(y_from_uniform(0.4), 2);
        assert_eq!(y_from_uniform(1.0), 1);
    }

    #[test]
    fn pgf_examples() {
        assert!((ld_pgf(&ld(2.0), 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(ld_pgf(&ld(3.7), 1.0).unwrap(), 1.0);
        assert!((ld_pgf(&ld(1.0), 0.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(ld_pgf(&ld(1.0), 1.5).is_err());
        assert!(ld_pgf(&ld(1.0), -0.1).is_err());
    }

    #[test]
    fn pmf_matches_convolution_oracle() {
        for c in [0.5, 1.0, 2.0] {
            let exact = ld_pmf(&ld(c), 30);
            let oracle = convolution_oracle(c, 30);
            for (m, (a, b)) in exact.iter().zip(&oracle).enumerate() {
                assert!((a - b).abs() < 1e-14, "c={c} m={m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn pmf_examples() {
        let p = ld_pmf(&ld(1.0), 3);
        assert!((p[0] - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((p[1] - 0.183_939_720_585_721_2).abs() < 1e-15);
        let p0 = ld_pmf(&ld(0.0), 5);
        assert_eq!(p0[0], 1.0);
        assert!(p0[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pmf_is_a_subprobability_that_fills_up() {
        for c in [0.5, 1.0, 2.0] {
            let p = ld_pmf(&ld(c), 10_000);
            assert!(p.iter().all(|&v| v >= 0.0));
            let mut partial = 0.0;
            let mut deficits = Vec::new();
            for (m, v) in p.iter().enumerate() {
                partial += v;
                assert!(partial <= 1.0 + 1e-12);
                if m % 1000 == 999 {
                    deficits.push(1.0 - partial);
                }
            }
            assert!(deficits.windows(2).all(|w| w[1] <= w[0]));
            assert!(1.0 - partial < 1e-2 * c);
        }
    }

    #[test]
    fn truncated_series_matches_pgf() {
        let c = 2.0;
        let p = ld_pmf(&ld(c), 10_000);
        let deficit = 1.0 - p.iter().sum::<f64>();
        for i in 0..=10 {
            let z = i as f64 / 10.0;
            let series: f64 = if z == 0.0 {
                p[0]
            } else {
                p.iter().rev().fold(0.0, |acc, &v| acc * z + v)
            };
            let exact = ld_pgf(&ld(c), z).unwrap();
            // the missing terms sum to at most deficit * z^{m_max+1} <= deficit
            assert!((exact - series).abs() <= deficit + 1e-12, "z={z}");
        }
    }

    #[test]
    fn tail_asymptote_examples() {
        assert!((ld_tail_asymptote(&ld(2.0), 200).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(ld_tail_asymptote(&ld(0.0), 17).unwrap(), 0.0);
        assert!(ld_tail_asymptote(&ld(1.0), 0).is_err());
        let p = ld_pmf(&ld(2.0), 400);
        let scaled = 200.0 * tail_from_pmf(&p, 200);
        // recursion gives 2.1002
        assert!((scaled - 2.0).abs() <= 0.15, "{scaled}");
        for c in [1.0f64, 2.0] {
            let m = (100.0 * c) as usize;
            let p = ld_pmf(&ld(c), m);
            let scaled = m as f64 * tail_from_pmf(&p, m);
            assert!((scaled - c).abs() <= 0.1 * c, "c={c}: {scaled}");
        }
    }

    #[test]
    fn bd_law_closed_forms() {
        let t = 0.7;
        let yule = BdTimeLaw::new(1.0, 0.0, t).unwrap();
        let (ext, ratio) = yule.extinction_and_ratio();
        assert_eq!(ext, 0.0);
        assert!((ratio - (1.0 - (-t).exp())).abs() < 1e-15);

        let crit = BdTimeLaw::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(crit.extinction_and_ratio(), (0.5, 0.5));

        // mean (1 - alpha)/(1 - beta) equals e^{lambda t} on both sides of criticality
        for (a, b) in [(2.0, 0.5), (0.5, 2.0), (1.0, 0.3), (0.0, 1.0)] {
            let law = BdTimeLaw::new(a, b, 1.3).unwrap();
            let (ext, ratio) = law.extinction_and_ratio();
            let mean = (1.0 - ext) / (1.0 - ratio);
            assert!((mean - law.mean()).abs() < 1e-12 * law.mean().max(1.0), "{a} {b}");
        }

        // huge t stays finite
        let (ext, ratio) = BdTimeLaw::new(2.0, 1.0, 1e4).unwrap().extinction_and_ratio();
        assert!((ext - 0.5).abs() < 1e-12 && ratio.is_finite());
    }

    #[test]
    fn bd_degenerate_cases() {
        let mut rng = StreamFactory::new(3).replicate(0);
        let zero_t = BdTimeLaw::new(2.0, 1.0, 0.0).unwrap();
        let frozen = BdTimeLaw::new(0.0, 0.0, 5.0).unwrap();
        for _ in 0..100 {
            assert_eq!(bd_time_law_sample(&zero_t, &mut rng), 1);
            assert_eq!(bd_time_law_sample(&frozen, &mut rng), 1);
        }
        assert!(BdTimeLaw::new(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hyp2f1_examples() {
        assert_eq!(hyp2f1_special(3.0, 0.0).unwrap(), 1.0);
        let expect = 2.0 * std::f64::consts::LN_2;
        assert!((hyp2f1_special(1.0, 0.5).unwrap() - expect).abs() < 1e-12);

        let brute: f64 = (0..10_000).map(|k| 2.0 * 0.25f64.powi(k) / (2.0 + k as f64)).sum();
        assert!((hyp2f1_special(2.0, 0.25).unwrap() - brute).abs() < 1e-10);
    }

    #[test]
    fn hyp2f1_transformation_branch() {
        // F[1,1;2;x] = -ln(1-x)/x holds on both sides of x = -1
        for x in [-0.9f64, -1.0, -3.0, -50.0, -1e4] {
            let exact = -(-x).ln_1p() / x;
            let got = hyp2f1_special(1.0, x).unwrap();
            assert!((got - exact).abs() < 1e-10, "x={x}: {got} vs {exact}");
        }
        // continuity across the branch point for a non-integer order
        let below = hyp2f1_special(0.7, -1.0 - 1e-9).unwrap();
        let above = hyp2f1_special(0.7, -1.0 + 1e-9).unwrap();
        assert!((below - above).abs() < 1e-8);
        assert!(hyp2f1_special(1.0, 1.0).is_err());
        assert!(hyp2f1_special(0.0, 0.5).is_err());
    }

    #[test]
    fn hyp2f1_reports_non_convergence() {
        let err = hyp2f1_special(1.0, 1.0 - 1e-9).unwrap_err();
        assert!(matches!(err, Error::Convergence(_)));
    }

    #[test]
    fn gen_ld_pgf_degenerates_to_ld() {
        for c in [0.5, 2.0] {
            let g = GenLdParams::new(1.0, 1.0, 0.0, c).unwrap();
            for i in 1..=9 {
                let z = i as f64 / 10.0;
                let a = gen_ld_pgf(&g, z).unwrap();
                let b = ld_pgf(&ld(c), z).unwrap();
                assert!(((a - b) / b).abs() <= 1e-8, "c={c} z={z}: {a} vs {b}");
            }
        }
        let zero = GenLdParams::new(1.0, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(gen_ld_pgf(&zero, 0.3).unwrap(), 1.0);
        let sub = GenLdParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(gen_ld_pgf(&sub, 0.3).is_err());
        let g = GenLdParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(gen_ld_pgf(&g, 1.0).unwrap(), 1.0);
        assert!(gen_ld_pgf(&g, 1.5).is_err());
    }

    #[test]
    fn gen_ld_pgf_is_lambda_scale_free() {
        let base = gen_ld_pgf(&GenLdParams::new(1.0, 1.3, 0.4, 2.0).unwrap(), 0.6).unwrap();
        for s in [0.5, 2.0, 7.0] {
            let scaled = GenLdParams::new(s, 1.3 * s, 0.4 * s, 2.0).unwrap();
            assert!((gen_ld_pgf(&scaled, 0.6).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_parameter_samplers() {
        let mut rng = StreamFactory::new(11).replicate(0);
        let g = GenLdParams::new(1.0, 1.0, 0.5, 0.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_ld(&ld(0.0), &mut rng), 0);
            assert_eq!(sample_gen_ld(&g, &mut rng), 0);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(LdParams::new(-1.0).is_err());
        assert!(LdParams::new(f64::INFINITY).is_err());
        assert!(GenLdParams::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(GenLdParams::new(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(GenLdParams::new(1.0, 1.0, 0.0, 1.0).unwrap().is_classical());
    }
}
