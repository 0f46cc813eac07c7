//! Single-site embedded chains indexed by population size.
//!
//! In the pure-birth model, the number of cells mutated at one site after
//! `r` cells is a Markov chain in `r`: the next division hits a mutant with
//! probability `j/r`, a mutant daughter reverts with probability `mu/3`, and
//! an unmutated daughter mutates with probability `mu`.

use rand::Rng;

use crate::error::{Error, Result};

fn check_state(r: u64, j: u64, mu: f64) -> Result<()> {
    if r == 0 {
        return Err(Error::domain("chain population size must be >= 1"));
    }
    if j > r {
        return Err(Error::domain(format!("chain state {j} exceeds population size {r}")));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!(
            "mutation probability must lie in [0, 1], got {mu}"
        )));
    }
    Ok(())
}

/// Transition law of the mutant count: probabilities of moving to
/// `j - 1, j, j + 1, j + 2`.
pub fn mutant_chain_probs(r: u64, j: u64, mu: f64) -> Result<[f64; 4]> {
    check_state(r, j, mu)?;
    let hit = j as f64 / r as f64;
    let miss = 1.0 - hit;
    let rev = mu / 3.0;
    Ok([
        hit * rev * rev,
        hit * 2.0 * rev * (1.0 - rev) + miss * (1.0 - mu) * (1.0 - mu),
        hit * (1.0 - rev) * (1.0 - rev) + miss * 2.0 * mu * (1.0 - mu),
        miss * mu * mu,
    ])
}

/// Transition law of the mutant-descendant count: probabilities of moving to
/// `j, j + 1, j + 2`.
pub fn descendant_chain_probs(r: u64, j: u64, mu: f64) -> Result<[f64; 3]> {
    check_state(r, j, mu)?;
    let hit = j as f64 / r as f64;
    let miss = 1.0 - hit;
    Ok([
        miss * (1.0 - mu) * (1.0 - mu),
        hit + miss * 2.0 * mu * (1.0 - mu),
        miss * mu * mu,
    ])
}

fn pick<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // round-off: fall back to the last outcome with positive weight
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// One step `B^{r} -> B^{r+1}` of the mutant count.
pub fn embedded_chain_step_b<R: Rng + ?Sized>(r: u64, j: u64, mu: f64, rng: &mut R) -> Result<u64> {
    let probs = mutant_chain_probs(r, j, mu)?;
    Ok(j + pick(&probs, rng) as u64 - 1)
}

/// One step of the mutant-descendant count.
pub fn embedded_chain_step_bhat<R: Rng + ?Sized>(r: u64, j: u64, mu: f64, rng: &mut R) -> Result<u64> {
    let probs = descendant_chain_probs(r, j, mu)?;
    Ok(j + pick(&probs, rng) as u64)
}

/// One step of `(B, B_hat)` on a common division, so that `B <= B_hat` holds pathwise.
///
/// The dividing cell is a mutant, an unmutated descendant of a mutant, or
/// neither; each marginal follows its own chain.
pub fn coupled_chain_step<R: Rng + ?Sized>(r: u64, state: (u64, u64), mu: f64, rng: &mut R) -> Result<(u64, u64)> {
    let (j, jh) = state;
    check_state(r, jh, mu)?;
    if j > jh {
        return Err(Error::domain(format!("coupled state ({j}, {jh}) violates B <= B_hat")));
    }
    let u = rng.random_range(0..r);
    let mut flips = |p: f64| (rng.random::<f64>() < p) as u64 + (rng.random::<f64>() < p) as u64;
    Ok(if u < j {
        let kept = 2 - flips(mu / 3.0);
        (j - 1 + kept, jh + 1)
    } else if u < jh {
        (j + flips(mu), jh + 1)
    } else {
        let m = flips(mu);
        (j + m, jh + m)
    })
}

/// Runs the mutant chain from one unmutated cell to `n` cells.
pub fn run_mutant_chain<R: Rng + ?Sized>(n: u64, mu: f64, rng: &mut R) -> Result<u64> {
    if n == 0 {
        return Err(Error::domain("target population size must be >= 1"));
    }
    let mut j = 0;
    for r in 1..n {
        j = embedded_chain_step_b(r, j, mu, rng)?;
    }
    Ok(j)
}

/// Empirical `P[B/n > a]` with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub a: f64,
    pub prob: f64,
    pub std_err: f64,
}

/// Estimates `P[n^{-1} B^{n,mu} > a]` on `grid` from `replicates` chain runs.
pub fn single_site_tail<R: Rng + ?Sized>(
    n: u64,
    mu: f64,
    replicates: u64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<TailPoint>> {
    if let Some(a) = grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::domain(format!("tail grid point {a} is not inside (0, 1)")));
    }
    if replicates == 0 {
        return Err(Error::domain("need at least one replicate"));
    }
    let mut draws = Vec::with_capacity(replicates as usize);
    for _ in 0..replicates {
        draws.push(run_mutant_chain(n, mu, rng)?);
    }
    Ok(tail_points(&draws, n, grid))
}

/// Tail frequencies of `draws / n` on `grid`.
pub fn tail_points(draws: &[u64], n: u64, grid: &[f64]) -> Vec<TailPoint> {
    let total = draws.len() as f64;
    grid.iter()
        .map(|&a| {
            let hits = draws.iter().filter(|&&b| b as f64 > a * n as f64).count() as f64;
            let prob = hits / total;
            TailPoint {
                a,
                prob,
                std_err: (prob * (1.0 - prob) / total).sqrt(),
            }
        })
        .collect()
}
