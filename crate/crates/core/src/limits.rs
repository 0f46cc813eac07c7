//! Limit objects for mutation frequencies at positive population fractions.
//!
//! Descendant fractions of the Yule tree are products of symmetric uniform
//! splits: `P_{x0} = P_x U`, `P_{x1} = P_x (1 - U)`. Attaching independent
//! Poisson(eta) mutation counts to every non-root node gives the Cox point
//! measure describing the site frequency spectrum at positive fractions.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YuleNode {
    pub parent: Option<u32>,
    pub depth: u32,
    /// 0 for the first daughter, 1 for the second (0 for the root).
    pub side: u8,
    pub value: f64,
}

/// A pruned draw of the limiting descendant fractions `P_x`.
///
/// Node 0 is the root with value 1. Parents precede children. Subtrees whose
/// value falls below `prune_eps` are not expanded; since `P_x` decreases along
/// every path, everything above `prune_eps` is retained.
#[derive(Debug, Clone)]
pub struct YuleFractions {
    nodes: Vec<YuleNode>,
    prune_eps: f64,
}

impl YuleFractions {
    pub fn prune_eps(&self) -> f64 {
        self.prune_eps
    }

    pub fn nodes(&self) -> &[YuleNode] {
        &self.nodes
    }

    /// Non-root nodes as `(index, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().enumerate().skip(1).map(|(i, n)| (i, n.value))
    }

    /// Binary address of node `i`, e.g. `"010"`; empty for the root.
    pub fn address(&self, mut i: usize) -> String {
        let mut bits = Vec::new();
        while let Some(p) = self.nodes[i].parent {
            bits.push(if self.nodes[i].side == 0 { '0' } else { '1' });
            i = p as usize;
        }
        bits.iter().rev().collect()
    }

    /// Values of the node reached by always taking the first daughter, by depth.
    pub fn leftmost_path(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut current = 0u32;
        loop {
            let next = self
                .nodes
                .iter()
                .enumerate()
                .skip(current as usize + 1)
                .find(|(_, n)| n.parent == Some(current) && n.side == 0);
            match next {
                Some((i, n)) => {
                    out.push(n.value);
                    current = i as u32;
                }
                None => return out,
            }
        }
    }
}

/// Draws the descendant fractions, pruning below `prune_eps`.
pub fn sample_yule_fractions<R: Rng + ?Sized>(prune_eps: f64, rng: &mut R) -> Result<YuleFractions> {
    sample_yule_fractions_to_depth(prune_eps, u32::MAX, rng)
}

/// As [`sample_yule_fractions`], additionally stopping at `max_depth` generations.
pub fn sample_yule_fractions_to_depth<R: Rng + ?Sized>(
    prune_eps: f64,
    max_depth: u32,
    rng: &mut R,
) -> Result<YuleFractions> {
    if !(prune_eps > 0.0 && prune_eps < 1.0) {
        return Err(Error::domain(format!(
            "prune threshold must lie in (0, 1), got {prune_eps}"
        )));
    }
    let mut nodes = vec![YuleNode {
        parent: None,
        depth: 0,
        side: 0,
        value: 1.0,
    }];
    let mut stack = vec![0u32];
    while let Some(i) = stack.pop() {
        let parent = nodes[i as usize];
        if parent.depth >= max_depth {
            continue;
        }
        let u = rng.random::<f64>();
        for (side, share) in [(0u8, u), (1u8, 1.0 - u)] {
            let value = parent.value * share;
            if value < prune_eps {
                continue;
            }
            nodes.push(YuleNode {
                parent: Some(i),
                depth: parent.depth + 1,
                side,
                value,
            });
            stack.push(nodes.len() as u32 - 1);
        }
    }
    Ok(YuleFractions { nodes, prune_eps })
}

/// Weighted atoms on `(0, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointMeasure {
    pub atoms: Vec<(f64, u64)>,
}

impl PointMeasure {
    pub fn is_empty(&self) -> bool {
        self.atoms.iter().all(|a| a.1 == 0)
    }

    pub fn total(&self) -> u64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Mass of the open interval `(a, b)`.
    pub fn mass_in(&self, a: f64, b: f64) -> u64 {
        self.atoms.iter().filter(|(x, _)| *x > a && *x < b).map(|a| a.1).sum()
    }

    /// Mass of `(a, 1]`.
    pub fn mass_above(&self, a: f64) -> u64 {
        self.atoms.iter().filter(|(x, _)| *x > a).map(|a| a.1).sum()
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::domain(format!("eta must be finite and >= 0, got {eta}")));
    }
    Ok(())
}

/// Draws the Cox point measure `sum_x M_x δ_{P_x}` with `M_x ~ Poisson(eta)`.
///
/// Interval masses are exact in law for intervals inside `[prune_eps, 1]`.
pub fn sample_cox_sfs<R: Rng + ?Sized>(eta: f64, prune_eps: f64, rng: &mut R) -> Result<PointMeasure> {
    check_eta(eta)?;
    let tree = sample_yule_fractions(prune_eps, rng)?;
    let mut atoms = Vec::new();
    if eta > 0.0 {
        for (_, value) in tree.entries() {
            let m = poisson(eta, rng);
            if m > 0 {
                atoms.push((value, m));
            }
        }
    }
    Ok(PointMeasure { atoms })
}

/// A node of the immortal skeleton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonNode {
    pub parent: Option<u32>,
    /// Share of the skeleton's final cells descending from this node.
    pub fraction: f64,
    /// Time between the node's birth and its split, if it split before the stop.
    pub lifetime: Option<f64>,
    /// Divisions witnessed over the completed lifetime: the one that created the
    /// node (absent for the root) plus those that shed a mortal daughter.
    pub divisions: u64,
}

/// One realisation of the immortal skeleton of a supercritical birth-death process.
#[derive(Debug, Clone)]
pub struct SkeletonDraw {
    pub nodes: Vec<SkeletonNode>,
    pub skeleton_n: usize,
}

/// Grows the immortal skeleton as a Yule process of rate `alpha - beta` up to
/// `skeleton_n` cells and marks mortal-daughter divisions at rate `2 beta`
/// along each completed lifetime.
pub fn sample_conjecture_skeleton<R: Rng + ?Sized>(
    alpha: f64,
    beta: f64,
    skeleton_n: usize,
    rng: &mut R,
) -> Result<SkeletonDraw> {
    if !(alpha.is_finite() && beta.is_finite() && beta >= 0.0 && alpha > beta) {
        return Err(Error::domain(format!(
            "skeleton needs alpha > beta >= 0 (got alpha = {alpha}, beta = {beta})"
        )));
    }
    if skeleton_n == 0 {
        return Err(Error::domain("skeleton size must be >= 1"));
    }
    let growth = alpha - beta;
    let mut parent: Vec<Option<u32>> = vec![None];
    let mut birth = vec![0.0f64];
    let mut lifetime: Vec<Option<f64>> = vec![None];
    let mut living: Vec<u32> = vec![0];
    let mut now = 0.0;
    while living.len() < skeleton_n {
        now += Exp::new(growth * living.len() as f64)
            .expect("positive rate")
            .sample(rng);
        let idx = rng.random_range(0..living.len());
        let x = living[idx];
        lifetime[x as usize] = Some(now - birth[x as usize]);
        for slot in 0..2 {
            let child = parent.len() as u32;
            parent.push(Some(x));
            birth.push(now);
            lifetime.push(None);
            if slot == 0 {
                living[idx] = child;
            } else {
                living.push(child);
            }
        }
    }
    let mut counts = vec![0u64; parent.len()];
    for &leaf in &living {
        counts[leaf as usize] = 1;
    }
    for k in (1..parent.len()).rev() {
        if let Some(p) = parent[k] {
            counts[p as usize] += counts[k];
        }
    }
    let total = living.len() as f64;
    let nodes = (0..parent.len())
        .map(|k| {
            let divisions = match lifetime[k] {
                Some(life) => {
                    let shed = poisson(2.0 * beta * life, rng);
                    shed + u64::from(parent[k].is_some())
                }
                None => 0,
            };
            SkeletonNode {
                parent: parent[k],
                fraction: counts[k] as f64 / total,
                lifetime: lifetime[k],
                divisions,
            }
        })
        .collect();
    Ok(SkeletonDraw { nodes, skeleton_n })
}

/// Point measure of the conjectured limit with death: every witnessed division
/// of a completed skeleton node adds Poisson(eta) mutations at the node's fraction.
///
/// The dependence between fractions and division counts for `beta > 0` is
/// whatever the skeleton construction produces; it is a heuristic model, not
/// an established limit. With `beta = 0` it reduces to [`sample_cox_sfs`].
pub fn sample_conjecture_sfs<R: Rng + ?Sized>(
    alpha: f64,
    beta: f64,
    eta: f64,
    skeleton_n: usize,
    rng: &mut R,
) -> Result<PointMeasure> {
    check_eta(eta)?;
    let draw = sample_conjecture_skeleton(alpha, beta, skeleton_n, rng)?;
    Ok(skeleton_measure(&draw, eta, rng))
}

/// Attaches Poisson(eta) mutations per witnessed division of each completed node.
pub fn skeleton_measure<R: Rng + ?Sized>(draw: &SkeletonDraw, eta: f64, rng: &mut R) -> PointMeasure {
    let mut atoms = Vec::new();
    if eta > 0.0 {
        for node in draw.nodes.iter().filter(|n| n.lifetime.is_some()) {
            let m = poisson(eta * node.divisions as f64, rng);
            if m > 0 {
                atoms.push((node.fraction, m));
            }
        }
    }
    PointMeasure { atoms }
}

fn check_fraction(a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!("fraction must lie in (0, 1), got {a}")));
    }
    Ok(())
}

/// Mean number of sites mutated in more than a fraction `a` of cells: `2 eta (1/a - 1)`.
pub fn mean_sfs_tail(eta: f64, a: f64) -> Result<f64> {
    check_eta(eta)?;
    check_fraction(a)?;
    Ok(2.0 * eta * (1.0 / a - 1.0))
}

/// Small-mu limit of `mu^{-1} P[B/n > a]`: `2 (1/a - 1)`.
pub fn tail_prob_asymptote(a: f64) -> Result<f64> {
    check_fraction(a)?;
    Ok(2.0 * (1.0 / a - 1.0))
}

fn check_isa(n: u64, mu: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("ISA audit needs n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!(
            "mutation probability must lie in [0, 1], got {mu}"
        )));
    }
    Ok(())
}

/// `P[X >= 2]` for `X ~ Binomial(2n - 2, mu)`: the chance that one site mutates
/// at least twice before `n` cells are reached.
pub fn isa_violation_prob(n: u64, mu: f64) -> Result<f64> {
    check_isa(n, mu)?;
    if mu == 0.0 {
        return Ok(0.0);
    }
    if mu == 1.0 {
        return Ok(1.0);
    }
    let m = 2.0 * (n as f64) - 2.0;
    let log_keep = (-mu).ln_1p();
    if m * mu / (1.0 - mu) < 1.0 {
        // sum the upper tail directly; 1 - P0 - P1 would cancel catastrophically
        let mut term = (m * (m - 1.0) / 2.0).ln() + 2.0 * mu.ln() + (m - 2.0) * log_keep;
        term = term.exp();
        let odds = mu / (1.0 - mu);
        let mut sum = 0.0;
        let mut k = 2.0;
        while term > 0.0 && k <= m {
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            term *= (m - k) / (k + 1.0) * odds;
            k += 1.0;
        }
        return Ok(sum.min(1.0));
    }
    let none = -(m * log_keep).exp_m1();
    let once = m * mu * ((m - 1.0) * log_keep).exp();
    Ok((none - once).clamp(0.0, 1.0))
}

/// Expected number of sites violating the infinite sites assumption.
pub fn expected_isa_violations(n: u64, mu: f64, sites: u64) -> Result<f64> {
    Ok(sites as f64 * isa_violation_prob(n, mu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;

    #[test]
    fn yule_partition_of_unity() {
        let mut rng = StreamFactory::new(1).replicate(0);
        for _ in 0..50 {
            let y = sample_yule_fractions(1e-3, &mut rng).unwrap();
            let nodes = y.nodes();
            let mut child_sum = vec![0.0; nodes.len()];
            let mut child_count = vec![0; nodes.len()];
            for n in &nodes[1..] {
                let p = n.parent.unwrap() as usize;
                child_sum[p] += n.value;
                child_count[p] += 1;
                assert!(n.value >= 1e-3);
            }
            for (i, n) in nodes.iter().enumerate() {
                if child_count[i] == 2 {
                    assert!((child_sum[i] - n.value).abs() < 1e-12);
                }
            }
            let first: Vec<_> = nodes.iter().filter(|n| n.depth == 1).collect();
            if first.len() == 2 {
                assert!((first[0].value + first[1].value - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_generations_sum_to_one() {
        let mut rng = StreamFactory::new(2).replicate(0);
        let y = sample_yule_fractions_to_depth(1e-300, 6, &mut rng).unwrap();
        for l in 1..=6 {
            let s: f64 = y.nodes().iter().filter(|n| n.depth == l).map(|n| n.value).sum();
            assert!((s - 1.0).abs() < 1e-12, "generation {l}");
        }
        assert_eq!(y.nodes().len(), 127);
        assert_eq!(y.leftmost_path().len(), 6);
        assert_eq!(y.address(y.nodes().len() - 1).len(), 6);
    }

    #[test]
    fn cox_with_zero_eta_is_empty() {
        let mut rng = StreamFactory::new(3).replicate(0);
        for _ in 0..10 {
            assert!(sample_cox_sfs(0.0, 0.01, &mut rng).unwrap().atoms.is_empty());
            assert!(sample_conjecture_sfs(1.0, 0.3, 0.0, 100, &mut rng)
                .unwrap()
                .atoms
                .is_empty());
        }
        assert!(sample_cox_sfs(-1.0, 0.01, &mut rng).is_err());
        assert!(sample_cox_sfs(1.0, 1.0, &mut rng).is_err());
        assert!(sample_conjecture_sfs(1.0, 1.0, 1.0, 10, &mut rng).is_err());
    }

    #[test]
    fn point_measure_intervals() {
        let m = PointMeasure {
            atoms: vec![(0.2, 1), (0.5, 2), (0.9, 3), (1.0, 4)],
        };
        assert_eq!(m.mass_in(0.2, 1.0), 5);
        assert_eq!(m.mass_above(0.2), 9);
        assert_eq!(m.total(), 10);
    }

    #[test]
    fn skeleton_without_death_witnesses_one_division_per_node() {
        let mut rng = StreamFactory::new(4).replicate(0);
        let draw = sample_conjecture_skeleton(1.0, 0.0, 200, &mut rng).unwrap();
        assert_eq!(draw.nodes[0].fraction, 1.0);
        assert_eq!(draw.nodes[0].divisions, 0);
        for n in &draw.nodes[1..] {
            let expect = u64::from(n.lifetime.is_some());
            assert_eq!(n.divisions, expect);
        }
        assert_eq!(draw.nodes.len(), 2 * 200 - 1);
    }

    #[test]
    fn formula_examples() {
        assert!((mean_sfs_tail(1.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((mean_sfs_tail(0.5, 0.1).unwrap() - 9.0).abs() < 1e-12);
        assert!(mean_sfs_tail(1.0, 1.0 - 1e-12).unwrap() < 1e-11);
        assert!(mean_sfs_tail(1.0, 1.0).is_err());
        assert!((tail_prob_asymptote(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((tail_prob_asymptote(0.25).unwrap() - 6.0).abs() < 1e-15);
        assert!(tail_prob_asymptote(0.0).is_err());
    }

    #[test]
    fn isa_examples() {
        assert_eq!(isa_violation_prob(2, 0.5).unwrap(), 0.25);
        assert_eq!(isa_violation_prob(1000, 0.0).unwrap(), 0.0);
        let p = isa_violation_prob(1_000_000_000, 1e-9).unwrap();
        let poisson_limit = 1.0 - 3.0 * (-2.0f64).exp();
        assert!((p - poisson_limit).abs() < 1e-3, "{p}");
        assert!((expected_isa_violations(2, 0.5, 4).unwrap() - 1.0).abs() < 1e-15);
        let e = expected_isa_violations(1_000_000_000, 1e-9, 3_000_000_000).unwrap();
        assert!((e / 1.78e9 - 1.0).abs() < 5e-3, "{e}");
        assert!(isa_violation_prob(1, 0.5).is_err());
        assert!(isa_violation_prob(5, 1.5).is_err());
    }

    /// Both evaluation routes agree with an exact binomial sum on small cases.
    #[test]
    fn isa_matches_binomial_enumeration() {
        for n in [2u64, 3, 10, 50] {
            for mu in [1e-4f64, 0.01, 0.2, 0.7] {
                let m = 2 * n - 2;
                let mut p01 = 0.0;
                for k in 0..2.min(m + 1) {
                    let choose = if k == 0 { 1.0 } else { m as f64 };
                    p01 += choose * mu.powi(k as i32) * (1.0 - mu).powi((m - k) as i32);
                }
                let got = isa_violation_prob(n, mu).unwrap();
                assert!((got - (1.0 - p01)).abs() < 1e-12, "n={n} mu={mu}");
            }
        }
    }
}
