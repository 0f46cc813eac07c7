use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nucleotide::Nucleotide;

const ROW_SUM_TOL: f64 = 1e-12;

/// Sparse genome: the sites where a cell differs from the founder, sorted by site.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Genome(Vec<(u32, Nucleotide)>);

impl Genome {
    pub fn reference() -> Self {
        Genome(Vec::new())
    }

    pub fn from_diffs(mut diffs: Vec<(u32, Nucleotide)>) -> Self {
        diffs.sort_unstable_by_key(|d| d.0);
        diffs.dedup_by_key(|d| d.0);
        Genome(diffs)
    }

    pub fn diffs(&self) -> &[(u32, Nucleotide)] {
        &self.0
    }

    pub fn is_reference(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, site: u32) -> Option<Nucleotide> {
        self.0.binary_search_by_key(&site, |d| d.0).ok().map(|i| self.0[i].1)
    }

    /// Sets `site` to `value`; matching the founder's base removes the entry.
    pub(crate) fn set(&mut self, site: u32, value: Nucleotide, founder: Nucleotide) {
        match self.0.binary_search_by_key(&site, |d| d.0) {
            Ok(i) if value == founder => {
                self.0.remove(i);
            }
            Ok(i) => self.0[i].1 = value,
            Err(_) if value == founder => {}
            Err(i) => self.0.insert(i, (site, value)),
        }
    }

    /// `site:base` pairs joined by `;`.
    pub fn to_pairs_string(&self) -> String {
        self.0
            .iter()
            .map(|(s, n)| format!("{s}:{n}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Row-stochastic 4x4 matrix of per-division nucleotide transition probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix(pub [[f64; 4]; 4]);

impl RateMatrix {
    /// Off-diagonal `mu/3`, diagonal `1 - mu`.
    pub fn uniform(mu: f64) -> Self {
        let mut m = [[mu / 3.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0 - mu;
        }
        RateMatrix(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.0.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::config(format!(
                    "rate matrix row {i} has an entry outside [0, 1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::config(format!("rate matrix row {i} sums to {s}, not 1")));
            }
        }
        Ok(())
    }

    /// Probability that a daughter's base differs from the parent's `from`.
    #[inline]
    pub fn change_prob(&self, from: Nucleotide) -> f64 {
        1.0 - self.0[from.index()][from.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MutationKind {
    /// Every base mutates with probability `mu`, to each other base with `mu/3`.
    Uniform { mu: f64 },
    /// Site `i` uses `matrices[assignment[i]]`.
    PerSite {
        matrices: Vec<RateMatrix>,
        assignment: Vec<u32>,
    },
}

/// Per-site mutation probabilities applied to each daughter at every division.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationModel {
    reference: Vec<Nucleotide>,
    kind: MutationKind,
}

impl MutationModel {
    /// Uniform rate `mu` on `sites` sites; the founder genome cycles `ACGT`.
    pub fn uniform(sites: usize, mu: f64) -> Result<Self> {
        let reference = (0..sites).map(Nucleotide::from_index).collect();
        Self::uniform_with_reference(reference, mu)
    }

    pub fn uniform_with_reference(reference: Vec<Nucleotide>, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::domain(format!(
                "mutation probability must lie in [0, 1], got {mu}"
            )));
        }
        Self::checked(reference, MutationKind::Uniform { mu })
    }

    /// Site-specific matrices; `assignment[i]` picks the matrix of site `i`.
    pub fn per_site(reference: Vec<Nucleotide>, matrices: Vec<RateMatrix>, assignment: Vec<u32>) -> Result<Self> {
        if assignment.len() != reference.len() {
            return Err(Error::config(format!(
                "{} matrix assignments for {} sites",
                assignment.len(),
                reference.len()
            )));
        }
        for m in &matrices {
            m.validate()?;
        }
        if let Some(bad) = assignment.iter().find(|&&a| a as usize >= matrices.len()) {
            return Err(Error::config(format!("site assigned to missing matrix {bad}")));
        }
        Self::checked(reference, MutationKind::PerSite { matrices, assignment })
    }

    fn checked(reference: Vec<Nucleotide>, kind: MutationKind) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::config("the genome needs at least one site"));
        }
        if reference.len() > u32::MAX as usize {
            return Err(Error::Resource(format!(
                "{} sites exceed the u32 site index",
                reference.len()
            )));
        }
        Ok(Self { reference, kind })
    }

    pub fn sites(&self) -> usize {
        self.reference.len()
    }

    pub fn reference(&self) -> &[Nucleotide] {
        &self.reference
    }

    pub fn kind(&self) -> &MutationKind {
        &self.kind
    }

    /// Uniform rate, if the model has one.
    pub fn uniform_mu(&self) -> Option<f64> {
        match self.kind {
            MutationKind::Uniform { mu } => Some(mu),
            MutationKind::PerSite { .. } => None,
        }
    }

    /// Full transition matrix of `site`.
    pub fn matrix(&self, site: usize) -> RateMatrix {
        match &self.kind {
            MutationKind::Uniform { mu } => RateMatrix::uniform(*mu),
            MutationKind::PerSite { matrices, assignment } => matrices[assignment[site] as usize],
        }
    }

    pub fn max_change_prob(&self) -> f64 {
        match &self.kind {
            MutationKind::Uniform { mu } => *mu,
            MutationKind::PerSite { matrices, .. } => matrices
                .iter()
                .flat_map(|m| Nucleotide::ALL.map(|n| m.change_prob(n)))
                .fold(0.0, f64::max),
        }
    }

    pub(crate) fn sampler(&self) -> MutationSampler<'_> {
        let p_max = self.max_change_prob();
        let skip = if p_max > 0.0 {
            Some(Geometric::new(p_max).expect("probability in (0, 1]"))
        } else {
            None
        };
        MutationSampler {
            model: self,
            p_max,
            skip,
        }
    }
}

/// Draws the set of sites that change in one daughter.
///
/// Candidate sites are visited by geometric skipping at the largest change
/// probability `p_max` and thinned to each site's actual probability, so the
/// cost per daughter is `O(1 + p_max |S|)` instead of `O(|S|)`.
pub(crate) struct MutationSampler<'a> {
    model: &'a MutationModel,
    p_max: f64,
    skip: Option<Geometric>,
}

impl MutationSampler<'_> {
    /// Appends `(site, new base)` for every site that changes in a daughter of `genome`.
    pub fn sample<R: Rng + ?Sized>(&self, genome: &Genome, rng: &mut R, out: &mut Vec<(u32, Nucleotide)>) {
        let Some(skip) = &self.skip else { return };
        let sites = self.model.reference.len() as u64;
        let mut next = skip.sample(rng);
        while next < sites {
            let site = next as u32;
            let current = genome.get(site).unwrap_or(self.model.reference[site as usize]);
            let u = rng.random::<f64>() * self.p_max;
            if let Some(to) = self.target(site as usize, current, u) {
                out.push((site, to));
            }
            next = next.saturating_add(1).saturating_add(skip.sample(rng));
        }
    }

    /// Maps a uniform `u` in `[0, p_max)` to the new base, or `None` when thinned out.
    #[inline]
    fn target(&self, site: usize, from: Nucleotide, u: f64) -> Option<Nucleotide> {
        match &self.model.kind {
            MutationKind::Uniform { mu } => {
                // p_max == mu here
                let k = ((u / mu) * 3.0) as usize;
                Some(from.other(k.min(2)))
            }
            MutationKind::PerSite { matrices, assignment } => {
                let row = &matrices[assignment[site] as usize].0[from.index()];
                let mut acc = 0.0;
                for to in Nucleotide::ALL {
                    if to == from {
                        continue;
                    }
                    acc += row[to.index()];
                    if u < acc {
                        return Some(to);
                    }
                }
                None
            }
        }
    }
}

/// Division and death rates of one selective genotype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub division: f64,
    pub death: f64,
}

impl Rates {
    pub fn new(division: f64, death: f64) -> Result<Self> {
        let r = Rates { division, death };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.division.is_finite() && self.death.is_finite()) || self.division < 0.0 || self.death < 0.0 {
            return Err(Error::config(format!(
                "rates must be finite and >= 0 (division {}, death {})",
                self.division, self.death
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.division + self.death
    }
}

/// Mutated selective sites of a genome (its restriction to the selective sites,
/// stored as differences from the founder).
pub type SelectiveGenotype = Vec<(u32, Nucleotide)>;

/// Division/death rates as a function of the selective genotype.
///
/// Genotypes missing from the table grow at the founder's rates.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessModel {
    selective_sites: Vec<u32>,
    founder: Rates,
    table: HashMap<SelectiveGenotype, Rates>,
}

impl FitnessModel {
    /// No selective sites: every cell divides at `division` and dies at `death`.
    pub fn neutral(division: f64, death: f64) -> Result<Self> {
        Self::new(Vec::new(), Rates::new(division, death)?, HashMap::new())
    }

    /// The basic model: unit division rate, no death.
    pub fn yule() -> Self {
        Self::neutral(1.0, 0.0).expect("valid rates")
    }

    pub fn new(
        mut selective_sites: Vec<u32>,
        founder: Rates,
        table: HashMap<SelectiveGenotype, Rates>,
    ) -> Result<Self> {
        founder.validate()?;
        if founder.division <= founder.death {
            return Err(Error::config(format!(
                "founder genotype must be supercritical (division {} <= death {})",
                founder.division, founder.death
            )));
        }
        selective_sites.sort_unstable();
        selective_sites.dedup();
        let mut normalized = HashMap::with_capacity(table.len());
        for (mut key, rates) in table {
            rates.validate()?;
            key.sort_unstable_by_key(|d| d.0);
            if key.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::config("selective genotype lists a site twice"));
            }
            if let Some((s, _)) = key.iter().find(|(s, _)| selective_sites.binary_search(s).is_err()) {
                return Err(Error::config(format!("genotype mentions non-selective site {s}")));
            }
            normalized.insert(key, rates);
        }
        Ok(Self {
            selective_sites,
            founder,
            table: normalized,
        })
    }

    pub fn selective_sites(&self) -> &[u32] {
        &self.selective_sites
    }

    pub fn founder(&self) -> Rates {
        self.founder
    }

    pub fn rates(&self, genotype: &[(u32, Nucleotide)]) -> Rates {
        if genotype.is_empty() {
            return self.founder;
        }
        self.table.get(genotype).copied().unwrap_or(self.founder)
    }

    pub fn genotypes(&self) -> impl Iterator<Item = (&SelectiveGenotype, &Rates)> {
        self.table.iter()
    }

    /// Net growth rate `division - death` of the founder genotype.
    pub fn malthusian(&self) -> f64 {
        self.founder.division - self.founder.death
    }

    /// No death anywhere and one common division rate.
    pub fn is_pure_yule(&self) -> bool {
        self.founder.death == 0.0
            && self
                .table
                .values()
                .all(|r| r.death == 0.0 && r.division == self.founder.division)
    }

    pub fn is_selective(&self, site: u32) -> bool {
        self.selective_sites.binary_search(&site).is_ok()
    }

    /// Restriction of `genome` to the selective sites.
    pub fn restrict(&self, genome: &Genome) -> SelectiveGenotype {
        if self.selective_sites.is_empty() {
            return Vec::new();
        }
        genome
            .diffs()
            .iter()
            .filter(|(s, _)| self.is_selective(*s))
            .copied()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;

    #[test]
    fn genome_set_tracks_reversion() {
        let mut g = Genome::reference();
        g.set(5, Nucleotide::C, Nucleotide::A);
        g.set(2, Nucleotide::T, Nucleotide::G);
        assert_eq!(g.diffs(), &[(2, Nucleotide::T), (5, Nucleotide::C)]);
        g.set(5, Nucleotide::A, Nucleotide::A);
        assert_eq!(g.diffs(), &[(2, Nucleotide::T)]);
        assert_eq!(g.to_pairs_string(), "2:T");
    }

    #[test]
    fn uniform_matrix_is_stochastic() {
        let m = RateMatrix::uniform(0.3);
        m.validate().unwrap();
        assert!((m.change_prob(Nucleotide::G) - 0.3).abs() < 1e-15);
        let model = MutationModel::uniform(4, 0.3).unwrap();
        assert_eq!(model.matrix(2), m);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(MutationModel::uniform(0, 0.1).is_err());
        assert!(MutationModel::uniform(3, 1.5).is_err());
        let bad = RateMatrix([[0.5; 4]; 4]);
        assert!(MutationModel::per_site(vec![Nucleotide::A], vec![bad], vec![0]).is_err());
        let ok = RateMatrix::uniform(0.1);
        assert!(MutationModel::per_site(vec![Nucleotide::A], vec![ok], vec![1]).is_err());
        assert!(FitnessModel::neutral(1.0, 1.0).is_err());
        assert!(FitnessModel::neutral(1.0, -0.1).is_err());
        let key = vec![(3, Nucleotide::C)];
        let table = HashMap::from([(key, Rates::new(2.0, 0.0).unwrap())]);
        assert!(FitnessModel::new(vec![1], Rates::new(1.0, 0.0).unwrap(), table).is_err());
    }

    /// Per-site sampling frequencies match the matrix rows.
    #[test]
    fn sampler_matches_per_site_rows() {
        let mut rows = [[0.0; 4]; 4];
        rows[0] = [0.7, 0.2, 0.1, 0.0];
        rows[1] = [0.0, 1.0, 0.0, 0.0];
        rows[2] = [0.0, 0.0, 1.0, 0.0];
        rows[3] = [0.0, 0.0, 0.0, 1.0];
        let strong = RateMatrix(rows);
        let weak = RateMatrix::uniform(0.03);
        let model =
            MutationModel::per_site(vec![Nucleotide::A, Nucleotide::A], vec![strong, weak], vec![0, 1]).unwrap();
        let sampler = model.sampler();
        let mut rng = StreamFactory::new(1).replicate(0);
        let draws = 200_000;
        let mut counts = [[0u32; 4]; 2];
        let mut out = Vec::new();
        for _ in 0..draws {
            out.clear();
            sampler.sample(&Genome::reference(), &mut rng, &mut out);
            for &(s, n) in &out {
                counts[s as usize][n.index()] += 1;
            }
        }
        let expect = [[0.0, 0.2, 0.1, 0.0], [0.0, 0.01, 0.01, 0.01]];
        for s in 0..2 {
            for n in 0..4 {
                let p = expect[s][n];
                let f = counts[s][n] as f64 / draws as f64;
                let se = (p * (1.0 - p) / draws as f64).sqrt();
                assert!((f - p).abs() <= 4.0 * se + 1e-12, "site {s} base {n}: {f} vs {p}");
            }
        }
    }

    #[test]
    fn restriction_keeps_selective_sites_only() {
        let f = FitnessModel::new(vec![4, 1], Rates::new(1.0, 0.0).unwrap(), HashMap::new()).unwrap();
        let g = Genome::from_diffs(vec![(0, Nucleotide::C), (4, Nucleotide::G), (1, Nucleotide::T)]);
        assert_eq!(f.restrict(&g), vec![(1, Nucleotide::T), (4, Nucleotide::G)]);
        assert!(f.is_pure_yule());
        assert_eq!(f.rates(&[(1, Nucleotide::T)]), f.founder());
    }
}
