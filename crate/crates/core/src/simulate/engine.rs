//! Forward simulation of the branching population up to `n` living cells.
//!
//! Only the order of events matters for the state at the stopping time, so
//! the engine walks the jump chain and never draws holding times. Living
//! cells are grouped by their selective genotype; the next event picks a
//! class proportionally to `count * (division + death)`, then a uniform cell
//! inside it. Without death and with a single division rate every living
//! cell is equally likely to divide next and the class machinery is skipped.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nucleotide::Nucleotide;

use super::model::{FitnessModel, Genome, MutationModel, MutationSampler, Rates, SelectiveGenotype};
use super::tree::LineageTree;

/// Default memory ceiling for a single run: 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// Genome of a cell together with every site at which its lineage has ever
/// carried a non-founder base.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct CellState {
    pub genome: Genome,
    pub ever: Vec<u32>,
}

/// Mutation events at one division, linked to the division that produced the parent.
struct DivisionRecord {
    parent: Option<Arc<DivisionRecord>>,
    sites: Vec<u32>,
}

#[derive(Clone)]
struct Cell {
    state: Arc<CellState>,
    node: u32,
    origin: Option<Arc<DivisionRecord>>,
}

/// State of the population at the first time it reaches `n` cells.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub n: usize,
    /// Cells whose base at site `i` differs from the founder's.
    pub b: Vec<u32>,
    /// Cells descending (inclusively) from a cell that was mutated at site `i`.
    pub b_hat: Vec<u32>,
    /// Mutation events at site `i` on divisions of ancestors of living cells.
    pub events: Vec<u32>,
    /// Living cells per genome.
    pub census: BTreeMap<Genome, u64>,
    /// Runs discarded because the population died out.
    pub attempts: u64,
    pub divisions: u64,
    pub deaths: u64,
    pub tree: Option<LineageTree>,
}

impl SimOutcome {
    pub fn sites(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub keep_tree: bool,
    pub memory_budget: u64,
    /// Use the class-based event selection even when the uniform path applies.
    pub force_general: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            keep_tree: false,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            force_general: false,
        }
    }
}

/// Simulates until `n` cells are alive, restarting after extinction.
pub fn simulate_to_n<R: Rng + ?Sized>(
    mutation: &MutationModel,
    fitness: &FitnessModel,
    n: usize,
    rng: &mut R,
    keep_tree: bool,
) -> Result<SimOutcome> {
    let options = SimOptions {
        keep_tree,
        ..SimOptions::default()
    };
    Simulator::new(mutation, fitness, options)?.run(n, rng)
}

pub struct Simulator<'a> {
    mutation: &'a MutationModel,
    fitness: &'a FitnessModel,
    sampler: MutationSampler<'a>,
    options: SimOptions,
}

struct Class {
    rates: Rates,
    cells: Vec<Cell>,
}

struct Attempt {
    cells: Vec<Cell>,
    tree: Option<LineageTree>,
    events: Option<Vec<u32>>,
    divisions: u64,
    deaths: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(mutation: &'a MutationModel, fitness: &'a FitnessModel, options: SimOptions) -> Result<Self> {
        let sites = mutation.sites();
        if let Some(&s) = fitness.selective_sites().iter().find(|&&s| s as usize >= sites) {
            return Err(Error::config(format!(
                "selective site {s} outside a genome of {sites} sites"
            )));
        }
        for (genotype, _) in fitness.genotypes() {
            for &(s, base) in genotype {
                if mutation.reference()[s as usize] == base {
                    return Err(Error::config(format!(
                        "selective genotype lists the founder base {base} at site {s}"
                    )));
                }
            }
        }
        Ok(Self {
            mutation,
            fitness,
            sampler: mutation.sampler(),
            options,
        })
    }

    fn check_budget(&self, n: usize) -> Result<()> {
        let sites = self.mutation.sites() as u64;
        let n = n as u64;
        let f = self.fitness.founder();
        // divisions needed to reach n grow like n * division / (division - death)
        let churn = (f.division / (f.division - f.death)).max(1.0);
        let mut bytes = sites.saturating_mul(13) + n.saturating_mul(96);
        if self.options.keep_tree {
            bytes = bytes.saturating_add(((2.0 * churn * n as f64) as u64).saturating_mul(48));
        }
        if bytes > self.options.memory_budget {
            return Err(Error::Resource(format!(
                "run needs about {bytes} bytes, budget is {}",
                self.options.memory_budget
            )));
        }
        Ok(())
    }

    pub fn run<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SimOutcome> {
        if n == 0 {
            return Err(Error::domain("target population size must be >= 1"));
        }
        self.check_budget(n)?;
        let uniform = self.fitness.is_pure_yule() && !self.options.force_general;
        let mut attempts = 0u64;
        loop {
            let attempt = if uniform {
                Some(self.run_uniform(n, rng))
            } else {
                self.run_general(n, rng)
            };
            match attempt {
                Some(done) => return Ok(self.finish(n, done, attempts)),
                None => attempts += 1,
            }
        }
    }

    fn founder(&self) -> (Cell, Option<LineageTree>) {
        let state = Arc::new(CellState::default());
        let tree = self.options.keep_tree.then(|| LineageTree::with_root(state.clone()));
        let cell = Cell {
            state,
            node: 0,
            origin: None,
        };
        (cell, tree)
    }

    fn daughter(&self, parent: &Arc<CellState>, changes: &[(u32, Nucleotide)]) -> Arc<CellState> {
        if changes.is_empty() {
            return parent.clone();
        }
        let mut state = CellState::clone(parent);
        let reference = self.mutation.reference();
        for &(site, base) in changes {
            let founder = reference[site as usize];
            state.genome.set(site, base, founder);
            if base != founder {
                if let Err(i) = state.ever.binary_search(&site) {
                    state.ever.insert(i, site);
                }
            }
        }
        Arc::new(state)
    }

    /// Pure-birth dynamics: the dividing cell is uniform among the living.
    fn run_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Attempt {
        let (root, mut tree) = self.founder();
        let mut cells = Vec::with_capacity(n);
        cells.push(root);
        let mut events = vec![0u32; self.mutation.sites()];
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut event = 0u64;
        while cells.len() < n {
            event += 1;
            let idx = rng.random_range(0..cells.len());
            first.clear();
            second.clear();
            let parent = cells[idx].state.clone();
            self.sampler.sample(&parent.genome, rng, &mut first);
            self.sampler.sample(&parent.genome, rng, &mut second);
            for &(s, _) in first.iter().chain(&second) {
                events[s as usize] += 1;
            }
            let s1 = self.daughter(&parent, &first);
            let s2 = self.daughter(&parent, &second);
            let (n1, n2) = match tree.as_mut() {
                Some(t) => {
                    let p = cells[idx].node;
                    t.mark_divided(p, event);
                    (t.push_child(p, event, s1.clone()), t.push_child(p, event, s2.clone()))
                }
                None => (0, 0),
            };
            cells[idx] = Cell {
                state: s1,
                node: n1,
                origin: None,
            };
            cells.push(Cell {
                state: s2,
                node: n2,
                origin: None,
            });
        }
        Attempt {
            cells,
            tree,
            events: Some(events),
            divisions: event,
            deaths: 0,
        }
    }

    /// Class-based jump chain with death and selection; `None` on extinction.
    fn run_general<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Attempt> {
        let (root, mut tree) = self.founder();
        let mut classes = vec![Class {
            rates: self.fitness.founder(),
            cells: vec![root],
        }];
        let mut index: HashMap<SelectiveGenotype, usize> = HashMap::from([(Vec::new(), 0)]);
        let mut living = 1usize;
        let (mut divisions, mut deaths, mut event) = (0u64, 0u64, 0u64);
        let mut first = Vec::new();
        let mut second = Vec::new();

        while living < n {
            if living == 0 {
                return None;
            }
            let total: f64 = classes.iter().map(|c| c.cells.len() as f64 * c.rates.total()).sum();
            if total <= 0.0 {
                // no cell can divide or die: n is never reached
                return None;
            }
            let mut u = rng.random::<f64>() * total;
            let mut ci = usize::MAX;
            for (i, c) in classes.iter().enumerate() {
                let w = c.cells.len() as f64 * c.rates.total();
                if w <= 0.0 {
                    continue;
                }
                ci = i;
                if u < w {
                    break;
                }
                u -= w;
            }
            let class = &mut classes[ci];
            let idx = rng.random_range(0..class.cells.len());
            let divides = rng.random::<f64>() * class.rates.total() < class.rates.division;
            let parent = class.cells.swap_remove(idx);
            event += 1;
            if !divides {
                deaths += 1;
                living -= 1;
                if let Some(t) = tree.as_mut() {
                    t.mark_died(parent.node, event);
                }
                continue;
            }
            divisions += 1;
            living += 1;
            first.clear();
            second.clear();
            self.sampler.sample(&parent.state.genome, rng, &mut first);
            self.sampler.sample(&parent.state.genome, rng, &mut second);
            let record = Arc::new(DivisionRecord {
                parent: parent.origin.clone(),
                sites: first.iter().chain(&second).map(|d| d.0).collect(),
            });
            if let Some(t) = tree.as_mut() {
                t.mark_divided(parent.node, event);
            }
            for changes in [&first, &second] {
                let state = self.daughter(&parent.state, changes);
                let node = match tree.as_mut() {
                    Some(t) => t.push_child(parent.node, event, state.clone()),
                    None => 0,
                };
                let touches_selective = changes.iter().any(|(s, _)| self.fitness.is_selective(*s));
                let target = if touches_selective {
                    let key = self.fitness.restrict(&state.genome);
                    *index.entry(key).or_insert_with_key(|key| {
                        classes.push(Class {
                            rates: self.fitness.rates(key),
                            cells: Vec::new(),
                        });
                        classes.len() - 1
                    })
                } else {
                    ci
                };
                classes[target].cells.push(Cell {
                    state,
                    node,
                    origin: Some(record.clone()),
                });
            }
        }
        let cells = classes.into_iter().flat_map(|c| c.cells).collect();
        Some(Attempt {
            cells,
            tree,
            events: None,
            divisions,
            deaths,
        })
    }

    fn finish(&self, n: usize, attempt: Attempt, attempts: u64) -> SimOutcome {
        let sites = self.mutation.sites();
        let Attempt {
            cells,
            mut tree,
            events,
            divisions,
            deaths,
        } = attempt;

        let events = events.unwrap_or_else(|| ancestral_events(&cells, sites));

        let mut groups: HashMap<*const CellState, (Arc<CellState>, u64)> = HashMap::new();
        for c in &cells {
            groups
                .entry(Arc::as_ptr(&c.state))
                .or_insert_with(|| (c.state.clone(), 0))
                .1 += 1;
        }
        let mut b = vec![0u32; sites];
        let mut b_hat = vec![0u32; sites];
        let mut census = BTreeMap::new();
        for (state, count) in groups.into_values() {
            for &(s, _) in state.genome.diffs() {
                b[s as usize] += count as u32;
            }
            for &s in &state.ever {
                b_hat[s as usize] += count as u32;
            }
            *census.entry(state.genome.clone()).or_insert(0) += count;
        }
        if let Some(t) = tree.as_mut() {
            t.seal(cells.iter().map(|c| c.node).collect());
        }
        SimOutcome {
            n,
            b,
            b_hat,
            events,
            census,
            attempts,
            divisions,
            deaths,
            tree,
        }
    }
}

/// Counts mutation events over the divisions of every ancestor of a living cell.
fn ancestral_events(cells: &[Cell], sites: usize) -> Vec<u32> {
    let mut events = vec![0u32; sites];
    let mut seen: std::collections::HashSet<*const DivisionRecord> = Default::default();
    for c in cells {
        let mut cursor = c.origin.as_ref();
        while let Some(rec) = cursor {
            if !seen.insert(Arc::as_ptr(rec)) {
                break;
            }
            for &s in &rec.sites {
                events[s as usize] += 1;
            }
            cursor = rec.parent.as_ref();
        }
    }
    events
}
