use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::engine::CellState;
use super::model::Genome;

/// What happened to a node by the stopping time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Alive,
    Divided { event: u64 },
    Died { event: u64 },
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub parent: Option<u32>,
    /// Index of the division event that created the node (0 for the founder).
    pub birth_event: u64,
    pub fate: Fate,
    pub(crate) state: Arc<CellState>,
}

impl TreeNode {
    pub fn genome(&self) -> &Genome {
        &self.state.genome
    }
}

/// Append-only genealogy of every cell of a run.
///
/// A node's parent always has a smaller index, so one reverse sweep over the
/// arena visits children before parents.
#[derive(Debug, Clone, Default)]
pub struct LineageTree {
    nodes: Vec<TreeNode>,
    alive: Vec<u32>,
    divisions: u64,
    deaths: u64,
}

impl LineageTree {
    pub(crate) fn with_root(state: Arc<CellState>) -> Self {
        Self {
            nodes: vec![TreeNode {
                parent: None,
                birth_event: 0,
                fate: Fate::Alive,
                state,
            }],
            alive: Vec::new(),
            divisions: 0,
            deaths: 0,
        }
    }

    pub(crate) fn push_child(&mut self, parent: u32, event: u64, state: Arc<CellState>) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            parent: Some(parent),
            birth_event: event,
            fate: Fate::Alive,
            state,
        });
        id
    }

    pub(crate) fn mark_divided(&mut self, node: u32, event: u64) {
        self.nodes[node as usize].fate = Fate::Divided { event };
        self.divisions += 1;
    }

    pub(crate) fn mark_died(&mut self, node: u32, event: u64) {
        self.nodes[node as usize].fate = Fate::Died { event };
        self.deaths += 1;
    }

    pub(crate) fn seal(&mut self, mut alive: Vec<u32>) {
        alive.sort_unstable();
        self.alive = alive;
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn alive(&self) -> &[u32] {
        &self.alive
    }

    pub fn births(&self) -> u64 {
        self.nodes.len() as u64 - 1
    }

    pub fn divisions(&self) -> u64 {
        self.divisions
    }

    pub fn deaths(&self) -> u64 {
        self.deaths
    }

    /// Children of `node` in creation order.
    pub fn children(&self, node: u32) -> Vec<u32> {
        self.nodes
            .iter()
            .enumerate()
            .skip(node as usize + 1)
            .filter(|(_, n)| n.parent == Some(node))
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Writes `node_id,parent_id,mutated_sites`; the founder has an empty parent.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "parent_id", "mutated_sites"])?;
        for (i, node) in self.nodes.iter().enumerate() {
            let parent = node.parent.map(|p| p.to_string()).unwrap_or_default();
            w.write_record([i.to_string(), parent, node.genome().to_pairs_string()])?;
        }
        w.flush()
    }
}

/// Fraction of the living population descending (inclusively) from each node
/// that has at least one living descendant.
pub fn descendant_fractions(tree: &LineageTree) -> Result<BTreeMap<u32, f64>> {
    let n = tree.alive.len();
    if n == 0 {
        return Err(Error::domain("descendant fractions need a living population"));
    }
    let mut counts = vec![0u64; tree.nodes.len()];
    for &a in &tree.alive {
        counts[a as usize] += 1;
    }
    for k in (1..tree.nodes.len()).rev() {
        if let Some(p) = tree.nodes[k].parent {
            counts[p as usize] += counts[k];
        }
    }
    Ok(counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i as u32, c as f64 / n as f64))
        .collect())
}
