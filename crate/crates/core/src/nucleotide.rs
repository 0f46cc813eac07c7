use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the four DNA bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Nucleotide {
    A = 0,
    C = 1,
    G = 2,
    T = 3,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::C, Nucleotide::G, Nucleotide::T];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Nucleotide {
        Self::ALL[i & 3]
    }

    pub fn as_char(self) -> char {
        match self {
            Nucleotide::A => 'A',
            Nucleotide::C => 'C',
            Nucleotide::G => 'G',
            Nucleotide::T => 'T',
        }
    }

    /// The `k`-th base other than `self`, `k` in `0..3`.
    #[inline]
    pub fn other(self, k: usize) -> Nucleotide {
        let i = self.index();
        Self::from_index(if k < i { k } else { k + 1 })
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Nucleotide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Nucleotide::A),
            "C" | "c" => Ok(Nucleotide::C),
            "G" | "g" => Ok(Nucleotide::G),
            "T" | "t" => Ok(Nucleotide::T),
            other => Err(format!("not a nucleotide: {other:?}")),
        }
    }
}
