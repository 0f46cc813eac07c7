//! Mutation-rate estimation from variant allele frequencies.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nucleotide::Nucleotide;
use crate::rng::{run_replicates, StreamFactory};
use crate::simulate::SimOutcome;

const BOOTSTRAP_DOMAIN: u64 = 0x626f_6f74;

/// One mutated position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VafRecord {
    pub frequency: f64,
    pub reference: Option<Nucleotide>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VafDataset {
    pub records: Vec<VafRecord>,
    pub total_sites: u64,
    pub per_nucleotide_sites: Option<[u64; 4]>,
}

impl VafDataset {
    pub fn new(records: Vec<VafRecord>, total_sites: u64) -> Result<Self> {
        if total_sites == 0 {
            return Err(Error::domain("total site count must be positive"));
        }
        for (i, r) in records.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.frequency) {
                return Err(Error::Validation {
                    row: i as u64 + 1,
                    message: format!("frequency {} outside [0, 1]", r.frequency),
                });
            }
        }
        Ok(Self {
            records,
            total_sites,
            per_nucleotide_sites: None,
        })
    }

    pub fn from_frequencies(freqs: &[f64], total_sites: u64) -> Result<Self> {
        let records = freqs
            .iter()
            .map(|&frequency| VafRecord {
                frequency,
                reference: None,
            })
            .collect();
        Self::new(records, total_sites)
    }

    /// Attaches per-base site totals, indexed A, C, G, T.
    pub fn with_per_nucleotide_sites(mut self, sites: [u64; 4]) -> Result<Self> {
        let sum: u64 = sites.iter().sum();
        if sum != self.total_sites {
            return Err(Error::config(format!(
                "per-nucleotide site totals sum to {sum}, expected {}",
                self.total_sites
            )));
        }
        self.per_nucleotide_sites = Some(sites);
        Ok(self)
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    vaf: String,
    #[serde(rename = "ref", default)]
    reference: Option<String>,
}

/// Reads a `vaf[,ref]` CSV; lines starting with `#` are ignored.
pub fn load_vaf(path: impl AsRef<Path>, total_sites: u64) -> Result<VafDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_vaf(file, total_sites)
}

pub fn read_vaf<R: Read>(input: R, total_sites: u64) -> Result<VafDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| parse_error(&e, 1))?.clone();
    if !headers.iter().any(|h| h == "vaf") {
        return Err(Error::Parse {
            line: 1,
            message: "missing `vaf` column".into(),
        });
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| parse_error(&e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        let parsed: Row = row.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let frequency: f64 = parsed.vaf.parse().map_err(|_| Error::Parse {
            line,
            message: format!("not a number: {:?}", parsed.vaf),
        })?;
        if !(0.0..=1.0).contains(&frequency) {
            return Err(Error::Validation {
                row: i as u64 + 1,
                message: format!("frequency {frequency} outside [0, 1] (line {line})"),
            });
        }
        let reference = match parsed.reference.as_deref() {
            None | Some("") => None,
            Some(s) => Some(s.parse().map_err(|message| Error::Parse { line, message })?),
        };
        records.push(VafRecord { frequency, reference });
    }
    VafDataset::new(records, total_sites)
}

fn parse_error(e: &csv::Error, fallback: u64) -> Error {
    let line = e.position().map_or(fallback, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn check_window(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a < b && b <= 1.0) {
        return Err(Error::domain(format!("window ({a}, {b}) must satisfy 0 < a < b <= 1")));
    }
    Ok(())
}

fn in_window(f: f64, a: f64, b: f64) -> bool {
    f > a && f < b
}

/// Records with frequency strictly inside `(a, b)`.
pub fn count_in_range(data: &VafDataset, a: f64, b: f64) -> Result<u64> {
    check_window(a, b)?;
    Ok(data.records.iter().filter(|r| in_window(r.frequency, a, b)).count() as u64)
}

/// Estimated rate with its window and counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub mu_hat: f64,
    pub window: [f64; 2],
    pub count: u64,
    pub total_sites: u64,
    #[serde(serialize_with = "per_base_map")]
    pub per_nucleotide: Option<[f64; 4]>,
    /// Percentile bootstrap interval over records.
    pub bootstrap_ci: Option<[f64; 2]>,
}

fn per_base_map<S: serde::Serializer>(v: &Option<[f64; 4]>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(m) => {
            let map: BTreeMap<String, f64> = Nucleotide::ALL.iter().map(|n| (n.to_string(), m[n.index()])).collect();
            map.serialize(s)
        }
    }
}

fn window_divisor(a: f64, b: f64) -> f64 {
    1.0 / a - 1.0 / b
}

/// `M(a,b) / (|S| (1/a - 1/b))`.
pub fn mu_from_count(count: u64, total_sites: u64, a: f64, b: f64) -> f64 {
    count as f64 / (total_sites as f64 * window_divisor(a, b))
}

pub fn estimate_mu(data: &VafDataset, a: f64, b: f64) -> Result<EstimateResult> {
    let count = count_in_range(data, a, b)?;
    Ok(EstimateResult {
        mu_hat: mu_from_count(count, data.total_sites, a, b),
        window: [a, b],
        count,
        total_sites: data.total_sites,
        per_nucleotide: None,
        bootstrap_ci: None,
    })
}

/// In-window counts per reference base, indexed A, C, G, T.
pub fn counts_by_nucleotide(data: &VafDataset, a: f64, b: f64) -> Result<[u64; 4]> {
    check_window(a, b)?;
    let mut counts = [0u64; 4];
    for (i, r) in data.records.iter().enumerate() {
        if !in_window(r.frequency, a, b) {
            continue;
        }
        let n = r.reference.ok_or_else(|| Error::Validation {
            row: i as u64 + 1,
            message: "in-window record has no reference nucleotide".into(),
        })?;
        counts[n.index()] += 1;
    }
    Ok(counts)
}

pub fn estimate_mu_by_nucleotide(data: &VafDataset, a: f64, b: f64) -> Result<EstimateResult> {
    let sites = data
        .per_nucleotide_sites
        .ok_or_else(|| Error::config("per-nucleotide site totals are required"))?;
    let counts = counts_by_nucleotide(data, a, b)?;
    let mut per = [0.0; 4];
    for k in 0..4 {
        per[k] = if sites[k] == 0 {
            if counts[k] > 0 {
                return Err(Error::config(format!(
                    "{} mutations but no {} sites",
                    counts[k],
                    Nucleotide::from_index(k)
                )));
            }
            0.0
        } else {
            mu_from_count(counts[k], sites[k], a, b)
        };
    }
    let mut result = estimate_mu(data, a, b)?;
    result.per_nucleotide = Some(per);
    Ok(result)
}

/// Percentile interval of the estimator over `resamples` bootstrap draws of the records.
pub fn bootstrap_ci(
    data: &VafDataset,
    a: f64,
    b: f64,
    resamples: usize,
    level: f64,
    factory: &StreamFactory,
) -> Result<[f64; 2]> {
    check_window(a, b)?;
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("bootstrap needs resamples >= 1 and a level in (0, 1)"));
    }
    let inside: Vec<bool> = data.records.iter().map(|r| in_window(r.frequency, a, b)).collect();
    let len = inside.len();
    let mut est = run_replicates(factory, BOOTSTRAP_DOMAIN, resamples, |_, rng| {
        let hits = if len == 0 {
            0
        } else {
            (0..len).filter(|_| inside[rng.random_range(0..len)]).count() as u64
        };
        mu_from_count(hits, data.total_sites, a, b)
    });
    est.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok([quantile(&est, tail), quantile(&est, 1.0 - tail)])
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `F_j = (B_{i1} + B_{i2}) / (2n)` for each pair of sites.
pub fn diploid_frequencies(outcome: &SimOutcome, pairing: &[(usize, usize)]) -> Result<Vec<f64>> {
    let sites = outcome.sites();
    let mut used = vec![false; sites];
    let mut out = Vec::with_capacity(pairing.len());
    let two_n = 2.0 * outcome.n as f64;
    for (j, &(s1, s2)) in pairing.iter().enumerate() {
        for s in [s1, s2] {
            if s >= sites {
                return Err(Error::Pairing(format!("position {j}: site {s} is outside 0..{sites}")));
            }
            if used[s] {
                return Err(Error::Pairing(format!("position {j}: site {s} is already paired")));
            }
            used[s] = true;
        }
        out.push((outcome.b[s1] as f64 + outcome.b[s2] as f64) / two_n);
    }
    Ok(out)
}

/// Pairs sites `2j` and `2j + 1`.
pub fn adjacent_pairing(sites: usize) -> Vec<(usize, usize)> {
    (0..sites / 2).map(|j| (2 * j, 2 * j + 1)).collect()
}

/// Published summary numbers of a lung adenocarcinoma exome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFixture {
    pub window: [f64; 2],
    pub count: u64,
    pub total_sites: u64,
    pub mu_hat: f64,
    pub per_nucleotide_counts: BTreeMap<Nucleotide, u64>,
    pub per_nucleotide_sites: BTreeMap<Nucleotide, u64>,
    pub per_nucleotide_mu_hat: BTreeMap<Nucleotide, f64>,
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl SummaryFixture {
    pub fn sites_array(&self) -> Result<[u64; 4]> {
        per_base_array(&self.per_nucleotide_sites)
    }

    pub fn counts_array(&self) -> Result<[u64; 4]> {
        per_base_array(&self.per_nucleotide_counts)
    }
}

fn per_base_array(m: &BTreeMap<Nucleotide, u64>) -> Result<[u64; 4]> {
    let mut out = [0; 4];
    for n in Nucleotide::ALL {
        out[n.index()] = *m
            .get(&n)
            .ok_or_else(|| Error::config(format!("fixture lacks an entry for {n}")))?;
    }
    Ok(out)
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<SummaryFixture> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}
