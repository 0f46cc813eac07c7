//! C ABI over the `mutfreq` crate.
//!
//! Every fallible call returns an [`MfStatus`]; results travel through out
//! pointers. After a non-zero status, [`mf_last_error`] gives a message for
//! the calling thread. Objects are opaque handles released by their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mutfreq::distributions::{
    gen_ld_pgf, hyp2f1_special, ld_pgf, ld_pmf, sample_gen_ld, sample_ld, GenLdParams, LdParams,
};
use mutfreq::inference::{diploid_frequencies, estimate_mu, load_vaf, VafDataset};
use mutfreq::limits::{expected_isa_violations, isa_violation_prob, mean_sfs_tail};
use mutfreq::rng::{Stream, StreamFactory};
use mutfreq::simulate::{simulate_to_n, FitnessModel, MutationModel, SimOutcome};
use mutfreq::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    Domain = 1,
    Config = 2,
    Resource = 3,
    Convergence = 4,
    Parse = 5,
    Validation = 6,
    Pairing = 7,
    Io = 8,
    NullPointer = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Random stream handle.
pub struct MfRng(Stream);

/// Result of one simulation run.
pub struct MfSimOutcome(SimOutcome);

/// Variant allele frequency data with its site total.
pub struct MfVafDataset(VafDataset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MfStatus {
    match e {
        Error::Domain(_) => MfStatus::Domain,
        Error::Config(_) => MfStatus::Config,
        Error::Resource(_) => MfStatus::Resource,
        Error::Convergence(_) => MfStatus::Convergence,
        Error::Parse { .. } => MfStatus::Parse,
        Error::Validation { .. } => MfStatus::Validation,
        Error::Pairing(_) => MfStatus::Pairing,
        Error::Io { .. } => MfStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Buffer { need: usize, got: usize },
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer passed as `{name}`"));
            MfStatus::NullPointer
        }
        Ok(Err(Fail::Buffer { need, got })) => {
            set_error(format!("buffer holds {got} values, {need} needed"));
            MfStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            MfStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn buffer<'a, T>(p: *mut T, len: usize, need: usize, name: &'static str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    if len < need {
        return Err(Fail::Buffer { need, got: len });
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Stream `index` under the master `seed`.
#[no_mangle]
pub extern "C" fn mf_rng_new(seed: u64, index: u64) -> *mut MfRng {
    Box::into_raw(Box::new(MfRng(StreamFactory::new(seed).replicate(index))))
}

/// # Safety
/// `rng` must come from [`mf_rng_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_rng_free(rng: *mut MfRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_ld_pgf(c: f64, z: f64, out_value: *mut f64) -> MfStatus {
    guard(|| {
        *out(out_value, "out_value")? = ld_pgf(&LdParams::new(c)?, z)?;
        Ok(())
    })
}

/// Writes `P[B = 0..=m_max]` into `buf`, which must hold `m_max + 1` values.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mf_ld_pmf(c: f64, m_max: usize, buf: *mut f64, len: usize) -> MfStatus {
    guard(|| {
        let dst = buffer(buf, len, m_max.saturating_add(1), "buf")?;
        dst.copy_from_slice(&ld_pmf(&LdParams::new(c)?, m_max));
        Ok(())
    })
}

/// # Safety
/// `rng` must be a live handle; `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_ld_sample(c: f64, rng: *mut MfRng, out_value: *mut u64) -> MfStatus {
    guard(|| {
        let p = LdParams::new(c)?;
        let rng = out(rng, "rng")?;
        *out(out_value, "out_value")? = sample_ld(&p, &mut rng.0);
        Ok(())
    })
}

/// # Safety
/// `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_gen_ld_pgf(lambda: f64, a: f64, b: f64, c: f64, z: f64, out_value: *mut f64) -> MfStatus {
    guard(|| {
        *out(out_value, "out_value")? = gen_ld_pgf(&GenLdParams::new(lambda, a, b, c)?, z)?;
        Ok(())
    })
}

/// # Safety
/// `rng` must be a live handle; `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_gen_ld_sample(
    lambda: f64,
    a: f64,
    b: f64,
    c: f64,
    rng: *mut MfRng,
    out_value: *mut u64,
) -> MfStatus {
    guard(|| {
        let p = GenLdParams::new(lambda, a, b, c)?;
        let rng = out(rng, "rng")?;
        *out(out_value, "out_value")? = sample_gen_ld(&p, &mut rng.0);
        Ok(())
    })
}

/// `F[1, p; 1 + p; x]` for `x < 1`.
///
/// # Safety
/// `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_hyp2f1_special(p: f64, x: f64, out_value: *mut f64) -> MfStatus {
    guard(|| {
        *out(out_value, "out_value")? = hyp2f1_special(p, x)?;
        Ok(())
    })
}

/// # Safety
/// `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_isa_violation_prob(n: u64, mu: f64, out_value: *mut f64) -> MfStatus {
    guard(|| {
        *out(out_value, "out_value")? = isa_violation_prob(n, mu)?;
        Ok(())
    })
}

/// # Safety
/// `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_expected_isa_violations(n: u64, mu: f64, sites: u64, out_value: *mut f64) -> MfStatus {
    guard(|| {
        *out(out_value, "out_value")? = expected_isa_violations(n, mu, sites)?;
        Ok(())
    })
}

/// # Safety
/// `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_mean_sfs_tail(eta: f64, a: f64, out_value: *mut f64) -> MfStatus {
    guard(|| {
        *out(out_value, "out_value")? = mean_sfs_tail(eta, a)?;
        Ok(())
    })
}

/// Runs the neutral model with uniform mutation probability `mu` on `sites`
/// sites, division rate `division` and death rate `death`, until `n` cells live.
///
/// # Safety
/// `rng` must be a live handle; `out_outcome` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_simulate(
    n: usize,
    sites: usize,
    mu: f64,
    division: f64,
    death: f64,
    rng: *mut MfRng,
    out_outcome: *mut *mut MfSimOutcome,
) -> MfStatus {
    guard(|| {
        let slot = out(out_outcome, "out_outcome")?;
        let rng = out(rng, "rng")?;
        let mutation = MutationModel::uniform(sites, mu)?;
        let fitness = FitnessModel::neutral(division, death)?;
        let outcome = simulate_to_n(&mutation, &fitness, n, &mut rng.0, false)?;
        *slot = Box::into_raw(Box::new(MfSimOutcome(outcome)));
        Ok(())
    })
}

/// # Safety
/// `outcome` must come from [`mf_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_sim_outcome_free(outcome: *mut MfSimOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Number of sites, or 0 for a null handle.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_sim_outcome_sites(outcome: *const MfSimOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.0.sites())
}

/// Restarts after extinction before the accepted run, or 0 for a null handle.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_sim_outcome_attempts(outcome: *const MfSimOutcome) -> u64 {
    outcome.as_ref().map_or(0, |o| o.0.attempts)
}

/// Which per-site vector [`mf_sim_outcome_counts`] copies.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfCountKind {
    /// Cells carrying a non-founder base.
    Mutant = 0,
    /// Cells descending from a mutated cell.
    Descendant = 1,
    /// Mutation events on ancestral divisions.
    Events = 2,
}

/// Copies one per-site count vector into `buf` (`len >= sites`).
///
/// # Safety
/// `outcome` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mf_sim_outcome_counts(
    outcome: *const MfSimOutcome,
    kind: MfCountKind,
    buf: *mut u32,
    len: usize,
) -> MfStatus {
    guard(|| {
        let o = &handle(outcome, "outcome")?.0;
        let src = match kind {
            MfCountKind::Mutant => &o.b,
            MfCountKind::Descendant => &o.b_hat,
            MfCountKind::Events => &o.events,
        };
        buffer(buf, len, src.len(), "buf")?.copy_from_slice(src);
        Ok(())
    })
}

/// `(B[s1] + B[s2]) / (2n)` for each of `pairs` pairs given as
/// `sites[2j], sites[2j + 1]`.
///
/// # Safety
/// `sites` must hold `2 * pairs` values; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mf_diploid_frequencies(
    outcome: *const MfSimOutcome,
    sites: *const usize,
    pairs: usize,
    buf: *mut f64,
    len: usize,
) -> MfStatus {
    guard(|| {
        let o = &handle(outcome, "outcome")?.0;
        if sites.is_null() && pairs > 0 {
            return Err(Fail::Null("sites"));
        }
        let flat = if pairs == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(sites, 2 * pairs)
        };
        let pairing: Vec<(usize, usize)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        let f = diploid_frequencies(o, &pairing)?;
        buffer(buf, len, f.len(), "buf")?.copy_from_slice(&f);
        Ok(())
    })
}

/// Loads a `vaf[,ref]` CSV.
///
/// # Safety
/// `path` must be a nul-terminated string; `out_data` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_vaf_load(
    path: *const c_char,
    total_sites: u64,
    out_data: *mut *mut MfVafDataset,
) -> MfStatus {
    guard(|| {
        let slot = out(out_data, "out_data")?;
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        let path = CStr::from_ptr(path).to_string_lossy().into_owned();
        let data = load_vaf(path, total_sites)?;
        *slot = Box::into_raw(Box::new(MfVafDataset(data)));
        Ok(())
    })
}

/// Builds a dataset from `len` frequencies without reference bases.
///
/// # Safety
/// `freqs` must hold `len` values; `out_data` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_vaf_from_frequencies(
    freqs: *const f64,
    len: usize,
    total_sites: u64,
    out_data: *mut *mut MfVafDataset,
) -> MfStatus {
    guard(|| {
        let slot = out(out_data, "out_data")?;
        if freqs.is_null() && len > 0 {
            return Err(Fail::Null("freqs"));
        }
        let f = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(freqs, len)
        };
        *slot = Box::into_raw(Box::new(MfVafDataset(VafDataset::from_frequencies(f, total_sites)?)));
        Ok(())
    })
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_vaf_len(data: *const MfVafDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.records.len())
}

/// # Safety
/// `data` must come from a `mf_vaf_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_vaf_free(data: *mut MfVafDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Rate estimate over the open window `(a, b)` and the number of records in it.
///
/// # Safety
/// `data` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mf_estimate_mu(
    data: *const MfVafDataset,
    a: f64,
    b: f64,
    out_mu: *mut f64,
    out_count: *mut u64,
) -> MfStatus {
    guard(|| {
        let d = &handle(data, "data")?.0;
        let mu = out(out_mu, "out_mu")?;
        let count = out(out_count, "out_count")?;
        let r = estimate_mu(d, a, b)?;
        *mu = r.mu_hat;
        *count = r.count;
        Ok(())
    })
}
