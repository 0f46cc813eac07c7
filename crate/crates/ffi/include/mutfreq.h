#ifndef MUTFREQ_H
#define MUTFREQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_DOMAIN = 1,
  MF_STATUS_CONFIG = 2,
  MF_STATUS_RESOURCE = 3,
  MF_STATUS_CONVERGENCE = 4,
  MF_STATUS_PARSE = 5,
  MF_STATUS_VALIDATION = 6,
  MF_STATUS_PAIRING = 7,
  MF_STATUS_IO = 8,
  MF_STATUS_NULL_POINTER = 9,
  MF_STATUS_BUFFER_TOO_SMALL = 10,
  MF_STATUS_PANIC = 11,
} MfStatus;

// Which per-site vector [`mf_sim_outcome_counts`] copies.
typedef enum MfCountKind {
  // Cells carrying a non-founder base.
  MF_COUNT_KIND_MUTANT = 0,
  // Cells descending from a mutated cell.
  MF_COUNT_KIND_DESCENDANT = 1,
  // Mutation events on ancestral divisions.
  MF_COUNT_KIND_EVENTS = 2,
} MfCountKind;

// Random stream handle.
typedef struct MfRng MfRng;

// Result of one simulation run.
typedef struct MfSimOutcome MfSimOutcome;

// Variant allele frequency data with its site total.
typedef struct MfVafDataset MfVafDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next failing call on the same thread.
const char *mf_last_error(void);

// Stream `index` under the master `seed`.
struct MfRng *mf_rng_new(uint64_t seed, uint64_t index);

// # Safety
// `rng` must come from [`mf_rng_new`] and not be used afterwards.
void mf_rng_free(struct MfRng *rng);

// # Safety
// `out` must be valid for writes.
enum MfStatus mf_ld_pgf(double c, double z, double *out_value);

// Writes `P[B = 0..=m_max]` into `buf`, which must hold `m_max + 1` values.
//
// # Safety
// `buf` must be valid for `len` writes.
enum MfStatus mf_ld_pmf(double c, size_t m_max, double *buf, size_t len);

// # Safety
// `rng` must be a live handle; `out_value` must be valid for writes.
enum MfStatus mf_ld_sample(double c, struct MfRng *rng, uint64_t *out_value);

// # Safety
// `out_value` must be valid for writes.
enum MfStatus mf_gen_ld_pgf(double lambda,
                            double a,
                            double b,
                            double c,
                            double z,
                            double *out_value);

// # Safety
// `rng` must be a live handle; `out_value` must be valid for writes.
enum MfStatus mf_gen_ld_sample(double lambda,
                               double a,
                               double b,
                               double c,
                               struct MfRng *rng,
                               uint64_t *out_value);

// `F[1, p; 1 + p; x]` for `x < 1`.
//
// # Safety
// `out_value` must be valid for writes.
enum MfStatus mf_hyp2f1_special(double p, double x, double *out_value);

// # Safety
// `out_value` must be valid for writes.
enum MfStatus mf_isa_violation_prob(uint64_t n, double mu, double *out_value);

// # Safety
// `out_value` must be valid for writes.
enum MfStatus mf_expected_isa_violations(uint64_t n, double mu, uint64_t sites, double *out_value);

// # Safety
// `out_value` must be valid for writes.
enum MfStatus mf_mean_sfs_tail(double eta, double a, double *out_value);

// Runs the neutral model with uniform mutation probability `mu` on `sites`
// sites, division rate `division` and death rate `death`, until `n` cells live.
//
// # Safety
// `rng` must be a live handle; `out_outcome` must be valid for writes.
enum MfStatus mf_simulate(size_t n,
                          size_t sites,
                          double mu,
                          double division,
                          double death,
                          struct MfRng *rng,
                          struct MfSimOutcome **out_outcome);

// # Safety
// `outcome` must come from [`mf_simulate`] and not be used afterwards.
void mf_sim_outcome_free(struct MfSimOutcome *outcome);

// Number of sites, or 0 for a null handle.
//
// # Safety
// `outcome` must be null or a live handle.
size_t mf_sim_outcome_sites(const struct MfSimOutcome *outcome);

// Restarts after extinction before the accepted run, or 0 for a null handle.
//
// # Safety
// `outcome` must be null or a live handle.
uint64_t mf_sim_outcome_attempts(const struct MfSimOutcome *outcome);

// Copies one per-site count vector into `buf` (`len >= sites`).
//
// # Safety
// `outcome` must be a live handle; `buf` must be valid for `len` writes.
enum MfStatus mf_sim_outcome_counts(const struct MfSimOutcome *outcome,
                                    enum MfCountKind kind,
                                    uint32_t *buf,
                                    size_t len);

// `(B[s1] + B[s2]) / (2n)` for each of `pairs` pairs given as
// `sites[2j], sites[2j + 1]`.
//
// # Safety
// `sites` must hold `2 * pairs` values; `buf` must be valid for `len` writes.
enum MfStatus mf_diploid_frequencies(const struct MfSimOutcome *outcome,
                                     const size_t *sites,
                                     size_t pairs,
                                     double *buf,
                                     size_t len);

// Loads a `vaf[,ref]` CSV.
//
// # Safety
// `path` must be a nul-terminated string; `out_data` must be valid for writes.
enum MfStatus mf_vaf_load(const char *path, uint64_t total_sites, struct MfVafDataset **out_data);

// Builds a dataset from `len` frequencies without reference bases.
//
// # Safety
// `freqs` must hold `len` values; `out_data` must be valid for writes.
enum MfStatus mf_vaf_from_frequencies(const double *freqs,
                                      size_t len,
                                      uint64_t total_sites,
                                      struct MfVafDataset **out_data);

// Number of records, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live handle.
size_t mf_vaf_len(const struct MfVafDataset *data);

// # Safety
// `data` must come from a `mf_vaf_*` constructor and not be used afterwards.
void mf_vaf_free(struct MfVafDataset *data);

// Rate estimate over the open window `(a, b)` and the number of records in it.
//
// # Safety
// `data` must be a live handle; the out pointers must be valid for writes.
enum MfStatus mf_estimate_mu(const struct MfVafDataset *data,
                             double a,
                             double b,
                             double *out_mu,
                             uint64_t *out_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MUTFREQ_H */
