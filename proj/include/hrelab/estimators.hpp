#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hrelab/laws.hpp"
#include "hrelab/seq_models.hpp"

namespace hrelab {

struct PointEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t count = 0;
  bool censored = false;  // too few hits; only the upper limit is reported
};

/// Wilson score interval at 95%; fewer than censor_below hits reports the
/// lower limit as 0 (rare-event censoring).
PointEstimate wilson_interval(std::int64_t k, std::int64_t n,
                              double z = 1.959963984540054,
                              std::int64_t censor_below = 10);

/// Truncated complete-convergence series sum_N P(|S_N| > eps N) with per-N
/// exceedance frequencies.
struct TailSeriesEstimate {
  double epsilon = 0.0;
  int n_max = 0;
  std::int64_t replicas = 0;
  std::uint64_t seed = 0;
  std::vector<PointEstimate> per_n;   // index N-1
  std::vector<double> cumulative;     // running sums of p_hat
  std::vector<double> oracle;         // per-N closed form; empty if none

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
  double oracle_total() const;
  /// Sum of per-N Wilson half-widths (conservative series CI).
  double halfwidth_sum() const;
  bool structure_ok() const;
};

/// Per-N oracle P(|S_N| > eps N) for models with a closed form (iid gaussian,
/// iid point mass); nullopt otherwise.
std::optional<std::function<double(int)>> closed_form_sum_tail(const SequenceModel& model,
                                                               double epsilon);

TailSeriesEstimate tail_series(const SequenceModel& model, double epsilon, int n_max,
                               std::int64_t replicas, std::uint64_t seed, int workers = 1);
TailSeriesEstimate tail_series(const PathEnsemble& ens, double epsilon);

// ---- Heyde scan ---------------------------------------------------------------

struct HeydePoint {
  double epsilon = 0.0;
  int n_max = 0;
  double eps2_series = 0.0;       // eps^2 * truncated series
  double eps2_series_half = 0.0;  // eps^2 * summed Wilson half-widths
  double oracle = 0.0;
  bool has_oracle = false;
};

/// Default truncation horizon ceil(64/eps^2): the summand is negligible once
/// eps*sqrt(N) is large.
int default_heyde_horizon(double eps);

std::vector<HeydePoint> heyde_scan(const SequenceModel& model, std::span<const double> eps_grid,
                                   const std::function<int(double)>& horizon_rule,
                                   std::int64_t replicas, std::uint64_t seed, int workers = 1);

// ---- bound reports --------------------------------------------------------------

struct BoundCase {
  std::string label;
  double lower = 0.0;
  bool has_lower = false;
  double empirical = 0.0;
  double emp_low = 0.0;
  double emp_high = 0.0;
  double upper = 0.0;
  bool has_upper = false;
  bool pass = true;
  std::string note;
};

struct BoundReport {
  std::string name;
  std::vector<BoundCase> cases;
  bool all_pass() const;
};

/// The constant 128(1+2e^4) of the Fuk-Nagaev-type per-N bound
/// P(|S_N| > N) <= N P(|f| > N/4) + 128(1+2e^4)/N^2.
double fn_tail_constant();

BoundReport fuk_nagaev_check(const Law& law, int n_lo, int n_hi, std::int64_t replicas,
                             std::uint64_t seed, int workers = 1);

/// Concrete admissible constants for the two-sided uniform series bounds
/// c sigma^2 <= series + 1 <= C1 sigma^2 + C2. Derivations: C1/C2 combine the
/// Fuk-Nagaev per-N bound with the dyadic grouping
/// sum_N N P(|f|>N/4) <= 64 sigma^2 + 6; c = 1/128 holds whenever
/// sup_N N P(f > 2N) <= 1/4 (checked per model/epsilon before asserting).
struct UniformBoundsConstants {
  double c = 1.0 / 128.0;
  double C1 = 64.0;
  double C2 = 0.0;  // 7 + fn_tail_constant() * pi^2/6
};
UniformBoundsConstants derived_uniform_constants();

/// True when the lower-bound hypothesis sup_N N P(f > 2 eps N) <= 1/4 holds.
bool lower_bound_hypothesis(const Law& law, double eps);

BoundReport uniform_bounds(std::span<const std::pair<std::string, Law>> models,
                           std::span<const double> eps_list, std::int64_t replicas,
                           std::uint64_t seed, int workers = 1);

/// Symmetric laws: per-N single-jump lower bound
/// P(S_N > 2N) >= N (P(f>2N)/2 - N P(f>2N)^2)^+ checked against the empirical
/// frequency with 3-sigma slack. Non-symmetric laws: factor-2 symmetrization
/// inequality P(sum(f+ - f-) > 2N) <= 2 P(|S_N| > N) checked empirically.
BoundReport lower_bound_check(const Law& law, std::int64_t replicas, std::uint64_t seed,
                              int n_max, int workers = 1);

// ---- max-term series, sandwich, tightness, permutations -------------------------

TailSeriesEstimate max_term_series(const SequenceModel& model, int divisor, int n_max,
                                   std::int64_t replicas, std::uint64_t seed, int workers = 1);
TailSeriesEstimate max_term_series(const PathEnsemble& ens, int divisor);

struct SandwichReport {
  double lower = 0.0;   // mean #{N>=1 : Z > N}
  double middle = 0.0;  // mean Z
  double upper = 0.0;   // mean #{N>=0 : Z > N}
  double se_lower = 0.0, se_middle = 0.0, se_upper = 0.0;
  bool order_ok = false;  // lower <= middle <= upper (exact samplewise means)
};

/// sum_{N>=1} P(Z>N) <= E(Z) <= sum_{N>=0} P(Z>N) on nonnegative samples;
/// throws on a negative sample.
SandwichReport elementary_sandwich(std::span<const double> z);

struct TightnessReport {
  std::vector<double> lambda_grid;
  std::vector<std::vector<double>> exceed;  // [lambda][n] empirical P(|f_n|>lambda)
  std::vector<double> sup_exceed;           // [lambda] sup over n
  std::int64_t inclusion_violations = 0;    // per-path event inclusion; must be 0
  std::int64_t paths_checked = 0;
};

TightnessReport tightness_and_integrability(const SequenceModel& model, int n_max,
                                            std::span<const double> lambda_grid,
                                            std::int64_t replicas, std::uint64_t seed,
                                            int workers = 1);

struct PermutationReport {
  TailSeriesEstimate identity;
  TailSeriesEstimate permuted;
  std::vector<double> diff_mean;  // paired per-N mean of (id - perm) indicators
  std::vector<double> diff_se;
  bool within_band = true;  // |diff| <= 3 se at every N
  bool warning_non_exchangeable = false;
  std::vector<int> permutation;
};

PermutationReport permutation_stress(const SequenceModel& model, std::uint64_t perm_seed,
                                     double epsilon, int n_max, std::int64_t replicas,
                                     std::uint64_t seed, int workers = 1);
/// Same with an explicit permutation of {0,...,n_max-1}.
PermutationReport permutation_stress_with(const SequenceModel& model, std::span<const int> perm,
                                          double epsilon, int n_max, std::int64_t replicas,
                                          std::uint64_t seed, int workers = 1);

// ---- CSV ------------------------------------------------------------------------

/// Columns: N,p_hat,ci_low,ci_high,cumulative,oracle (oracle empty when
/// unavailable). Deterministic shortest round-trip decimals.
void write_csv(std::ostream& os, const TailSeriesEstimate& est);
void write_csv(std::ostream& os, const BoundReport& rep);

std::string format_double(double v);

}  // namespace hrelab
