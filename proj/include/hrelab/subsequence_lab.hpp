#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrelab/laws.hpp"
#include "hrelab/measures_w2.hpp"
#include "hrelab/prob_engine.hpp"

namespace hrelab {

// ---- quantization and the martingale-difference selector ------------------------

struct QuantizeResult {
  RandomVariable h;
  double mean_square_error;  // E(f-h)^2, exact
  double certified_bound;    // 4^-n
};

/// Simple-function approximation with E(f-h)^2 <= 4^-n, via a uniform grid of
/// step 2*2^-n over the observed range ((step/2)^2 certifies the bound).
/// Variables already taking at most two values, or whose range the grid
/// cannot resolve in floating point, are returned unchanged.
QuantizeResult quantize(const RandomVariable& f, int n);

struct SelectionReport {
  std::vector<int> indices;                  // k_n, 1-based into h_list
  std::vector<RandomVariable> corrections;   // theta_n = E(h_{k_n} | sigma(h_{k_1..k_{n-1}}))
  std::vector<RandomVariable> differences;   // beta_n = h_{k_n} - theta_n
  std::vector<double> theta_max;             // max |theta_n|
  std::vector<double> theta_bound;           // 2^-n
  std::vector<double> l2_orig_dist;          // ||f_{k_n} - beta_n||_2 when originals supplied
  std::vector<double> l2_orig_bound;         // 2^(1-n)
  bool bounds_ok = false;
};

/// Greedy first-admissible scan: k_1 = 1; k_n is the smallest index past
/// k_{n-1} whose conditional mean given the already-selected variables stays
/// below 2^-n everywhere. Throws "weak-nullity exhausted at stage n" when the
/// scan runs past `horizon` without an admissible candidate.
SelectionReport select_md_subsequence(std::span<const RandomVariable> h_list, int n_stages,
                                      int horizon = -1,
                                      std::span<const RandomVariable> f_list = {});

// ---- KPR decomposition and disjointly supported spikes --------------------------

struct KprOptions {
  double l1_bound = 1.0;  // declared sup_n E|f_n|
  double ui_K = 1.0;      // level at which the kept residuals must be small
  double ui_tol = 1e-9;
};

struct KprDecomposition {
  std::vector<RandomVariable> spikes;        // h_n = f_n 1_{B_n}
  std::vector<std::vector<int>> supports;    // B_n, pairwise disjoint
  std::vector<RandomVariable> residuals;     // g_n = f_n - h_n
  std::vector<double> thresholds;            // t_n (powers of 2)
  std::vector<double> ui_grid;               // K values
  std::vector<double> ui_profile;            // sup_n E(|g_n| 1{|g_n|>K})
  std::vector<bool> gamma_supported;         // g_n vanishes outside union of later B_m
  std::vector<int> kept;                     // indices whose residual is small at ui_K
};

/// Spike/residual split: B_n collects the atoms where |f_n| exceeds the
/// threshold t_n = smallest power of 2 with E(|f_n| 1{|f_n|>t_n}) <=
/// l1_bound * 2^-n, minus atoms already claimed; h_n = f_n on B_n and
/// g_n = f_n - h_n. The split is exact (f_n = h_n + g_n); whether g_n also
/// vanishes outside the later spikes' union is recorded per index rather
/// than forced.
KprDecomposition kpr_decompose(std::span<const RandomVariable> f_list, const KprOptions& opt);

struct DisjointSeriesReport {
  // sufficiency chain, exact on the discrete realization
  double series = 0.0;        // sum_N P(|sum_{n<=N} h_n| > N)
  double dominating = 0.0;    // sum_N P(sum_n |h_n| > N)
  double l1_total = 0.0;      // sum_n E|h_n|
  bool chain_ok = false;      // series <= dominating <= l1_total

  // necessity accounting (per spike block)
  std::vector<double> block_series;      // sum_N P(|sum_{n<=N} h_n| 1_{B_m} > N)
  std::vector<double> block_closed;      // sum_{N>=m} P(|h_m| > N)
  std::vector<double> tail_mass;         // E(|h_m| 1{|h_m| > m})
  std::vector<double> accumulation;      // running sum of block_series
  bool identity_ok = false;              // block_series == block_closed exactly
  bool certified_divergent = false;      // all tail masses exceed the supplied beta
};

enum class DisjointMode { sufficient, necessary };

/// Exact series accounting for disjointly supported spikes; throws on
/// overlapping supports.
DisjointSeriesReport disjoint_support_series(std::span<const RandomVariable> h_list,
                                             std::span<const std::vector<int>> supports,
                                             DisjointMode mode, double beta = 0.0);

struct PairingStage {
  int stage = 0;             // n
  int chosen = 0;            // k_{n+1} in {2n+1, 2n+2}
  bool test_passed = false;  // E|h_{2n+1} + sum g 1_B| > beta held
  double contribution = 0.0; // exact block series
  double floor = 0.0;        // beta - n * P(B_{2n+1})
};

struct PairingReport {
  std::vector<int> indices;  // k_1 = 1, then the chosen k_{n+1}
  std::vector<PairingStage> stages;
  double total = 0.0;        // sum of stage contributions
  bool floors_ok = false;    // every contribution >= its floor
};

/// Inductive pairing choice k_{n+1} in {2n+1, 2n+2}: keep the odd index when
/// the spike survives the residual carried onto its block in L1 mean
/// (> beta), otherwise the residual sum alone carries the mass. Each stage
/// certifies an exact block-series contribution of at least
/// beta - n P(B_{2n+1}). Requires E|h_n| > 2 beta and P(B_n) <= n^-3.
PairingReport adversarial_pairing(std::span<const RandomVariable> h_list,
                                  std::span<const std::vector<int>> supports,
                                  std::span<const RandomVariable> g_list, double beta,
                                  int n_stages);

// ---- truncation split -------------------------------------------------------------

struct TruncationSplit {
  std::vector<double> levels;      // K_n
  std::vector<double> prob_keep;   // P(|f_n| <= K_n), must exceed 1 - 2^-n
  std::vector<double> l1_tail;     // E(|f_n| 1{|f_n| > K_n}), must stay below 2^-n
  std::vector<double> l2_trunc;    // E(f_n^2 1{|f_n| <= K_n})
  double l2_bound = 0.0;           // sup_n of the above
  bool certified = false;          // both per-n bounds hold for every n
  bool l2_unbounded_flag = false;  // truncated second moments keep growing
};

/// Truncation sets A_n = {|f_n| <= K_n} for an iid law with exact tail
/// callables; K_n from truncation_levels.
TruncationSplit truncation_split(const Law& law, int n_max);

// ---- refinement trees (finite exchangeability-at-infinity stages) -------------------

struct RefinementStage {
  double eps_k = 0.0;
  int ell_k = 0;                          // smallest index from which diameters hold
  std::vector<std::vector<int>> blocks;   // regular blocks (atom index sets)
  std::vector<int> exceptional;           // exceptional atom set (may be empty)
  std::vector<double> diameters;          // per regular block, over indices >= ell_k
  double exceptional_mass = 0.0;
  double exceptional_l2 = 0.0;            // sup_n E(f_n^2 1_exceptional)
};

struct RefinementTree {
  SpacePtr space;
  std::vector<RefinementStage> stages;

  static RefinementTree initial(SpacePtr space);
  /// Stage-0 state: everything exceptional, no regular blocks.
  const RefinementStage& current() const { return stages.back(); }
};

/// One induction stage: group the candidate blocks of `table` (which must
/// refine the previous stage) into clusters whose conditional measures, over
/// indices n >= ell_k, lie within W2-diameter sqrt(eps_k); complete-linkage
/// clustering, ell_k minimal. Candidate blocks of the previous exceptional
/// set that cannot satisfy the diameter bound stay exceptional; the
/// exceptional mass must end below `egorov_mass` (default eps_k) and its L2
/// content below eps_k, else "Egorov budget exceeded". max_ell caps the
/// search (default: the number of variables).
const RefinementStage& refinement_step(RefinementTree& tree,
                                       const ConditionalMeasureTable& table,
                                       std::span<const RandomVariable> fs, double eps_k,
                                       double egorov_mass = -1.0, int max_ell = -1);

// ---- omnibus check ------------------------------------------------------------------

struct OmnibusBlockReport {
  int block = 0;
  double mass = 0.0;
  bool marginals_identical = false;  // conditional laws of h_n agree across n
  bool factorized = false;           // joint conditional law = product of marginals
  double max_cond_mse = 0.0;         // max_n E^{P_B}[(f*_n - h_n)^2]
  bool mse_ok = false;               // <= 1
};

struct OmnibusReport {
  std::vector<OmnibusBlockReport> blocks;
  std::vector<double> pair_dist_sq;   // E(f_orig_n - f*_n)^2 when originals supplied
  bool pair_ok = true;                // <= 2^-n
  // series decomposition at the given epsilon:
  //   P(|sum f*| > (eps/2) N) <= P(|sum h| > (eps/4) N) + P(|sum (f*-h)| > (eps/4) N)
  std::vector<double> series_fstar;   // cumulative, at eps/2
  std::vector<double> series_h;       // cumulative, at eps/4
  std::vector<double> series_diff;    // cumulative, at eps/4
  bool decomposition_ok = false;      // per-N inequality holds exactly
  // law of total probability over blocks for the h-series
  double h_series_total = 0.0;
  double h_series_weighted = 0.0;     // sum_B P(B) * conditional series
  bool total_probability_ok = false;
};

/// Conditional iid factorization, the unit conditional mean-square bound, the
/// paired 2^-n approximation bounds, and the exact split of the tail series
/// into an omnibus piece and a difference piece. Throws on a zero-mass block.
OmnibusReport omnibus_check(const Partition& blocks, std::span<const RandomVariable> h,
                            std::span<const RandomVariable> f_star,
                            std::span<const RandomVariable> f_orig = {}, double epsilon = 1.0,
                            int horizon = -1);

}  // namespace hrelab
