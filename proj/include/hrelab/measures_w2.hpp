#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hrelab/prob_engine.hpp"

namespace hrelab {

/// Finitely supported element of P2(R): strictly increasing support, positive
/// masses summing to 1 (renormalized when off by <= 1e-9).
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<double> support, std::vector<double> masses);

  static EmpiricalMeasure dirac(double x);
  /// Builds from unsorted (value, mass) pairs, merging equal values.
  static EmpiricalMeasure from_pairs(std::vector<std::pair<double, double>> pairs);
  /// Exact law of a random variable on its finite space.
  static EmpiricalMeasure law_of(const RandomVariable& x);
  /// Conditional law of x given a set of atoms.
  static EmpiricalMeasure law_of_restricted(const RandomVariable& x,
                                            const std::vector<int>& atoms);

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& masses() const { return masses_; }
  int size() const { return static_cast<int>(support_.size()); }

  double mean() const;
  double second_moment() const;
  /// P(|X| > t), exact.
  double abs_tail(double t) const;

  /// Two-column text serialization (support mass), shortest round-trip decimals.
  std::string serialize() const;
  static EmpiricalMeasure deserialize(const std::string& text);

 private:
  std::vector<double> support_;
  std::vector<double> masses_;
};

struct CouplingEntry {
  double x;
  double y;
  double mass;
};

/// Quadratic Wasserstein distance via the monotone (quantile) coupling.
double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// The coupling realizing w2: marginals reproduce mu and nu to 1e-12 and the
/// transport cost equals w2(mu,nu)^2.
std::vector<CouplingEntry> monotone_coupling(const EmpiricalMeasure& mu,
                                             const EmpiricalMeasure& nu);

struct JoinResult {
  SpacePtr product_space;   // grid x original atoms, row-major by cell
  RandomVariable g;         // has law nu
  RandomVariable f_lifted;  // original f pulled back to the product space
  double mean_square_error; // E(f-g)^2, exact on the product space
  double w2_squared;        // transport cost between law(f) and nu
  double law_discrepancy;   // total mass mismatch between law(g) and nu
  int grid;
};

/// Smallest auxiliary-grid size making every conditional mass of the monotone
/// coupling an exact multiple of 1/grid (capped; throws past the cap).
int required_join_grid(const RandomVariable& f, const EmpiricalMeasure& nu,
                       int cap = 1 << 20);

/// Transport f to a variable with law nu on the product of a discretized
/// auxiliary [0,1] factor with f's space. The target is decomposed over the
/// level sets of f through the monotone coupling, and each conditional piece
/// is realized by inverse-CDF on the auxiliary cells. Throws
/// "grid insufficient" (naming the required size) when the cells cannot carry
/// the conditional masses exactly.
JoinResult join(const RandomVariable& f, const EmpiricalMeasure& nu, int grid);

struct ConditionalMeasureTable {
  Partition partition;
  /// rows[b][n] = exact conditional law of f_n given block b.
  std::vector<std::vector<EmpiricalMeasure>> rows;
};

ConditionalMeasureTable conditional_measure_table(const Partition& partition,
                                                  std::span<const RandomVariable> fs);

struct AggregateResult {
  std::vector<EmpiricalMeasure> mixtures;  // one per sequence index
  /// max over n and monomials 1, x, x^2 of |mixture moment - direct moment|
  double max_moment_discrepancy;
  bool pass;  // discrepancy <= 1e-12 (scaled)
};

/// Block-weighted mixture of the conditional laws, checked against direct
/// expectations of 1, x, x^2 on the underlying space.
AggregateResult aggregate(const ConditionalMeasureTable& table,
                          std::span<const RandomVariable> fs);

struct DyadicTailProfile {
  std::vector<double> a;             // a_i = P(|f| > 2^i)
  std::vector<double> terms;         // 4^i * a_i
  std::vector<double> partial_sums;  // running sums of terms
  /// When a second moment is supplied: truncated lower sandwich bound
  /// sum 2^(2i-1) a_i, and whether it stays below the supplied moment.
  std::optional<double> lower_bound;
  std::optional<double> supplied_second_moment;
  bool sandwich_ok = true;
};

using TailFn = std::function<double(double)>;

DyadicTailProfile dyadic_profile(const TailFn& abs_tail, int i_max,
                                 std::optional<double> second_moment = std::nullopt);
DyadicTailProfile dyadic_profile(const EmpiricalMeasure& mu, int i_max,
                                 std::optional<double> second_moment = std::nullopt);

/// Truncation levels: K_n = smallest value on a geometric search grid with
/// P(|f| > K_n) <= 2^-n and E(|f| 1{|f| > K_n}) <= 2^-n. The sequence is
/// non-decreasing; levels for a bounded law saturate at the bound. Throws
/// with a diagnostic when no grid value works.
std::vector<double> truncation_levels(const TailFn& abs_tail, const TailFn& abs_moment,
                                      int n_max);

}  // namespace hrelab
