#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hrelab {

/// Finite probability space: strictly positive atom weights summing to 1.
/// Weights off by at most 1e-9 are silently renormalized; a larger deviation
/// is rejected as a construction error.
class DiscreteSpace {
 public:
  explicit DiscreteSpace(std::vector<double> weights);

  static std::shared_ptr<const DiscreteSpace> uniform(int atom_count);
  static std::shared_ptr<const DiscreteSpace> make(std::vector<double> weights);

  int atom_count() const { return static_cast<int>(weights_.size()); }
  double weight(int atom) const { return weights_[atom]; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

using SpacePtr = std::shared_ptr<const DiscreteSpace>;

class RandomVariable {
 public:
  RandomVariable(SpacePtr space, std::vector<double> values);

  const SpacePtr& space() const { return space_; }
  const std::vector<double>& values() const { return values_; }
  double operator()(int atom) const { return values_[atom]; }
  int size() const { return static_cast<int>(values_.size()); }

 private:
  SpacePtr space_;
  std::vector<double> values_;
};

/// Partition of the atom set into disjoint nonempty blocks; models a finite
/// sigma-algebra.
class Partition {
 public:
  Partition(SpacePtr space, std::vector<std::vector<int>> blocks);

  static Partition trivial(SpacePtr space);
  static Partition finest(SpacePtr space);

  const SpacePtr& space() const { return space_; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  int block_of(int atom) const { return block_of_[atom]; }
  double block_mass(int b) const;

 private:
  SpacePtr space_;
  std::vector<std::vector<int>> blocks_;
  std::vector<int> block_of_;
};

struct MartingalePath {
  SpacePtr space;
  std::vector<RandomVariable> increments;
  std::vector<Partition> filtration;  // filtration[n] = sigma-algebra after increment n+1

  /// Throws unless the filtration refines monotonically and each increment is
  /// measurable with respect to its own-index partition.
  void validate() const;
  int length() const { return static_cast<int>(increments.size()); }
};

// ---- expectations ----------------------------------------------------------

double expectation(const RandomVariable& x);
double expectation_sq(const RandomVariable& x);
/// P(mask), mask one char per atom.
double probability(const DiscreteSpace& space, std::span<const char> mask);

// ---- operations ------------------------------------------------------------

/// Block-averaged conditional expectation; exact tower property on finite
/// spaces. Throws "space mismatch" when x and p live on different spaces.
RandomVariable cond_exp(const RandomVariable& x, const Partition& p);

/// sigma(xs) as a partition: atoms share a block iff every listed variable
/// takes bit-identical values on them. Empty list gives the trivial partition.
Partition generated_partition(SpacePtr space, std::span<const RandomVariable> xs);

/// Refine p by one more variable; equals generated_partition of the union.
Partition refine_by(const Partition& p, const RandomVariable& x);

bool refines(const Partition& fine, const Partition& coarse);

struct MdReport {
  double max_cond_mean = 0.0;     // max over n, atoms of |E(f_{n+1} | F_n)|
  double max_cond_second = 0.0;   // max over n, atoms of E(f_{n+1}^2 | F_n)
  double mean_tol = 1e-12;
  double bound = 1.0;
  bool pass = false;
};

/// Martingale-difference diagnostic: conditional means must vanish to 1e-12
/// and conditional second moments must stay below `bound`.
MdReport verify_md(const MartingalePath& path, double bound);

struct DoobChainReport {
  int N = 0;
  double p_tau_finite = 0.0;   // P(first |X_n| > N/3 happens by N)
  double p_B = 0.0;            // P(|X_N| > N)
  double p_A_c = 0.0;          // P(max_n |f_n| > N/3)
  double p_B_and_A = 0.0;      // P(B_N and A_N)
  double doob_bound = 0.0;     // 36/N
  double product_bound = 0.0;  // 324/N^2
  bool within_doob = false;
  bool within_product = false;
  std::vector<int> tau;        // per atom; N+1 encodes "never"
  std::vector<double> x_final;     // X_N per atom
  std::vector<double> y_final;     // X_N - X_{N wedge tau} per atom
};

/// Exact stopped-walk diagnostics for the first N increments of a
/// martingale-difference path: stopping time tau = min{n <= N : |X_n| > N/3},
/// the events {|X_N| > N} and {max_n |f_n| <= N/3}, and the Doob-type bounds
/// 36/N and 324/N^2 they are checked against.
DoobChainReport doob_chain(const MartingalePath& path, int N);

}  // namespace hrelab
