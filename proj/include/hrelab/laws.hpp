#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hrelab/rng.hpp"

namespace hrelab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal upper tail P(Z > x), accurate far into the tail.
double normal_upper_tail(double x);
/// Standard normal density.
double normal_pdf(double x);

/// A scalar distribution with closed-form tail and moment functionals.
///
/// Every law knows how to sample itself from a StreamRng and reports its
/// exact mean, second moment (possibly infinite), two-sided and one-sided
/// tails, the partial first moment E(|X| 1{|X|>t}) and the truncated second
/// moment E(X^2 1{|X|<=K}). Discrete laws expose their alphabet so they can
/// be realized on an exact product space.
class Law {
 public:
  enum class Kind { point, rademacher, categorical, uniform_sym, gaussian, laplace, pareto_sym };

  static Law point(double c);
  static Law rademacher();
  /// Finite discrete law; probs must be positive and sum to 1 within 1e-9.
  static Law categorical(std::vector<double> values, std::vector<double> probs);
  /// Uniform on [-half_width, half_width].
  static Law uniform_sym(double half_width);
  static Law gaussian(double mean, double sd);
  /// Symmetric Laplace with density exp(-|x|/b)/(2b).
  static Law laplace(double b);
  /// Symmetric heavy tail: P(|X| > t) = t^(-alpha) for t >= 1, fair sign.
  /// Requires alpha > 1 so the mean exists (and equals 0).
  static Law pareto_sym(double alpha);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  double sample(StreamRng& rng) const;

  double mean() const;
  /// E(X^2); +inf when the law has no second moment.
  double second_moment() const;
  double variance() const;
  bool symmetric() const;

  /// P(|X| > t), exact.
  double abs_tail(double t) const;
  /// P(X > t), exact.
  double upper_tail(double t) const;
  /// E(|X| 1{|X| > t}), exact.
  double abs_tail_moment(double t) const;
  /// E(X^2 1{|X| <= K}), exact.
  double trunc_second_moment(double K) const;

  bool finite_alphabet() const;
  /// (values, probs) for finite laws; throws for continuous ones.
  std::pair<std::vector<double>, std::vector<double>> alphabet() const;

  double param_a() const { return a_; }
  double param_b() const { return b_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  Law(Kind k, std::string name) : kind_(k), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  double a_ = 0.0;  // mean / half-width / location / alpha, per kind
  double b_ = 0.0;  // sd / scale, per kind
  std::vector<double> values_;
  std::vector<double> probs_;
  std::vector<double> cum_;  // categorical sampling CDF
};

}  // namespace hrelab
