#include "hrelab/laws.hpp"

#include <algorithm>
#include <cmath>

namespace hrelab {

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

Law Law::point(double c) {
  Law l(Kind::point, "point");
  l.a_ = c;
  l.values_ = {c};
  l.probs_ = {1.0};
  return l;
}

Law Law::rademacher() {
  Law l(Kind::rademacher, "rademacher");
  l.values_ = {-1.0, 1.0};
  l.probs_ = {0.5, 0.5};
  return l;
}

Law Law::categorical(std::vector<double> values, std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size())
    throw std::invalid_argument("categorical: values/probs size mismatch");
  double s = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) throw std::invalid_argument("categorical: probs must be positive");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("categorical: probs must sum to 1");
  for (double& p : probs) p /= s;
  Law l(Kind::categorical, "categorical");
  l.values_ = std::move(values);
  l.probs_ = std::move(probs);
  l.cum_.resize(l.probs_.size());
  double c = 0.0;
  for (std::size_t i = 0; i < l.probs_.size(); ++i) {
    c += l.probs_[i];
    l.cum_[i] = c;
  }
  l.cum_.back() = 1.0;
  return l;
}

Law Law::uniform_sym(double half_width) {
  if (!(half_width > 0.0)) throw std::invalid_argument("uniform_sym: half_width must be positive");
  Law l(Kind::uniform_sym, "uniform");
  l.a_ = half_width;
  return l;
}

Law Law::gaussian(double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("gaussian: sd must be positive");
  Law l(Kind::gaussian, "gaussian");
  l.a_ = mean;
  l.b_ = sd;
  return l;
}

Law Law::laplace(double b) {
  if (!(b > 0.0)) throw std::invalid_argument("laplace: scale must be positive");
  Law l(Kind::laplace, "laplace");
  l.b_ = b;
  return l;
}

Law Law::pareto_sym(double alpha) {
  if (!(alpha > 1.0)) throw std::invalid_argument("pareto_sym: alpha must exceed 1");
  Law l(Kind::pareto_sym, "pareto");
  l.a_ = alpha;
  return l;
}

double Law::sample(StreamRng& rng) const {
  switch (kind_) {
    case Kind::point:
      return a_;
    case Kind::rademacher:
      return rng.next_bit() ? 1.0 : -1.0;
    case Kind::categorical: {
      const double u = rng.next_unit();
      const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
      const std::size_t i = std::min<std::size_t>(it - cum_.begin(), values_.size() - 1);
      return values_[i];
    }
    case Kind::uniform_sym:
      return a_ * (2.0 * rng.next_unit() - 1.0);
    case Kind::gaussian:
      return a_ + b_ * rng.next_gaussian();
    case Kind::laplace: {
      const double u = rng.next_unit_open();
      const double mag = -b_ * std::log(u);
      return rng.next_bit() ? mag : -mag;
    }
    case Kind::pareto_sym: {
      const double u = rng.next_unit_open();
      const double mag = std::pow(u, -1.0 / a_);
      return rng.next_bit() ? mag : -mag;
    }
  }
  return 0.0;
}

double Law::mean() const {
  switch (kind_) {
    case Kind::point:
      return a_;
    case Kind::gaussian:
      return a_;
    case Kind::categorical: {
      double m = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) m += probs_[i] * values_[i];
      return m;
    }
    default:
      return 0.0;  // symmetric kinds
  }
}

double Law::second_moment() const {
  switch (kind_) {
    case Kind::point:
      return a_ * a_;
    case Kind::rademacher:
      return 1.0;
    case Kind::categorical: {
      double m = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) m += probs_[i] * values_[i] * values_[i];
      return m;
    }
    case Kind::uniform_sym:
      return a_ * a_ / 3.0;
    case Kind::gaussian:
      return a_ * a_ + b_ * b_;
    case Kind::laplace:
      return 2.0 * b_ * b_;
    case Kind::pareto_sym:
      return a_ > 2.0 ? a_ / (a_ - 2.0) : kInf;
  }
  return 0.0;
}

double Law::variance() const {
  const double s2 = second_moment();
  if (s2 == kInf) return kInf;
  const double m = mean();
  return s2 - m * m;
}

bool Law::symmetric() const {
  switch (kind_) {
    case Kind::point:
      return a_ == 0.0;
    case Kind::gaussian:
      return a_ == 0.0;
    case Kind::categorical: {
      // exact: every (v, p) must have a matching (-v, p)
      for (std::size_t i = 0; i < values_.size(); ++i) {
        double want = -values_[i];
        double got = 0.0;
        for (std::size_t j = 0; j < values_.size(); ++j)
          if (values_[j] == want) got += probs_[j];
        if (std::abs(got - probs_[i]) > 1e-12) return false;
      }
      return true;
    }
    default:
      return true;
  }
}

double Law::abs_tail(double t) const {
  if (t < 0.0) return 1.0;
  switch (kind_) {
    case Kind::point:
      return std::abs(a_) > t ? 1.0 : 0.0;
    case Kind::rademacher:
      return t < 1.0 ? 1.0 : 0.0;
    case Kind::categorical: {
      double p = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i)
        if (std::abs(values_[i]) > t) p += probs_[i];
      return p;
    }
    case Kind::uniform_sym:
      return t >= a_ ? 0.0 : 1.0 - t / a_;
    case Kind::gaussian:
      return normal_upper_tail((t - a_) / b_) + normal_upper_tail((t + a_) / b_);
    case Kind::laplace:
      return std::exp(-t / b_);
    case Kind::pareto_sym:
      return t < 1.0 ? 1.0 : std::pow(t, -a_);
  }
  return 0.0;
}

double Law::upper_tail(double t) const {
  switch (kind_) {
    case Kind::point:
      return a_ > t ? 1.0 : 0.0;
    case Kind::rademacher:
      return t < 1.0 ? (t < -1.0 ? 1.0 : 0.5) : 0.0;
    case Kind::categorical: {
      double p = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i)
        if (values_[i] > t) p += probs_[i];
      return p;
    }
    case Kind::uniform_sym:
      if (t >= a_) return 0.0;
      if (t <= -a_) return 1.0;
      return (a_ - t) / (2.0 * a_);
    case Kind::gaussian:
      return normal_upper_tail((t - a_) / b_);
    case Kind::laplace:
      return t >= 0.0 ? 0.5 * std::exp(-t / b_) : 1.0 - 0.5 * std::exp(t / b_);
    case Kind::pareto_sym:
      if (t >= 1.0) return 0.5 * std::pow(t, -a_);
      if (t <= -1.0) return 1.0 - 0.5 * std::pow(-t, -a_);
      return 0.5;
  }
  return 0.0;
}

double Law::abs_tail_moment(double t) const {
  if (t < 0.0) t = 0.0;
  switch (kind_) {
    case Kind::point:
      return std::abs(a_) > t ? std::abs(a_) : 0.0;
    case Kind::rademacher:
      return t < 1.0 ? 1.0 : 0.0;
    case Kind::categorical: {
      double m = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i)
        if (std::abs(values_[i]) > t) m += probs_[i] * std::abs(values_[i]);
      return m;
    }
    case Kind::uniform_sym:
      return t >= a_ ? 0.0 : (a_ * a_ - t * t) / (2.0 * a_);
    case Kind::gaussian: {
      // E(X 1{X>t}) = m*Qbar + s*pdf at (t-m)/s; reflect for the lower piece.
      const double m = a_, s = b_;
      const double zu = (t - m) / s, zl = (-t - m) / s;
      const double up = m * normal_upper_tail(zu) + s * normal_pdf(zu);
      const double lo = -(m * (1.0 - normal_upper_tail(zl)) - s * normal_pdf(zl));
      return up + lo;
    }
    case Kind::laplace:
      return (t + b_) * std::exp(-t / b_);
    case Kind::pareto_sym: {
      const double base = a_ / (a_ - 1.0);
      return t <= 1.0 ? base : base * std::pow(t, 1.0 - a_);
    }
  }
  return 0.0;
}

double Law::trunc_second_moment(double K) const {
  if (K < 0.0) return 0.0;
  switch (kind_) {
    case Kind::point:
      return std::abs(a_) <= K ? a_ * a_ : 0.0;
    case Kind::rademacher:
      return K >= 1.0 ? 1.0 : 0.0;
    case Kind::categorical: {
      double m = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i)
        if (std::abs(values_[i]) <= K) m += probs_[i] * values_[i] * values_[i];
      return m;
    }
    case Kind::uniform_sym:
      return K >= a_ ? a_ * a_ / 3.0 : K * K * K / (3.0 * a_);
    case Kind::gaussian: {
      const double m = a_, s = b_;
      const double lo = (-K - m) / s, hi = (K - m) / s;
      const double Phi = (1.0 - normal_upper_tail(hi)) - (1.0 - normal_upper_tail(lo));
      const double EZ = normal_pdf(lo) - normal_pdf(hi);
      const double EZ2 = Phi + lo * normal_pdf(lo) - hi * normal_pdf(hi);
      return m * m * Phi + 2.0 * m * s * EZ + s * s * EZ2;
    }
    case Kind::laplace: {
      const double b = b_;
      return 2.0 * b * b - std::exp(-K / b) * (K * K + 2.0 * b * K + 2.0 * b * b);
    }
    case Kind::pareto_sym: {
      if (K <= 1.0) return 0.0;
      if (a_ == 2.0) return 2.0 * std::log(K);
      return a_ / (2.0 - a_) * (std::pow(K, 2.0 - a_) - 1.0);
    }
  }
  return 0.0;
}

bool Law::finite_alphabet() const {
  return kind_ == Kind::point || kind_ == Kind::rademacher || kind_ == Kind::categorical;
}

std::pair<std::vector<double>, std::vector<double>> Law::alphabet() const {
  if (!finite_alphabet()) throw std::invalid_argument("law has no finite alphabet: " + name_);
  return {values_, probs_};
}

}  // namespace hrelab
