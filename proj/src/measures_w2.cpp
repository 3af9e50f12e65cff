#include "hrelab/measures_w2.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hrelab {

namespace {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> support, std::vector<double> masses)
    : support_(std::move(support)), masses_(std::move(masses)) {
  if (support_.empty() || support_.size() != masses_.size())
    throw std::invalid_argument("EmpiricalMeasure: support/mass size mismatch");
  for (std::size_t i = 1; i < support_.size(); ++i)
    if (!(support_[i] > support_[i - 1]))
      throw std::invalid_argument("EmpiricalMeasure: support must be strictly increasing");
  double s = 0.0;
  for (double m : masses_) {
    if (!(m > 0.0)) throw std::invalid_argument("EmpiricalMeasure: masses must be positive");
    s += m;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("EmpiricalMeasure: masses sum to " + std::to_string(s));
  if (s != 1.0)
    for (double& m : masses_) m /= s;
}

EmpiricalMeasure EmpiricalMeasure::dirac(double x) { return EmpiricalMeasure({x}, {1.0}); }

EmpiricalMeasure EmpiricalMeasure::from_pairs(std::vector<std::pair<double, double>> pairs) {
  std::map<double, double> agg;
  for (auto& [v, m] : pairs) agg[v] += m;
  std::vector<double> sup, mas;
  sup.reserve(agg.size());
  mas.reserve(agg.size());
  for (auto& [v, m] : agg) {
    if (m <= 0.0) continue;
    sup.push_back(v);
    mas.push_back(m);
  }
  return EmpiricalMeasure(std::move(sup), std::move(mas));
}

EmpiricalMeasure EmpiricalMeasure::law_of(const RandomVariable& x) {
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(x.size());
  for (int a = 0; a < x.size(); ++a) pairs.emplace_back(x(a), x.space()->weight(a));
  return from_pairs(std::move(pairs));
}

EmpiricalMeasure EmpiricalMeasure::law_of_restricted(const RandomVariable& x,
                                                     const std::vector<int>& atoms) {
  if (atoms.empty()) throw std::invalid_argument("law_of_restricted: empty atom set");
  double total = 0.0;
  for (int a : atoms) total += x.space()->weight(a);
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(atoms.size());
  for (int a : atoms) pairs.emplace_back(x(a), x.space()->weight(a) / total);
  return from_pairs(std::move(pairs));
}

double EmpiricalMeasure::mean() const {
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += masses_[i] * support_[i];
  return s;
}

double EmpiricalMeasure::second_moment() const {
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += masses_[i] * support_[i] * support_[i];
  return s;
}

double EmpiricalMeasure::abs_tail(double t) const {
  double s = 0.0;
  for (int i = 0; i < size(); ++i)
    if (std::abs(support_[i]) > t) s += masses_[i];
  return s;
}

std::string EmpiricalMeasure::serialize() const {
  std::string out;
  for (int i = 0; i < size(); ++i) {
    out += format_double(support_[i]);
    out += ' ';
    out += format_double(masses_[i]);
    out += '\n';
  }
  return out;
}

EmpiricalMeasure EmpiricalMeasure::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> sup, mas;
  double v, m;
  while (in >> v >> m) {
    sup.push_back(v);
    mas.push_back(m);
  }
  return EmpiricalMeasure(std::move(sup), std::move(mas));
}

// ---- quantile coupling -------------------------------------------------------

std::vector<CouplingEntry> monotone_coupling(const EmpiricalMeasure& mu,
                                             const EmpiricalMeasure& nu) {
  std::vector<CouplingEntry> out;
  int i = 0, j = 0;
  double rem_i = mu.masses()[0], rem_j = nu.masses()[0];
  while (i < mu.size() && j < nu.size()) {
    const double m = std::min(rem_i, rem_j);
    // fp residue from the cumulative subtraction can leave epsilon masses
    if (m > 1e-15) out.push_back({mu.support()[i], nu.support()[j], m});
    rem_i -= m;
    rem_j -= m;
    // ties advance both sides, which keeps the walk symmetric in (mu, nu)
    if (rem_i <= 0.0) {
      ++i;
      if (i < mu.size()) rem_i = mu.masses()[i];
    }
    if (rem_j <= 0.0) {
      ++j;
      if (j < nu.size()) rem_j = nu.masses()[j];
    }
  }
  return out;
}

double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  double cost = 0.0;
  int i = 0, j = 0;
  double rem_i = mu.masses()[0], rem_j = nu.masses()[0];
  while (i < mu.size() && j < nu.size()) {
    const double m = std::min(rem_i, rem_j);
    const double d = mu.support()[i] - nu.support()[j];
    cost += m * d * d;
    rem_i -= m;
    rem_j -= m;
    if (rem_i <= 0.0) {
      ++i;
      if (i < mu.size()) rem_i = mu.masses()[i];
    }
    if (rem_j <= 0.0) {
      ++j;
      if (j < nu.size()) rem_j = nu.masses()[j];
    }
  }
  return std::sqrt(cost);
}

// ---- joining -----------------------------------------------------------------

namespace {

struct LevelSet {
  double value;
  double mass;
  std::vector<int> atoms;
};

std::vector<LevelSet> level_sets(const RandomVariable& f) {
  std::map<double, LevelSet> m;
  for (int a = 0; a < f.size(); ++a) {
    auto& ls = m[f(a)];
    ls.value = f(a);
    ls.mass += f.space()->weight(a);
    ls.atoms.push_back(a);
  }
  std::vector<LevelSet> out;
  out.reserve(m.size());
  for (auto& [v, ls] : m) out.push_back(std::move(ls));
  return out;
}

// conditional target measures kappa_j (one per level set of f), extracted
// from the monotone coupling between law(f) and nu
std::vector<std::vector<std::pair<double, double>>> conditional_pieces(
    const std::vector<LevelSet>& levels, const EmpiricalMeasure& mu,
    const EmpiricalMeasure& nu) {
  const auto coupling = monotone_coupling(mu, nu);
  std::vector<std::vector<std::pair<double, double>>> pieces(levels.size());
  std::size_t j = 0;
  for (const auto& e : coupling) {
    while (j + 1 < levels.size() && levels[j].value != e.x) ++j;
    pieces[j].emplace_back(e.y, e.mass / levels[j].mass);
  }
  return pieces;
}

// smallest denominator q <= cap with |m - p/q| <= eps, via continued fractions
std::int64_t min_denominator(double m, double eps, std::int64_t cap) {
  std::int64_t p0 = 1, q0 = 0;
  std::int64_t p1 = static_cast<std::int64_t>(std::floor(m)), q1 = 1;
  double x = m - std::floor(m);
  while (std::abs(m - static_cast<double>(p1) / static_cast<double>(q1)) > eps) {
    if (x <= 1e-15) break;
    x = 1.0 / x;
    const double af = std::floor(x);
    x -= af;
    const std::int64_t a = static_cast<std::int64_t>(af);
    const std::int64_t p2 = a * p1 + p0, q2 = a * q1 + q0;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    if (q1 > cap) return -1;
  }
  return q1;
}

std::int64_t lcm_capped(std::int64_t a, std::int64_t b, std::int64_t cap) {
  const std::int64_t g = std::gcd(a, b);
  const std::int64_t l = a / g * b;
  return (l > cap || l <= 0) ? -1 : l;
}

}  // namespace

int required_join_grid(const RandomVariable& f, const EmpiricalMeasure& nu, int cap) {
  const auto levels = level_sets(f);
  std::vector<std::pair<double, double>> mu_pairs;
  for (const auto& ls : levels) mu_pairs.emplace_back(ls.value, ls.mass);
  const EmpiricalMeasure mu = EmpiricalMeasure::from_pairs(std::move(mu_pairs));
  const auto pieces = conditional_pieces(levels, mu, nu);
  std::int64_t g = 1;
  for (const auto& piece : pieces) {
    for (const auto& [y, m] : piece) {
      const std::int64_t d = min_denominator(m, 1e-12, cap);
      if (d < 0) throw std::runtime_error("required_join_grid: conditional mass has no small denominator");
      g = lcm_capped(g, d, cap);
      if (g < 0) throw std::runtime_error("required_join_grid: grid requirement exceeds cap");
    }
  }
  return static_cast<int>(g);
}

JoinResult join(const RandomVariable& f, const EmpiricalMeasure& nu, int grid) {
  if (grid < 1) throw std::invalid_argument("join: grid must be >= 1");
  const auto levels = level_sets(f);
  std::vector<std::pair<double, double>> mu_pairs;
  for (const auto& ls : levels) mu_pairs.emplace_back(ls.value, ls.mass);
  const EmpiricalMeasure mu = EmpiricalMeasure::from_pairs(std::move(mu_pairs));
  const auto pieces = conditional_pieces(levels, mu, nu);

  // every conditional mass must fill a whole number of auxiliary cells
  std::vector<std::vector<std::pair<double, std::int64_t>>> cell_counts(pieces.size());
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    std::int64_t used = 0;
    for (const auto& [y, m] : pieces[j]) {
      const double r = m * grid;
      const std::int64_t c = static_cast<std::int64_t>(std::llround(r));
      if (std::abs(r - static_cast<double>(c)) > 1e-9 || c <= 0) {
        const int need = required_join_grid(f, nu);
        throw std::runtime_error("grid insufficient: need grid " + std::to_string(need));
      }
      cell_counts[j].emplace_back(y, c);
      used += c;
    }
    if (used != grid) {
      const int need = required_join_grid(f, nu);
      throw std::runtime_error("grid insufficient: need grid " + std::to_string(need));
    }
  }

  const int atoms = f.size();
  if (static_cast<std::int64_t>(grid) * atoms > (std::int64_t{1} << 24))
    throw std::runtime_error("join: product space too large (grid * atoms)");

  // inverse-CDF table: auxiliary cell -> target point, one table per level set
  std::vector<std::vector<double>> cell_value(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    cell_value[j].reserve(grid);
    for (const auto& [y, c] : cell_counts[j])
      cell_value[j].insert(cell_value[j].end(), static_cast<std::size_t>(c), y);
  }
  std::vector<int> level_of(atoms, 0);
  for (std::size_t j = 0; j < levels.size(); ++j)
    for (int a : levels[j].atoms) level_of[a] = static_cast<int>(j);

  std::vector<double> weights(static_cast<std::size_t>(grid) * atoms);
  std::vector<double> gv(weights.size()), fv(weights.size());
  const double inv_grid = 1.0 / grid;
  for (int c = 0; c < grid; ++c) {
    for (int a = 0; a < atoms; ++a) {
      const std::size_t idx = static_cast<std::size_t>(c) * atoms + a;
      weights[idx] = f.space()->weight(a) * inv_grid;
      fv[idx] = f(a);
      gv[idx] = cell_value[level_of[a]][c];
    }
  }

  SpacePtr product_space = DiscreteSpace::make(std::move(weights));
  JoinResult out{product_space,
                 RandomVariable(product_space, std::move(gv)),
                 RandomVariable(product_space, std::move(fv)),
                 0.0,
                 0.0,
                 0.0,
                 grid};

  double mse = 0.0;
  for (int i = 0; i < out.g.size(); ++i) {
    const double d = out.f_lifted(i) - out.g(i);
    mse += out.product_space->weight(i) * d * d;
  }
  out.mean_square_error = mse;
  const double dist = w2(mu, nu);
  out.w2_squared = dist * dist;

  const EmpiricalMeasure law_g = EmpiricalMeasure::law_of(out.g);
  double disc = 0.0;
  {
    std::map<double, double> diff;
    for (int i = 0; i < law_g.size(); ++i) diff[law_g.support()[i]] += law_g.masses()[i];
    for (int i = 0; i < nu.size(); ++i) diff[nu.support()[i]] -= nu.masses()[i];
    for (auto& [v, d] : diff) disc += std::abs(d);
  }
  out.law_discrepancy = disc;
  return out;
}

// ---- conditional tables and aggregation --------------------------------------

ConditionalMeasureTable conditional_measure_table(const Partition& partition,
                                                  std::span<const RandomVariable> fs) {
  for (const auto& f : fs)
    if (f.space().get() != partition.space().get())
      throw std::invalid_argument("space mismatch");
  ConditionalMeasureTable table{partition, {}};
  table.rows.reserve(partition.block_count());
  for (const auto& block : partition.blocks()) {
    std::vector<EmpiricalMeasure> row;
    row.reserve(fs.size());
    for (const auto& f : fs) row.push_back(EmpiricalMeasure::law_of_restricted(f, block));
    table.rows.push_back(std::move(row));
  }
  return table;
}

AggregateResult aggregate(const ConditionalMeasureTable& table,
                          std::span<const RandomVariable> fs) {
  const auto& part = table.partition;
  const std::size_t n_vars = table.rows.empty() ? 0 : table.rows[0].size();
  if (fs.size() != n_vars) throw std::invalid_argument("aggregate: table/variable count mismatch");

  AggregateResult out;
  out.max_moment_discrepancy = 0.0;
  double scale = 1.0;
  for (std::size_t n = 0; n < n_vars; ++n) {
    std::vector<std::pair<double, double>> pairs;
    for (int b = 0; b < part.block_count(); ++b) {
      const double pb = part.block_mass(b);
      const auto& m = table.rows[b][n];
      for (int i = 0; i < m.size(); ++i) pairs.emplace_back(m.support()[i], pb * m.masses()[i]);
    }
    EmpiricalMeasure mix = EmpiricalMeasure::from_pairs(std::move(pairs));
    const double direct_mean = expectation(fs[n]);
    const double direct_sq = expectation_sq(fs[n]);
    out.max_moment_discrepancy =
        std::max(out.max_moment_discrepancy, std::abs(mix.mean() - direct_mean));
    out.max_moment_discrepancy =
        std::max(out.max_moment_discrepancy, std::abs(mix.second_moment() - direct_sq));
    scale = std::max({scale, std::abs(direct_sq), std::abs(direct_mean)});
    out.mixtures.push_back(std::move(mix));
  }
  out.pass = out.max_moment_discrepancy <= 1e-12 * scale;
  return out;
}

// ---- dyadic tails and truncation levels ---------------------------------------

DyadicTailProfile dyadic_profile(const TailFn& abs_tail, int i_max,
                                 std::optional<double> second_moment) {
  if (i_max < 0) throw std::invalid_argument("dyadic_profile: i_max must be >= 0");
  DyadicTailProfile out;
  double running = 0.0;
  double prev = 1.0;
  for (int i = 0; i <= i_max; ++i) {
    const double t = std::ldexp(1.0, i);  // 2^i
    const double a = abs_tail(t);
    if (a < -1e-12 || a > 1.0 + 1e-12 || a > prev + 1e-12)
      throw std::invalid_argument("dyadic_profile: tail values not a valid tail function");
    prev = a;
    const double term = std::ldexp(1.0, 2 * i) * a;
    running += term;
    out.a.push_back(a);
    out.terms.push_back(term);
    out.partial_sums.push_back(running);
  }
  if (second_moment) {
    out.supplied_second_moment = second_moment;
    out.lower_bound = running / 2.0;  // sum of 2^(2i-1) a_i
    out.sandwich_ok = !(std::isfinite(*second_moment)) ||
                      *out.lower_bound <= *second_moment + 1e-9 * std::max(1.0, *second_moment);
  }
  return out;
}

DyadicTailProfile dyadic_profile(const EmpiricalMeasure& mu, int i_max,
                                 std::optional<double> second_moment) {
  auto tail = [&mu](double t) { return mu.abs_tail(t); };
  if (!second_moment) second_moment = mu.second_moment();
  return dyadic_profile(tail, i_max, second_moment);
}

std::vector<double> truncation_levels(const TailFn& abs_tail, const TailFn& abs_moment,
                                      int n_max) {
  if (n_max < 1) throw std::invalid_argument("truncation_levels: n_max must be >= 1");
  // geometric search grid 2^(j/8), j in [-64, 1024]
  const int j_lo = -64, j_hi = 1024;
  std::vector<double> levels;
  levels.reserve(n_max);
  int j = j_lo;
  for (int n = 1; n <= n_max; ++n) {
    const double budget = std::ldexp(1.0, -n);  // 2^-n
    bool found = false;
    for (; j <= j_hi; ++j) {
      const double K = std::pow(2.0, j / 8.0);
      if (abs_tail(K) <= budget && abs_moment(K) <= budget) {
        levels.push_back(K);
        found = true;
        break;
      }
    }
    if (!found) {
      const double K = std::pow(2.0, j_hi / 8.0);
      throw std::runtime_error("truncation_levels: bounds unattainable on search grid at n=" +
                               std::to_string(n) + " (tail=" + std::to_string(abs_tail(K)) +
                               ", moment=" + std::to_string(abs_moment(K)) + " at K=2^128)");
    }
  }
  return levels;
}

}  // namespace hrelab
