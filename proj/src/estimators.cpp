#include "hrelab/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace hrelab {

namespace {

template <class Fn>
void parallel_replicas(std::int64_t replicas, int workers, Fn&& fn) {
  workers = std::max(1, workers);
  if (workers == 1) {
    for (std::int64_t r = 0; r < replicas; ++r) fn(0, r);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&fn, w, workers, replicas] {
      const std::int64_t b = replicas * w / workers;
      const std::int64_t e = replicas * (w + 1) / workers;
      for (std::int64_t r = b; r < e; ++r) fn(w, r);
    });
  }
  for (auto& t : threads) t.join();
}

// All multi-replica reductions feeding CSVs are integer exceedance counts, so
// results are bit-identical for every worker count.
std::vector<std::int64_t> merge_counts(const std::vector<std::vector<std::int64_t>>& per_worker) {
  std::vector<std::int64_t> out(per_worker.front().size(), 0);
  for (const auto& c : per_worker)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return out;
}

TailSeriesEstimate assemble_series(double epsilon, int n_max, std::int64_t replicas,
                                   std::uint64_t seed,
                                   const std::vector<std::int64_t>& counts,
                                   const std::function<double(int)>* oracle) {
  TailSeriesEstimate est;
  est.epsilon = epsilon;
  est.n_max = n_max;
  est.replicas = replicas;
  est.seed = seed;
  est.per_n.reserve(n_max);
  est.cumulative.reserve(n_max);
  double cum = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    const PointEstimate pe = wilson_interval(counts[n - 1], replicas);
    cum += pe.p_hat;
    est.per_n.push_back(pe);
    est.cumulative.push_back(cum);
  }
  if (oracle) {
    est.oracle.reserve(n_max);
    for (int n = 1; n <= n_max; ++n) est.oracle.push_back((*oracle)(n));
  }
  return est;
}

}  // namespace

PointEstimate wilson_interval(std::int64_t k, std::int64_t n, double z,
                              std::int64_t censor_below) {
  if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("wilson_interval: bad counts");
  PointEstimate pe;
  pe.count = k;
  pe.p_hat = static_cast<double>(k) / static_cast<double>(n);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (pe.p_hat + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(pe.p_hat * (1.0 - pe.p_hat) / n + z2 / (4.0 * n * n)) / denom;
  pe.ci_low = std::max(0.0, center - half);
  pe.ci_high = std::min(1.0, center + half);
  if (k < censor_below) {
    pe.censored = true;
    pe.ci_low = 0.0;
  }
  return pe;
}

double TailSeriesEstimate::oracle_total() const {
  return std::accumulate(oracle.begin(), oracle.end(), 0.0);
}

double TailSeriesEstimate::halfwidth_sum() const {
  double s = 0.0;
  for (const auto& pe : per_n) s += 0.5 * (pe.ci_high - pe.ci_low);
  return s;
}

bool TailSeriesEstimate::structure_ok() const {
  double prev = 0.0;
  for (std::size_t i = 0; i < per_n.size(); ++i) {
    const auto& pe = per_n[i];
    if (pe.p_hat < 0.0 || pe.p_hat > 1.0) return false;
    if (!(pe.ci_low <= pe.p_hat && pe.p_hat <= pe.ci_high)) return false;
    if (cumulative[i] + 1e-15 < prev) return false;
    prev = cumulative[i];
  }
  return true;
}

std::optional<std::function<double(int)>> closed_form_sum_tail(const SequenceModel& model,
                                                               double epsilon) {
  if (model.kind != SequenceModel::Kind::iid) return std::nullopt;
  if (model.scale.kind != Schedule::Kind::constant || model.scale.a != 1.0) return std::nullopt;
  if (model.law.kind() == Law::Kind::gaussian) {
    const double m = model.law.param_a(), sd = model.law.param_b();
    return std::function<double(int)>([epsilon, m, sd](int n) {
      const double root_n = std::sqrt(static_cast<double>(n));
      return normal_upper_tail((epsilon * n - m * n) / (sd * root_n)) +
             normal_upper_tail((epsilon * n + m * n) / (sd * root_n));
    });
  }
  if (model.law.kind() == Law::Kind::point) {
    const double c = std::abs(model.law.param_a());
    return std::function<double(int)>([epsilon, c](int) { return c > epsilon ? 1.0 : 0.0; });
  }
  return std::nullopt;
}

TailSeriesEstimate tail_series(const SequenceModel& model, double epsilon, int n_max,
                               std::int64_t replicas, std::uint64_t seed, int workers) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("tail_series: epsilon must be positive");
  if (n_max < 1 || replicas < 1) throw std::invalid_argument("tail_series: bad horizon/replicas");
  workers = std::max(1, workers);
  std::vector<std::vector<std::int64_t>> counts(workers,
                                                std::vector<std::int64_t>(n_max, 0));
  parallel_replicas(replicas, workers, [&](int w, std::int64_t r) {
    IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
    double s = 0.0;
    auto& c = counts[w];
    for (int n = 1; n <= n_max; ++n) {
      s += st.next();
      if (std::abs(s) > epsilon * n) ++c[n - 1];
    }
  });
  const auto merged = merge_counts(counts);
  const auto oracle = closed_form_sum_tail(model, epsilon);
  return assemble_series(epsilon, n_max, replicas, seed, merged,
                         oracle ? &*oracle : nullptr);
}

TailSeriesEstimate tail_series(const PathEnsemble& ens, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("tail_series: epsilon must be positive");
  std::vector<std::int64_t> counts(ens.n_max, 0);
  for (std::int64_t r = 0; r < ens.replicas; ++r)
    for (int n = 1; n <= ens.n_max; ++n)
      if (std::abs(ens.partial_sum(r, n)) > epsilon * n) ++counts[n - 1];
  return assemble_series(epsilon, ens.n_max, ens.replicas, ens.seed, counts, nullptr);
}

int default_heyde_horizon(double eps) {
  return static_cast<int>(std::ceil(64.0 / (eps * eps)));
}

std::vector<HeydePoint> heyde_scan(const SequenceModel& model, std::span<const double> eps_grid,
                                   const std::function<int(double)>& horizon_rule,
                                   std::int64_t replicas, std::uint64_t seed, int workers) {
  std::vector<HeydePoint> out;
  out.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    if (!(eps > 0.0)) throw std::invalid_argument("heyde_scan: epsilon must be positive");
    const int n_max = horizon_rule ? horizon_rule(eps) : default_heyde_horizon(eps);
    const TailSeriesEstimate est = tail_series(model, eps, n_max, replicas, seed, workers);
    HeydePoint hp;
    hp.epsilon = eps;
    hp.n_max = n_max;
    hp.eps2_series = eps * eps * est.total();
    hp.eps2_series_half = eps * eps * est.halfwidth_sum();
    if (!est.oracle.empty()) {
      hp.oracle = eps * eps * est.oracle_total();
      hp.has_oracle = true;
    }
    out.push_back(hp);
  }
  return out;
}

// ---- bound reports ---------------------------------------------------------------

bool BoundReport::all_pass() const {
  return std::all_of(cases.begin(), cases.end(), [](const BoundCase& c) { return c.pass; });
}

double fn_tail_constant() { return 128.0 * (1.0 + 2.0 * std::exp(4.0)); }

BoundReport fuk_nagaev_check(const Law& law, int n_lo, int n_hi, std::int64_t replicas,
                             std::uint64_t seed, int workers) {
  if (n_lo < 1 || n_hi < n_lo) throw std::invalid_argument("fuk_nagaev_check: bad N range");
  const SequenceModel model = SequenceModel::iid(law);
  workers = std::max(1, workers);
  std::vector<std::vector<std::int64_t>> counts(workers,
                                                std::vector<std::int64_t>(n_hi, 0));
  parallel_replicas(replicas, workers, [&](int w, std::int64_t r) {
    IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
    double s = 0.0;
    auto& c = counts[w];
    for (int n = 1; n <= n_hi; ++n) {
      s += st.next();
      if (std::abs(s) > static_cast<double>(n)) ++c[n - 1];
    }
  });
  const auto merged = merge_counts(counts);

  BoundReport rep;
  rep.name = "fuk_nagaev(" + law.name() + ")";
  const double fn_c = fn_tail_constant();
  for (int n = n_lo; n <= n_hi; ++n) {
    const PointEstimate pe = wilson_interval(merged[n - 1], replicas);
    BoundCase bc;
    bc.label = "N=" + std::to_string(n);
    bc.empirical = pe.p_hat;
    bc.emp_low = pe.ci_low;
    bc.emp_high = pe.ci_high;
    bc.upper = n * law.abs_tail(n / 4.0) + fn_c / (static_cast<double>(n) * n);
    bc.has_upper = true;
    bc.pass = pe.ci_high <= bc.upper;
    rep.cases.push_back(std::move(bc));
  }
  return rep;
}

UniformBoundsConstants derived_uniform_constants() {
  UniformBoundsConstants c;
  const double pi = 3.14159265358979323846;
  c.C2 = 7.0 + fn_tail_constant() * pi * pi / 6.0;
  return c;
}

bool lower_bound_hypothesis(const Law& law, double eps) {
  for (int n = 1; n <= 65536; ++n) {
    const double t = law.upper_tail(2.0 * eps * n);
    if (n * t > 0.25) return false;
    if (t == 0.0) break;
  }
  return true;
}

BoundReport uniform_bounds(std::span<const std::pair<std::string, Law>> models,
                           std::span<const double> eps_list, std::int64_t replicas,
                           std::uint64_t seed, int workers) {
  const UniformBoundsConstants k = derived_uniform_constants();
  BoundReport rep;
  rep.name = "uniform_bounds";
  for (const auto& [name, law] : models) {
    const double sigma2 = law.second_moment();
    if (sigma2 == 0.0) {
      BoundCase bc;
      bc.label = name;
      bc.note = "excluded: sigma^2 = 0, bounds degenerate";
      rep.cases.push_back(std::move(bc));
      continue;
    }
    if (!std::isfinite(sigma2)) {
      BoundCase bc;
      bc.label = name;
      bc.note = "excluded: sigma^2 infinite, upper bound vacuous";
      rep.cases.push_back(std::move(bc));
      continue;
    }
    for (double eps : eps_list) {
      const int n_max = std::min(default_heyde_horizon(eps), 8192);
      const TailSeriesEstimate est =
          tail_series(SequenceModel::iid(law), eps, n_max, replicas, seed, workers);
      double series_hi = 0.0, series_lo = 0.0;
      for (const auto& pe : est.per_n) {
        series_hi += pe.ci_high;
        series_lo += pe.ci_low;
      }
      const double e2 = eps * eps;
      {
        BoundCase bc;
        bc.label = name + " upper eps=" + format_double(eps);
        bc.empirical = e2 * (est.total() + 1.0);
        bc.emp_low = e2 * (series_lo + 1.0);
        bc.emp_high = e2 * (series_hi + 1.0);
        bc.upper = k.C1 * sigma2 + k.C2 * e2;
        bc.has_upper = true;
        bc.pass = bc.emp_high <= bc.upper;
        if (std::abs(law.mean()) > 1e-12) bc.note = "law not centered";
        rep.cases.push_back(std::move(bc));
      }
      {
        BoundCase bc;
        bc.label = name + " lower eps=" + format_double(eps);
        bc.empirical = e2 * (est.total() + 1.0);
        bc.emp_low = e2 * (series_lo + 1.0);
        bc.emp_high = e2 * (series_hi + 1.0);
        if (lower_bound_hypothesis(law, eps)) {
          bc.lower = k.c * sigma2;
          bc.has_lower = true;
          bc.pass = bc.lower <= bc.empirical;  // truncation only understates the series
        } else {
          bc.note = "lower bound not certified: sup_N N P(f > 2 eps N) > 1/4";
          bc.pass = true;
        }
        rep.cases.push_back(std::move(bc));
      }
    }
  }
  return rep;
}

BoundReport lower_bound_check(const Law& law, std::int64_t replicas, std::uint64_t seed,
                              int n_max, int workers) {
  workers = std::max(1, workers);
  BoundReport rep;
  if (law.symmetric()) {
    rep.name = "single_jump_lower(" + law.name() + ")";
    const SequenceModel model = SequenceModel::iid(law);
    std::vector<std::vector<std::int64_t>> counts(workers,
                                                  std::vector<std::int64_t>(n_max, 0));
    parallel_replicas(replicas, workers, [&](int w, std::int64_t r) {
      IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
      double s = 0.0;
      auto& c = counts[w];
      for (int n = 1; n <= n_max; ++n) {
        s += st.next();
        if (s > 2.0 * n) ++c[n - 1];
      }
    });
    const auto merged = merge_counts(counts);
    for (int n = 1; n <= n_max; ++n) {
      const double g = law.upper_tail(2.0 * n);
      const double lb = n * std::max(0.0, 0.5 * g - n * g * g);
      const double p_hat = static_cast<double>(merged[n - 1]) / replicas;
      const double se =
          std::sqrt(std::max(p_hat * (1.0 - p_hat), lb * (1.0 - lb)) / replicas);
      BoundCase bc;
      bc.label = "N=" + std::to_string(n);
      bc.lower = lb;
      bc.has_lower = true;
      bc.empirical = p_hat;
      bc.pass = lb <= p_hat + 3.0 * se + 1e-15;
      rep.cases.push_back(std::move(bc));
    }
    return rep;
  }

  // non-symmetric: compare the symmetrized difference walk against twice the
  // two-sided frequency of the original
  rep.name = "symmetrization(" + law.name() + ")";
  const SequenceModel model = SequenceModel::iid(law);
  std::vector<std::vector<std::int64_t>> cf(workers, std::vector<std::int64_t>(n_max, 0));
  std::vector<std::vector<std::int64_t>> cg(workers, std::vector<std::int64_t>(n_max, 0));
  parallel_replicas(replicas, workers, [&](int w, std::int64_t r) {
    IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
    IncrementStream stp(model, seed, stream_id(static_cast<std::uint64_t>(r), StreamRole::secondary));
    IncrementStream stm(model, seed, stream_id(static_cast<std::uint64_t>(r), StreamRole::scratch));
    double s = 0.0, sg = 0.0;
    for (int n = 1; n <= n_max; ++n) {
      s += st.next();
      sg += stp.next() - stm.next();
      if (std::abs(s) > static_cast<double>(n)) ++cf[w][n - 1];
      if (sg > 2.0 * n) ++cg[w][n - 1];
    }
  });
  const auto f_counts = merge_counts(cf);
  const auto g_counts = merge_counts(cg);
  for (int n = 1; n <= n_max; ++n) {
    const double pf = static_cast<double>(f_counts[n - 1]) / replicas;
    const double pg = static_cast<double>(g_counts[n - 1]) / replicas;
    const double se = std::sqrt((pg * (1.0 - pg) + 4.0 * pf * (1.0 - pf)) / replicas);
    BoundCase bc;
    bc.label = "N=" + std::to_string(n);
    bc.empirical = pg;
    bc.upper = 2.0 * pf;
    bc.has_upper = true;
    bc.pass = pg <= 2.0 * pf + 3.0 * se + 1e-15;
    bc.note = "factor-2 symmetrization";
    rep.cases.push_back(std::move(bc));
  }
  return rep;
}

// ---- max-term series ---------------------------------------------------------------

TailSeriesEstimate max_term_series(const SequenceModel& model, int divisor, int n_max,
                                   std::int64_t replicas, std::uint64_t seed, int workers) {
  if (divisor < 1) throw std::invalid_argument("max_term_series: divisor must be >= 1");
  workers = std::max(1, workers);
  std::vector<std::vector<std::int64_t>> counts(workers,
                                                std::vector<std::int64_t>(n_max, 0));
  parallel_replicas(replicas, workers, [&](int w, std::int64_t r) {
    IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
    double m = 0.0;
    auto& c = counts[w];
    for (int n = 1; n <= n_max; ++n) {
      m = std::max(m, std::abs(st.next()));
      if (m > n / static_cast<double>(divisor)) ++c[n - 1];
    }
  });
  const auto merged = merge_counts(counts);

  std::optional<std::function<double(int)>> oracle;
  if (model.kind == SequenceModel::Kind::iid && model.scale.kind == Schedule::Kind::constant &&
      model.scale.a == 1.0) {
    const Law law = model.law;
    oracle = std::function<double(int)>([law, divisor](int n) {
      const double tail = law.abs_tail(n / static_cast<double>(divisor));
      return 1.0 - std::pow(1.0 - tail, n);
    });
  }
  TailSeriesEstimate est = assemble_series(1.0 / divisor, n_max, replicas, seed, merged,
                                           oracle ? &*oracle : nullptr);
  return est;
}

TailSeriesEstimate max_term_series(const PathEnsemble& ens, int divisor) {
  if (divisor < 1) throw std::invalid_argument("max_term_series: divisor must be >= 1");
  std::vector<std::int64_t> counts(ens.n_max, 0);
  for (std::int64_t r = 0; r < ens.replicas; ++r)
    for (int n = 1; n <= ens.n_max; ++n)
      if (ens.max_abs(r, n) > n / static_cast<double>(divisor)) ++counts[n - 1];
  return assemble_series(1.0 / divisor, ens.n_max, ens.replicas, ens.seed, counts, nullptr);
}

// ---- elementary sandwich ------------------------------------------------------------

SandwichReport elementary_sandwich(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("elementary_sandwich: no samples");
  double sl = 0.0, sm = 0.0, su = 0.0, sl2 = 0.0, sm2 = 0.0, su2 = 0.0;
  for (double v : z) {
    if (v < 0.0) throw std::invalid_argument("elementary_sandwich: negative sample");
    const double lo = std::max(0.0, std::ceil(v) - 1.0);  // #{N>=1 : v > N}
    const double hi = v > 0.0 ? std::ceil(v) : 0.0;       // #{N>=0 : v > N}
    sl += lo;
    sm += v;
    su += hi;
    sl2 += lo * lo;
    sm2 += v * v;
    su2 += hi * hi;
  }
  const double n = static_cast<double>(z.size());
  SandwichReport rep;
  rep.lower = sl / n;
  rep.middle = sm / n;
  rep.upper = su / n;
  auto se = [n](double s2, double mean) {
    const double var = std::max(0.0, s2 / n - mean * mean);
    return std::sqrt(var / n);
  };
  rep.se_lower = se(sl2, rep.lower);
  rep.se_middle = se(sm2, rep.middle);
  rep.se_upper = se(su2, rep.upper);
  const double slack = 1e-12 * std::max(1.0, rep.upper);
  rep.order_ok = rep.lower <= rep.middle + slack && rep.middle <= rep.upper + slack;
  return rep;
}

// ---- tightness and integrability ----------------------------------------------------

TightnessReport tightness_and_integrability(const SequenceModel& model, int n_max,
                                            std::span<const double> lambda_grid,
                                            std::int64_t replicas, std::uint64_t seed,
                                            int workers) {
  workers = std::max(1, workers);
  const std::size_t L = lambda_grid.size();
  std::vector<std::vector<std::int64_t>> counts(
      workers, std::vector<std::int64_t>(L * n_max, 0));
  std::vector<std::vector<std::int64_t>> violations(workers, std::vector<std::int64_t>(1, 0));
  parallel_replicas(replicas, workers, [&](int w, std::int64_t r) {
    IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
    double s_prev = 0.0;
    auto& c = counts[w];
    for (int n = 1; n <= n_max; ++n) {
      const double x = st.next();
      const double s = s_prev + x;
      for (std::size_t l = 0; l < L; ++l)
        if (std::abs(x) > lambda_grid[l]) ++c[l * n_max + n - 1];
      if (n >= 2 && std::abs(x) > 2.0 * n && std::abs(s) <= static_cast<double>(n) &&
          std::abs(s_prev) <= static_cast<double>(n - 1))
        ++violations[w][0];
      s_prev = s;
    }
  });
  const auto merged = merge_counts(counts);
  TightnessReport rep;
  rep.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  rep.exceed.resize(L, std::vector<double>(n_max, 0.0));
  rep.sup_exceed.assign(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    for (int n = 1; n <= n_max; ++n) {
      const double p = static_cast<double>(merged[l * n_max + n - 1]) / replicas;
      rep.exceed[l][n - 1] = p;
      rep.sup_exceed[l] = std::max(rep.sup_exceed[l], p);
    }
  }
  for (const auto& v : violations) rep.inclusion_violations += v[0];
  rep.paths_checked = replicas;
  return rep;
}

// ---- permutation stress --------------------------------------------------------------

namespace {

PermutationReport permutation_stress_impl(const SequenceModel& model, std::vector<int> perm,
                                          double epsilon, int n_max, std::int64_t replicas,
                                          std::uint64_t seed, int workers) {
  if (static_cast<int>(perm.size()) != n_max)
    throw std::invalid_argument("permutation_stress: permutation length != n_max");
  workers = std::max(1, workers);
  std::vector<std::vector<std::int64_t>> c_id(workers, std::vector<std::int64_t>(n_max, 0));
  std::vector<std::vector<std::int64_t>> c_pm(workers, std::vector<std::int64_t>(n_max, 0));
  std::vector<std::vector<std::int64_t>> d_sum(workers, std::vector<std::int64_t>(n_max, 0));
  std::vector<std::vector<std::int64_t>> d_sq(workers, std::vector<std::int64_t>(n_max, 0));
  parallel_replicas(replicas, workers, [&](int w, std::int64_t r) {
    IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
    std::vector<double> f(n_max);
    for (int n = 0; n < n_max; ++n) f[n] = st.next();
    double s = 0.0, sp = 0.0;
    for (int n = 1; n <= n_max; ++n) {
      s += f[n - 1];
      sp += f[perm[n - 1]];
      const int a = std::abs(s) > epsilon * n ? 1 : 0;
      const int b = std::abs(sp) > epsilon * n ? 1 : 0;
      c_id[w][n - 1] += a;
      c_pm[w][n - 1] += b;
      d_sum[w][n - 1] += a - b;
      d_sq[w][n - 1] += (a - b) * (a - b);
    }
  });
  const auto id_counts = merge_counts(c_id);
  const auto pm_counts = merge_counts(c_pm);
  const auto diff_sum = merge_counts(d_sum);
  const auto diff_sq = merge_counts(d_sq);

  PermutationReport rep;
  rep.permutation = std::move(perm);
  rep.identity = assemble_series(epsilon, n_max, replicas, seed, id_counts, nullptr);
  rep.permuted = assemble_series(epsilon, n_max, replicas, seed, pm_counts, nullptr);
  rep.diff_mean.resize(n_max);
  rep.diff_se.resize(n_max);
  for (int n = 0; n < n_max; ++n) {
    const double mean = static_cast<double>(diff_sum[n]) / replicas;
    const double var =
        std::max(0.0, static_cast<double>(diff_sq[n]) / replicas - mean * mean);
    rep.diff_mean[n] = mean;
    rep.diff_se[n] = std::sqrt(var / replicas);
    if (std::abs(mean) > 3.0 * rep.diff_se[n] + 1e-12) rep.within_band = false;
  }
  const bool exchangeable =
      model.kind == SequenceModel::Kind::definetti ||
      (model.kind == SequenceModel::Kind::iid && model.scale.kind == Schedule::Kind::constant);
  rep.warning_non_exchangeable = !exchangeable;
  return rep;
}

}  // namespace

PermutationReport permutation_stress(const SequenceModel& model, std::uint64_t perm_seed,
                                     double epsilon, int n_max, std::int64_t replicas,
                                     std::uint64_t seed, int workers) {
  std::vector<int> perm(n_max);
  std::iota(perm.begin(), perm.end(), 0);
  StreamRng rng(perm_seed, stream_id(0, StreamRole::permutation));
  for (int i = n_max - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return permutation_stress_impl(model, std::move(perm), epsilon, n_max, replicas, seed,
                                 workers);
}

PermutationReport permutation_stress_with(const SequenceModel& model, std::span<const int> perm,
                                          double epsilon, int n_max, std::int64_t replicas,
                                          std::uint64_t seed, int workers) {
  std::vector<int> p(perm.begin(), perm.end());
  std::vector<char> seen(n_max, 0);
  for (int v : p) {
    if (v < 0 || v >= n_max || seen[v]) throw std::invalid_argument("not a permutation");
    seen[v] = 1;
  }
  return permutation_stress_impl(model, std::move(p), epsilon, n_max, replicas, seed, workers);
}

// ---- CSV ------------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const TailSeriesEstimate& est) {
  os << "N,p_hat,ci_low,ci_high,cumulative,oracle\n";
  for (int n = 1; n <= est.n_max; ++n) {
    const auto& pe = est.per_n[n - 1];
    os << n << ',' << format_double(pe.p_hat) << ',' << format_double(pe.ci_low) << ','
       << format_double(pe.ci_high) << ',' << format_double(est.cumulative[n - 1]) << ',';
    if (!est.oracle.empty()) os << format_double(est.oracle[n - 1]);
    os << '\n';
  }
}

void write_csv(std::ostream& os, const BoundReport& rep) {
  os << "check,case,lower,empirical,ci_low,ci_high,upper,pass,note\n";
  for (const auto& c : rep.cases) {
    os << rep.name << ',' << c.label << ',';
    if (c.has_lower) os << format_double(c.lower);
    os << ',' << format_double(c.empirical) << ',' << format_double(c.emp_low) << ','
       << format_double(c.emp_high) << ',';
    if (c.has_upper) os << format_double(c.upper);
    os << ',' << (c.pass ? 1 : 0) << ',' << c.note << '\n';
  }
}

}  // namespace hrelab
