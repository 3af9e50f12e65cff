#include "hrelab/subsequence_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace hrelab {

namespace {

double ldexp1(int e) { return std::ldexp(1.0, e); }

// #{N >= n0 : x > N}, for x >= 0 and n0 >= 1
double count_exceed_from(double x, int n0) {
  if (x <= n0) return 0.0;
  const double c = std::ceil(x) - 1.0;  // #{N >= 1 : x > N}
  return std::max(0.0, c - (n0 - 1));
}

}  // namespace

// ---- quantize --------------------------------------------------------------------

QuantizeResult quantize(const RandomVariable& f, int n) {
  if (n < 0) throw std::invalid_argument("quantize: index must be >= 0");
  const double cert = std::pow(4.0, -n);

  std::set<double> distinct(f.values().begin(), f.values().end());
  if (distinct.size() <= 2) return {f, 0.0, cert};

  const double lo = *distinct.begin();
  const double hi = *distinct.rbegin();
  const double step = 2.0 * std::pow(2.0, -n);
  if (step <= (hi - lo) * 1e-15) return {f, 0.0, cert};  // grid finer than fp resolution

  std::vector<double> vals(f.size());
  for (int a = 0; a < f.size(); ++a)
    vals[a] = lo + std::round((f(a) - lo) / step) * step;
  RandomVariable h(f.space(), std::move(vals));
  double mse = 0.0;
  for (int a = 0; a < f.size(); ++a) {
    const double d = f(a) - h(a);
    mse += f.space()->weight(a) * d * d;
  }
  if (mse == 0.0) return {f, 0.0, cert};
  return {std::move(h), mse, cert};
}

// ---- martingale-difference selector ------------------------------------------------

SelectionReport select_md_subsequence(std::span<const RandomVariable> h_list, int n_stages,
                                      int horizon, std::span<const RandomVariable> f_list) {
  if (h_list.empty()) throw std::invalid_argument("select_md_subsequence: empty list");
  if (horizon < 0) horizon = static_cast<int>(h_list.size());
  if (horizon > static_cast<int>(h_list.size()))
    throw std::invalid_argument("select_md_subsequence: horizon exceeds list length");
  if (n_stages < 1 || n_stages > horizon)
    throw std::invalid_argument("select_md_subsequence: bad stage count");
  if (!f_list.empty() && f_list.size() != h_list.size())
    throw std::invalid_argument("select_md_subsequence: f_list/h_list size mismatch");
  const SpacePtr space = h_list[0].space();

  SelectionReport rep;
  Partition history = Partition::trivial(space);
  int prev_k = 0;
  for (int n = 1; n <= n_stages; ++n) {
    const double bound = ldexp1(-n);
    int chosen = -1;
    RandomVariable theta = cond_exp(h_list[0], history);  // placeholder, replaced below
    if (n == 1) {
      chosen = 1;
      theta = cond_exp(h_list[0], history);
    } else {
      for (int k = prev_k + 1; k <= horizon; ++k) {
        RandomVariable cand = cond_exp(h_list[k - 1], history);
        double mx = 0.0;
        for (int a = 0; a < cand.size(); ++a) mx = std::max(mx, std::abs(cand(a)));
        if (mx <= bound) {
          chosen = k;
          theta = std::move(cand);
          break;
        }
      }
      if (chosen < 0)
        throw std::runtime_error("weak-nullity exhausted at stage " + std::to_string(n));
    }

    const RandomVariable& hk = h_list[chosen - 1];
    std::vector<double> beta_vals(hk.size());
    for (int a = 0; a < hk.size(); ++a) beta_vals[a] = hk(a) - theta(a);
    double mx = 0.0;
    for (int a = 0; a < theta.size(); ++a) mx = std::max(mx, std::abs(theta(a)));

    rep.indices.push_back(chosen);
    rep.theta_max.push_back(mx);
    rep.theta_bound.push_back(bound);
    rep.corrections.push_back(theta);
    rep.differences.emplace_back(space, std::move(beta_vals));
    if (!f_list.empty()) {
      const RandomVariable& fk = f_list[chosen - 1];
      double d2 = 0.0;
      for (int a = 0; a < fk.size(); ++a) {
        const double d = fk(a) - rep.differences.back()(a);
        d2 += space->weight(a) * d * d;
      }
      rep.l2_orig_dist.push_back(std::sqrt(d2));
      rep.l2_orig_bound.push_back(ldexp1(1 - n));
    }

    history = refine_by(history, hk);
    prev_k = chosen;
  }
  rep.bounds_ok = true;
  for (std::size_t i = 0; i < rep.theta_max.size(); ++i)
    if (rep.theta_max[i] > rep.theta_bound[i]) rep.bounds_ok = false;
  for (std::size_t i = 0; i < rep.l2_orig_dist.size(); ++i)
    if (rep.l2_orig_dist[i] > rep.l2_orig_bound[i] + 1e-12) rep.bounds_ok = false;
  return rep;
}

// ---- KPR decomposition ---------------------------------------------------------------

KprDecomposition kpr_decompose(std::span<const RandomVariable> f_list, const KprOptions& opt) {
  if (f_list.empty()) throw std::invalid_argument("kpr_decompose: empty list");
  const SpacePtr space = f_list[0].space();
  const int atoms = space->atom_count();
  for (const auto& f : f_list) {
    if (f.space().get() != space.get()) throw std::invalid_argument("space mismatch");
    double l1 = 0.0;
    for (int a = 0; a < atoms; ++a) l1 += space->weight(a) * std::abs(f(a));
    if (l1 > opt.l1_bound + 1e-12)
      throw std::invalid_argument("kpr_decompose: E|f_n| exceeds declared l1_bound");
  }

  KprDecomposition out;
  std::vector<char> claimed(atoms, 0);
  double max_g = 0.0;
  for (std::size_t n = 0; n < f_list.size(); ++n) {
    const auto& f = f_list[n];
    // t_n = last dyadic level at which the mass above it still violates the
    // budget l1_bound * 2^-(n+1); no violating level means f_n is already
    // uniformly integrable at this budget and gets no spike
    const double budget = opt.l1_bound * ldexp1(-static_cast<int>(n) - 1);
    double t = kInf;
    bool has_spike = false;
    for (int j = 90; j >= -40; --j) {
      const double cand = ldexp1(j);
      double tail_mass = 0.0;
      for (int a = 0; a < atoms; ++a)
        if (std::abs(f(a)) > cand) tail_mass += space->weight(a) * std::abs(f(a));
      if (tail_mass > budget) {
        t = cand;
        has_spike = true;
        break;
      }
    }
    std::vector<int> support;
    std::vector<double> h_vals(atoms, 0.0), g_vals(atoms, 0.0);
    for (int a = 0; a < atoms; ++a) {
      if (has_spike && std::abs(f(a)) > t && !claimed[a]) {
        support.push_back(a);
        claimed[a] = 1;
        h_vals[a] = f(a);
      } else {
        g_vals[a] = f(a);
      }
      max_g = std::max(max_g, std::abs(g_vals[a]));
    }
    out.thresholds.push_back(t);
    out.supports.push_back(std::move(support));
    out.spikes.emplace_back(space, std::move(h_vals));
    out.residuals.emplace_back(space, std::move(g_vals));
  }

  // residual support structure relative to the later spikes' union
  for (std::size_t n = 0; n < f_list.size(); ++n) {
    std::vector<char> gamma(atoms, 0);
    for (std::size_t m = n + 1; m < f_list.size(); ++m)
      for (int a : out.supports[m]) gamma[a] = 1;
    bool ok = true;
    for (int a = 0; a < atoms; ++a)
      if (!gamma[a] && out.residuals[n](a) != 0.0) ok = false;
    out.gamma_supported.push_back(ok);
  }

  // uniform-integrability profile on a dyadic K grid
  int j_hi = 0;
  while (ldexp1(j_hi) < max_g && j_hi < 90) ++j_hi;
  for (int j = -4; j <= j_hi + 1; ++j) {
    const double K = ldexp1(j);
    double sup = 0.0;
    for (const auto& g : out.residuals) {
      double m = 0.0;
      for (int a = 0; a < atoms; ++a)
        if (std::abs(g(a)) > K) m += space->weight(a) * std::abs(g(a));
      sup = std::max(sup, m);
    }
    out.ui_grid.push_back(K);
    out.ui_profile.push_back(sup);
  }
  for (std::size_t n = 0; n < f_list.size(); ++n) {
    double m = 0.0;
    for (int a = 0; a < atoms; ++a)
      if (std::abs(out.residuals[n](a)) > opt.ui_K)
        m += space->weight(a) * std::abs(out.residuals[n](a));
    if (m <= opt.ui_tol) out.kept.push_back(static_cast<int>(n) + 1);
  }
  return out;
}

// ---- disjoint-support series ---------------------------------------------------------

namespace {

void check_disjoint_spikes(std::span<const RandomVariable> h_list,
                           std::span<const std::vector<int>> supports) {
  if (h_list.empty() || h_list.size() != supports.size())
    throw std::invalid_argument("spike list/support size mismatch");
  const SpacePtr space = h_list[0].space();
  std::vector<char> seen(space->atom_count(), 0);
  for (std::size_t n = 0; n < h_list.size(); ++n) {
    if (h_list[n].space().get() != space.get()) throw std::invalid_argument("space mismatch");
    std::vector<char> in(space->atom_count(), 0);
    for (int a : supports[n]) {
      if (seen[a]) throw std::invalid_argument("overlapping supports");
      seen[a] = 1;
      in[a] = 1;
    }
    for (int a = 0; a < space->atom_count(); ++a)
      if (!in[a] && h_list[n](a) != 0.0)
        throw std::invalid_argument("spike " + std::to_string(n + 1) +
                                    " does not vanish outside its support");
  }
}

}  // namespace

DisjointSeriesReport disjoint_support_series(std::span<const RandomVariable> h_list,
                                             std::span<const std::vector<int>> supports,
                                             DisjointMode mode, double beta) {
  check_disjoint_spikes(h_list, supports);
  const SpacePtr space = h_list[0].space();
  const int atoms = space->atom_count();
  const int L = static_cast<int>(h_list.size());

  DisjointSeriesReport rep;
  // exact series from the literal partial-sum definition, closed past index L
  for (int a = 0; a < atoms; ++a) {
    double v = 0.0, abs_sum = 0.0, cnt = 0.0;
    for (int N = 1; N <= L; ++N) {
      v += h_list[N - 1](a);
      abs_sum += std::abs(h_list[N - 1](a));
      if (std::abs(v) > N) cnt += 1.0;
    }
    cnt += count_exceed_from(std::abs(v), L + 1);
    rep.series += space->weight(a) * cnt;
    rep.dominating += space->weight(a) * std::max(0.0, std::ceil(abs_sum) - 1.0);
  }
  for (int n = 0; n < L; ++n) {
    double l1 = 0.0;
    for (int a = 0; a < atoms; ++a) l1 += space->weight(a) * std::abs(h_list[n](a));
    rep.l1_total += l1;
  }
  const double tol = 1e-12 * std::max(1.0, rep.l1_total);
  rep.chain_ok = rep.series <= rep.dominating + tol && rep.dominating <= rep.l1_total + tol;
  if (mode == DisjointMode::sufficient) return rep;

  // per-block identity: the running sum restricted to B_m carries only h_m,
  // from index m on
  rep.identity_ok = true;
  double acc = 0.0;
  for (int m = 1; m <= L; ++m) {
    double block_series = 0.0, block_closed = 0.0, tail = 0.0;
    for (int a : supports[m - 1]) {
      double v = 0.0, cnt = 0.0;
      for (int N = 1; N <= L; ++N) {
        v += h_list[N - 1](a);
        if (std::abs(v) > N) cnt += 1.0;
      }
      cnt += count_exceed_from(std::abs(v), L + 1);
      block_series += space->weight(a) * cnt;
      block_closed += space->weight(a) * count_exceed_from(std::abs(h_list[m - 1](a)), m);
      if (std::abs(h_list[m - 1](a)) > m) tail += space->weight(a) * std::abs(h_list[m - 1](a));
    }
    acc += block_series;
    rep.block_series.push_back(block_series);
    rep.block_closed.push_back(block_closed);
    rep.tail_mass.push_back(tail);
    rep.accumulation.push_back(acc);
    if (std::abs(block_series - block_closed) > 1e-12 * std::max(1.0, block_closed))
      rep.identity_ok = false;
  }
  rep.certified_divergent =
      beta > 0.0 &&
      std::all_of(rep.tail_mass.begin(), rep.tail_mass.end(), [beta](double t) { return t > beta; });
  return rep;
}

// ---- adversarial pairing ---------------------------------------------------------------

PairingReport adversarial_pairing(std::span<const RandomVariable> h_list,
                                  std::span<const std::vector<int>> supports,
                                  std::span<const RandomVariable> g_list, double beta,
                                  int n_stages) {
  check_disjoint_spikes(h_list, supports);
  if (g_list.size() != h_list.size())
    throw std::invalid_argument("adversarial_pairing: g_list/h_list size mismatch");
  const int need = 2 * n_stages + 2;
  if (static_cast<int>(h_list.size()) < need)
    throw std::invalid_argument("adversarial_pairing: need " + std::to_string(need) +
                                " spikes for " + std::to_string(n_stages) + " stages");
  const SpacePtr space = h_list[0].space();
  const int atoms = space->atom_count();

  auto l1 = [&](const RandomVariable& x) {
    double s = 0.0;
    for (int a = 0; a < atoms; ++a) s += space->weight(a) * std::abs(x(a));
    return s;
  };
  auto block_mass = [&](int m) {
    double s = 0.0;
    for (int a : supports[m - 1]) s += space->weight(a);
    return s;
  };
  for (int n = 1; n <= need; ++n) {
    if (!(l1(h_list[n - 1]) > 2.0 * beta))
      throw std::invalid_argument("adversarial_pairing: hypothesis E|h_n| > 2 beta violated at n=" +
                                  std::to_string(n));
    if (block_mass(n) > std::pow(static_cast<double>(n), -3.0) + 1e-15)
      throw std::invalid_argument("adversarial_pairing: P(B_n) exceeds n^-3 at n=" +
                                  std::to_string(n));
    for (int a = 0; a < atoms; ++a) {
      // residual g_n may only live on later blocks
      if (g_list[n - 1](a) == 0.0) continue;
      bool in_later = false;
      for (int m = n + 1; m <= static_cast<int>(h_list.size()) && !in_later; ++m)
        for (int b : supports[m - 1])
          if (b == a) {
            in_later = true;
            break;
          }
      if (!in_later)
        throw std::invalid_argument("adversarial_pairing: g_" + std::to_string(n) +
                                    " not supported on the later blocks");
    }
  }

  PairingReport rep;
  rep.indices.push_back(1);
  rep.floors_ok = true;
  for (int n = 1; n <= n_stages; ++n) {
    const int odd = 2 * n + 1;
    const auto& block = supports[odd - 1];
    // L1 mass of the spike plus the residual carried onto its block
    double test_mass = 0.0;
    for (int a : block) {
      double v = h_list[odd - 1](a);
      for (int idx : rep.indices) v += g_list[idx - 1](a);
      test_mass += space->weight(a) * std::abs(v);
    }
    const bool keep_odd = test_mass > beta;
    const int chosen = keep_odd ? odd : odd + 1;
    rep.indices.push_back(chosen);

    // exact block series over the chosen prefix; terms past stage n+1 vanish
    // on this block
    double contribution = 0.0;
    for (int a : block) {
      double v = 0.0, cnt = 0.0;
      const int prefix = static_cast<int>(rep.indices.size());
      for (int N = 1; N <= prefix; ++N) {
        const int k = rep.indices[N - 1];
        v += h_list[k - 1](a) + g_list[k - 1](a);
        if (std::abs(v) > N) cnt += 1.0;
      }
      cnt += count_exceed_from(std::abs(v), prefix + 1);
      contribution += space->weight(a) * cnt;
    }
    PairingStage st;
    st.stage = n;
    st.chosen = chosen;
    st.test_passed = keep_odd;
    st.contribution = contribution;
    st.floor = beta - n * block_mass(odd);
    if (contribution < st.floor - 1e-12) rep.floors_ok = false;
    rep.total += contribution;
    rep.stages.push_back(st);
  }
  return rep;
}

// ---- truncation split --------------------------------------------------------------------

TruncationSplit truncation_split(const Law& law, int n_max) {
  TruncationSplit out;
  auto tail = [&law](double t) { return law.abs_tail(t); };
  auto moment = [&law](double t) { return law.abs_tail_moment(t); };
  out.levels = truncation_levels(tail, moment, n_max);
  out.certified = true;
  for (int n = 1; n <= n_max; ++n) {
    const double K = out.levels[n - 1];
    const double keep = 1.0 - law.abs_tail(K);
    const double l1 = law.abs_tail_moment(K);
    const double l2 = law.trunc_second_moment(K);
    out.prob_keep.push_back(keep);
    out.l1_tail.push_back(l1);
    out.l2_trunc.push_back(l2);
    out.l2_bound = std::max(out.l2_bound, l2);
    if (!(keep > 1.0 - ldexp1(-n) - 1e-15) || l1 > ldexp1(-n) + 1e-15) out.certified = false;
  }
  out.l2_unbounded_flag = !std::isfinite(law.second_moment());
  return out;
}

// ---- refinement tree -----------------------------------------------------------------------

RefinementTree RefinementTree::initial(SpacePtr space) {
  RefinementTree tree;
  tree.space = space;
  RefinementStage s0;
  s0.eps_k = 1.0;
  s0.exceptional.resize(space->atom_count());
  std::iota(s0.exceptional.begin(), s0.exceptional.end(), 0);
  s0.exceptional_mass = 1.0;
  tree.stages.push_back(std::move(s0));
  return tree;
}

namespace {

// complete-linkage clusters under a pairwise unit distance, diameter-capped;
// unit self-diameters participate in the cluster diameter
std::vector<std::vector<int>> cluster_complete_linkage(const std::vector<int>& units,
                                                       const std::vector<std::vector<double>>& dist,
                                                       double cap) {
  std::vector<std::vector<int>> clusters;
  for (int u : units) clusters.push_back({u});
  auto diam_if_merged = [&](const std::vector<int>& A, const std::vector<int>& B) {
    double d = 0.0;
    for (int u : A)
      for (int v : B) d = std::max(d, dist[u][v]);
    for (int u : A)
      for (int v : A) d = std::max(d, dist[u][v]);
    for (int u : B)
      for (int v : B) d = std::max(d, dist[u][v]);
    return d;
  };
  while (clusters.size() > 1) {
    double best = cap;
    int bi = -1, bj = -1;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double d = diam_if_merged(clusters[i], clusters[j]);
        if (d < best) {
          best = d;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
      }
    if (bi < 0) break;
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + bj);
  }
  return clusters;
}

}  // namespace

const RefinementStage& refinement_step(RefinementTree& tree, const ConditionalMeasureTable& table,
                                       std::span<const RandomVariable> fs, double eps_k,
                                       double egorov_mass, int max_ell) {
  if (!(eps_k > 0.0 && eps_k < 1.0))
    throw std::invalid_argument("refinement_step: eps_k must lie in (0,1)");
  if (egorov_mass < 0.0) egorov_mass = eps_k;
  const RefinementStage& prev = tree.current();
  const auto& part = table.partition;
  if (part.space().get() != tree.space.get()) throw std::invalid_argument("space mismatch");
  const int n_units = part.block_count();
  const int n_vars = static_cast<int>(fs.size());
  if (n_vars == 0 || table.rows.empty() || static_cast<int>(table.rows[0].size()) != n_vars)
    throw std::invalid_argument("refinement_step: table/variable shape mismatch");
  if (max_ell < 0) max_ell = n_vars;

  // locate each candidate unit inside the previous stage (regular block index,
  // or -1 for the exceptional set); the candidate partition must refine it
  std::vector<int> unit_home(n_units, -2);
  std::vector<int> atom_home(tree.space->atom_count(), -1);
  for (std::size_t b = 0; b < prev.blocks.size(); ++b)
    for (int a : prev.blocks[b]) atom_home[a] = static_cast<int>(b);
  for (int u = 0; u < n_units; ++u) {
    const auto& atoms = part.blocks()[u];
    const int home = atom_home[atoms.front()];
    for (int a : atoms)
      if (atom_home[a] != home)
        throw std::invalid_argument("refinement_step: candidate partition does not refine the tree");
    unit_home[u] = home;
  }

  // pairwise W2 tables between all conditional measures of all units
  std::vector<std::vector<std::vector<std::vector<double>>>> d(
      n_units, std::vector<std::vector<std::vector<double>>>(
                   n_units, std::vector<std::vector<double>>(n_vars, std::vector<double>(n_vars))));
  for (int u = 0; u < n_units; ++u)
    for (int v = u; v < n_units; ++v)
      for (int n = 0; n < n_vars; ++n)
        for (int m = 0; m < n_vars; ++m) {
          const double w = w2(table.rows[u][n], table.rows[v][m]);
          d[u][v][n][m] = w;
          d[v][u][m][n] = w;
        }

  const double diam_cap = std::sqrt(eps_k);
  std::string last_failure;
  for (int ell = 1; ell <= max_ell; ++ell) {
    // unit-pair distances over the index tail n >= ell
    std::vector<std::vector<double>> D(n_units, std::vector<double>(n_units, 0.0));
    for (int u = 0; u < n_units; ++u)
      for (int v = u; v < n_units; ++v) {
        double mx = 0.0;
        for (int n = ell - 1; n < n_vars; ++n)
          for (int m = ell - 1; m < n_vars; ++m) mx = std::max(mx, d[u][v][n][m]);
        D[u][v] = D[v][u] = mx;
      }

    bool viable = true;
    std::vector<int> new_exceptional_units;
    for (int u = 0; u < n_units && viable; ++u) {
      if (D[u][u] >= diam_cap) {
        if (unit_home[u] >= 0) {
          // a regular block of an earlier stage may not regress
          viable = false;
          last_failure = "regular block drifts past the diameter bound at ell=" +
                         std::to_string(ell);
        } else {
          new_exceptional_units.push_back(u);
        }
      }
    }
    if (!viable) continue;

    double exc_mass = 0.0;
    std::vector<int> exc_atoms;
    for (int u : new_exceptional_units)
      for (int a : part.blocks()[u]) {
        exc_atoms.push_back(a);
        exc_mass += tree.space->weight(a);
      }
    if (exc_mass > egorov_mass) {
      last_failure = "exceptional mass " + std::to_string(exc_mass) + " exceeds budget at ell=" +
                     std::to_string(ell);
      continue;
    }
    double exc_l2 = 0.0;
    for (const auto& f : fs) {
      double s = 0.0;
      for (int a : exc_atoms) s += tree.space->weight(a) * f(a) * f(a);
      exc_l2 = std::max(exc_l2, s);
    }
    if (exc_l2 > eps_k) {
      last_failure = "exceptional L2 content " + std::to_string(exc_l2) + " exceeds eps_k";
      continue;
    }

    // cluster the surviving units within each previous-stage cell
    RefinementStage stage;
    stage.eps_k = eps_k;
    stage.ell_k = ell;
    stage.exceptional = std::move(exc_atoms);
    std::sort(stage.exceptional.begin(), stage.exceptional.end());
    stage.exceptional_mass = exc_mass;
    stage.exceptional_l2 = exc_l2;

    std::map<int, std::vector<int>> cells;  // prev block (or -1) -> surviving units
    for (int u = 0; u < n_units; ++u) {
      if (std::find(new_exceptional_units.begin(), new_exceptional_units.end(), u) !=
          new_exceptional_units.end())
        continue;
      cells[unit_home[u]].push_back(u);
    }
    for (auto& [home, units] : cells) {
      const auto clusters = cluster_complete_linkage(units, D, diam_cap);
      for (const auto& cl : clusters) {
        std::vector<int> atoms;
        double diam = 0.0;
        for (int u : cl) {
          atoms.insert(atoms.end(), part.blocks()[u].begin(), part.blocks()[u].end());
          for (int v : cl) diam = std::max(diam, D[u][v]);
        }
        std::sort(atoms.begin(), atoms.end());
        stage.blocks.push_back(std::move(atoms));
        stage.diameters.push_back(diam);
      }
    }
    tree.stages.push_back(std::move(stage));
    return tree.stages.back();
  }
  throw std::runtime_error("Egorov budget exceeded: " +
                           (last_failure.empty() ? std::string("no feasible stage") : last_failure));
}

// ---- omnibus check ---------------------------------------------------------------------------

OmnibusReport omnibus_check(const Partition& blocks, std::span<const RandomVariable> h,
                            std::span<const RandomVariable> f_star,
                            std::span<const RandomVariable> f_orig, double epsilon,
                            int horizon) {
  if (h.empty() || h.size() != f_star.size())
    throw std::invalid_argument("omnibus_check: h/f_star size mismatch");
  if (!f_orig.empty() && f_orig.size() != f_star.size())
    throw std::invalid_argument("omnibus_check: f_orig size mismatch");
  const SpacePtr space = blocks.space();
  const int n_vars = static_cast<int>(h.size());
  if (horizon < 0) horizon = n_vars;
  if (horizon > n_vars) throw std::invalid_argument("omnibus_check: horizon exceeds sequence length");

  OmnibusReport rep;
  for (int b = 0; b < blocks.block_count(); ++b) {
    const auto& atoms = blocks.blocks()[b];
    const double mass = blocks.block_mass(b);
    if (!(mass > 0.0)) throw std::invalid_argument("omnibus_check: block with zero mass");
    OmnibusBlockReport br;
    br.block = b;
    br.mass = mass;

    // identical conditional marginals
    const EmpiricalMeasure first = EmpiricalMeasure::law_of_restricted(h[0], atoms);
    br.marginals_identical = true;
    std::vector<EmpiricalMeasure> marginals{first};
    for (int n = 1; n < n_vars; ++n) {
      const EmpiricalMeasure m = EmpiricalMeasure::law_of_restricted(h[n], atoms);
      if (m.size() != first.size()) {
        br.marginals_identical = false;
      } else {
        for (int i = 0; i < m.size(); ++i)
          if (m.support()[i] != first.support()[i] ||
              std::abs(m.masses()[i] - first.masses()[i]) > 1e-12)
            br.marginals_identical = false;
      }
      marginals.push_back(m);
    }

    // product factorization of the conditional joint law: every realized value
    // tuple must carry exactly the product mass, and the product masses of the
    // realized tuples must exhaust 1
    std::map<std::vector<double>, double> joint;
    for (int a : atoms) {
      std::vector<double> key(n_vars);
      for (int n = 0; n < n_vars; ++n) key[n] = h[n](a);
      joint[key] += space->weight(a) / mass;
    }
    br.factorized = true;
    double covered = 0.0;
    for (const auto& [key, p] : joint) {
      double prod = 1.0;
      for (int n = 0; n < n_vars; ++n) {
        double pm = 0.0;
        for (int i = 0; i < marginals[n].size(); ++i)
          if (marginals[n].support()[i] == key[n]) pm = marginals[n].masses()[i];
        prod *= pm;
      }
      covered += prod;
      if (std::abs(prod - p) > 1e-12) br.factorized = false;
    }
    if (std::abs(covered - 1.0) > 1e-12) br.factorized = false;

    for (int n = 0; n < n_vars; ++n) {
      double mse = 0.0;
      for (int a : atoms) {
        const double dv = f_star[n](a) - h[n](a);
        mse += (space->weight(a) / mass) * dv * dv;
      }
      br.max_cond_mse = std::max(br.max_cond_mse, mse);
    }
    br.mse_ok = br.max_cond_mse <= 1.0 + 1e-12;
    rep.blocks.push_back(std::move(br));
  }

  if (!f_orig.empty()) {
    for (int n = 0; n < n_vars; ++n) {
      double d2 = 0.0;
      for (int a = 0; a < space->atom_count(); ++a) {
        const double dv = f_orig[n](a) - f_star[n](a);
        d2 += space->weight(a) * dv * dv;
      }
      rep.pair_dist_sq.push_back(d2);
      if (d2 > ldexp1(-(n + 1)) + 1e-12) rep.pair_ok = false;
    }
  }

  // exact per-N series split: the f* event at eps/2 is contained in the union
  // of the h event and the difference event at eps/4
  rep.decomposition_ok = true;
  double cum_star = 0.0, cum_h = 0.0, cum_diff = 0.0;
  std::vector<double> s_star(space->atom_count(), 0.0), s_h(space->atom_count(), 0.0);
  for (int N = 1; N <= horizon; ++N) {
    double p_star = 0.0, p_h = 0.0, p_diff = 0.0;
    for (int a = 0; a < space->atom_count(); ++a) {
      s_star[a] += f_star[N - 1](a);
      s_h[a] += h[N - 1](a);
      const double w = space->weight(a);
      if (std::abs(s_star[a]) > 0.5 * epsilon * N) p_star += w;
      if (std::abs(s_h[a]) > 0.25 * epsilon * N) p_h += w;
      if (std::abs(s_star[a] - s_h[a]) > 0.25 * epsilon * N) p_diff += w;
    }
    cum_star += p_star;
    cum_h += p_h;
    cum_diff += p_diff;
    rep.series_fstar.push_back(cum_star);
    rep.series_h.push_back(cum_h);
    rep.series_diff.push_back(cum_diff);
    if (p_star > p_h + p_diff + 1e-12) rep.decomposition_ok = false;
  }

  // law of total probability across blocks for the h-series
  rep.h_series_total = cum_h;
  rep.h_series_weighted = 0.0;
  for (int b = 0; b < blocks.block_count(); ++b) {
    const auto& atoms = blocks.blocks()[b];
    const double mass = blocks.block_mass(b);
    double cond = 0.0;
    std::vector<double> s(atoms.size(), 0.0);
    for (int N = 1; N <= horizon; ++N) {
      double p = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        s[i] += h[N - 1](atoms[i]);
        if (std::abs(s[i]) > 0.25 * epsilon * N) p += space->weight(atoms[i]) / mass;
      }
      cond += p;
    }
    rep.h_series_weighted += mass * cond;
  }
  rep.total_probability_ok =
      std::abs(rep.h_series_total - rep.h_series_weighted) <= 1e-9 * std::max(1.0, rep.h_series_total);
  return rep;
}

}  // namespace hrelab
