// Acceptance battery: one line per criterion, exit code = number of failures.
// argv[1] must point at the hrelab_cli binary (used by the reproducibility
// criterion).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hrelab/estimators.hpp"
#include "hrelab/measures_w2.hpp"
#include "hrelab/prob_engine.hpp"
#include "hrelab/seq_models.hpp"
#include "hrelab/subsequence_lab.hpp"
#include "test_helpers.hpp"

using namespace hrelab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::cout << (pass ? "PASS" : "FAIL") << " " << id << " " << name << " (" << detail << ") ["
            << seconds << "s]" << std::endl;
  if (!pass) ++g_failures;
}

template <class Fn>
void criterion(int id, const std::string& name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    pass = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
          .count() /
      1000.0;
  report(id, name, pass, detail, secs);
}

constexpr std::uint64_t kSeed = 20250811;
constexpr int kWorkers = 2;

// ---- 1: variance recovered from the scaled series ------------------------------

bool crit_heyde(std::string& detail) {
  const auto model = SequenceModel::iid(Law::gaussian(0, 1));
  const std::vector<double> grid{1.0, 0.5, 0.25, 0.125};
  const auto pts = heyde_scan(model, grid, nullptr, 100000, kSeed, kWorkers);
  std::ostringstream d;
  bool ok = true;
  for (const auto& p : pts) {
    if (!p.has_oracle) return false;
    const bool near_oracle = std::abs(p.eps2_series - p.oracle) <= 0.02 * p.oracle;
    const bool near_sigma2 = p.epsilon > 0.25 + 1e-12 || std::abs(p.eps2_series - 1.0) <= 0.15;
    ok = ok && near_oracle && near_sigma2;
    d << "eps=" << p.epsilon << ": " << p.eps2_series << " vs oracle " << p.oracle << "; ";
  }
  detail = d.str();
  return ok;
}

// ---- 2: series value at eps=1 over 50 terms -------------------------------------

bool crit_series_value(std::string& detail) {
  const auto est =
      tail_series(SequenceModel::iid(Law::gaussian(0, 1)), 1.0, 50, 100000, kSeed, kWorkers);
  const double oracle = est.oracle_total();
  const double band = 3.0 * est.halfwidth_sum();
  std::ostringstream d;
  d << "series=" << est.total() << " oracle=" << oracle << " band=" << band;
  detail = d.str();
  return std::abs(est.total() - oracle) <= band && std::abs(oracle - 0.66) < 0.02;
}

// ---- 3: infinite-variance specimen diverges --------------------------------------

bool crit_heavy_divergence(std::string& detail) {
  const auto est =
      tail_series(SequenceModel::iid(Law::pareto_sym(1.5)), 1.0, 10000, 20000, kSeed, kWorkers);
  const double c3 = est.cumulative[999];
  const double c4 = est.cumulative[9999];
  const auto law = Law::pareto_sym(1.5);
  const auto prof = dyadic_profile([&law](double t) { return law.abs_tail(t); }, 40);
  std::ostringstream d;
  d << "cum(1e3)=" << c3 << " cum(1e4)=" << c4 << " ratio=" << c4 / c3
    << " dyadic_sum(40)=" << prof.partial_sums[40];
  detail = d.str();
  return c4 >= 2.0 * c3 && prof.partial_sums[40] > 1e3;
}

// ---- 4: per-N tail bound across four laws ----------------------------------------

bool crit_fuk_nagaev(std::string& detail) {
  const std::vector<Law> laws{Law::gaussian(0, 1), Law::uniform_sym(std::sqrt(3.0)),
                              Law::laplace(1.0 / std::sqrt(2.0)), Law::rademacher()};
  int violations = 0;
  for (const auto& law : laws) {
    const auto rep = fuk_nagaev_check(law, 1, 200, 100000, kSeed, kWorkers);
    for (const auto& c : rep.cases)
      if (!c.pass) ++violations;
  }
  detail = "violations=" + std::to_string(violations) + " over 4 laws x 200 N";
  return violations == 0;
}

// ---- 5: exact stopped-walk bounds on random paths ---------------------------------

bool crit_doob(std::string& detail) {
  int checked = 0, bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto path = testutil::random_md_path(kSeed + trial, 32, 64 + (trial % 3) * 96);
    if (!verify_md(path, 1.0).pass) {
      ++bad;
      continue;
    }
    for (int N = 3; N <= 32; ++N) {
      const auto rep = doob_chain(path, N);
      ++checked;
      if (!rep.within_doob || !rep.within_product) ++bad;
    }
  }
  detail = std::to_string(checked) + " exact checks, " + std::to_string(bad) + " violations";
  return bad == 0 && checked == 200 * 30;
}

// ---- 6: selector certificates on the 2^10 cube -------------------------------------

bool crit_selector(std::string& detail) {
  auto space = DiscreteSpace::uniform(1 << 10);
  std::vector<RandomVariable> drifted;
  for (int k = 1; k <= 10; ++k) {
    std::vector<double> v(space->atom_count());
    for (int a = 0; a < space->atom_count(); ++a)
      v[a] = (((a >> (k - 1)) & 1) ? 1.0 : -1.0) + std::ldexp(1.0, -k);
    drifted.emplace_back(space, std::move(v));
  }
  const auto rep = select_md_subsequence(drifted, 10, -1, drifted);
  bool ok = true;
  for (int n = 1; n <= 10; ++n) {
    ok = ok && rep.theta_max[n - 1] <= std::ldexp(1.0, -n);
    ok = ok && rep.l2_orig_dist[n - 1] <= std::ldexp(1.0, 1 - n);
  }
  MartingalePath path;
  path.space = space;
  std::vector<RandomVariable> history;
  for (int n = 1; n <= 10; ++n) {
    history.push_back(drifted[rep.indices[n - 1] - 1]);
    path.increments.push_back(rep.differences[n - 1]);
    path.filtration.push_back(generated_partition(space, history));
  }
  const double md = verify_md(path, 2.0).max_cond_mean;
  ok = ok && md <= 1e-12;
  std::ostringstream d;
  d << "max theta gap " << rep.theta_max[9] << " vs 2^-10, md residual " << md;
  detail = d.str();
  return ok;
}

// ---- 7: quantile transport against the assignment oracle ---------------------------

EmpiricalMeasure random_rational_measure(StreamRng& rng, int max_points, int denom,
                                         std::vector<int>* units_out = nullptr) {
  const int k = 1 + static_cast<int>(rng.next_u64() % max_points);
  std::vector<int> units(k, 1);
  for (int i = 0; i < denom - k; ++i) ++units[rng.next_u64() % k];
  std::vector<double> sup;
  while (static_cast<int>(sup.size()) < k) {
    const double v = (std::floor(rng.next_unit() * 81.0) - 40.0) / 4.0;
    bool dup = false;
    for (double x : sup) dup |= (x == v);
    if (!dup) sup.push_back(v);
  }
  std::sort(sup.begin(), sup.end());
  std::vector<double> masses(k);
  for (int i = 0; i < k; ++i) masses[i] = static_cast<double>(units[i]) / denom;
  if (units_out) *units_out = units;
  return EmpiricalMeasure(sup, masses);
}

bool crit_w2(std::string& detail) {
  StreamRng rng(kSeed, 1001);
  const int denom = 64;
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    std::vector<int> ua, ub;
    const auto mu = random_rational_measure(rng, 5, denom, &ua);
    const auto nu = random_rational_measure(rng, 5, denom, &ub);
    const double oracle =
        testutil::transport_cost_oracle(mu.support(), ua, nu.support(), ub, denom);
    const double d = w2(mu, nu);
    worst = std::max(worst, std::abs(d * d - oracle));
    if (worst > 1e-9) break;
  }
  bool axioms = true;
  for (int t = 0; t < 500; ++t) {
    const auto a = random_rational_measure(rng, 6, 32);
    const auto b = random_rational_measure(rng, 6, 32);
    const auto c = random_rational_measure(rng, 6, 32);
    axioms = axioms && w2(a, b) == w2(b, a);
    axioms = axioms && w2(a, a) == 0.0;
    axioms = axioms && w2(a, c) <= w2(a, b) + w2(b, c) + 1e-9;
  }
  std::ostringstream d;
  d << "worst |quantile^2 - assignment| = " << worst << ", axioms " << (axioms ? "ok" : "bad");
  detail = d.str();
  return worst <= 1e-9 && axioms;
}

// ---- 8: joining step -----------------------------------------------------------------

bool crit_join(std::string& detail) {
  StreamRng rng(kSeed, 2002);
  double worst_law = 0.0, worst_excess = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int atoms = 2 + static_cast<int>(rng.next_u64() % 5);
    std::vector<double> w(atoms, 1.0 / atoms);
    auto space = DiscreteSpace::make(std::move(w));
    std::vector<double> fv(atoms);
    for (auto& x : fv) x = std::floor(rng.next_unit() * 9.0) - 4.0;
    RandomVariable f(space, std::move(fv));
    const auto nu = random_rational_measure(rng, 4, 12);
    const auto res = join(f, nu, required_join_grid(f, nu));
    worst_law = std::max(worst_law, res.law_discrepancy);
    worst_excess = std::max(worst_excess, res.mean_square_error - res.w2_squared);
  }
  std::ostringstream d;
  d << "worst law discrepancy " << worst_law << ", worst cost excess " << worst_excess;
  detail = d.str();
  return worst_law <= 1e-12 && worst_excess <= 1e-9;
}

// ---- 9: disjoint supports: sufficiency chain and the pairing certificate ---------------

bool crit_disjoint(std::string& detail) {
  StreamRng rng(kSeed, 3003);
  bool chain_ok = true;
  for (int t = 0; t < 50; ++t) {
    const int blocks = 3 + static_cast<int>(rng.next_u64() % 6);
    std::vector<double> w;
    double rest = 1.0;
    for (int m = 0; m < blocks; ++m) {
      w.push_back(0.02 + 0.05 * rng.next_unit());
      rest -= w.back();
    }
    w.push_back(rest);
    auto space = DiscreteSpace::make(w);
    std::vector<RandomVariable> hs;
    std::vector<std::vector<int>> supports;
    for (int m = 0; m < blocks; ++m) {
      std::vector<double> v(blocks + 1, 0.0);
      v[m] = (rng.next_bit() ? 1.0 : -1.0) * std::floor(rng.next_unit() * 20.0);
      hs.emplace_back(space, std::move(v));
      supports.push_back({m});
    }
    const auto rep = disjoint_support_series(hs, supports, DisjointMode::sufficient);
    chain_ok = chain_ok && rep.chain_ok;
  }

  // pairing certificate: odd-block masses pinned at (2n+1)^-3
  const int need = 24;
  std::vector<double> w;
  double rest = 1.0;
  for (int n = 1; n <= need; ++n) {
    const double p = (n % 2 == 1 && n >= 3) ? std::pow(static_cast<double>(n), -3.0)
                                            : 0.25 * std::pow(static_cast<double>(n), -3.0);
    w.push_back(p);
    rest -= p;
  }
  w.push_back(rest);
  auto space = DiscreteSpace::make(w);
  const double beta = 1.0;
  std::vector<RandomVariable> hs;
  std::vector<std::vector<int>> supports;
  for (int n = 1; n <= need; ++n) {
    std::vector<double> v(need + 1, 0.0);
    v[n - 1] = 3.0 * beta / w[n - 1];
    hs.emplace_back(space, std::move(v));
    supports.push_back({n - 1});
  }
  std::vector<RandomVariable> gs;
  for (int n = 1; n <= need; ++n) {
    std::vector<double> v(need + 1, 0.0);
    if (n == 1) v[6] = -hs[6](6);            // cancels h_7 on B_7: stage 3 must go even
    if (n == 2) v[10] = -0.4 * hs[10](10);   // partial cancellation on B_11: stays odd
    gs.emplace_back(space, std::move(v));
  }
  const auto rep = adversarial_pairing(hs, supports, gs, beta, 10);
  double floor_total = 0.0;
  for (const auto& st : rep.stages) floor_total += st.floor;
  bool flip_seen = false;
  for (const auto& st : rep.stages) flip_seen = flip_seen || !st.test_passed;
  std::ostringstream d;
  d << "chain ok=" << chain_ok << ", certificate total=" << rep.total
    << ", floor sum=" << floor_total << ", even branch exercised=" << flip_seen;
  detail = d.str();
  return chain_ok && rep.floors_ok && rep.total >= 9.7 && floor_total >= 9.7 && flip_seen;
}

// ---- 10: mixture moments and the per-component upper value ------------------------------

bool crit_definetti(std::string& detail) {
  const auto model = SequenceModel::definetti({Law::gaussian(-1, 1), Law::gaussian(1, 1)},
                                              {0.5, 0.5});
  const auto ms = definetti_moments(model);
  const bool moments_ok = ms.expected_eta == 2.0 && ms.eta[0] == 2.0 && ms.eta[1] == 2.0;

  // centered components are standard normal; the scaled series must stay below
  // the derived uniform upper value at eps = 1/2
  const auto k = derived_uniform_constants();
  const double eps = 0.5;
  bool comp_ok = true;
  double worst = 0.0;
  for (int comp = 0; comp < 2; ++comp) {
    const auto est = tail_series(SequenceModel::iid(Law::gaussian(0, 1)), eps, 256, 20000,
                                 kSeed + comp, kWorkers);
    double hi = 0.0;
    for (const auto& pe : est.per_n) hi += pe.ci_high;
    const double value = eps * eps * (hi + 1.0);
    const double upper = k.C1 * 1.0 + k.C2 * eps * eps;
    comp_ok = comp_ok && value <= upper;
    worst = std::max(worst, value);
  }
  std::ostringstream d;
  d << "E(eta)=" << ms.expected_eta << ", worst scaled series " << worst << " vs upper "
    << k.C1 + k.C2 * eps * eps;
  detail = d.str();
  return moments_ok && comp_ok;
}

// ---- 11: reproducibility through the command line ----------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& bin, const std::string& args) {
  const std::string cmd = bin + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return status < 0 ? status : (status >> 8) & 0xFF;
}

bool crit_reproducible(const std::string& cli, std::string& detail) {
  const fs::path dir = fs::path("acceptance_runs");
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::string cfg = R"({
    "seed": 424242,
    "replicas": 2000,
    "model": {"kind": "iid", "law": {"name": "gaussian", "mean": 0.0, "sd": 1.0}},
    "series": {"epsilon": 1.0, "n_max": 64},
    "heyde": {"eps_grid": [1.0, 0.5]},
    "maxterm": {"divisor": 3, "n_max": 64},
    "permute": {"epsilon": 1.0, "n_max": 32, "perm_seed": 7},
    "bounds": {"n_max": 40, "lower_n_max": 20, "eps_list": [1.0],
               "laws": [{"name": "gaussian", "mean": 0.0, "sd": 1.0},
                         {"name": "rademacher"}]}
  })";
  std::ofstream(dir / "cfg.json") << cfg;

  const std::vector<std::string> subcommands{"series", "heyde", "maxterm", "permute", "bounds"};
  const std::vector<std::string> csvs{"series.csv", "heyde.csv", "maxterm.csv", "permute.csv",
                                      "bounds.csv"};
  for (int workers : {1, 2, 8}) {
    for (const auto& sub : subcommands) {
      const fs::path out = dir / (sub + "_w" + std::to_string(workers));
      const int code = run_cli(cli, sub + " --config " + (dir / "cfg.json").string() +
                                        " --workers " + std::to_string(workers) + " --out " +
                                        out.string());
      if (code != 0) {
        detail = sub + " exited " + std::to_string(code) + " at workers=" +
                 std::to_string(workers);
        return false;
      }
    }
  }
  for (std::size_t i = 0; i < subcommands.size(); ++i) {
    const auto base = slurp(dir / (subcommands[i] + "_w1") / csvs[i]);
    if (base.empty()) {
      detail = csvs[i] + " missing or empty";
      return false;
    }
    for (int workers : {2, 8}) {
      const auto other =
          slurp(dir / (subcommands[i] + "_w" + std::to_string(workers)) / csvs[i]);
      if (other != base) {
        detail = csvs[i] + " differs at workers=" + std::to_string(workers);
        return false;
      }
    }
  }

  // degenerate model: all-zero CSV, exit 0
  std::ofstream(dir / "zero.json") << R"({
    "seed": 1, "replicas": 50,
    "model": {"kind": "iid", "law": {"name": "point", "value": 0.0}},
    "series": {"epsilon": 0.5, "n_max": 16}})";
  const int zero_code =
      run_cli(cli, "series --config " + (dir / "zero.json").string() + " --out " +
                       (dir / "zero_out").string());
  const std::string zero_csv = slurp(dir / "zero_out" / "series.csv");
  if (zero_code != 0 || zero_csv.find("\n1,0,0,") == std::string::npos) {
    detail = "zero model run exited " + std::to_string(zero_code);
    return false;
  }

  // exit-code contract: a config without a seed is a configuration error
  std::ofstream(dir / "bad.json") << R"({"replicas": 10})";
  const int bad = run_cli(cli, "series --config " + (dir / "bad.json").string());
  if (bad != 2) {
    detail = "missing seed exited " + std::to_string(bad) + ", expected 2";
    return false;
  }
  detail = "5 subcommands byte-identical across workers {1,2,8}; zero model exits 0; "
           "bad config exits 2";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  criterion(1, "variance from the scaled tail series (gaussian, 1e5 replicas)", crit_heyde);
  criterion(2, "series value at eps=1 over 50 terms vs oracle", crit_series_value);
  criterion(3, "infinite-variance divergence (pareto 1.5)", crit_heavy_divergence);
  criterion(4, "per-N tail bound, four laws, N<=200", crit_fuk_nagaev);
  criterion(5, "stopped-walk bounds on 200 random difference paths", crit_doob);
  criterion(6, "subsequence selector certificates on the 2^10 cube", crit_selector);
  criterion(7, "quantile transport vs assignment oracle (500 pairs)", crit_w2);
  criterion(8, "joining step on 100 random instances", crit_join);
  criterion(9, "disjoint-support chain and pairing certificate", crit_disjoint);
  criterion(10, "mixture moments and per-component upper value", crit_definetti);
  criterion(11, "CSV reproducibility across workers via the CLI", [&](std::string& d) {
    if (cli.empty()) {
      d = "no CLI path supplied";
      return false;
    }
    return crit_reproducible(cli, d);
  });

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASS" : "FAILURES: " + std::to_string(g_failures))
            << std::endl;
  return g_failures;
}
