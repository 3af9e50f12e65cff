#include "hrelab/seq_models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace hrelab {

double Schedule::at(int n) const {
  switch (kind) {
    case Kind::constant:
      return a;
    case Kind::linear:
      return a * n;
    case Kind::geometric:
      return a * std::pow(r, n - 1);
  }
  return 1.0;
}

void KernelSpec::validate() const {
  const std::size_t s = values.size();
  if (s == 0 || probs.size() != s || next_state.size() != s)
    throw std::invalid_argument("kernel: state tables must have equal, nonzero size");
  if (initial_state < 0 || initial_state >= static_cast<int>(s))
    throw std::invalid_argument("kernel: initial_state out of range");
  for (std::size_t st = 0; st < s; ++st) {
    const auto& v = values[st];
    const auto& p = probs[st];
    const auto& nx = next_state[st];
    if (v.empty() || v.size() != p.size() || v.size() != nx.size())
      throw std::invalid_argument("kernel: outcome tables must have equal, nonzero size");
    double psum = 0.0, mean = 0.0;
    for (std::size_t o = 0; o < v.size(); ++o) {
      if (!(p[o] > 0.0)) throw std::invalid_argument("kernel: outcome probs must be positive");
      psum += p[o];
      mean += p[o] * v[o];
      if (nx[o] < 0 || nx[o] >= static_cast<int>(s))
        throw std::invalid_argument("kernel: next_state out of range");
    }
    if (std::abs(psum - 1.0) > 1e-9)
      throw std::invalid_argument("kernel: outcome probs must sum to 1");
    if (std::abs(mean) > 1e-12)
      throw std::invalid_argument("kernel: state increment law is not centered");
  }
}

SequenceModel SequenceModel::iid(Law law, Schedule scale) {
  SequenceModel m;
  m.kind = Kind::iid;
  m.law = std::move(law);
  m.scale = scale;
  return m;
}

SequenceModel SequenceModel::definetti(std::vector<Law> components, std::vector<double> weights) {
  if (components.empty() || components.size() != weights.size())
    throw std::invalid_argument("definetti: components/weights size mismatch");
  double s = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("definetti: weights must be positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("definetti: weights must sum to 1");
  for (double& w : weights) w /= s;
  SequenceModel m;
  m.kind = Kind::definetti;
  m.components = std::move(components);
  m.weights = std::move(weights);
  return m;
}

SequenceModel SequenceModel::kernel(KernelSpec spec) {
  spec.validate();
  SequenceModel m;
  m.kind = Kind::kernel;
  m.kernel_spec = std::move(spec);
  return m;
}

SequenceModel SequenceModel::spikes(std::vector<double> heights, std::vector<double> probs) {
  if (heights.empty() || heights.size() != probs.size())
    throw std::invalid_argument("spikes: heights/probs size mismatch");
  double s = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) throw std::invalid_argument("spikes: probs must be positive");
    s += p;
  }
  if (s > 1.0 + 1e-12) throw std::invalid_argument("spikes: probs sum exceeds 1");
  SequenceModel m;
  m.kind = Kind::spikes;
  m.spike_heights = std::move(heights);
  m.spike_probs = std::move(probs);
  return m;
}

SequenceModel SequenceModel::perturbed(SequenceModel base, Schedule rms) {
  SequenceModel m;
  m.kind = Kind::perturbed;
  m.base = std::make_shared<const SequenceModel>(std::move(base));
  m.perturb_rms = rms;
  m.perturb_summable =
      rms.kind == Schedule::Kind::geometric ? std::abs(rms.r) < 1.0 : rms.kind != Schedule::Kind::linear;
  return m;
}

std::string SequenceModel::describe() const {
  switch (kind) {
    case Kind::iid:
      return "iid(" + law.name() + ")";
    case Kind::definetti:
      return "definetti(" + std::to_string(components.size()) + " components)";
    case Kind::kernel:
      return "kernel(" + std::to_string(kernel_spec.values.size()) + " states)";
    case Kind::spikes:
      return "spikes(" + std::to_string(spike_heights.size()) + ")";
    case Kind::perturbed:
      return "perturbed(" + (base ? base->describe() : std::string("?")) + ")";
  }
  return "?";
}

IncrementStream::IncrementStream(const SequenceModel& model, std::uint64_t seed,
                                 std::uint64_t stream)
    : model_(&model), rng_(seed, stream) {}

double IncrementStream::draw(const SequenceModel& m, LayerState& st) {
  switch (m.kind) {
    case SequenceModel::Kind::iid:
      return m.scale.at(n_) * m.law.sample(rng_);
    case SequenceModel::Kind::definetti: {
      if (st.component < 0) {
        const double u = rng_.next_unit();
        double c = 0.0;
        st.component = static_cast<int>(m.weights.size()) - 1;
        for (std::size_t i = 0; i < m.weights.size(); ++i) {
          c += m.weights[i];
          if (u < c) {
            st.component = static_cast<int>(i);
            break;
          }
        }
      }
      return m.components[st.component].sample(rng_);
    }
    case SequenceModel::Kind::kernel: {
      const auto& ks = m.kernel_spec;
      const auto& p = ks.probs[st.kernel_state];
      const double u = rng_.next_unit();
      double c = 0.0;
      std::size_t o = p.size() - 1;
      for (std::size_t i = 0; i < p.size(); ++i) {
        c += p[i];
        if (u < c) {
          o = i;
          break;
        }
      }
      const double v = ks.values[st.kernel_state][o];
      st.kernel_state = ks.next_state[st.kernel_state][o];
      return v;
    }
    case SequenceModel::Kind::spikes: {
      if (st.spike == -2) {
        const double u = rng_.next_unit();
        double c = 0.0;
        st.spike = -1;
        for (std::size_t i = 0; i < m.spike_probs.size(); ++i) {
          c += m.spike_probs[i];
          if (u < c) {
            st.spike = static_cast<std::int64_t>(i);
            break;
          }
        }
      }
      return st.spike == n_ - 1 ? m.spike_heights[st.spike] : 0.0;
    }
    case SequenceModel::Kind::perturbed: {
      if (!st.base) st.base = std::make_unique<LayerState>();
      const double b = draw(*m.base, *st.base);
      const double s = m.perturb_rms.at(n_);
      return b + (rng_.next_bit() ? s : -s);
    }
  }
  throw std::invalid_argument("unknown model kind");
}

double IncrementStream::next() {
  ++n_;
  return draw(*model_, state_);
}

// ---- ensembles ---------------------------------------------------------------

PathEnsemble sample_paths(const SequenceModel& model, int n_max, std::int64_t replicas,
                          std::uint64_t seed, int workers) {
  if (n_max < 1 || replicas < 1) throw std::invalid_argument("sample_paths: n_max and replicas must be >= 1");
  const std::int64_t cells = static_cast<std::int64_t>(n_max) * replicas;
  if (cells > (std::int64_t{1} << 26))
    throw std::invalid_argument("sample_paths: ensemble too large to materialize; use the streaming estimators");
  PathEnsemble ens;
  ens.n_max = n_max;
  ens.replicas = replicas;
  ens.seed = seed;
  ens.partial_sums.resize(cells);
  ens.running_max.resize(cells);

  workers = std::max(1, workers);
  auto fill = [&](std::int64_t r_begin, std::int64_t r_end) {
    for (std::int64_t r = r_begin; r < r_end; ++r) {
      IncrementStream st(model, seed, stream_id(static_cast<std::uint64_t>(r)));
      double s = 0.0, m = 0.0;
      for (int n = 1; n <= n_max; ++n) {
        const double x = st.next();
        s += x;
        m = std::max(m, std::abs(x));
        ens.partial_sums[r * n_max + n - 1] = s;
        ens.running_max[r * n_max + n - 1] = m;
      }
    }
  };
  if (workers == 1) {
    fill(0, replicas);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) {
      const std::int64_t b = replicas * w / workers;
      const std::int64_t e = replicas * (w + 1) / workers;
      threads.emplace_back(fill, b, e);
    }
    for (auto& t : threads) t.join();
  }
  return ens;
}

MomentSummary definetti_moments(const SequenceModel& model) {
  if (model.kind != SequenceModel::Kind::definetti)
    throw std::invalid_argument("definetti_moments: model is not a de Finetti mixture");
  MomentSummary out;
  out.weights = model.weights;
  double e = 0.0;
  bool inf = false;
  for (const Law& comp : model.components) {
    const double m = comp.mean();
    const double s2 = comp.second_moment();
    out.f_infty.push_back(m);
    out.f_infty_defined.push_back(std::isfinite(m));
    out.eta.push_back(s2);
    if (!std::isfinite(s2)) inf = true;
  }
  for (std::size_t i = 0; i < out.eta.size(); ++i)
    if (std::isfinite(out.eta[i])) e += model.weights[i] * out.eta[i];
  out.expected_eta = inf ? kInf : e;
  return out;
}

// ---- exact finite realizations -------------------------------------------------

namespace {

// product space over per-index alphabets (all identical per component)
struct ProductBuild {
  std::vector<double> weights;
  std::vector<std::vector<double>> coord_values;  // [n][atom]
};

void enumerate_product(const std::vector<double>& vals, const std::vector<double>& probs,
                       int n_vars, double w0, const std::vector<double>& scale,
                       ProductBuild& out) {
  const int k = static_cast<int>(vals.size());
  std::int64_t total = 1;
  for (int n = 0; n < n_vars; ++n) total *= k;
  const std::size_t base_atom = out.weights.size();
  out.weights.resize(base_atom + total);
  for (auto& cv : out.coord_values) cv.resize(base_atom + total);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    double w = w0;
    std::int64_t rest = idx;
    for (int n = 0; n < n_vars; ++n) {
      const int digit = static_cast<int>(rest % k);
      rest /= k;
      w *= probs[digit];
      out.coord_values[n][base_atom + idx] = scale[n] * vals[digit];
    }
    out.weights[base_atom + idx] = w;
  }
}

std::int64_t ipow_capped(std::int64_t b, int e, std::int64_t cap) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) {
    r *= b;
    if (r > cap || r <= 0) return -1;
  }
  return r;
}

}  // namespace

DiscreteRealization to_discrete(const SequenceModel& model, int n_vars,
                                std::int64_t space_budget) {
  if (n_vars < 1) throw std::invalid_argument("to_discrete: n_vars must be >= 1");
  std::vector<double> scale(n_vars, 1.0);

  switch (model.kind) {
    case SequenceModel::Kind::iid: {
      for (int n = 1; n <= n_vars; ++n) scale[n - 1] = model.scale.at(n);
      auto [vals, probs] = model.law.alphabet();
      const std::int64_t need = ipow_capped(vals.size(), n_vars, space_budget);
      if (need < 0)
        throw std::invalid_argument("to_discrete: space budget exceeded (need " +
                                    std::to_string(vals.size()) + "^" + std::to_string(n_vars) +
                                    " atoms)");
      ProductBuild pb;
      pb.coord_values.resize(n_vars);
      enumerate_product(vals, probs, n_vars, 1.0, scale, pb);
      DiscreteRealization out;
      out.space = DiscreteSpace::make(std::move(pb.weights));
      for (int n = 0; n < n_vars; ++n)
        out.vars.emplace_back(out.space, std::move(pb.coord_values[n]));
      return out;
    }

    case SequenceModel::Kind::definetti: {
      std::int64_t need = 0;
      std::vector<std::pair<std::vector<double>, std::vector<double>>> alphabets;
      for (const Law& comp : model.components) {
        alphabets.push_back(comp.alphabet());
        const std::int64_t block = ipow_capped(alphabets.back().first.size(), n_vars, space_budget);
        if (block < 0 || (need += block) > space_budget)
          throw std::invalid_argument("to_discrete: space budget exceeded (need > " +
                                      std::to_string(space_budget) + " atoms)");
      }
      ProductBuild pb;
      pb.coord_values.resize(n_vars);
      std::vector<double> label_vals;
      for (std::size_t c = 0; c < model.components.size(); ++c) {
        const std::size_t before = pb.weights.size();
        enumerate_product(alphabets[c].first, alphabets[c].second, n_vars, model.weights[c],
                          scale, pb);
        label_vals.resize(pb.weights.size(), static_cast<double>(c));
        (void)before;
      }
      DiscreteRealization out;
      out.space = DiscreteSpace::make(std::move(pb.weights));
      for (int n = 0; n < n_vars; ++n)
        out.vars.emplace_back(out.space, std::move(pb.coord_values[n]));
      out.label = RandomVariable(out.space, std::move(label_vals));
      return out;
    }

    case SequenceModel::Kind::kernel: {
      const auto& ks = model.kernel_spec;
      struct Node {
        int state;
        double w;
        std::vector<double> vals;
      };
      std::vector<Node> frontier{{ks.initial_state, 1.0, {}}};
      for (int n = 0; n < n_vars; ++n) {
        std::vector<Node> next;
        for (const auto& node : frontier) {
          const auto& v = ks.values[node.state];
          const auto& p = ks.probs[node.state];
          for (std::size_t o = 0; o < v.size(); ++o) {
            Node child{ks.next_state[node.state][o], node.w * p[o], node.vals};
            child.vals.push_back(v[o]);
            next.push_back(std::move(child));
          }
        }
        frontier = std::move(next);
        if (static_cast<std::int64_t>(frontier.size()) > space_budget)
          throw std::invalid_argument("to_discrete: space budget exceeded (need " +
                                      std::to_string(frontier.size()) + "+ atoms)");
      }
      std::vector<double> weights;
      weights.reserve(frontier.size());
      for (const auto& node : frontier) weights.push_back(node.w);
      DiscreteRealization out;
      out.space = DiscreteSpace::make(std::move(weights));
      for (int n = 0; n < n_vars; ++n) {
        std::vector<double> vals(frontier.size());
        for (std::size_t a = 0; a < frontier.size(); ++a) vals[a] = frontier[a].vals[n];
        out.vars.emplace_back(out.space, std::move(vals));
      }
      return out;
    }

    case SequenceModel::Kind::spikes: {
      const std::size_t m = model.spike_heights.size();
      double psum = 0.0;
      for (double p : model.spike_probs) psum += p;
      const bool rest = psum < 1.0 - 1e-12;
      const std::size_t atoms = m + (rest ? 1 : 0);
      if (static_cast<std::int64_t>(atoms) > space_budget)
        throw std::invalid_argument("to_discrete: space budget exceeded (need " +
                                    std::to_string(atoms) + " atoms)");
      std::vector<double> weights(model.spike_probs);
      if (rest) weights.push_back(1.0 - psum);
      DiscreteRealization out;
      out.space = DiscreteSpace::make(std::move(weights));
      for (int n = 1; n <= n_vars; ++n) {
        std::vector<double> vals(atoms, 0.0);
        if (n <= static_cast<int>(m)) vals[n - 1] = model.spike_heights[n - 1];
        out.vars.emplace_back(out.space, std::move(vals));
      }
      std::vector<double> label(atoms, 0.0);
      for (std::size_t i = 0; i < m; ++i) label[i] = static_cast<double>(i + 1);
      out.label = RandomVariable(out.space, std::move(label));
      return out;
    }

    case SequenceModel::Kind::perturbed: {
      DiscreteRealization base = to_discrete(*model.base, n_vars, space_budget);
      const std::int64_t base_atoms = base.space->atom_count();
      const std::int64_t factor = ipow_capped(2, n_vars, space_budget);
      if (factor < 0 || base_atoms > space_budget / factor)
        throw std::invalid_argument("to_discrete: space budget exceeded (need " +
                                    std::to_string(base_atoms) + " * 2^" +
                                    std::to_string(n_vars) + " atoms)");
      const std::int64_t atoms = base_atoms * factor;
      std::vector<double> weights(atoms);
      std::vector<std::vector<double>> vals(n_vars, std::vector<double>(atoms));
      std::vector<double> label_vals;
      if (base.label) label_vals.resize(atoms);
      for (std::int64_t s = 0; s < factor; ++s) {
        for (std::int64_t a = 0; a < base_atoms; ++a) {
          const std::int64_t idx = s * base_atoms + a;
          weights[idx] = base.space->weight(a) / static_cast<double>(factor);
          for (int n = 1; n <= n_vars; ++n) {
            const double sgn = ((s >> (n - 1)) & 1) ? 1.0 : -1.0;
            vals[n - 1][idx] = base.vars[n - 1](a) + sgn * model.perturb_rms.at(n);
          }
          if (base.label) label_vals[idx] = (*base.label)(a);
        }
      }
      DiscreteRealization out;
      out.space = DiscreteSpace::make(std::move(weights));
      for (int n = 0; n < n_vars; ++n) out.vars.emplace_back(out.space, std::move(vals[n]));
      if (base.label) out.label = RandomVariable(out.space, std::move(label_vals));
      return out;
    }
  }
  throw std::invalid_argument("unknown model kind");
}

// ---- configuration schema -------------------------------------------------------

namespace {

using nlohmann::json;

double get_num(const json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_number())
    throw std::invalid_argument("config: missing or non-numeric field '" + field + "'");
  return j[field].get<double>();
}

std::vector<double> get_vec(const json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_array())
    throw std::invalid_argument("config: missing array field '" + field + "'");
  return j[field].get<std::vector<double>>();
}

Law law_from_json(const json& j) {
  if (!j.contains("name")) throw std::invalid_argument("config: law missing 'name'");
  const std::string name = j["name"].get<std::string>();
  if (name == "gaussian") return Law::gaussian(get_num(j, "mean"), get_num(j, "sd"));
  if (name == "uniform") return Law::uniform_sym(get_num(j, "half_width"));
  if (name == "laplace") return Law::laplace(get_num(j, "scale"));
  if (name == "pareto") return Law::pareto_sym(get_num(j, "alpha"));
  if (name == "rademacher") return Law::rademacher();
  if (name == "point") return Law::point(get_num(j, "value"));
  if (name == "categorical") return Law::categorical(get_vec(j, "values"), get_vec(j, "probs"));
  throw std::invalid_argument("config: unknown law '" + name + "'");
}

Schedule schedule_from_json(const json& j) {
  const std::string kind = j.value("kind", std::string("constant"));
  if (kind == "constant") return Schedule::constant(j.value("value", 1.0));
  if (kind == "linear") return Schedule::linear(j.value("slope", 1.0));
  if (kind == "geometric") return Schedule::geometric(get_num(j, "initial"), get_num(j, "ratio"));
  throw std::invalid_argument("config: unknown schedule kind '" + kind + "'");
}

SequenceModel model_from_json(const json& j) {
  if (!j.contains("kind")) throw std::invalid_argument("config: model missing 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "iid") {
    Schedule sc = j.contains("scale") ? schedule_from_json(j["scale"]) : Schedule::constant();
    if (!j.contains("law")) throw std::invalid_argument("config: iid model missing 'law'");
    return SequenceModel::iid(law_from_json(j["law"]), sc);
  }
  if (kind == "definetti") {
    if (!j.contains("components") || !j["components"].is_array())
      throw std::invalid_argument("config: definetti model missing 'components'");
    std::vector<Law> laws;
    std::vector<double> weights;
    for (const auto& c : j["components"]) {
      if (!c.contains("law")) throw std::invalid_argument("config: component missing 'law'");
      laws.push_back(law_from_json(c["law"]));
      weights.push_back(get_num(c, "weight"));
    }
    return SequenceModel::definetti(std::move(laws), std::move(weights));
  }
  if (kind == "kernel") {
    if (!j.contains("states") || !j["states"].is_array())
      throw std::invalid_argument("config: kernel model missing 'states'");
    KernelSpec ks;
    for (const auto& s : j["states"]) {
      ks.values.push_back(get_vec(s, "values"));
      ks.probs.push_back(get_vec(s, "probs"));
      if (!s.contains("next") || !s["next"].is_array())
        throw std::invalid_argument("config: kernel state missing 'next'");
      ks.next_state.push_back(s["next"].get<std::vector<int>>());
    }
    ks.initial_state = j.value("initial", 0);
    return SequenceModel::kernel(std::move(ks));
  }
  if (kind == "spikes")
    return SequenceModel::spikes(get_vec(j, "heights"), get_vec(j, "probs"));
  if (kind == "perturbed") {
    if (!j.contains("base")) throw std::invalid_argument("config: perturbed model missing 'base'");
    Schedule rms = j.contains("rms") ? schedule_from_json(j["rms"]) : Schedule::geometric(0.5, 0.5);
    return SequenceModel::perturbed(model_from_json(j["base"]), rms);
  }
  throw std::invalid_argument("config: unknown model kind '" + kind + "'");
}

}  // namespace

SequenceModel model_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, true, true);
  return model_from_json(j);
}

Law law_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, true, true);
  return law_from_json(j);
}

}  // namespace hrelab
