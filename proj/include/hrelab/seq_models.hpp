#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hrelab/laws.hpp"
#include "hrelab/prob_engine.hpp"

namespace hrelab {

/// Deterministic per-index scaling s_n (n is 1-based).
struct Schedule {
  enum class Kind { constant, linear, geometric };
  Kind kind = Kind::constant;
  double a = 1.0;  // constant value / slope / initial
  double r = 1.0;  // geometric ratio

  static Schedule constant(double v = 1.0) { return {Kind::constant, v, 1.0}; }
  static Schedule linear(double slope = 1.0) { return {Kind::linear, slope, 1.0}; }
  static Schedule geometric(double initial, double ratio) {
    return {Kind::geometric, initial, ratio};
  }
  double at(int n) const;
};

/// Finite-state kernel: each state carries a centered finite increment law and
/// a transition per outcome. Conditional means are validated to vanish.
struct KernelSpec {
  std::vector<std::vector<double>> values;      // [state][outcome]
  std::vector<std::vector<double>> probs;       // [state][outcome]
  std::vector<std::vector<int>> next_state;     // [state][outcome]
  int initial_state = 0;

  void validate() const;
};

/// Generative specification of a random sequence f_1, f_2, ...
struct SequenceModel {
  enum class Kind { iid, definetti, kernel, spikes, perturbed };

  Kind kind = Kind::iid;
  Law law = Law::point(0.0);          // iid base law
  Schedule scale = Schedule::constant();  // iid per-index scaling
  std::vector<Law> components;        // definetti mixture components
  std::vector<double> weights;        //   and their weights
  KernelSpec kernel_spec;
  std::vector<double> spike_heights;  // spikes: one categorical draw selects
  std::vector<double> spike_probs;    //   which index fires (disjoint events)
  std::shared_ptr<const SequenceModel> base;   // perturbed base model
  Schedule perturb_rms = Schedule::geometric(0.5, 0.5);  // L2 perturbation sizes
  bool perturb_summable = true;

  static SequenceModel iid(Law law, Schedule scale = Schedule::constant());
  static SequenceModel definetti(std::vector<Law> components, std::vector<double> weights);
  static SequenceModel kernel(KernelSpec spec);
  static SequenceModel spikes(std::vector<double> heights, std::vector<double> probs);
  static SequenceModel perturbed(SequenceModel base,
                                 Schedule rms = Schedule::geometric(0.5, 0.5));

  std::string describe() const;
};

/// Stateful increment generator for one replica; a pure function of
/// (model, seed, stream).
class IncrementStream {
 public:
  IncrementStream(const SequenceModel& model, std::uint64_t seed, std::uint64_t stream);
  /// Next increment f_n (n advances 1, 2, ...).
  double next();

 private:
  struct LayerState {
    int component = -1;        // definetti component, drawn on first use
    int kernel_state = 0;
    std::int64_t spike = -2;   // -2 undrawn, -1 no spike, else 0-based index
    std::unique_ptr<LayerState> base;
  };
  double draw(const SequenceModel& m, LayerState& st);

  const SequenceModel* model_;
  StreamRng rng_;
  LayerState state_;
  int n_ = 0;
};

/// Materialized ensemble of partial-sum paths. Reproducible: the content is a
/// pure function of (model, n_max, replicas, seed), independent of workers.
struct PathEnsemble {
  int n_max = 0;
  std::int64_t replicas = 0;
  std::uint64_t seed = 0;
  std::vector<double> partial_sums;  // [r * n_max + (n-1)] = S_n
  std::vector<double> running_max;   // [r * n_max + (n-1)] = max_{k<=n} |f_k|

  double partial_sum(std::int64_t r, int n) const { return partial_sums[r * n_max + n - 1]; }
  double max_abs(std::int64_t r, int n) const { return running_max[r * n_max + n - 1]; }
  /// f_n recovered from consecutive partial sums (exact stored-value arithmetic).
  double increment(std::int64_t r, int n) const {
    return n == 1 ? partial_sum(r, 1) : partial_sum(r, n) - partial_sum(r, n - 1);
  }
};

PathEnsemble sample_paths(const SequenceModel& model, int n_max, std::int64_t replicas,
                          std::uint64_t seed, int workers = 1);

/// Randomized limiting first/second moments of a de Finetti mixture, exact
/// per component; E(eta) is the weight-averaged second moment (+inf
/// propagates).
struct MomentSummary {
  std::vector<double> f_infty;
  std::vector<bool> f_infty_defined;
  std::vector<double> eta;  // may be +inf
  std::vector<double> weights;
  double expected_eta = 0.0;
};

MomentSummary definetti_moments(const SequenceModel& model);

/// Exact finite realization of the first n_vars increments.
struct DiscreteRealization {
  SpacePtr space;
  std::vector<RandomVariable> vars;
  std::optional<RandomVariable> label;  // mixture component / spike index
};

DiscreteRealization to_discrete(const SequenceModel& model, int n_vars,
                                std::int64_t space_budget);

/// Model and law specifications in the structured text (JSON) configuration
/// schema; throws std::invalid_argument naming the offending field.
SequenceModel model_from_json_text(const std::string& text);
Law law_from_json_text(const std::string& text);

}  // namespace hrelab
