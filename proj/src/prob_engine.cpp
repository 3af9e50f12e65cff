#include "hrelab/prob_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace hrelab {

DiscreteSpace::DiscreteSpace(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("DiscreteSpace: no atoms");
  double s = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw std::invalid_argument("DiscreteSpace: weights must be strictly positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("DiscreteSpace: weights sum to " + std::to_string(s));
  if (s != 1.0)
    for (double& w : weights_) w /= s;
}

std::shared_ptr<const DiscreteSpace> DiscreteSpace::uniform(int atom_count) {
  if (atom_count <= 0) throw std::invalid_argument("DiscreteSpace: atom_count must be positive");
  return std::make_shared<const DiscreteSpace>(
      std::vector<double>(atom_count, 1.0 / atom_count));
}

std::shared_ptr<const DiscreteSpace> DiscreteSpace::make(std::vector<double> weights) {
  return std::make_shared<const DiscreteSpace>(std::move(weights));
}

RandomVariable::RandomVariable(SpacePtr space, std::vector<double> values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_) throw std::invalid_argument("RandomVariable: null space");
  if (static_cast<int>(values_.size()) != space_->atom_count())
    throw std::invalid_argument("RandomVariable: values length != atom_count");
}

Partition::Partition(SpacePtr space, std::vector<std::vector<int>> blocks)
    : space_(std::move(space)), blocks_(std::move(blocks)) {
  if (!space_) throw std::invalid_argument("Partition: null space");
  const int n = space_->atom_count();
  block_of_.assign(n, -1);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].empty()) throw std::invalid_argument("Partition: empty block");
    for (int a : blocks_[b]) {
      if (a < 0 || a >= n) throw std::invalid_argument("Partition: atom index out of range");
      if (block_of_[a] != -1) throw std::invalid_argument("Partition: blocks overlap");
      block_of_[a] = static_cast<int>(b);
    }
  }
  for (int a = 0; a < n; ++a)
    if (block_of_[a] == -1) throw std::invalid_argument("Partition: blocks do not cover all atoms");
}

Partition Partition::trivial(SpacePtr space) {
  std::vector<int> all(space->atom_count());
  std::iota(all.begin(), all.end(), 0);
  return Partition(std::move(space), {std::move(all)});
}

Partition Partition::finest(SpacePtr space) {
  std::vector<std::vector<int>> blocks(space->atom_count());
  for (int a = 0; a < static_cast<int>(blocks.size()); ++a) blocks[a] = {a};
  return Partition(std::move(space), std::move(blocks));
}

double Partition::block_mass(int b) const {
  double m = 0.0;
  for (int a : blocks_[b]) m += space_->weight(a);
  return m;
}

void MartingalePath::validate() const {
  if (!space) throw std::invalid_argument("MartingalePath: null space");
  if (increments.size() != filtration.size())
    throw std::invalid_argument("MartingalePath: increments/filtration length mismatch");
  for (std::size_t n = 0; n < increments.size(); ++n) {
    if (increments[n].space().get() != space.get() || filtration[n].space().get() != space.get())
      throw std::invalid_argument("MartingalePath: space mismatch");
    if (n > 0 && !refines(filtration[n], filtration[n - 1]))
      throw std::invalid_argument("MartingalePath: filtration does not refine monotonically");
    // measurability: constant on each block of its own partition
    for (const auto& block : filtration[n].blocks()) {
      const double v0 = increments[n](block.front());
      for (int a : block)
        if (increments[n](a) != v0)
          throw std::invalid_argument("MartingalePath: increment not measurable at index " +
                                      std::to_string(n + 1));
    }
  }
}

double expectation(const RandomVariable& x) {
  double s = 0.0;
  for (int a = 0; a < x.size(); ++a) s += x.space()->weight(a) * x(a);
  return s;
}

double expectation_sq(const RandomVariable& x) {
  double s = 0.0;
  for (int a = 0; a < x.size(); ++a) s += x.space()->weight(a) * x(a) * x(a);
  return s;
}

double probability(const DiscreteSpace& space, std::span<const char> mask) {
  double s = 0.0;
  for (int a = 0; a < space.atom_count(); ++a)
    if (mask[a]) s += space.weight(a);
  return s;
}

RandomVariable cond_exp(const RandomVariable& x, const Partition& p) {
  if (x.space().get() != p.space().get()) throw std::invalid_argument("space mismatch");
  std::vector<double> out(x.size(), 0.0);
  for (const auto& block : p.blocks()) {
    double num = 0.0, den = 0.0;
    for (int a : block) {
      num += x.space()->weight(a) * x(a);
      den += x.space()->weight(a);
    }
    const double v = num / den;
    for (int a : block) out[a] = v;
  }
  return RandomVariable(x.space(), std::move(out));
}

Partition generated_partition(SpacePtr space, std::span<const RandomVariable> xs) {
  for (const auto& x : xs)
    if (x.space().get() != space.get()) throw std::invalid_argument("space mismatch");
  const int n = space->atom_count();
  std::map<std::vector<double>, std::vector<int>> groups;
  std::vector<double> key(xs.size());
  for (int a = 0; a < n; ++a) {
    for (std::size_t i = 0; i < xs.size(); ++i) key[i] = xs[i](a);
    groups[key].push_back(a);
  }
  std::vector<std::vector<int>> blocks;
  blocks.reserve(groups.size());
  for (auto& [k, v] : groups) blocks.push_back(std::move(v));
  return Partition(std::move(space), std::move(blocks));
}

Partition refine_by(const Partition& p, const RandomVariable& x) {
  if (x.space().get() != p.space().get()) throw std::invalid_argument("space mismatch");
  std::vector<std::vector<int>> blocks;
  for (const auto& block : p.blocks()) {
    std::map<double, std::vector<int>> groups;
    for (int a : block) groups[x(a)].push_back(a);
    for (auto& [k, v] : groups) blocks.push_back(std::move(v));
  }
  return Partition(p.space(), std::move(blocks));
}

bool refines(const Partition& fine, const Partition& coarse) {
  if (fine.space().get() != coarse.space().get()) return false;
  for (const auto& block : fine.blocks()) {
    const int c = coarse.block_of(block.front());
    for (int a : block)
      if (coarse.block_of(a) != c) return false;
  }
  return true;
}

MdReport verify_md(const MartingalePath& path, double bound) {
  path.validate();
  MdReport rep;
  rep.bound = bound;
  Partition prev = Partition::trivial(path.space);
  for (int n = 0; n < path.length(); ++n) {
    const RandomVariable cmean = cond_exp(path.increments[n], prev);
    std::vector<double> sq(path.space->atom_count());
    for (int a = 0; a < path.space->atom_count(); ++a) {
      const double v = path.increments[n](a);
      sq[a] = v * v;
    }
    const RandomVariable csec = cond_exp(RandomVariable(path.space, std::move(sq)), prev);
    for (int a = 0; a < path.space->atom_count(); ++a) {
      rep.max_cond_mean = std::max(rep.max_cond_mean, std::abs(cmean(a)));
      rep.max_cond_second = std::max(rep.max_cond_second, csec(a));
    }
    prev = path.filtration[n];
  }
  rep.pass = rep.max_cond_mean <= rep.mean_tol && rep.max_cond_second <= bound;
  return rep;
}

DoobChainReport doob_chain(const MartingalePath& path, int N) {
  if (N < 1 || N > path.length())
    throw std::invalid_argument("doob_chain: N exceeds path length");
  const auto& space = *path.space;
  const int atoms = space.atom_count();
  DoobChainReport rep;
  rep.N = N;
  rep.tau.assign(atoms, N + 1);
  rep.x_final.assign(atoms, 0.0);
  rep.y_final.assign(atoms, 0.0);

  const double third = static_cast<double>(N) / 3.0;
  std::vector<double> x(atoms, 0.0), x_at_tau(atoms, 0.0), max_abs_f(atoms, 0.0);
  for (int n = 1; n <= N; ++n) {
    const auto& f = path.increments[n - 1];
    for (int a = 0; a < atoms; ++a) {
      x[a] += f(a);
      max_abs_f[a] = std::max(max_abs_f[a], std::abs(f(a)));
      if (rep.tau[a] == N + 1 && std::abs(x[a]) > third) {
        rep.tau[a] = n;
        x_at_tau[a] = x[a];
      }
    }
  }
  for (int a = 0; a < atoms; ++a) {
    rep.x_final[a] = x[a];
    rep.y_final[a] = rep.tau[a] <= N ? x[a] - x_at_tau[a] : 0.0;
    const bool tau_fin = rep.tau[a] <= N;
    const bool B = std::abs(x[a]) > static_cast<double>(N);
    const bool A = max_abs_f[a] <= third;
    const double w = space.weight(a);
    if (tau_fin) rep.p_tau_finite += w;
    if (B) rep.p_B += w;
    if (!A) rep.p_A_c += w;
    if (B && A) rep.p_B_and_A += w;
  }
  rep.doob_bound = 36.0 / N;
  rep.product_bound = 324.0 / (static_cast<double>(N) * N);
  rep.within_doob = rep.p_tau_finite <= rep.doob_bound + 1e-12;
  rep.within_product = rep.p_B_and_A <= rep.product_bound + 1e-12;
  return rep;
}

}  // namespace hrelab
