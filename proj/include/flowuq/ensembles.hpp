#pragma once

#include "flowuq/fields.hpp"
#include "flowuq/rng.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace flowuq {

/// Merged ensemble output: a mean flow plus per-pixel (sigma^2_u, sigma^2_v).
template <class Scalar>
struct MergedPrediction {
  FlowField<Scalar> mean;
  GridX<Scalar> var_u, var_v;
};

/// Variance of a Laplace distribution with scale b.
template <class Scalar>
Scalar variance_of_laplace(Scalar b) {
  if (!(b > Scalar(0))) throw std::invalid_argument("variance_of_laplace: scale must be > 0");
  return Scalar(2) * b * b;
}

/// Empirical mean and biased (1/M) variance of the member flows. Member
/// uncertainties, if any, are ignored.
template <class Scalar>
MergedPrediction<Scalar> merge_empirical(const HypothesisSet<Scalar>& hyps) {
  const Eigen::Index h = hyps.height(), w = hyps.width();
  const Scalar inv_m = Scalar(1) / static_cast<Scalar>(hyps.count());
  GridX<Scalar> mu_u = GridX<Scalar>::Zero(h, w), mu_v = GridX<Scalar>::Zero(h, w);
  for (const auto& m : hyps.members()) {
    mu_u += m.flow.u();
    mu_v += m.flow.v();
  }
  mu_u *= inv_m;
  mu_v *= inv_m;
  GridX<Scalar> var_u = GridX<Scalar>::Zero(h, w), var_v = GridX<Scalar>::Zero(h, w);
  for (const auto& m : hyps.members()) {
    var_u += (m.flow.u() - mu_u).square();
    var_v += (m.flow.v() - mu_v).square();
  }
  var_u *= inv_m;
  var_v *= inv_m;
  return MergedPrediction<Scalar>{FlowField<Scalar>(std::move(mu_u), std::move(mu_v)),
                                  std::move(var_u), std::move(var_v)};
}

/// Mixture mean and law-of-total-variance merge of predictive members:
///   mu = (1/M) sum mu_i,  sigma^2 = (1/M) sum ((mu_i - mu)^2 + 2 b_i^2).
template <class Scalar>
MergedPrediction<Scalar> merge_predictive(const HypothesisSet<Scalar>& hyps) {
  if (!hyps.predictive())
    throw std::invalid_argument("merge_predictive: members carry no uncertainties");
  const Eigen::Index h = hyps.height(), w = hyps.width();
  const Scalar inv_m = Scalar(1) / static_cast<Scalar>(hyps.count());
  GridX<Scalar> mu_u = GridX<Scalar>::Zero(h, w), mu_v = GridX<Scalar>::Zero(h, w);
  for (const auto& m : hyps.members()) {
    mu_u += m.flow.u();
    mu_v += m.flow.v();
  }
  mu_u *= inv_m;
  mu_v *= inv_m;
  GridX<Scalar> var_u = GridX<Scalar>::Zero(h, w), var_v = GridX<Scalar>::Zero(h, w);
  for (const auto& m : hyps.members()) {
    var_u += (m.flow.u() - mu_u).square() + Scalar(2) * m.unc->b_u().square();
    var_v += (m.flow.v() - mu_v).square() + Scalar(2) * m.unc->b_v().square();
  }
  var_u *= inv_m;
  var_v *= inv_m;
  return MergedPrediction<Scalar>{FlowField<Scalar>(std::move(mu_u), std::move(mu_v)),
                                  std::move(var_u), std::move(var_v)};
}

/// SGDR cosine schedule with warm restarts. Snapshots are taken exactly at
/// the end of each annealing; the first pre_cycles cycle ends are discarded.
struct SgdrSchedule {
  double base_lr = 2e-4;
  long cycle_length = 75000;
  double t_mult = 1.0;  // cycle-length multiplier after each restart
  long pre_cycles = 8;
  long num_snapshots = 8;

  void validate() const {
    if (cycle_length < 1) throw std::invalid_argument("SgdrSchedule: cycle_length must be >= 1");
    if (t_mult < 1.0) throw std::invalid_argument("SgdrSchedule: t_mult must be >= 1");
    if (pre_cycles < 0) throw std::invalid_argument("SgdrSchedule: pre_cycles must be >= 0");
    if (num_snapshots < 1) throw std::invalid_argument("SgdrSchedule: num_snapshots must be >= 1");
  }
};

/// Learning rate at `iteration`: 0.5 * base_lr * (1 + cos(pi * t / T)) inside
/// the current cycle, restarting to base_lr at every cycle boundary.
inline double sgdr_lr(const SgdrSchedule& schedule, long iteration) {
  schedule.validate();
  if (iteration < 0) throw std::invalid_argument("sgdr_lr: iteration must be >= 0");
  double cycle_len = static_cast<double>(schedule.cycle_length);
  double t = static_cast<double>(iteration);
  while (t >= cycle_len) {
    t -= cycle_len;
    cycle_len *= schedule.t_mult;
  }
  return 0.5 * schedule.base_lr * (1.0 + std::cos(M_PI * t / cycle_len));
}

/// Iterations at which ensemble snapshots are taken: the num_snapshots cycle
/// ends that follow the skipped pre_cycles.
inline std::vector<long> snapshot_iterations(const SgdrSchedule& schedule) {
  schedule.validate();
  std::vector<long> out;
  out.reserve(static_cast<size_t>(schedule.num_snapshots));
  double cycle_len = static_cast<double>(schedule.cycle_length);
  double end = 0.0;
  for (long c = 0; c < schedule.pre_cycles + schedule.num_snapshots; ++c) {
    end += cycle_len;
    cycle_len *= schedule.t_mult;
    if (c >= schedule.pre_cycles) out.push_back(static_cast<long>(std::llround(end)));
  }
  return out;
}

/// Seeded subset assignment for bootstrapped ensembles. Each member sees
/// round(subset_fraction * N) samples, drawn without replacement by default.
struct BootstrapPlan {
  long num_members = 8;
  double subset_fraction = 0.67;
  std::vector<std::uint64_t> seeds;  // one per member
  bool with_replacement = false;

  void validate() const {
    if (num_members < 1) throw std::invalid_argument("BootstrapPlan: num_members must be >= 1");
    if (!(subset_fraction > 0.0) || subset_fraction > 1.0)
      throw std::invalid_argument("BootstrapPlan: subset_fraction must be in (0, 1]");
    if (seeds.size() != static_cast<size_t>(num_members))
      throw std::invalid_argument("BootstrapPlan: need exactly one seed per member");
  }

  static BootstrapPlan with_seed_base(long num_members, double fraction, std::uint64_t base) {
    BootstrapPlan plan;
    plan.num_members = num_members;
    plan.subset_fraction = fraction;
    plan.seeds.resize(static_cast<size_t>(num_members));
    for (long i = 0; i < num_members; ++i)
      plan.seeds[static_cast<size_t>(i)] = base + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ull;
    return plan;
  }
};

inline std::vector<std::vector<long>> bootstrap_indices(const BootstrapPlan& plan,
                                                        long dataset_size) {
  plan.validate();
  if (dataset_size < 1) throw std::invalid_argument("bootstrap_indices: dataset_size must be >= 1");
  const long n = dataset_size;
  long k = std::lround(plan.subset_fraction * static_cast<double>(n));
  k = std::clamp(k, 1L, n);
  std::vector<std::vector<long>> out(static_cast<size_t>(plan.num_members));
  for (long m = 0; m < plan.num_members; ++m) {
    std::mt19937_64 rng(plan.seeds[static_cast<size_t>(m)]);
    auto& subset = out[static_cast<size_t>(m)];
    subset.reserve(static_cast<size_t>(k));
    if (plan.with_replacement) {
      for (long i = 0; i < k; ++i)
        subset.push_back(static_cast<long>(uniform_below(rng, static_cast<std::uint64_t>(n))));
    } else {
      // partial Fisher-Yates: first k entries of a seeded permutation
      std::vector<long> pool(static_cast<size_t>(n));
      std::iota(pool.begin(), pool.end(), 0L);
      for (long i = 0; i < k; ++i) {
        const long j = i + static_cast<long>(uniform_below(rng, static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        subset.push_back(pool[static_cast<size_t>(i)]);
      }
    }
  }
  return out;
}

}  // namespace flowuq
