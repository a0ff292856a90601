#pragma once

#include "flowuq/ensembles.hpp"
#include "flowuq/fields.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace flowuq {

/// Normalized remaining-AEPE curve over removal fractions, with its oracle
/// counterpart (ranking by the true error). `degenerate` flags an all-perfect
/// input whose baseline AEPE is 0; such a curve is all zeros by convention.
struct SparsificationCurve {
  std::vector<double> fractions;
  std::vector<double> values;
  std::vector<double> oracle_values;
  bool degenerate = false;
};

/// One image's contribution to a pooled sparsification.
template <class Scalar>
struct SparsificationInput {
  ErrorField<Scalar> errors;
  GridX<Scalar> ranking;  // per-pixel uncertainty scalar; higher = removed first
  ValidMask mask;
};

namespace detail {

// Remaining mean EPE after removing the j highest-ranked of N pooled pixels,
// for j = (i*N)/steps, normalized by the full-pool mean. Ranking ties are
// broken by stable pool order (image order, then row-major pixel order).
inline std::vector<double> sparsify_pool(const std::vector<double>& ranking,
                                         const std::vector<double>& epe, long steps,
                                         bool* degenerate_out) {
  const long n = static_cast<long>(epe.size());
  std::vector<long> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0L);
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
    return ranking[static_cast<size_t>(a)] > ranking[static_cast<size_t>(b)];
  });
  std::vector<double> removed_prefix(static_cast<size_t>(n) + 1, 0.0);
  for (long i = 0; i < n; ++i)
    removed_prefix[static_cast<size_t>(i) + 1] =
        removed_prefix[static_cast<size_t>(i)] + epe[static_cast<size_t>(order[static_cast<size_t>(i)])];
  const double total = removed_prefix[static_cast<size_t>(n)];
  const double baseline = total / static_cast<double>(n);
  std::vector<double> values(static_cast<size_t>(steps));
  if (baseline == 0.0) {
    *degenerate_out = true;
    std::fill(values.begin(), values.end(), 0.0);
    return values;
  }
  for (long i = 0; i < steps; ++i) {
    const long k = (i * n) / steps;
    const double remaining = (total - removed_prefix[static_cast<size_t>(k)]) /
                             static_cast<double>(n - k);
    values[static_cast<size_t>(i)] = remaining / baseline;
  }
  return values;
}

}  // namespace detail

/// Pooled (dataset-wise) sparsification: rank all valid pixels of all images
/// together, remove the highest-uncertainty fraction, normalize last.
template <class Scalar>
SparsificationCurve dataset_sparsification(const std::vector<SparsificationInput<Scalar>>& images,
                                           long steps) {
  if (steps < 2) throw std::invalid_argument("sparsification: steps must be >= 2");
  if (images.empty()) throw std::invalid_argument("sparsification: no images");
  std::vector<double> ranking, epe;
  for (const auto& img : images) {
    detail::check_same_size(img.errors.epe(), img.ranking, "sparsification");
    detail::check_same_size(img.errors.epe(), img.mask.grid(), "sparsification");
    for (Eigen::Index y = 0; y < img.errors.height(); ++y)
      for (Eigen::Index x = 0; x < img.errors.width(); ++x)
        if (img.mask.at(y, x)) {
          ranking.push_back(static_cast<double>(img.ranking(y, x)));
          epe.push_back(static_cast<double>(img.errors.epe()(y, x)));
        }
  }
  if (epe.empty()) throw std::invalid_argument("sparsification: mask has no valid pixels");

  SparsificationCurve curve;
  curve.fractions.resize(static_cast<size_t>(steps));
  for (long i = 0; i < steps; ++i)
    curve.fractions[static_cast<size_t>(i)] = static_cast<double>(i) / static_cast<double>(steps);
  curve.values = detail::sparsify_pool(ranking, epe, steps, &curve.degenerate);
  curve.oracle_values = detail::sparsify_pool(epe, epe, steps, &curve.degenerate);
  return curve;
}

/// Image-wise sparsification of a single error/ranking pair.
template <class Scalar>
SparsificationCurve sparsification(const ErrorField<Scalar>& errors, const GridX<Scalar>& ranking,
                                   const ValidMask& mask, long steps = 100) {
  std::vector<SparsificationInput<Scalar>> one;
  one.push_back(SparsificationInput<Scalar>{errors, ranking, mask});
  return dataset_sparsification(one, steps);
}

/// Pointwise difference between a curve and its oracle.
inline std::vector<double> sparsification_error(const SparsificationCurve& curve) {
  if (curve.values.size() != curve.oracle_values.size())
    throw std::invalid_argument("sparsification_error: malformed curve");
  std::vector<double> err(curve.values.size());
  for (size_t i = 0; i < err.size(); ++i) err[i] = curve.values[i] - curve.oracle_values[i];
  return err;
}

/// Area under the sparsification-error curve, trapezoidal over the sampled
/// fractions. 0 means the ranking orders errors as well as the oracle.
inline double ause(const SparsificationCurve& curve) {
  if (curve.fractions.size() < 2)
    throw std::invalid_argument("ause: need at least two fractions");
  const std::vector<double> err = sparsification_error(curve);
  double area = 0.0;
  for (size_t i = 0; i + 1 < err.size(); ++i)
    area += 0.5 * (err[i] + err[i + 1]) * (curve.fractions[i + 1] - curve.fractions[i]);
  return area;
}

/// AEPE of the per-pixel best member selection (decided by the ground truth).
template <class Scalar>
Scalar oracle_epe(const HypothesisSet<Scalar>& hyps, const FlowField<Scalar>& gt,
                  const ValidMask& mask) {
  detail::check_same_size(hyps.member(0).flow.u(), gt.u(), "oracle_epe");
  detail::check_same_size(gt.u(), mask.grid(), "oracle_epe");
  const Eigen::Index h = gt.height(), w = gt.width();
  GridX<Scalar> best = GridX<Scalar>::Constant(h, w, std::numeric_limits<Scalar>::infinity());
  for (const auto& m : hyps.members()) {
    const GridX<Scalar> epe =
        ((m.flow.u() - gt.u()).square() + (m.flow.v() - gt.v()).square()).sqrt();
    best = best.min(epe);
  }
  const Eigen::Index n = mask.count();
  if (n == 0) throw std::invalid_argument("oracle_epe: mask has no valid pixels");
  return mask.grid().select(best, GridX<Scalar>::Zero(h, w)).sum() / static_cast<Scalar>(n);
}

/// Average empirical variance (sigma^2_u + sigma^2_v) over the members.
template <class Scalar>
Scalar member_variance(const HypothesisSet<Scalar>& hyps, const ValidMask& mask) {
  if (hyps.count() < 2)
    throw std::invalid_argument("member_variance: needs at least two members");
  detail::check_same_size(hyps.member(0).flow.u(), mask.grid(), "member_variance");
  const Eigen::Index n = mask.count();
  if (n == 0) throw std::invalid_argument("member_variance: mask has no valid pixels");
  const MergedPrediction<Scalar> merged = merge_empirical(hyps);
  const GridX<Scalar> total = merged.var_u + merged.var_v;
  return mask.grid()
             .select(total, GridX<Scalar>::Zero(total.rows(), total.cols()))
             .sum() /
         static_cast<Scalar>(n);
}

template <class Scalar>
Scalar member_variance(const HypothesisSet<Scalar>& hyps) {
  return member_variance(hyps, ValidMask::all(hyps.width(), hyps.height()));
}

template <class Scalar>
using EntropyMap = GridX<Scalar>;

enum class EntropyKind { Laplace, Gaussian };

/// Laplace differential entropy per pixel, in nats:
///   H = log(2 b_u e) + log(2 b_v e)
template <class Scalar>
EntropyMap<Scalar> laplace_entropy(const UncertaintyField<Scalar>& unc) {
  const Scalar two_e = Scalar(2) * std::numbers::e_v<Scalar>;
  return (two_e * unc.b_u()).log() + (two_e * unc.b_v()).log();
}

/// Gaussian differential entropy per pixel, in nats:
///   H = 0.5 log(2 e pi sigma_u^2) + 0.5 log(2 e pi sigma_v^2)
/// Sigmas are floored like Laplace scales.
template <class Scalar>
EntropyMap<Scalar> gaussian_entropy(const GridX<Scalar>& sigma_u, const GridX<Scalar>& sigma_v) {
  detail::check_grid(sigma_u, "gaussian_entropy.sigma_u");
  detail::check_grid(sigma_v, "gaussian_entropy.sigma_v");
  detail::check_same_size(sigma_u, sigma_v, "gaussian_entropy");
  if ((sigma_u < Scalar(0)).any() || (sigma_v < Scalar(0)).any())
    throw std::invalid_argument("gaussian_entropy: negative sigma");
  const Scalar two_e_pi = Scalar(2) * std::numbers::e_v<Scalar> * std::numbers::pi_v<Scalar>;
  const GridX<Scalar> su = sigma_u.max(Scalar(kScaleFloor));
  const GridX<Scalar> sv = sigma_v.max(Scalar(kScaleFloor));
  return Scalar(0.5) * (two_e_pi * su.square()).log() +
         Scalar(0.5) * (two_e_pi * sv.square()).log();
}

/// Limiting-case entropy with the scales set to the true per-component
/// estimation errors |u_pred - u_gt| and |v_pred - v_gt| (floored).
template <class Scalar>
EntropyMap<Scalar> oracle_entropy(const FlowField<Scalar>& pred, const FlowField<Scalar>& gt,
                                  EntropyKind kind) {
  detail::check_same_size(pred.u(), gt.u(), "oracle_entropy");
  GridX<Scalar> eu = (pred.u() - gt.u()).abs();
  GridX<Scalar> ev = (pred.v() - gt.v()).abs();
  if (kind == EntropyKind::Laplace)
    return laplace_entropy(UncertaintyField<Scalar>(std::move(eu), std::move(ev)));
  return gaussian_entropy(eu, ev);
}

/// Default ranking scalar for a predictive model: log b_u + log b_v, a
/// monotone transform of the Laplace entropy.
template <class Scalar>
GridX<Scalar> entropy_ranking(const UncertaintyField<Scalar>& unc) {
  return unc.b_u().log() + unc.b_v().log();
}

/// Default ranking scalar for merged predictions: sigma^2_u + sigma^2_v.
template <class Scalar>
GridX<Scalar> variance_ranking(const MergedPrediction<Scalar>& merged) {
  return merged.var_u + merged.var_v;
}

template <class Scalar>
GridX<Scalar> variance_ranking(const UncertaintyField<Scalar>& unc) {
  return unc.var_u() + unc.var_v();
}

}  // namespace flowuq
