#pragma once

#include "flowuq/fields.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace flowuq {

// Below this endpoint error the EPE gradient is taken as 0 (subgradient at
// the kink of the square root).
inline constexpr double kEpeKinkEps = 1e-9;

enum class Reduction { Sum, Mean };
enum class InnerLoss { Epe, LaplaceNll };

/// A per-pixel loss grid plus its masked reduction. Masked-out pixels hold 0.
template <class Scalar>
struct LossValue {
  GridX<Scalar> per_pixel;
  Eigen::Index valid_count = 0;
  Scalar sum = Scalar(0);
  Reduction reduction = Reduction::Mean;

  Scalar mean() const { return sum / static_cast<Scalar>(valid_count); }
  Scalar total() const { return reduction == Reduction::Sum ? sum : mean(); }
};

/// Per-pixel hypothesis index chosen by the WTA rule.
struct WtaSelection {
  GridX<int> best_idx;
};

template <class Scalar>
struct FlowGrad {
  GridX<Scalar> du, dv;
};

// Gradient of the Laplace NLL w.r.t. the predicted means and the log-scales
// s = log b (the trainable parameterization; b = exp(s) keeps scales positive).
template <class Scalar>
struct LaplaceNllGrad {
  GridX<Scalar> da_u, da_v, ds_u, ds_v;
};

namespace detail {

template <class Scalar>
LossValue<Scalar> reduce_masked(GridX<Scalar> per_pixel, const ValidMask& mask,
                                Reduction reduction) {
  per_pixel = mask.grid().select(
      per_pixel, GridX<Scalar>::Zero(per_pixel.rows(), per_pixel.cols()));
  LossValue<Scalar> out;
  out.sum = per_pixel.sum();
  out.per_pixel = std::move(per_pixel);
  out.valid_count = mask.count();
  out.reduction = reduction;
  return out;
}

}  // namespace detail

/// Endpoint-error loss: per-pixel sqrt((u-u_gt)^2 + (v-v_gt)^2).
template <class Scalar>
LossValue<Scalar> epe_loss(const FlowField<Scalar>& pred, const FlowField<Scalar>& gt,
                           const ValidMask& mask, Reduction reduction = Reduction::Mean) {
  detail::check_same_size(pred.u(), gt.u(), "epe_loss");
  detail::check_same_size(pred.u(), mask.grid(), "epe_loss");
  GridX<Scalar> epe =
      ((pred.u() - gt.u()).square() + (pred.v() - gt.v()).square()).sqrt();
  return detail::reduce_masked(std::move(epe), mask, reduction);
}

/// d EPE / du = (u - u_gt) / EPE, and likewise for v. Zero at masked-out
/// pixels and at the kink (EPE < kEpeKinkEps).
template <class Scalar>
FlowGrad<Scalar> epe_loss_grad(const FlowField<Scalar>& pred, const FlowField<Scalar>& gt,
                               const ValidMask& mask) {
  detail::check_same_size(pred.u(), gt.u(), "epe_loss_grad");
  detail::check_same_size(pred.u(), mask.grid(), "epe_loss_grad");
  const GridX<Scalar> ru = pred.u() - gt.u();
  const GridX<Scalar> rv = pred.v() - gt.v();
  const GridX<Scalar> epe = (ru.square() + rv.square()).sqrt();
  const GridX<Scalar> zero = GridX<Scalar>::Zero(epe.rows(), epe.cols());
  const auto active = mask.grid() && (epe >= Scalar(kEpeKinkEps));
  FlowGrad<Scalar> g;
  g.du = active.select(ru / epe.max(Scalar(kEpeKinkEps)), zero);
  g.dv = active.select(rv / epe.max(Scalar(kEpeKinkEps)), zero);
  return g;
}

/// Factorized Laplace negative log-likelihood per pixel:
///   |u - a_u|/b_u + log b_u + |v - a_v|/b_v + log b_v
/// (the constant log 4 from the two 1/(2b) normalizers is omitted).
template <class Scalar>
LossValue<Scalar> laplace_nll(const FlowField<Scalar>& pred, const UncertaintyField<Scalar>& unc,
                              const FlowField<Scalar>& gt, const ValidMask& mask,
                              Reduction reduction = Reduction::Mean) {
  detail::check_same_size(pred.u(), gt.u(), "laplace_nll");
  detail::check_same_size(pred.u(), unc.b_u(), "laplace_nll");
  detail::check_same_size(pred.u(), mask.grid(), "laplace_nll");
  GridX<Scalar> nll = (gt.u() - pred.u()).abs() / unc.b_u() + unc.b_u().log() +
                      (gt.v() - pred.v()).abs() / unc.b_v() + unc.b_v().log();
  return detail::reduce_masked(std::move(nll), mask, reduction);
}

/// d NLL / d a = sign(a - u) / b;  d NLL / d s = 1 - |u - a| / b  with s = log b.
template <class Scalar>
LaplaceNllGrad<Scalar> laplace_nll_grad(const FlowField<Scalar>& pred,
                                        const UncertaintyField<Scalar>& unc,
                                        const FlowField<Scalar>& gt, const ValidMask& mask) {
  detail::check_same_size(pred.u(), gt.u(), "laplace_nll_grad");
  detail::check_same_size(pred.u(), unc.b_u(), "laplace_nll_grad");
  detail::check_same_size(pred.u(), mask.grid(), "laplace_nll_grad");
  const GridX<Scalar> zero = GridX<Scalar>::Zero(pred.height(), pred.width());
  const GridX<Scalar> ru = pred.u() - gt.u();
  const GridX<Scalar> rv = pred.v() - gt.v();
  LaplaceNllGrad<Scalar> g;
  g.da_u = mask.grid().select(ru.sign() / unc.b_u(), zero);
  g.da_v = mask.grid().select(rv.sign() / unc.b_v(), zero);
  g.ds_u = mask.grid().select(Scalar(1) - ru.abs() / unc.b_u(), zero);
  g.ds_v = mask.grid().select(Scalar(1) - rv.abs() / unc.b_v(), zero);
  return g;
}

/// Per-pixel index of the hypothesis with the lowest EPE against the ground
/// truth. Ties go to the lowest index.
template <class Scalar>
WtaSelection wta_best_idx(const HypothesisSet<Scalar>& hyps, const FlowField<Scalar>& gt,
                          const ValidMask& mask) {
  detail::check_same_size(hyps.member(0).flow.u(), gt.u(), "wta_best_idx");
  detail::check_same_size(gt.u(), mask.grid(), "wta_best_idx");
  const Eigen::Index h = gt.height(), w = gt.width();
  GridX<Scalar> best =
      ((hyps.member(0).flow.u() - gt.u()).square() + (hyps.member(0).flow.v() - gt.v()).square());
  GridX<int> idx = GridX<int>::Zero(h, w);
  for (Eigen::Index k = 1; k < hyps.count(); ++k) {
    const GridX<Scalar> d = (hyps.member(k).flow.u() - gt.u()).square() +
                            (hyps.member(k).flow.v() - gt.v()).square();
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x)
        if (d(y, x) < best(y, x)) {
          best(y, x) = d(y, x);
          idx(y, x) = static_cast<int>(k);
        }
  }
  return WtaSelection{std::move(idx)};
}

/// Spatial diversity penalty: for every hypothesis and both components, the
/// sum of absolute one-sided differences to the upper and left neighbors.
/// The per-pixel grid holds each pixel's own difference terms.
template <class Scalar>
LossValue<Scalar> wta_smoothness(const HypothesisSet<Scalar>& hyps) {
  const Eigen::Index h = hyps.height(), w = hyps.width();
  GridX<Scalar> delta = GridX<Scalar>::Zero(h, w);
  for (Eigen::Index k = 0; k < hyps.count(); ++k) {
    for (const GridX<Scalar>* comp : {&hyps.member(k).flow.u(), &hyps.member(k).flow.v()}) {
      const GridX<Scalar>& y = *comp;
      if (h > 1)
        delta.bottomRows(h - 1) += (y.bottomRows(h - 1) - y.topRows(h - 1)).abs();
      if (w > 1)
        delta.rightCols(w - 1) += (y.rightCols(w - 1) - y.leftCols(w - 1)).abs();
    }
  }
  LossValue<Scalar> out;
  out.sum = delta.sum();
  out.per_pixel = std::move(delta);
  out.valid_count = h * w;
  out.reduction = Reduction::Sum;
  return out;
}

/// Subgradient of wta_smoothness w.r.t. each hypothesis component.
template <class Scalar>
std::vector<FlowGrad<Scalar>> wta_smoothness_grad(const HypothesisSet<Scalar>& hyps) {
  const Eigen::Index h = hyps.height(), w = hyps.width();
  std::vector<FlowGrad<Scalar>> grads;
  grads.reserve(static_cast<size_t>(hyps.count()));
  for (Eigen::Index k = 0; k < hyps.count(); ++k) {
    FlowGrad<Scalar> g{GridX<Scalar>::Zero(h, w), GridX<Scalar>::Zero(h, w)};
    const GridX<Scalar>* comps[2] = {&hyps.member(k).flow.u(), &hyps.member(k).flow.v()};
    GridX<Scalar>* outs[2] = {&g.du, &g.dv};
    for (int c = 0; c < 2; ++c) {
      const GridX<Scalar>& y = *comps[c];
      GridX<Scalar>& d = *outs[c];
      if (h > 1) {
        const GridX<Scalar> s = (y.bottomRows(h - 1) - y.topRows(h - 1)).sign();
        d.bottomRows(h - 1) += s;
        d.topRows(h - 1) -= s;
      }
      if (w > 1) {
        const GridX<Scalar> s = (y.rightCols(w - 1) - y.leftCols(w - 1)).sign();
        d.rightCols(w - 1) += s;
        d.leftCols(w - 1) -= s;
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

template <class Scalar>
struct WtaLossResult {
  LossValue<Scalar> data;        // inner loss at the selected hypothesis
  LossValue<Scalar> smoothness;  // diversity penalty over all hypotheses
  Scalar smoothness_weight = Scalar(1);
  WtaSelection selection;

  // L_hyp: data term summed/averaged per the data reduction plus the
  // weighted global smoothness sum.
  Scalar total() const { return data.total() + smoothness_weight * smoothness.sum; }
};

/// Winner-Takes-All loss: the inner loss is charged only at the per-pixel
/// best hypothesis (selected by EPE regardless of the inner loss), plus the
/// weighted smoothness penalty over all hypotheses.
template <class Scalar>
WtaLossResult<Scalar> wta_loss(const HypothesisSet<Scalar>& hyps, const FlowField<Scalar>& gt,
                               const ValidMask& mask, InnerLoss inner,
                               Scalar smoothness_weight = Scalar(1),
                               Reduction reduction = Reduction::Sum) {
  if (inner == InnerLoss::LaplaceNll && !hyps.predictive())
    throw std::invalid_argument("wta_loss: LaplaceNll inner loss needs uncertainties");
  WtaLossResult<Scalar> out;
  out.selection = wta_best_idx(hyps, gt, mask);
  out.smoothness = wta_smoothness(hyps);
  out.smoothness_weight = smoothness_weight;

  const Eigen::Index h = gt.height(), w = gt.width();
  GridX<Scalar> sel_u(h, w), sel_v(h, w);
  GridX<Scalar> sel_bu(h, w), sel_bv(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const auto& m = hyps.member(out.selection.best_idx(y, x));
      sel_u(y, x) = m.flow.u()(y, x);
      sel_v(y, x) = m.flow.v()(y, x);
      if (hyps.predictive()) {
        sel_bu(y, x) = m.unc->b_u()(y, x);
        sel_bv(y, x) = m.unc->b_v()(y, x);
      }
    }
  const FlowField<Scalar> selected(std::move(sel_u), std::move(sel_v));
  if (inner == InnerLoss::Epe) {
    out.data = epe_loss(selected, gt, mask, reduction);
  } else {
    const UncertaintyField<Scalar> unc(std::move(sel_bu), std::move(sel_bv));
    out.data = laplace_nll(selected, unc, gt, mask, reduction);
  }
  return out;
}

}  // namespace flowuq
