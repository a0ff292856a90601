#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace flowuq {

// Dense per-pixel grid, row-major with origin at the top-left pixel so that
// .data() walks the image in scanline order.
template <class Scalar>
using GridX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Floor applied to Laplace scales at construction; log(b) diverges at 0.
inline constexpr double kScaleFloor = 1e-6;

namespace detail {

template <class Scalar>
inline void check_grid(const GridX<Scalar>& g, const char* what) {
  if (g.rows() < 1 || g.cols() < 1)
    throw std::invalid_argument(std::string(what) + ": grid dimensions must be >= 1");
  if (!g.isFinite().all())
    throw std::invalid_argument(std::string(what) + ": grid contains non-finite entries");
}

template <class A, class B>
inline void check_same_size(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace detail

/// Per-pixel 2-vector (u, v) displacement grid. Immutable after construction;
/// all entries are finite.
template <class Scalar>
class FlowField {
 public:
  FlowField(GridX<Scalar> u, GridX<Scalar> v) : u_(std::move(u)), v_(std::move(v)) {
    detail::check_grid(u_, "FlowField.u");
    detail::check_grid(v_, "FlowField.v");
    detail::check_same_size(u_, v_, "FlowField");
  }

  Eigen::Index width() const { return u_.cols(); }
  Eigen::Index height() const { return u_.rows(); }
  Eigen::Index size() const { return u_.size(); }

  const GridX<Scalar>& u() const { return u_; }
  const GridX<Scalar>& v() const { return v_; }

  template <class T>
  FlowField<T> cast() const {
    return FlowField<T>(u_.template cast<T>(), v_.template cast<T>());
  }

 private:
  GridX<Scalar> u_, v_;
};

/// Constant-filled flow field of the given size.
template <class Scalar>
FlowField<Scalar> make_flow(Eigen::Index width, Eigen::Index height,
                            std::pair<Scalar, Scalar> fill) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("make_flow: dimensions must be >= 1");
  return FlowField<Scalar>(GridX<Scalar>::Constant(height, width, fill.first),
                           GridX<Scalar>::Constant(height, width, fill.second));
}

/// Per-pixel validity mask. Invalid pixels are excluded from every statistic;
/// flow values never carry sentinel magnitudes.
class ValidMask {
 public:
  explicit ValidMask(BoolGrid valid) : valid_(std::move(valid)) {
    if (valid_.rows() < 1 || valid_.cols() < 1)
      throw std::invalid_argument("ValidMask: grid dimensions must be >= 1");
  }

  static ValidMask all(Eigen::Index width, Eigen::Index height) {
    if (width < 1 || height < 1)
      throw std::invalid_argument("ValidMask: dimensions must be >= 1");
    return ValidMask(BoolGrid::Constant(height, width, true));
  }

  Eigen::Index width() const { return valid_.cols(); }
  Eigen::Index height() const { return valid_.rows(); }
  Eigen::Index count() const { return valid_.count(); }

  const BoolGrid& grid() const { return valid_; }
  bool at(Eigen::Index y, Eigen::Index x) const { return valid_(y, x); }

 private:
  BoolGrid valid_;
};

/// Per-pixel Laplace scale parameters (b_u, b_v). Scales are floored to
/// kScaleFloor at construction; the variance view 2*b^2 is derived on demand.
template <class Scalar>
class UncertaintyField {
 public:
  UncertaintyField(GridX<Scalar> b_u, GridX<Scalar> b_v)
      : b_u_(std::move(b_u)), b_v_(std::move(b_v)) {
    detail::check_grid(b_u_, "UncertaintyField.b_u");
    detail::check_grid(b_v_, "UncertaintyField.b_v");
    detail::check_same_size(b_u_, b_v_, "UncertaintyField");
    if ((b_u_ < Scalar(0)).any() || (b_v_ < Scalar(0)).any())
      throw std::invalid_argument("UncertaintyField: negative scale");
    b_u_ = b_u_.max(Scalar(kScaleFloor));
    b_v_ = b_v_.max(Scalar(kScaleFloor));
  }

  Eigen::Index width() const { return b_u_.cols(); }
  Eigen::Index height() const { return b_u_.rows(); }

  const GridX<Scalar>& b_u() const { return b_u_; }
  const GridX<Scalar>& b_v() const { return b_v_; }

  // sigma^2 = 2 b^2 for a Laplace distribution.
  GridX<Scalar> var_u() const { return Scalar(2) * b_u_.square(); }
  GridX<Scalar> var_v() const { return Scalar(2) * b_v_.square(); }

  template <class T>
  UncertaintyField<T> cast() const {
    return UncertaintyField<T>(b_u_.template cast<T>(), b_v_.template cast<T>());
  }

 private:
  GridX<Scalar> b_u_, b_v_;
};

/// Per-pixel endpoint error, >= 0 and finite. Masked-out pixels hold 0 and
/// are excluded from every aggregate by the accompanying mask.
template <class Scalar>
class ErrorField {
 public:
  explicit ErrorField(GridX<Scalar> epe) : epe_(std::move(epe)) {
    detail::check_grid(epe_, "ErrorField");
    if ((epe_ < Scalar(0)).any())
      throw std::invalid_argument("ErrorField: negative endpoint error");
  }

  Eigen::Index width() const { return epe_.cols(); }
  Eigen::Index height() const { return epe_.rows(); }
  const GridX<Scalar>& epe() const { return epe_; }

 private:
  GridX<Scalar> epe_;
};

/// M flow fields from one multi-headed predictor or ensemble. Either every
/// member carries an UncertaintyField (predictive set) or none does
/// (empirical set).
template <class Scalar>
class HypothesisSet {
 public:
  struct Member {
    FlowField<Scalar> flow;
    std::optional<UncertaintyField<Scalar>> unc;
  };

  explicit HypothesisSet(std::vector<Member> members) : members_(std::move(members)) {
    if (members_.empty())
      throw std::invalid_argument("HypothesisSet: needs at least one member");
    const auto& first = members_.front().flow;
    const bool predictive = members_.front().unc.has_value();
    for (const auto& m : members_) {
      detail::check_same_size(m.flow.u(), first.u(), "HypothesisSet");
      if (m.unc.has_value() != predictive)
        throw std::invalid_argument(
            "HypothesisSet: members must uniformly carry or omit uncertainties");
      if (m.unc)
        detail::check_same_size(m.unc->b_u(), first.u(), "HypothesisSet");
    }
  }

  static HypothesisSet from_flows(std::vector<FlowField<Scalar>> flows) {
    std::vector<Member> ms;
    ms.reserve(flows.size());
    for (auto& f : flows) ms.push_back(Member{std::move(f), std::nullopt});
    return HypothesisSet(std::move(ms));
  }

  Eigen::Index count() const { return static_cast<Eigen::Index>(members_.size()); }
  Eigen::Index width() const { return members_.front().flow.width(); }
  Eigen::Index height() const { return members_.front().flow.height(); }
  bool predictive() const { return members_.front().unc.has_value(); }

  const Member& member(Eigen::Index i) const { return members_.at(static_cast<size_t>(i)); }
  const std::vector<Member>& members() const { return members_; }

 private:
  std::vector<Member> members_;
};

/// Per-pixel endpoint error sqrt((u-u_gt)^2 + (v-v_gt)^2). Invalid pixels
/// hold 0 and are excluded from aggregation via the mask.
template <class Scalar>
ErrorField<Scalar> endpoint_error(const FlowField<Scalar>& pred, const FlowField<Scalar>& gt,
                                  const ValidMask& mask) {
  detail::check_same_size(pred.u(), gt.u(), "endpoint_error");
  detail::check_same_size(pred.u(), mask.grid(), "endpoint_error");
  GridX<Scalar> epe =
      ((pred.u() - gt.u()).square() + (pred.v() - gt.v()).square()).sqrt();
  epe = mask.grid().select(epe, GridX<Scalar>::Zero(epe.rows(), epe.cols()));
  return ErrorField<Scalar>(std::move(epe));
}

/// Arithmetic mean of the endpoint error over valid pixels (AEPE).
template <class Scalar>
Scalar mean_epe(const ErrorField<Scalar>& errors, const ValidMask& mask) {
  detail::check_same_size(errors.epe(), mask.grid(), "mean_epe");
  const Eigen::Index n = mask.count();
  if (n == 0) throw std::invalid_argument("mean_epe: mask has no valid pixels");
  const Scalar sum = mask.grid().select(errors.epe(), GridX<Scalar>::Zero(errors.height(), errors.width())).sum();
  return sum / static_cast<Scalar>(n);
}

}  // namespace flowuq
