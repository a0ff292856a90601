#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowuq/fields.hpp"
#include "flowuq/rng.hpp"

#include <cmath>
#include <random>

using namespace flowuq;

namespace {

FlowField<double> random_flow(std::mt19937_64& rng, Eigen::Index w, Eigen::Index h,
                              double amplitude = 5.0) {
  GridX<double> u(h, w), v(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      u(y, x) = uniform_range(rng, -amplitude, amplitude);
      v(y, x) = uniform_range(rng, -amplitude, amplitude);
    }
  return FlowField<double>(std::move(u), std::move(v));
}

}  // namespace

TEST_CASE("make_flow fills constant fields") {
  const auto f = make_flow<double>(2, 2, {0.0, 0.0});
  CHECK(f.width() == 2);
  CHECK(f.height() == 2);
  CHECK(f.u().abs().maxCoeff() == 0.0);
  CHECK(f.v().abs().maxCoeff() == 0.0);

  const auto g = make_flow<double>(1, 1, {3.0, 4.0});
  CHECK(g.u()(0, 0) == 3.0);
  CHECK(g.v()(0, 0) == 4.0);
}

TEST_CASE("make_flow rejects degenerate sizes") {
  CHECK_THROWS_AS(make_flow<double>(0, 5, {0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_flow<double>(5, 0, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("FlowField rejects non-finite entries and mismatched grids") {
  GridX<double> u = GridX<double>::Zero(2, 2);
  GridX<double> v = GridX<double>::Zero(2, 2);
  v(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(FlowField<double>(u, v), std::invalid_argument);
  CHECK_THROWS_AS(FlowField<double>(GridX<double>::Zero(2, 2), GridX<double>::Zero(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("endpoint_error basics") {
  const auto mask = ValidMask::all(1, 1);
  const auto e = endpoint_error(make_flow<double>(1, 1, {3.0, 4.0}),
                                make_flow<double>(1, 1, {0.0, 0.0}), mask);
  CHECK(e.epe()(0, 0) == doctest::Approx(5.0).epsilon(1e-12));

  const auto f = make_flow<double>(3, 2, {1.25, -0.5});
  const auto zero = endpoint_error(f, f, ValidMask::all(3, 2));
  CHECK(zero.epe().abs().maxCoeff() == 0.0);

  const auto sqrt2 = endpoint_error(make_flow<double>(1, 1, {1.0, 1.0}),
                                    make_flow<double>(1, 1, {2.0, 2.0}), mask);
  CHECK(sqrt2.epe()(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("endpoint_error rejects dimension mismatch") {
  CHECK_THROWS_AS(endpoint_error(make_flow<double>(2, 2, {0.0, 0.0}),
                                 make_flow<double>(3, 2, {0.0, 0.0}), ValidMask::all(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("endpoint_error is symmetric and absolutely homogeneous") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = random_flow(rng, 5, 4);
    const auto b = random_flow(rng, 5, 4);
    const auto mask = ValidMask::all(5, 4);
    const auto ab = endpoint_error(a, b, mask);
    const auto ba = endpoint_error(b, a, mask);
    CHECK((ab.epe() - ba.epe()).abs().maxCoeff() == 0.0);

    const double s = uniform_range(rng, -3.0, 3.0);
    const FlowField<double> sa(s * a.u(), s * a.v());
    const FlowField<double> sb(s * b.u(), s * b.v());
    const auto scaled = endpoint_error(sa, sb, mask);
    CHECK((scaled.epe() - std::abs(s) * ab.epe()).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mean_epe averages valid pixels only") {
  GridX<double> epe(1, 4);
  epe << 1.0, 2.0, 3.0, 4.0;
  CHECK(mean_epe(ErrorField<double>(epe), ValidMask::all(4, 1)) == doctest::Approx(2.5));

  GridX<double> one(1, 1);
  one << 5.0;
  CHECK(mean_epe(ErrorField<double>(one), ValidMask::all(1, 1)) == doctest::Approx(5.0));

  GridX<double> two(1, 2);
  two << 1.0, 100.0;
  BoolGrid valid(1, 2);
  valid << true, false;
  CHECK(mean_epe(ErrorField<double>(two), ValidMask(valid)) == doctest::Approx(1.0));
}

TEST_CASE("mean_epe rejects an empty mask") {
  GridX<double> epe = GridX<double>::Zero(2, 2);
  CHECK_THROWS_AS(mean_epe(ErrorField<double>(epe), ValidMask(BoolGrid::Constant(2, 2, false))),
                  std::invalid_argument);
}

TEST_CASE("mean_epe is permutation invariant") {
  std::mt19937_64 rng(11);
  GridX<double> epe(1, 16);
  for (Eigen::Index i = 0; i < 16; ++i) epe(0, i) = uniform_range(rng, 0.0, 9.0);
  const double base = mean_epe(ErrorField<double>(epe), ValidMask::all(16, 1));
  for (int rep = 0; rep < 10; ++rep) {
    GridX<double> shuffled = epe;
    for (Eigen::Index i = 15; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(uniform_below(rng, static_cast<uint64_t>(i + 1)));
      std::swap(shuffled(0, i), shuffled(0, j));
    }
    CHECK(mean_epe(ErrorField<double>(shuffled), ValidMask::all(16, 1)) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("UncertaintyField floors scales and derives variance") {
  GridX<double> b = GridX<double>::Constant(1, 2, 0.0);
  const UncertaintyField<double> unc(b, b);
  CHECK(unc.b_u()(0, 0) == kScaleFloor);
  CHECK(unc.var_u()(0, 0) == doctest::Approx(2.0 * kScaleFloor * kScaleFloor));

  GridX<double> neg = GridX<double>::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(UncertaintyField<double>(neg, neg), std::invalid_argument);

  GridX<double> three = GridX<double>::Constant(1, 1, 3.0);
  const UncertaintyField<double> u3(three, three);
  CHECK(u3.var_u()(0, 0) == doctest::Approx(18.0));
}

TEST_CASE("HypothesisSet enforces uniform uncertainty presence and dimensions") {
  std::vector<HypothesisSet<double>::Member> members;
  members.push_back({make_flow<double>(2, 2, {0.0, 0.0}), std::nullopt});
  members.push_back({make_flow<double>(2, 2, {1.0, 1.0}),
                     UncertaintyField<double>(GridX<double>::Constant(2, 2, 1.0),
                                              GridX<double>::Constant(2, 2, 1.0))});
  CHECK_THROWS_AS((HypothesisSet<double>(members)), std::invalid_argument);

  CHECK_THROWS_AS(HypothesisSet<double>::from_flows(
                      {make_flow<double>(2, 2, {0.0, 0.0}), make_flow<double>(3, 2, {0.0, 0.0})}),
                  std::invalid_argument);

  CHECK_THROWS_AS(HypothesisSet<double>(std::vector<HypothesisSet<double>::Member>{}),
                  std::invalid_argument);
}
