#include "doctest.h"

#include <cmath>
#include <memory>
#include <random>

#include "riskwild/engine.hpp"

using namespace riskwild;

namespace {

FixedDesignDataset linear_noise_dataset(int n, int p, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> xs(n), ys(n);
  Mat coef = Mat::Ones(d, p);
  for (int i = 0; i < n; ++i) {
    xs[i] = Vec::NullaryExpr(p, [&](int) { return normal(rng); });
    ys[i] = coef * xs[i] + 0.5 * Vec::NullaryExpr(d, [&](int) { return normal(rng); });
  }
  return FixedDesignDataset::create(std::move(xs), std::move(ys));
}

}  // namespace

TEST_CASE("rademacher draws") {
  SUBCASE("deterministic given the seed") {
    CHECK(rademacher(64, 42) == rademacher(64, 42));
    CHECK(rademacher(64, 42) != rademacher(64, 43));
  }
  SUBCASE("single draw is a sign") {
    const auto eps = rademacher(1, 9);
    CHECK((eps[0] == 1 || eps[0] == -1));
  }
  SUBCASE("large-sample mean is near zero") {
    const int n = 100000;
    const auto eps = rademacher(n, 7);
    double mean = 0.0;
    for (int e : eps) mean += e;
    mean /= n;
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("doubly wild refit is deterministic") {
  const auto ds = linear_noise_dataset(30, 2, 1, 21);
  const auto cls = FunctionClass::identity_features(2, 1);
  const Trainer trainer = ridge_closed_form_trainer(0.0, cls);
  const LossSpec sq = squared_loss();
  const auto a = doubly_wild_refit(trainer, ds, sq, 0.7, 0.9, 5);
  const auto b = doubly_wild_refit(trainer, ds, sq, 0.7, 0.9, 5);
  CHECK(a.eps == b.eps);
  CHECK(a.r_diamond == b.r_diamond);
  CHECK(a.r_sharp == b.r_sharp);
  CHECK(*a.f_diamond.params == *b.f_diamond.params);
  CHECK(*a.f_sharp.params == *b.f_sharp.params);
}

TEST_CASE("engine touches the trainer only through fit, three times") {
  const auto ds = linear_noise_dataset(10, 2, 1, 22);
  const auto cls = FunctionClass::identity_features(2, 1);
  const Trainer inner = ridge_closed_form_trainer(0.0, cls);
  auto calls = std::make_shared<int>(0);
  Trainer counting;
  counting.name = "counting";
  counting.tolerance = inner.tolerance;
  counting.fit = [inner, calls](const FixedDesignDataset& data) {
    ++*calls;
    return inner.fit(data);
  };
  doubly_wild_refit(counting, ds, squared_loss(), 0.5, 0.5, 3);
  CHECK(*calls == 3);
}

TEST_CASE("gradient bookkeeping is bitwise reproducible") {
  const auto ds = linear_noise_dataset(25, 2, 2, 23);
  const auto cls = FunctionClass::identity_features(2, 2);
  const LossSpec sq = squared_loss();
  const auto out = doubly_wild_refit(ridge_closed_form_trainer(0.0, cls), ds, sq, 0.6, 0.8, 11);
  for (int i = 0; i < ds.n(); ++i) {
    const Vec recomputed = loss_grad1(sq, out.f_hat(ds.x[i]), ds.y[i]);
    CHECK(recomputed == out.g_tilde[i]);
  }
  CHECK(std::abs(out.r_diamond - empirical_norm(out.f_diamond, out.f_hat, ds)) <= 1e-12);
  CHECK(std::abs(out.r_sharp - empirical_norm(out.f_sharp, out.f_hat, ds)) <= 1e-12);
}

TEST_CASE("rho = 1/2 with forced positive signs refits on the fitted values") {
  const auto ds = linear_noise_dataset(20, 2, 1, 24);
  const auto cls = FunctionClass::identity_features(2, 1);
  const Trainer trainer = ridge_closed_form_trainer(0.0, cls);
  const std::vector<int> ones(ds.n(), 1);
  const auto out =
      doubly_wild_refit_with_eps(trainer, ds, squared_loss(), 0.5, 0.5, ones);
  // the diamond outcomes equal the pilot's fitted values, so refitting on
  // them reproduces the pilot up to solver tolerance
  for (int i = 0; i < ds.n(); ++i) {
    CHECK((out.d_diamond.y[i] - out.f_hat(ds.x[i])).norm() <= 1e-12);
  }
  CHECK(out.r_diamond <= trainer.tolerance);
}

TEST_CASE("interpolating refits recover the perturbation radius identity") {
  // pilot is an arbitrary map, refits interpolate: the diamond refit lands on
  // the wild outcomes, so its radius is |(1 - 2 rho eps) g / 2|_n
  const auto ds = linear_noise_dataset(15, 2, 1, 25);
  const LossSpec sq = squared_loss();
  PilotFit pilot;
  pilot.f_hat.class_tag = "test";
  pilot.f_hat.evaluate = [](const Vec& x) -> Vec { return 0.25 * x.head(1); };
  pilot.g_tilde.resize(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    pilot.g_tilde[i] = loss_grad1(sq, pilot.f_hat(ds.x[i]), ds.y[i]);
  }
  const Trainer interp = ridge_closed_form_trainer(0.0, FunctionClass::unconstrained(1));
  const auto eps = rademacher(ds.n(), 4);
  const double rho = 1.4;
  const auto refit = refit_side(pilot, interp, ds, sq, rho, WildSide::diamond, eps);
  double expected = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    expected += ((1.0 - 2.0 * rho * eps[i]) * pilot.g_tilde[i] / 2.0).squaredNorm();
  }
  expected = std::sqrt(expected / ds.n());
  CHECK(refit.radius == doctest::Approx(expected).epsilon(1e-12));
}
