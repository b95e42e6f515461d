#include "doctest.h"

#include <random>

#include "riskwild/losses.hpp"

using namespace riskwild;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_vec(int d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(d);
  for (int j = 0; j < d; ++j) v(j) = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("squared loss values and gradients") {
  const LossSpec spec = squared_loss();
  CHECK(spec.beta == 2.0);
  CHECK(spec.mu == 2.0);
  CHECK(loss_value(spec, vec2(1, 0), vec2(0, 0)) == doctest::Approx(1.0).epsilon(1e-15));
  Vec z(2);
  z << 3, -2;
  CHECK(loss_value(spec, z, z) == 0.0);
  CHECK((loss_grad1(spec, vec2(1, 0), vec2(0, 0)) - vec2(2, 0)).norm() == 0.0);
  CHECK(loss_grad1(spec, z, z).norm() == 0.0);
}

TEST_CASE("quadform loss matches hand evaluation") {
  const Mat A = Mat::Identity(2, 2);
  const LossSpec spec = quadform_loss(A, Vec::Zero(2));
  // (z - y)' I (z - y) at z = (1,1), y = 0 sums two unit squares
  CHECK(loss_value(spec, vec2(1, 1), vec2(0, 0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(spec.beta == doctest::Approx(2.0));
  CHECK(spec.mu == doctest::Approx(2.0));
}

TEST_CASE("expfam gradient and inverse follow the closed forms") {
  const LossSpec spec = expfam_loss(log_partition("gaussian"), 1.0);
  // gradA(z) + mu z - y at z = (1,0), y = 0
  CHECK((loss_grad1(spec, vec2(1, 0), vec2(0, 0)) - vec2(2, 0)).norm() == 0.0);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    const Vec z = random_vec(2, rng);
    const Vec g = random_vec(2, rng);
    const Vec y = spec.inverse_in_y(z, g);
    CHECK((loss_grad1(spec, z, y) - g).norm() <= 1e-12);
  }
}

TEST_CASE("built-in gradients match their closed forms exactly") {
  std::mt19937_64 rng(17);
  Mat A(3, 3);
  A << 4, 1, 0, 1, 3, 1, 0, 1, 5;
  Vec b(3);
  b << 0.5, -1, 2;
  const LossSpec sq = squared_loss();
  const LossSpec ef = expfam_loss(log_partition("softplus-sum"), 0.7);
  const LossSpec qf = quadform_loss(A, b);
  for (int k = 0; k < 200; ++k) {
    const Vec z = random_vec(3, rng, 2.0);
    const Vec y = random_vec(3, rng, 2.0);
    CHECK((loss_grad1(sq, z, y) - 2.0 * (z - y)).norm() <= 1e-12);
    Vec sig(3);
    for (int j = 0; j < 3; ++j) sig(j) = 1.0 / (1.0 + std::exp(-z(j)));
    CHECK((loss_grad1(ef, z, y) - (sig + 0.7 * z - y)).norm() <= 1e-12);
    CHECK((loss_grad1(qf, z, y) - (2.0 * A * (z - y) + b)).norm() <= 1e-12);
  }
}

TEST_CASE("finite-difference gradient agreement") {
  std::mt19937_64 rng(23);
  const LossSpec sq = squared_loss();
  SUBCASE("squared loss, central differences of a quadratic") {
    for (int k = 0; k < 20; ++k) {
      const Vec z = random_vec(3, rng);
      const Vec y = random_vec(3, rng);
      CHECK(grad_fd_check(sq, z, y, 1e-5) <= 1e-7);
    }
  }
  SUBCASE("zero-gradient point") {
    const Vec z = random_vec(3, rng);
    CHECK(grad_fd_check(sq, z, z, 1e-5) <= 1e-9);
  }
  SUBCASE("random quadform") {
    Mat A(2, 2);
    A << 3, 0.5, 0.5, 2;
    const LossSpec qf = quadform_loss(A, vec2(0.3, -0.7));
    for (int k = 0; k < 20; ++k) {
      CHECK(grad_fd_check(qf, random_vec(2, rng), random_vec(2, rng), 1e-5) <= 1e-6);
    }
  }
  SUBCASE("step outside the allowed range is rejected") {
    CHECK_THROWS_AS(grad_fd_check(sq, vec2(0, 0), vec2(1, 1), 1e-2), std::invalid_argument);
  }
}

TEST_CASE("regularity checker passes every built-in loss") {
  const int trials = 1000;
  SUBCASE("squared") {
    const auto rep = check_assumption1(squared_loss(), gaussian_triple_sampler(3, 2.0, 1), trials);
    CHECK(rep.pass());
    CHECK(rep.smoothness_violation <= 1e-9);
    CHECK(rep.convexity_violation <= 1e-9);
    CHECK(rep.monotonicity_violation <= 1e-9);
  }
  SUBCASE("expfam with bounded gradA") {
    const LossSpec ef = expfam_loss(log_partition("softplus-sum"), 0.5);
    const auto rep = check_assumption1(ef, gaussian_triple_sampler(2, 2.0, 2), trials);
    CHECK(rep.pass());
    CHECK(rep.monotonicity_violation <= 1e-9);
  }
  SUBCASE("quadform") {
    Mat A(2, 2);
    A << 2, 0.3, 0.3, 1.5;
    const auto rep = check_assumption1(quadform_loss(A, vec2(1, -1)),
                                       gaussian_triple_sampler(2, 2.0, 3), trials);
    CHECK(rep.pass());
  }
}

TEST_CASE("checker flags understated smoothness") {
  LossSpec broken = squared_loss();
  broken.beta /= 10.0;  // claims 0.2-smoothness; true constant is 2
  const auto rep = check_assumption1(broken, gaussian_triple_sampler(3, 2.0, 4), 500);
  CHECK(rep.smoothness_violation > 0.0);
  CHECK_FALSE(rep.pass());
}

TEST_CASE("checker flags an indefinite quadform") {
  Mat A(2, 2);
  A << 1, 0, 0, -0.5;
  const LossSpec qf = quadform_loss(A, Vec::Zero(2));
  const auto rep = check_assumption1(qf, gaussian_triple_sampler(2, 2.0, 5), 500);
  CHECK(rep.convexity_violation > 0.0);
  CHECK_FALSE(rep.pass());
}

TEST_CASE("coercivity ladder is negative at large radii for built-ins") {
  const auto rep = check_assumption1(squared_loss(), gaussian_triple_sampler(2, 1.0, 6), 10);
  CHECK(rep.coercive());
  CHECK(rep.coercivity_increase <= 1e-9);
}

TEST_CASE("dimension mismatches are rejected") {
  const LossSpec sq = squared_loss();
  Vec a(2), b(3);
  a.setZero();
  b.setZero();
  CHECK_THROWS_AS(loss_value(sq, a, b), std::invalid_argument);
  CHECK_THROWS_AS(loss_grad1(sq, a, b), std::invalid_argument);
}

TEST_CASE("unknown log partition is a config error") {
  CHECK_THROWS_AS(log_partition("cauchy"), ConfigError);
}
