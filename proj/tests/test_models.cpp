#include "doctest.h"

#include <Eigen/Dense>

#include <random>

#include "riskwild/models.hpp"

using namespace riskwild;

namespace {

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

FixedDesignDataset random_dataset(int n, int p, int d, std::uint64_t seed, double noise = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto coef = [&] {
    Mat m(d, p);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < p; ++c) m(r, c) = normal(rng);
    }
    return m;
  }();
  std::vector<Vec> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    xs[i].resize(p);
    for (int j = 0; j < p; ++j) xs[i](j) = normal(rng);
    ys[i] = coef * xs[i];
    for (int j = 0; j < d; ++j) ys[i](j) += noise * normal(rng);
  }
  return FixedDesignDataset::create(std::move(xs), std::move(ys));
}

Predictor constant_predictor(int d, double value) {
  Predictor f;
  f.class_tag = "test";
  f.evaluate = [d, value](const Vec&) -> Vec { return Vec::Constant(d, value); };
  return f;
}

}  // namespace

TEST_CASE("dataset validation") {
  CHECK_THROWS(FixedDesignDataset::create({}, {}));
  std::vector<Vec> xs{vec1(0), vec1(1)};
  std::vector<Vec> ys{vec1(0)};
  CHECK_THROWS(FixedDesignDataset::create(xs, ys));
  std::vector<Vec> bad{vec1(0), vec1(std::numeric_limits<double>::quiet_NaN())};
  CHECK_THROWS(FixedDesignDataset::create(xs, bad));
}

TEST_CASE("empirical norm hand cases") {
  SUBCASE("identical predictors") {
    const auto ds = random_dataset(5, 2, 1, 1);
    const Predictor f = constant_predictor(1, 0.7);
    CHECK(empirical_norm(f, f, ds) == 0.0);
  }
  SUBCASE("n=2, d=1, differences (1, -1)") {
    const auto ds = FixedDesignDataset::create({vec1(0), vec1(1)}, {vec1(0), vec1(0)});
    const Predictor f = pointwise_predictor(ds, {vec1(1), vec1(-1)});
    const Predictor g = constant_predictor(1, 0.0);
    CHECK(empirical_norm(f, g, ds) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("n=4, d=2, squared norms 1, 4, 9, 2 average to 4") {
    std::vector<Vec> xs, vals;
    for (int i = 0; i < 4; ++i) xs.push_back(vec1(i));
    Vec v(2);
    v << 1, 0;
    vals.push_back(v);
    v << 2, 0;
    vals.push_back(v);
    v << 3, 0;
    vals.push_back(v);
    v << 1, 1;
    vals.push_back(v);
    const auto ds = FixedDesignDataset::create(xs, {Vec::Zero(2), Vec::Zero(2), Vec::Zero(2),
                                                    Vec::Zero(2)});
    const Predictor f = pointwise_predictor(ds, vals);
    const Predictor g = constant_predictor(2, 0.0);
    CHECK(empirical_norm(f, g, ds) == doctest::Approx(2.0).epsilon(1e-15));
  }
}

TEST_CASE("empirical norm is a pseudometric on sampled predictors") {
  const auto ds = random_dataset(10, 2, 2, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Vec> a(ds.n()), b(ds.n()), c(ds.n());
    for (int i = 0; i < ds.n(); ++i) {
      a[i] = Vec::NullaryExpr(2, [&](int) { return normal(rng); });
      b[i] = Vec::NullaryExpr(2, [&](int) { return normal(rng); });
      c[i] = Vec::NullaryExpr(2, [&](int) { return normal(rng); });
    }
    const Predictor fa = pointwise_predictor(ds, a);
    const Predictor fb = pointwise_predictor(ds, b);
    const Predictor fc = pointwise_predictor(ds, c);
    CHECK(empirical_norm(fa, fb, ds) == empirical_norm(fb, fa, ds));
    CHECK(empirical_norm(fa, fc, ds) <=
          empirical_norm(fa, fb, ds) + empirical_norm(fb, fc, ds) + 1e-12);
  }
}

TEST_CASE("empirical risk hand cases") {
  const LossSpec sq = squared_loss();
  SUBCASE("interpolation gives zero risk") {
    const auto ds = random_dataset(6, 2, 2, 5);
    const Predictor f = pointwise_predictor(ds, ds.y);
    CHECK(empirical_risk(sq, f, ds) == 0.0);
  }
  SUBCASE("single point") {
    const auto ds = FixedDesignDataset::create({vec1(0)}, {vec1(2)});
    CHECK(empirical_risk(sq, constant_predictor(1, 0.0), ds) == doctest::Approx(4.0));
  }
  SUBCASE("mean of losses 1, 0, 2") {
    const auto ds = FixedDesignDataset::create({vec1(0), vec1(1), vec1(2)},
                                               {vec1(1), vec1(0), vec1(std::sqrt(2.0))});
    // residuals 1, 0, sqrt(2) against the zero predictor
    CHECK(empirical_risk(sq, constant_predictor(1, 0.0), ds) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("ridge closed form") {
  SUBCASE("intercept-only fit is the mean") {
    const auto cls = FunctionClass::linear([](const Vec&) { return vec1(1.0); }, 1, 1);
    const auto ds = FixedDesignDataset::create({vec1(0), vec1(1)}, {vec1(0), vec1(2)});
    const Predictor f = ridge_closed_form_trainer(0.0, cls).fit(ds);
    CHECK((*f.params)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("huge penalty shrinks to zero") {
    const auto cls = FunctionClass::identity_features(2, 1);
    const auto ds = random_dataset(20, 2, 1, 6);
    const Predictor f = ridge_closed_form_trainer(1e9, cls).fit(ds);
    CHECK(f.params->norm() <= 1e-6);
  }
  SUBCASE("first-order optimality of a random instance") {
    const auto cls = FunctionClass::affine_features(2, 2);  // m = 3
    const auto ds = random_dataset(20, 2, 2, 7);
    const double lambda = 0.3;
    const Predictor f = ridge_closed_form_trainer(lambda, cls).fit(ds);
    // gradient of (1/n) sum |theta phi - y|^2 + lambda |theta|^2 at theta
    const Mat theta = *f.params;
    Mat grad = 2.0 * lambda * theta;
    for (int i = 0; i < ds.n(); ++i) {
      const Vec phi = cls.feature_map(ds.x[i]);
      grad += 2.0 / ds.n() * (theta * phi - ds.y[i]) * phi.transpose();
    }
    CHECK(grad.norm() <= 1e-8);
  }
  SUBCASE("singular Gram with lambda=0 fails descriptively") {
    // duplicate feature makes the Gram rank deficient
    const auto cls = FunctionClass::linear(
        [](const Vec& x) {
          Vec phi(2);
          phi << x(0), x(0);
          return phi;
        },
        2, 1);
    const auto ds = random_dataset(10, 1, 1, 8);
    CHECK_THROWS_AS(ridge_closed_form_trainer(0.0, cls).fit(ds), TrainerFailure);
  }
  SUBCASE("unconstrained ridge interpolates at lambda=0") {
    const auto ds = random_dataset(5, 2, 2, 9);
    const auto cls = FunctionClass::unconstrained(2);
    const Predictor f = ridge_closed_form_trainer(0.0, cls).fit(ds);
    for (int i = 0; i < ds.n(); ++i) CHECK((f(ds.x[i]) - ds.y[i]).norm() == 0.0);
  }
}

TEST_CASE("convex ERM agrees with closed forms") {
  const auto cls = FunctionClass::affine_features(2, 1);
  const auto ds = random_dataset(25, 2, 1, 10);
  SUBCASE("squared loss matches ridge(0)") {
    const Predictor via_gd = generic_convex_erm_trainer(squared_loss(), cls, 1e-10, 50000).fit(ds);
    const Predictor via_ne = ridge_closed_form_trainer(0.0, cls).fit(ds);
    CHECK((*via_gd.params - *via_ne.params).norm() <= 1e-6);
  }
  SUBCASE("gaussian expfam reduces to a linear system") {
    const double mu = 1.3;
    const LossSpec ef = expfam_loss(log_partition("gaussian"), mu);
    const Predictor via_gd = generic_convex_erm_trainer(ef, cls, 1e-10, 50000).fit(ds);
    // (1 + mu) theta G = (1/n) sum y_i phi_i'
    Mat gram = Mat::Zero(3, 3);
    Mat cross = Mat::Zero(1, 3);
    for (int i = 0; i < ds.n(); ++i) {
      const Vec phi = cls.feature_map(ds.x[i]);
      gram += phi * phi.transpose() / ds.n();
      cross += ds.y[i] * phi.transpose() / ds.n();
    }
    const Mat direct = cross * gram.inverse() / (1.0 + mu);
    CHECK((*via_gd.params - direct).norm() <= 1e-6);
  }
  SUBCASE("zero data variation lands on the stationary constant") {
    std::vector<Vec> xs, ys;
    for (int i = 0; i < 4; ++i) {
      xs.push_back(vec1(i));
      ys.push_back(vec1(3.5));
    }
    const auto data = FixedDesignDataset::create(xs, ys);
    const auto intercept = FunctionClass::linear([](const Vec&) { return vec1(1.0); }, 1, 1);
    const Trainer trainer = generic_convex_erm_trainer(squared_loss(), intercept, 1e-10, 10000);
    const Predictor f = trainer.fit(data);
    CHECK((*f.params)(0, 0) == doctest::Approx(3.5).epsilon(1e-9));
    CHECK(trainer.stationarity(f, data) <= 1e-10);
  }
  SUBCASE("iteration budget exhaustion reports the residual") {
    CHECK_THROWS_AS(generic_convex_erm_trainer(squared_loss(), cls, 1e-14, 1).fit(ds),
                    TrainerFailure);
  }
}

TEST_CASE("first-order identity holds for exact ERM over the class") {
  const auto cls = FunctionClass::affine_features(2, 2);
  const auto ds = random_dataset(30, 2, 2, 11);
  const LossSpec sq = squared_loss();
  const Trainer trainer = ridge_closed_form_trainer(0.0, cls);
  const Predictor f_hat = trainer.fit(ds);
  std::vector<Vec> g_tilde(ds.n());
  for (int i = 0; i < ds.n(); ++i) g_tilde[i] = loss_grad1(sq, f_hat(ds.x[i]), ds.y[i]);

  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Mat theta(2, 3);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) theta(r, c) = normal(rng);
    }
    const Predictor member = linear_predictor(cls, theta);
    double inner = 0.0;
    for (int i = 0; i < ds.n(); ++i) {
      inner += g_tilde[i].dot(member(ds.x[i]) - f_hat(ds.x[i]));
    }
    inner /= ds.n();
    const double scale = std::max(1.0, empirical_norm(member, f_hat, ds));
    CHECK(std::abs(inner) / scale <= trainer.tolerance);
  }
}

TEST_CASE("trainer determinism") {
  const auto ds = random_dataset(15, 2, 1, 13);
  SUBCASE("ridge") {
    const auto cls = FunctionClass::identity_features(2, 1);
    const Trainer tr = ridge_closed_form_trainer(0.1, cls);
    CHECK(*tr.fit(ds).params == *tr.fit(ds).params);
  }
  SUBCASE("mlp same seed is bitwise identical") {
    const Trainer tr = opaque_mlp_trainer(squared_loss(), {2, 4, 1}, 99, 50, 0.05);
    const Predictor a = tr.fit(ds);
    const Predictor b = tr.fit(ds);
    CHECK(*a.params == *b.params);
  }
}

TEST_CASE("mlp trainer contract") {
  const auto ds = random_dataset(20, 2, 1, 14, 0.1);
  const LossSpec sq = squared_loss();
  SUBCASE("epochs=0 returns the seeded initialization") {
    const Predictor a = opaque_mlp_trainer(sq, {2, 3, 1}, 5, 0, 0.05).fit(ds);
    const Predictor b = opaque_mlp_trainer(sq, {2, 3, 1}, 5, 0, 0.05).fit(ds);
    CHECK(*a.params == *b.params);
    const Predictor c = opaque_mlp_trainer(sq, {2, 3, 1}, 5, 10, 0.05).fit(ds);
    CHECK(*a.params != *c.params);
  }
  SUBCASE("training loss decreases under a small step") {
    // same seed means each longer run extends the same trajectory
    double prev = std::numeric_limits<double>::infinity();
    for (int epochs : {0, 10, 20, 40, 80}) {
      const Predictor f = opaque_mlp_trainer(sq, {2, 4, 1}, 5, epochs, 0.02).fit(ds);
      const double risk = empirical_risk(sq, f, ds);
      CHECK(risk <= prev + 1e-12);
      prev = risk;
    }
  }
  SUBCASE("width mismatch is rejected") {
    CHECK_THROWS(opaque_mlp_trainer(sq, {3, 4, 1}, 5, 10, 0.05).fit(ds));
  }
}

TEST_CASE("stationarity residual closed forms") {
  const auto ds = random_dataset(12, 2, 2, 15);
  const LossSpec sq = squared_loss();
  SUBCASE("unconstrained class: residual is the gradient empirical norm") {
    const Predictor f = constant_predictor(2, 0.0);
    double acc = 0.0;
    for (int i = 0; i < ds.n(); ++i) acc += loss_grad1(sq, f(ds.x[i]), ds.y[i]).squaredNorm();
    const double expected = std::sqrt(acc / ds.n());
    CHECK(stationarity_residual(sq, f, FunctionClass::unconstrained(2), ds) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("exact ERM has tiny residual over its class") {
    const auto cls = FunctionClass::identity_features(2, 2);
    const Predictor f = ridge_closed_form_trainer(0.0, cls).fit(ds);
    CHECK(stationarity_residual(sq, f, cls, ds) <= 1e-10);
  }
}

TEST_CASE("pointwise predictor rejects off-design points") {
  const auto ds = random_dataset(4, 2, 1, 16);
  const Predictor f = pointwise_predictor(ds, ds.y);
  CHECK_THROWS_AS(f(Vec::Constant(2, 123.0)), std::invalid_argument);
}
