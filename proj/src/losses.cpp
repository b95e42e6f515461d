#include "riskwild/losses.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <random>

namespace riskwild {

namespace {

void check_dims(const Vec& z, const Vec& y) {
  require(z.size() >= 1, "loss arguments must have dimension >= 1");
  require(z.size() == y.size(), "loss arguments must have matching dimension");
}

}  // namespace

double loss_value(const LossSpec& spec, const Vec& z, const Vec& y) {
  check_dims(z, y);
  const double v = spec.value(z, y);
  if (!std::isfinite(v)) {
    throw std::runtime_error("loss '" + spec.name + "' produced a non-finite value");
  }
  return v;
}

Vec loss_grad1(const LossSpec& spec, const Vec& z, const Vec& y) {
  check_dims(z, y);
  return spec.grad1(z, y);
}

double grad_fd_check(const LossSpec& spec, const Vec& z, const Vec& y, double h) {
  require(h >= 1e-8 && h <= 1e-3, "finite-difference step must lie in [1e-8, 1e-3]");
  const Vec g = loss_grad1(spec, z, y);
  double worst = 0.0;
  Vec zp = z, zm = z;
  for (int j = 0; j < z.size(); ++j) {
    zp(j) = z(j) + h;
    zm(j) = z(j) - h;
    const double fd = (spec.value(zp, y) - spec.value(zm, y)) / (2.0 * h);
    worst = std::max(worst, std::abs(g(j) - fd) / (1.0 + std::abs(g(j))));
    zp(j) = z(j);
    zm(j) = z(j);
  }
  return worst;
}

LossSpec squared_loss() {
  LossSpec spec;
  spec.name = "squared";
  spec.beta = 2.0;
  spec.mu = 2.0;
  spec.strictly_monotone_in_y = true;
  spec.value = [](const Vec& u, const Vec& y) { return (u - y).squaredNorm(); };
  spec.grad1 = [](const Vec& u, const Vec& y) -> Vec { return 2.0 * (u - y); };
  spec.inverse_in_y = [](const Vec& z, const Vec& g) -> Vec { return z - 0.5 * g; };
  return spec;
}

LogPartition log_partition(const std::string& name) {
  LogPartition lp;
  lp.name = name;
  if (name == "gaussian") {
    lp.A = [](const Vec& z) { return 0.5 * z.squaredNorm(); };
    lp.gradA = [](const Vec& z) -> Vec { return z; };
    lp.hess_min = 1.0;
    lp.hess_max = 1.0;
  } else if (name == "softplus-sum") {
    lp.A = [](const Vec& z) {
      double s = 0.0;
      for (int j = 0; j < z.size(); ++j) {
        // log(1 + e^z) evaluated stably on both tails
        s += z(j) > 0 ? z(j) + std::log1p(std::exp(-z(j))) : std::log1p(std::exp(z(j)));
      }
      return s;
    };
    lp.gradA = [](const Vec& z) -> Vec {
      Vec g(z.size());
      for (int j = 0; j < z.size(); ++j) g(j) = 1.0 / (1.0 + std::exp(-z(j)));
      return g;
    };
    lp.hess_min = 0.0;
    lp.hess_max = 0.25;
  } else {
    throw ConfigError("unknown log-partition function '" + name + "'");
  }
  return lp;
}

LossSpec expfam_loss(const LogPartition& lp, double mu_reg) {
  require(mu_reg > 0.0, "expfam ridge weight must be positive");
  LossSpec spec;
  spec.name = "expfam-" + lp.name;
  spec.beta = mu_reg + lp.hess_max;
  spec.mu = mu_reg + lp.hess_min;
  spec.strictly_monotone_in_y = true;  // grad1 is y-affine with slope -I
  const auto A = lp.A;
  const auto gradA = lp.gradA;
  spec.value = [A, mu_reg](const Vec& z, const Vec& y) {
    return A(z) - z.dot(y) + 0.5 * mu_reg * z.squaredNorm();
  };
  spec.grad1 = [gradA, mu_reg](const Vec& z, const Vec& y) -> Vec {
    return gradA(z) + mu_reg * z - y;
  };
  spec.inverse_in_y = [gradA, mu_reg](const Vec& z, const Vec& g) -> Vec {
    return gradA(z) + mu_reg * z - g;
  };
  return spec;
}

LossSpec quadform_loss(const Mat& A, const Vec& b) {
  require(A.rows() == A.cols() && A.rows() >= 1, "quadform matrix must be square");
  require(b.size() == A.rows(), "quadform vector must match matrix dimension");
  require((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + A.cwiseAbs().maxCoeff()),
          "quadform matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(A);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();

  LossSpec spec;
  spec.name = "quadform";
  spec.beta = std::max(2.0 * lmax, 1e-12);
  // Claimed constants must be positive; for an indefinite A the checker is the
  // component that reports the failure, so clamp instead of refusing to build.
  spec.mu = std::max(2.0 * lmin, 1e-12);
  spec.strictly_monotone_in_y = lmin > 0.0;
  const Mat Acopy = A;
  const Vec bcopy = b;
  spec.value = [Acopy, bcopy](const Vec& x, const Vec& y) {
    const Vec diff = x - y;
    return diff.dot(Acopy * diff) + bcopy.dot(diff);
  };
  spec.grad1 = [Acopy, bcopy](const Vec& x, const Vec& y) -> Vec {
    return 2.0 * (Acopy * (x - y)) + bcopy;
  };
  if (lmin > 1e-12) {
    Eigen::LDLT<Mat> ldlt(A);
    spec.inverse_in_y = [Acopy, bcopy, ldlt](const Vec& x, const Vec& g) -> Vec {
      return x - 0.5 * ldlt.solve(g - bcopy);
    };
  }
  return spec;
}

Assumption1Report check_assumption1(const LossSpec& spec, const TripleSampler& sampler,
                                    int trials) {
  require(trials >= 1, "check_assumption1 needs at least one trial");
  Assumption1Report rep;
  rep.trials = trials;

  Vec a, b, c;
  for (int trial = 0; trial < trials; ++trial) {
    sampler(a, b, c);
    require(a.allFinite() && b.allFinite() && c.allFinite(), "sampler produced non-finite point");

    // Two-point curvature bounds with (z1, z2, y) = (a, b, c).
    const double l1 = spec.value(a, c);
    const double l2 = spec.value(b, c);
    const Vec g1 = spec.grad1(a, c);
    const double gap = l2 - l1 - g1.dot(b - a);
    const double sq = 0.5 * (b - a).squaredNorm();
    rep.smoothness_violation = std::max(rep.smoothness_violation, gap - spec.beta * sq);
    rep.convexity_violation = std::max(rep.convexity_violation, spec.mu * sq - gap);

    // Monotonicity of -grad1 in y with (z, y1, y2) = (a, b, c).
    const Vec dg = spec.grad1(a, b) - spec.grad1(a, c);
    rep.monotonicity_violation = std::max(rep.monotonicity_violation, dg.dot(b - c));
  }

  // Coercivity proxy: along sampled unit directions u, the radial slope
  // <grad1(z, R u), u> must be nonincreasing in R and negative by R = 1e6.
  std::mt19937_64 rng(20240917ull);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec z, u, dummy;
  sampler(z, u, dummy);
  const int dim = static_cast<int>(z.size());
  rep.coercivity_tail_slope = -std::numeric_limits<double>::infinity();
  for (int dir = 0; dir < 8; ++dir) {
    for (int j = 0; j < dim; ++j) u(j) = normal(rng);
    if (u.norm() == 0.0) u.setOnes();
    u.normalize();
    double prev = std::numeric_limits<double>::infinity();
    double slope = 0.0;
    for (double radius = 1.0; radius <= 1e6; radius *= 4.0) {
      slope = spec.grad1(z, radius * u).dot(u);
      if (prev != std::numeric_limits<double>::infinity()) {
        rep.coercivity_increase = std::max(rep.coercivity_increase, slope - prev);
      }
      prev = slope;
    }
    rep.coercivity_tail_slope = std::max(rep.coercivity_tail_slope, slope);
  }
  return rep;
}

TripleSampler gaussian_triple_sampler(int dim, double scale, std::uint64_t seed) {
  require(dim >= 1, "sampler dimension must be >= 1");
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng, dim, scale](Vec& a, Vec& b, Vec& c) {
    std::normal_distribution<double> normal(0.0, scale);
    a.resize(dim);
    b.resize(dim);
    c.resize(dim);
    for (int j = 0; j < dim; ++j) a(j) = normal(*rng);
    for (int j = 0; j < dim; ++j) b(j) = normal(*rng);
    for (int j = 0; j < dim; ++j) c(j) = normal(*rng);
  };
}

}  // namespace riskwild
