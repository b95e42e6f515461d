#include "riskwild/models.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <random>

#include "riskwild/rootfind.hpp"

namespace riskwild {

FixedDesignDataset FixedDesignDataset::create(std::vector<Vec> xs, std::vector<Vec> ys) {
  require(!xs.empty(), "dataset needs at least one sample");
  require(xs.size() == ys.size(), "covariate and outcome counts differ");
  const auto p = xs.front().size();
  const auto d = ys.front().size();
  require(p >= 1 && d >= 1, "covariates and outcomes need dimension >= 1");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i].size() == p, "covariate dimension varies across samples");
    require(ys[i].size() == d, "outcome dimension varies across samples");
    require(xs[i].allFinite() && ys[i].allFinite(), "dataset contains non-finite values");
  }
  FixedDesignDataset ds;
  ds.x = std::move(xs);
  ds.y = std::move(ys);
  return ds;
}

FunctionClass FunctionClass::unconstrained(int d) {
  require(d >= 1, "output dimension must be >= 1");
  FunctionClass cls;
  cls.kind = ClassKind::unconstrained;
  cls.output_dim = d;
  return cls;
}

FunctionClass FunctionClass::linear(std::function<Vec(const Vec&)> phi, int m, int d) {
  require(m >= 1 && d >= 1, "feature and output dimensions must be >= 1");
  FunctionClass cls;
  cls.kind = ClassKind::linear_feature;
  cls.feature_map = std::move(phi);
  cls.feature_dim = m;
  cls.output_dim = d;
  return cls;
}

FunctionClass FunctionClass::identity_features(int p, int d) {
  return linear([](const Vec& x) -> Vec { return x; }, p, d);
}

FunctionClass FunctionClass::affine_features(int p, int d) {
  return linear(
      [](const Vec& x) -> Vec {
        Vec phi(x.size() + 1);
        phi(0) = 1.0;
        phi.tail(x.size()) = x;
        return phi;
      },
      p + 1, d);
}

double empirical_norm(const Predictor& f, const Predictor& g, const FixedDesignDataset& ds) {
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    const Vec fi = f(ds.x[i]);
    const Vec gi = g(ds.x[i]);
    require(fi.size() == gi.size(), "predictor output dimensions differ");
    acc += (fi - gi).squaredNorm();
  }
  return std::sqrt(acc / ds.n());
}

double empirical_risk(const LossSpec& spec, const Predictor& f, const FixedDesignDataset& ds) {
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) acc += loss_value(spec, f(ds.x[i]), ds.y[i]);
  return acc / ds.n();
}

Predictor linear_predictor(const FunctionClass& cls, Mat theta) {
  require(cls.kind == ClassKind::linear_feature, "linear predictor needs a linear class");
  require(theta.rows() == cls.output_dim && theta.cols() == cls.feature_dim,
          "coefficient matrix has wrong shape");
  Predictor f;
  f.class_tag = "linear-feature";
  f.params = theta;
  auto phi = cls.feature_map;
  f.evaluate = [phi, theta](const Vec& x) -> Vec { return theta * phi(x); };
  return f;
}

Predictor pointwise_predictor(const FixedDesignDataset& ds, std::vector<Vec> values) {
  require(static_cast<int>(values.size()) == ds.n(), "one value per design point required");
  auto design = std::make_shared<std::vector<Vec>>(ds.x);
  auto vals = std::make_shared<std::vector<Vec>>(std::move(values));
  Predictor f;
  f.class_tag = "unconstrained";
  Mat theta(ds.d(), ds.n());
  for (int i = 0; i < ds.n(); ++i) theta.col(i) = (*vals)[i];
  f.params = theta;
  f.evaluate = [design, vals](const Vec& x) -> Vec {
    for (std::size_t i = 0; i < design->size(); ++i) {
      if ((*design)[i].size() == x.size() && ((*design)[i] - x).cwiseAbs().maxCoeff() == 0.0) {
        return (*vals)[i];
      }
    }
    // tolerate tiny round-off in callers that reconstruct design points
    for (std::size_t i = 0; i < design->size(); ++i) {
      if ((*design)[i].size() == x.size() &&
          ((*design)[i] - x).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + x.cwiseAbs().maxCoeff())) {
        return (*vals)[i];
      }
    }
    throw std::invalid_argument("pointwise predictor evaluated off the design");
  };
  return f;
}

namespace {

struct FeatureData {
  Mat Phi;   // n x m
  Mat Gram;  // (Phi' Phi) / n
};

FeatureData build_features(const FunctionClass& cls, const FixedDesignDataset& ds) {
  FeatureData fd;
  fd.Phi.resize(ds.n(), cls.feature_dim);
  for (int i = 0; i < ds.n(); ++i) {
    const Vec phi = cls.feature_map(ds.x[i]);
    require(phi.size() == cls.feature_dim, "feature map output has wrong dimension");
    fd.Phi.row(i) = phi.transpose();
  }
  fd.Gram = (fd.Phi.transpose() * fd.Phi) / ds.n();
  return fd;
}

// Square root of the Gram pseudo-inverse, restricted to the numerically
// nonzero spectrum. Used to express stationarity in empirical-norm geometry.
Mat gram_whitener(const Mat& gram) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  const Vec lam = eig.eigenvalues();
  const double cutoff = 1e-14 * std::max(1.0, lam.maxCoeff());
  Vec inv_sqrt = Vec::Zero(lam.size());
  for (int j = 0; j < lam.size(); ++j) {
    if (lam(j) > cutoff) inv_sqrt(j) = 1.0 / std::sqrt(lam(j));
  }
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

Mat risk_gradient(const LossSpec& spec, const Mat& theta, const FeatureData& fd,
                  const FixedDesignDataset& ds) {
  Mat grad = Mat::Zero(theta.rows(), theta.cols());
  for (int i = 0; i < ds.n(); ++i) {
    const Vec phi = fd.Phi.row(i).transpose();
    grad += spec.grad1(theta * phi, ds.y[i]) * phi.transpose();
  }
  return grad / ds.n();
}

double linear_objective(const LossSpec& spec, const Mat& theta, const FeatureData& fd,
                        const FixedDesignDataset& ds) {
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    acc += spec.value(theta * fd.Phi.row(i).transpose(), ds.y[i]);
  }
  return acc / ds.n();
}

}  // namespace

double stationarity_residual(const LossSpec& spec, const Predictor& f,
                             const FunctionClass& cls, const FixedDesignDataset& ds) {
  std::vector<Vec> grads(ds.n());
  for (int i = 0; i < ds.n(); ++i) grads[i] = loss_grad1(spec, f(ds.x[i]), ds.y[i]);
  if (cls.kind == ClassKind::unconstrained) {
    double acc = 0.0;
    for (const Vec& g : grads) acc += g.squaredNorm();
    return std::sqrt(acc / ds.n());
  }
  const FeatureData fd = build_features(cls, ds);
  Mat C = Mat::Zero(ds.d(), cls.feature_dim);
  for (int i = 0; i < ds.n(); ++i) C += grads[i] * fd.Phi.row(i);
  C /= ds.n();
  return (C * gram_whitener(fd.Gram)).norm();
}

Trainer ridge_closed_form_trainer(double lambda, const FunctionClass& cls) {
  require(lambda >= 0.0, "ridge weight must be nonnegative");
  Trainer trainer;
  trainer.name = "ridge";
  trainer.tolerance = 1e-8;
  trainer.max_iter = 1;

  if (cls.kind == ClassKind::unconstrained) {
    trainer.fit = [lambda](const FixedDesignDataset& ds) -> Predictor {
      std::vector<Vec> values(ds.n());
      for (int i = 0; i < ds.n(); ++i) values[i] = ds.y[i] / (1.0 + lambda);
      return pointwise_predictor(ds, std::move(values));
    };
  } else {
    FunctionClass cc = cls;
    trainer.fit = [lambda, cc](const FixedDesignDataset& ds) -> Predictor {
      const FeatureData fd = build_features(cc, ds);
      Mat reg = fd.Gram + lambda * Mat::Identity(cc.feature_dim, cc.feature_dim);
      if (lambda == 0.0) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(fd.Gram);
        const double lmax = eig.eigenvalues().maxCoeff();
        const double lmin = eig.eigenvalues().minCoeff();
        if (lmin <= 1e-12 * std::max(1.0, lmax)) {
          throw TrainerFailure(
              "ridge trainer with lambda=0 hit a singular Gram matrix; add regularization "
              "or reduce the feature dimension",
              lmin, 0);
        }
      }
      Mat Y(ds.n(), ds.d());
      for (int i = 0; i < ds.n(); ++i) Y.row(i) = ds.y[i].transpose();
      const Mat rhs = (fd.Phi.transpose() * Y) / ds.n();  // m x d
      const Mat theta_t = Eigen::LDLT<Mat>(reg).solve(rhs);
      return linear_predictor(cc, theta_t.transpose());
    };
  }

  const LossSpec sq = squared_loss();
  FunctionClass cc = cls;
  trainer.stationarity = [sq, cc](const Predictor& f, const FixedDesignDataset& ds) {
    return stationarity_residual(sq, f, cc, ds);
  };
  return trainer;
}

Trainer generic_convex_erm_trainer(const LossSpec& spec, const FunctionClass& cls, double tol,
                                   int max_iter) {
  require(tol > 0.0, "solver tolerance must be positive");
  require(max_iter >= 1, "iteration budget must be >= 1");
  Trainer trainer;
  trainer.name = "convex-erm";
  trainer.tolerance = tol;
  trainer.max_iter = max_iter;

  if (cls.kind == ClassKind::unconstrained) {
    LossSpec sc = spec;
    trainer.fit = [sc, tol, max_iter](const FixedDesignDataset& ds) -> Predictor {
      std::vector<Vec> values(ds.n());
      for (int i = 0; i < ds.n(); ++i) {
        const Vec yi = ds.y[i];
        auto field = [&sc, &yi](const Vec& z) -> Vec { return sc.grad1(z, yi); };
        const RootReport rr = damped_newton(field, yi, tol, max_iter);
        if (!rr.converged) {
          throw TrainerFailure("per-point minimization failed at sample " + std::to_string(i),
                               rr.residual, rr.iterations);
        }
        values[i] = rr.root;
      }
      return pointwise_predictor(ds, std::move(values));
    };
  } else {
    LossSpec sc = spec;
    FunctionClass cc = cls;
    trainer.fit = [sc, cc, tol, max_iter](const FixedDesignDataset& ds) -> Predictor {
      const FeatureData fd = build_features(cc, ds);
      const Mat whitener = gram_whitener(fd.Gram);
      Mat theta = Mat::Zero(cc.output_dim, cc.feature_dim);
      double obj = linear_objective(sc, theta, fd, ds);
      double warm_step = 1.0;
      double residual = std::numeric_limits<double>::infinity();
      for (int it = 0; it < max_iter; ++it) {
        const Mat grad = risk_gradient(sc, theta, fd, ds);
        residual = (grad * whitener).norm();
        if (residual <= tol) {
          Predictor f = linear_predictor(cc, theta);
          return f;
        }
        const double gnorm2 = grad.squaredNorm();
        bool moved = false;
        for (double t = std::min(warm_step * 2.0, 1e12); t > 1e-18; t *= 0.5) {
          const Mat cand = theta - t * grad;
          const double cobj = linear_objective(sc, cand, fd, ds);
          if (std::isfinite(cobj) && cobj <= obj - 1e-4 * t * gnorm2) {
            theta = cand;
            obj = cobj;
            warm_step = t;
            moved = true;
            break;
          }
        }
        if (!moved) {
          // Near the optimum the Armijo decrease falls below the rounding of
          // the objective value; accept strict residual decreases instead.
          for (double t = warm_step; t > 1e-18 && !moved; t *= 0.5) {
            const Mat cand = theta - t * grad;
            const double cres = (risk_gradient(sc, cand, fd, ds) * whitener).norm();
            if (std::isfinite(cres) && cres < 0.999 * residual) {
              theta = cand;
              obj = linear_objective(sc, theta, fd, ds);
              moved = true;
            }
          }
        }
        if (!moved) break;
      }
      const Mat grad = risk_gradient(sc, theta, fd, ds);
      residual = (grad * whitener).norm();
      if (residual <= tol) return linear_predictor(cc, theta);
      TrainerFailure failure("convex ERM did not reach the requested stationarity", residual,
                             max_iter);
      failure.last_iterate = theta;
      throw failure;
    };
  }

  LossSpec sc = spec;
  FunctionClass cc = cls;
  trainer.stationarity = [sc, cc](const Predictor& f, const FixedDesignDataset& ds) {
    return stationarity_residual(sc, f, cc, ds);
  };
  return trainer;
}

namespace {

struct MlpParams {
  std::vector<Mat> W;
  std::vector<Vec> b;

  Vec flatten() const {
    int total = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
      total += static_cast<int>(W[l].size() + b[l].size());
    }
    Vec out(total);
    int at = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
      out.segment(at, W[l].size()) = Eigen::Map<const Vec>(W[l].data(), W[l].size());
      at += static_cast<int>(W[l].size());
      out.segment(at, b[l].size()) = b[l];
      at += static_cast<int>(b[l].size());
    }
    return out;
  }
};

Vec mlp_forward(const MlpParams& params, const Vec& x, std::vector<Vec>* activations) {
  Vec h = x;
  if (activations) activations->push_back(h);
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    h = params.W[l] * h + params.b[l];
    if (l + 1 < params.W.size()) h = h.array().tanh().matrix();
    if (activations) activations->push_back(h);
  }
  return h;
}

}  // namespace

Trainer opaque_mlp_trainer(const LossSpec& spec, const std::vector<int>& widths,
                           std::uint64_t seed, int epochs, double step) {
  require(widths.size() >= 2, "widths must define at least input and output layers");
  for (int w : widths) require(w >= 1, "layer widths must be positive");
  require(epochs >= 0 && step > 0.0, "epochs must be >= 0 and step positive");

  Trainer trainer;
  trainer.name = "mlp";
  trainer.tolerance = std::numeric_limits<double>::infinity();  // no optimality contract
  trainer.max_iter = epochs;

  LossSpec sc = spec;
  std::vector<int> ws = widths;
  trainer.fit = [sc, ws, seed, epochs, step](const FixedDesignDataset& ds) -> Predictor {
    require(ds.p() == ws.front() && ds.d() == ws.back(),
            "mlp widths do not match dataset dimensions");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MlpParams params;
    for (std::size_t l = 0; l + 1 < ws.size(); ++l) {
      Mat W(ws[l + 1], ws[l]);
      const double scale = 1.0 / std::sqrt(static_cast<double>(ws[l]));
      for (int r = 0; r < W.rows(); ++r) {
        for (int c = 0; c < W.cols(); ++c) W(r, c) = scale * normal(rng);
      }
      params.W.push_back(W);
      params.b.push_back(Vec::Zero(ws[l + 1]));
    }

    const int layers = static_cast<int>(params.W.size());
    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::vector<Mat> gW(layers);
      std::vector<Vec> gb(layers);
      for (int l = 0; l < layers; ++l) {
        gW[l] = Mat::Zero(params.W[l].rows(), params.W[l].cols());
        gb[l] = Vec::Zero(params.b[l].size());
      }
      for (int i = 0; i < ds.n(); ++i) {
        std::vector<Vec> acts;
        const Vec out = mlp_forward(params, ds.x[i], &acts);
        Vec delta = sc.grad1(out, ds.y[i]) / ds.n();
        if (!delta.allFinite()) {
          throw TrainerFailure("mlp training hit a non-finite loss gradient", 0.0, epoch);
        }
        for (int l = layers - 1; l >= 0; --l) {
          gW[l] += delta * acts[l].transpose();
          gb[l] += delta;
          if (l > 0) {
            Vec back = params.W[l].transpose() * delta;
            const Vec& h = acts[l];
            delta = (back.array() * (1.0 - h.array().square())).matrix();
          }
        }
      }
      for (int l = 0; l < layers; ++l) {
        params.W[l] -= step * gW[l];
        params.b[l] -= step * gb[l];
      }
    }

    Predictor f;
    f.class_tag = "mlp";
    f.params = Mat(params.flatten().transpose());
    f.evaluate = [params](const Vec& x) -> Vec { return mlp_forward(params, x, nullptr); };
    return f;
  };
  return trainer;
}

}  // namespace riskwild
