#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskwild/common.hpp"
#include "riskwild/losses.hpp"

namespace riskwild {

// n covariate/outcome pairs with outcomes in R^d. Immutable by convention
// after create() validates dimensions and finiteness.
struct FixedDesignDataset {
  std::vector<Vec> x;
  std::vector<Vec> y;

  int n() const { return static_cast<int>(x.size()); }
  int p() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
  int d() const { return y.empty() ? 0 : static_cast<int>(y.front().size()); }

  static FixedDesignDataset create(std::vector<Vec> xs, std::vector<Vec> ys);
};

struct Predictor {
  std::function<Vec(const Vec&)> evaluate;
  std::optional<Mat> params;  // d x m coefficient matrix for linear classes
  std::string class_tag;

  Vec operator()(const Vec& x) const { return evaluate(x); }
};

enum class ClassKind { unconstrained, linear_feature };

// The two concrete function classes the library works with: all maps on the
// design points ("unconstrained") and x -> Theta * phi(x) for a fixed feature
// map ("linear_feature").
struct FunctionClass {
  ClassKind kind = ClassKind::unconstrained;
  int output_dim = 0;
  int feature_dim = 0;                        // linear_feature only
  std::function<Vec(const Vec&)> feature_map;  // linear_feature only

  static FunctionClass unconstrained(int d);
  static FunctionClass linear(std::function<Vec(const Vec&)> phi, int m, int d);
  static FunctionClass identity_features(int p, int d);  // phi(x) = x
  static FunctionClass affine_features(int p, int d);    // phi(x) = [1, x]
};

struct TrainerFailure : std::runtime_error {
  TrainerFailure(const std::string& msg, double residual_, int iterations_)
      : std::runtime_error(msg), residual(residual_), iterations(iterations_) {}
  double residual = 0.0;
  int iterations = 0;
  std::optional<Mat> last_iterate;
};

// Black-box training procedure: dataset in, predictor out. fit is the only
// member the refitting engine calls; stationarity is an optional diagnostic
// for trainers that know their own first-order conditions.
struct Trainer {
  std::string name;
  double tolerance = 1e-8;
  int max_iter = 0;
  std::function<Predictor(const FixedDesignDataset&)> fit;
  std::function<double(const Predictor&, const FixedDesignDataset&)> stationarity;
};

// sqrt((1/n) sum_i |f(x_i) - g(x_i)|^2)
double empirical_norm(const Predictor& f, const Predictor& g, const FixedDesignDataset& ds);

// (1/n) sum_i l(f(x_i), y_i)
double empirical_risk(const LossSpec& spec, const Predictor& f, const FixedDesignDataset& ds);

Predictor linear_predictor(const FunctionClass& cls, Mat theta);

// Predictor defined by its values on the design points; evaluation looks the
// argument up against the stored design and rejects off-design inputs.
Predictor pointwise_predictor(const FixedDesignDataset& ds, std::vector<Vec> values);

// Exact penalized least squares via normal equations. Over the unconstrained
// class this is the per-point shrinkage y_i / (1 + lambda); lambda = 0 gives
// the exact empirical risk minimizer for the squared loss.
Trainer ridge_closed_form_trainer(double lambda, const FunctionClass& cls);

// Full-gradient descent with backtracking line search until the stationarity
// residual (dual norm of the risk gradient over the unit empirical-norm ball)
// drops below tol. Over the unconstrained class, solves grad1(z, y_i) = 0
// per point instead.
Trainer generic_convex_erm_trainer(const LossSpec& spec, const FunctionClass& cls, double tol,
                                   int max_iter);

// Small feedforward network fit by full-batch gradient descent on the given
// loss. Deterministic given the seed; no optimality guarantee.
Trainer opaque_mlp_trainer(const LossSpec& spec, const std::vector<int>& widths,
                           std::uint64_t seed, int epochs, double step);

// sup over class members with |f - f_hat|_n <= 1 of
// |(1/n) sum <grad1(f_hat(x_i), y_i), f(x_i) - f_hat(x_i)>|, in closed form.
double stationarity_residual(const LossSpec& spec, const Predictor& f,
                             const FunctionClass& cls, const FixedDesignDataset& ds);

}  // namespace riskwild
