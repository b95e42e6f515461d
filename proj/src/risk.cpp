#include "riskwild/risk.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace riskwild {

namespace {

double list_norm_n(const std::vector<Vec>& v) {
  double acc = 0.0;
  for (const Vec& vi : v) acc += vi.squaredNorm();
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

double sup_process(const Predictor& center, const std::vector<Vec>& v, double r,
                   const FixedDesignDataset& ds, const FunctionClass& cls,
                   const SupSettings& settings) {
  require(r >= 0.0, "sup radius must be nonnegative");
  require(static_cast<int>(v.size()) == ds.n(), "one direction vector per sample required");

  if (cls.kind == ClassKind::unconstrained) {
    return r * list_norm_n(v);
  }

  const int n = ds.n();
  const int d = cls.output_dim;
  const int m = cls.feature_dim;

  Mat Phi(n, m);
  Mat C = Mat::Zero(d, m);   // (1/n) sum v_i phi_i'
  Mat B = Mat::Zero(d, m);   // (1/n) sum center_i phi_i'
  double vc = 0.0;           // (1/n) sum <v_i, center_i>
  double c2 = 0.0;           // (1/n) sum |center_i|^2
  for (int i = 0; i < n; ++i) {
    const Vec phi = cls.feature_map(ds.x[i]);
    Phi.row(i) = phi.transpose();
    const Vec ci = center(ds.x[i]);
    C += v[i] * phi.transpose();
    B += ci * phi.transpose();
    vc += v[i].dot(ci);
    c2 += ci.squaredNorm();
  }
  C /= n;
  B /= n;
  vc /= n;
  c2 /= n;

  const Mat gram = (Phi.transpose() * Phi) / n;
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  const Vec lam = eig.eigenvalues();
  const double cutoff = 1e-14 * std::max(1.0, lam.maxCoeff());

  // Project the center onto the class in the empirical norm.
  Vec inv_lam = Vec::Zero(m);
  Vec inv_sqrt_lam = Vec::Zero(m);
  for (int j = 0; j < m; ++j) {
    if (lam(j) > cutoff) {
      inv_lam(j) = 1.0 / lam(j);
      inv_sqrt_lam(j) = 1.0 / std::sqrt(lam(j));
    }
  }
  const Mat Q = eig.eigenvectors();
  const Mat theta0 = B * Q * inv_lam.asDiagonal() * Q.transpose();
  const double dist2 =
      std::max(0.0, (theta0 * gram * theta0.transpose()).trace() - 2.0 * (B * theta0.transpose()).trace() + c2);
  require(r * r >= dist2 - 1e-9 * (1.0 + r * r),
          "sup ball does not intersect the class around this center");
  const double s = std::sqrt(std::max(0.0, r * r - dist2));
  const double offset = (C * theta0.transpose()).trace() - vc;

  // Whitened ascent: the constraint becomes a Frobenius ball of radius s and
  // the objective gradient is constant.
  const Mat Vw = C * Q * inv_sqrt_lam.asDiagonal();
  const double vnorm = Vw.norm();
  if (vnorm == 0.0 || s == 0.0) return offset;

  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double step = 64.0 * s / vnorm;
  double best = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, settings.restarts); ++restart) {
    Mat delta = Mat::Zero(d, m);
    if (restart > 0) {
      for (int rr = 0; rr < d; ++rr) {
        for (int ccol = 0; ccol < m; ++ccol) delta(rr, ccol) = normal(rng);
      }
      const double dn = delta.norm();
      if (dn > 0.0) delta *= s / dn;
    }
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < settings.iterations; ++it) {
      delta += step * Vw;
      const double dn = delta.norm();
      if (dn > s) delta *= s / dn;
      const double value = (Vw.array() * delta.array()).sum();
      if (std::abs(value - prev) <= 1e-16 * (1.0 + std::abs(value))) break;
      prev = value;
    }
    best = std::max(best, (Vw.array() * delta.array()).sum());
  }
  return offset + best;
}

namespace {

std::vector<Vec> signed_gradients(const WildRefitOutput& out, double sign) {
  std::vector<Vec> v(out.g_tilde.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = sign * out.eps[i] * out.g_tilde[i];
  return v;
}

}  // namespace

double process_W(const WildRefitOutput& out, double r, const FunctionClass& cls,
                 const SupSettings& settings) {
  return sup_process(out.f_hat, signed_gradients(out, 1.0), r, out.d0, cls, settings);
}

double process_T(const WildRefitOutput& out, double r, const FunctionClass& cls,
                 const SupSettings& settings) {
  return sup_process(out.f_hat, signed_gradients(out, -1.0), r, out.d0, cls, settings);
}

namespace {

double wild_optimism(const Predictor& f_hat, const Predictor& f_wild,
                     const FixedDesignDataset& perturbed, double rho, double radius,
                     const LossSpec& spec, OptimismVariant variant) {
  const int n = perturbed.n();
  double loss_gap = 0.0;  // (1/n) sum [l(f_hat, y") - l(f_wild, y")]
  for (int i = 0; i < n; ++i) {
    loss_gap += loss_value(spec, f_hat(perturbed.x[i]), perturbed.y[i]) -
                loss_value(spec, f_wild(perturbed.x[i]), perturbed.y[i]);
  }
  loss_gap /= n;
  double quad = spec.beta / (4.0 * rho) * radius * radius;
  if (variant == OptimismVariant::literal) quad /= n;
  return quad + loss_gap / (2.0 * rho);
}

}  // namespace

double wild_optimism_diamond(const WildRefitOutput& out, const LossSpec& spec,
                             OptimismVariant variant) {
  return wild_optimism(out.f_hat, out.f_diamond, out.d_diamond, out.rho1, out.r_diamond, spec,
                       variant);
}

double wild_optimism_sharp(const WildRefitOutput& out, const LossSpec& spec,
                           OptimismVariant variant) {
  return wild_optimism(out.f_hat, out.f_sharp, out.d_sharp, out.rho2, out.r_sharp, spec,
                       variant);
}

std::pair<double, double> pilot_errors(const WildRefitOutput& out, const Predictor& f_star,
                                       const LossSpec& spec, double r, const FunctionClass& cls,
                                       const SupSettings& settings) {
  const int n = out.d0.n();
  std::vector<Vec> v(n);
  for (int i = 0; i < n; ++i) {
    const Vec w = loss_grad1(spec, f_star(out.d0.x[i]), out.d0.y[i]);
    v[i] = out.eps[i] * (w - out.g_tilde[i]);
  }
  const double b_diamond = sup_process(out.f_hat, v, 2.0 * r, out.d0, cls, settings);
  for (Vec& vi : v) vi = -vi;
  const double b_sharp = sup_process(out.f_hat, v, 2.0 * r, out.d0, cls, settings);
  return {b_diamond, b_sharp};
}

double deviation_term(double r, double bias_norm, double beta, double alpha, double sigma,
                      double t, int n, int d) {
  const double coeff = (5.0 * std::sqrt(static_cast<double>(d)) +
                        3.0 * std::sqrt(std::log(static_cast<double>(n))) + 4.0);
  return (coeff * r + bias_norm) * (2.0 * std::sqrt(2.0) * beta * sigma * t) /
         (alpha * std::sqrt(static_cast<double>(n)));
}

BoundReport excess_risk_bound(const BoundInputs& in) {
  require(in.t > 0.0, "confidence parameter t must be positive");
  require(in.beta > 0.0 && in.alpha > 0.0, "loss constants must be positive");
  require(in.n >= 1 && in.d >= 1, "n and d must be >= 1");
  require(in.r >= 0.0, "radius must be nonnegative");
  require(in.sigma >= 0.0, "sigma must be nonnegative");

  BoundReport rep;
  rep.observable_mode = in.observable_mode;
  rep.variant = in.variant;
  rep.well_specified = in.well_specified;
  if (in.observable_mode) {
    require(in.training_error.has_value(), "observable mode needs the training error surrogate");
    rep.empirical_term = *in.training_error;
    rep.pilot_diamond = 0.0;
    rep.pilot_sharp = 0.0;
    rep.bias_norm = 0.0;
    rep.pilots_omitted = true;
    rep.bias_omitted = true;
  } else {
    require(in.empirical_excess.has_value() && in.pilot_diamond.has_value() &&
                in.pilot_sharp.has_value() && in.bias_norm.has_value(),
            "oracle-mode bound needs empirical excess, pilot errors, and the bias norm");
    rep.empirical_term = *in.empirical_excess;
    rep.pilot_diamond = *in.pilot_diamond;
    rep.pilot_sharp = *in.pilot_sharp;
    rep.bias_norm = *in.bias_norm;
  }
  rep.opt_diamond = in.opt_diamond;
  rep.opt_sharp = in.opt_sharp;
  rep.r = in.r;
  rep.beta = in.beta;
  rep.alpha = in.alpha;
  rep.sigma = in.sigma;
  rep.t = in.t;
  rep.n = in.n;
  rep.d = in.d;
  rep.W_at_r_diamond = in.W_at_r_diamond;
  rep.T_at_r_sharp = in.T_at_r_sharp;
  rep.deviation = deviation_term(rep.r, rep.bias_norm, rep.beta, rep.alpha, rep.sigma, rep.t,
                                 rep.n, rep.d);
  rep.confidence = 1.0 - 6.0 * std::exp(-in.t * in.t);
  rep.total_bound = assemble_total(rep);
  return rep;
}

double assemble_total(const BoundReport& rep) {
  const double ratio = rep.beta / rep.alpha;
  return ratio * rep.empirical_term +
         ratio * (rep.opt_diamond + rep.opt_sharp + rep.pilot_diamond + rep.pilot_sharp) +
         deviation_term(rep.r, rep.bias_norm, rep.beta, rep.alpha, rep.sigma, rep.t, rep.n,
                        rep.d);
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["opt_diamond"] = opt_diamond;
  j["opt_sharp"] = opt_sharp;
  j["empirical_term"] = empirical_term;
  j["pilot_diamond"] = pilots_omitted ? nlohmann::json() : nlohmann::json(pilot_diamond);
  j["pilot_sharp"] = pilots_omitted ? nlohmann::json() : nlohmann::json(pilot_sharp);
  j["bias_norm"] = bias_omitted ? nlohmann::json() : nlohmann::json(bias_norm);
  j["deviation"] = deviation;
  j["total_bound"] = total_bound;
  j["confidence"] = confidence;
  j["r"] = r;
  j["beta"] = beta;
  j["alpha"] = alpha;
  j["sigma"] = sigma;
  j["t"] = t;
  j["n"] = n;
  j["d"] = d;
  if (W_at_r_diamond) j["W_at_r_diamond"] = *W_at_r_diamond;
  if (T_at_r_sharp) j["T_at_r_sharp"] = *T_at_r_sharp;
  j["flags"] = {{"observable_mode", observable_mode},
                {"pilots_omitted", pilots_omitted},
                {"bias_omitted", bias_omitted},
                {"well_specified", well_specified},
                {"alpha_equals_mu", true},
                {"optimism_variant",
                 variant == OptimismVariant::proof_consistent ? "proof-consistent" : "literal"}};
  return j;
}

FixedPointResult fixed_point_radius(const std::function<double(double)>& Wf,
                                    const std::function<double(double)>& Tf, double alpha,
                                    double r_max, double tol) {
  require(alpha > 0.0, "alpha must be positive");
  require(r_max > 0.0 && tol > 0.0, "r_max and tol must be positive");
  auto h = [&](double r) {
    return std::sqrt(std::max(0.0, (2.0 / alpha) * (Wf(2.0 * r) + Tf(2.0 * r)))) - r;
  };

  if (h(r_max) > 0.0) return {r_max, true};

  // Walk down until we land inside the satisfying region, then bisect on the
  // crossing. The region is an interval (0, r*] because W and T are concave.
  double lo = 0.0;
  double hi = r_max;
  double probe = r_max;
  for (int k = 0; k < 80; ++k) {
    probe *= 0.5;
    if (probe < tol * 1e-3) break;
    if (h(probe) > 0.0) {
      lo = probe;
      hi = 2.0 * probe;
      break;
    }
    hi = probe;
  }
  if (lo == 0.0) return {0.0, false};

  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, false};
}

double radius_bound_direct(double W2r, double T2r, double B_d, double B_s, double alpha,
                           double sigma, double t, int n, int d) {
  require(W2r >= 0.0 && T2r >= 0.0 && B_d >= 0.0 && B_s >= 0.0, "process terms must be >= 0");
  require(alpha > 0.0 && sigma >= 0.0 && t > 0.0 && n >= 1 && d >= 1, "invalid bound inputs");
  const double tail = (10.0 * std::sqrt(static_cast<double>(d)) +
                       6.0 * std::sqrt(std::log(static_cast<double>(n))) + 4.0) /
                          alpha +
                      1.0;
  return std::sqrt((2.0 / alpha) * (W2r + T2r)) + std::sqrt((2.0 / alpha) * (B_d + B_s)) +
         tail * 2.0 * std::sqrt(2.0) * sigma * t / std::sqrt(static_cast<double>(n));
}

ScaleTunedRadiusBound radius_bound_scale_tuned(double r_d, double r_s, double W2rd, double T2rs,
                                               double B_d, double B_s, double alpha,
                                               double sigma, double t, int n, int d) {
  require(r_d > 0.0 && r_s > 0.0, "refit radii must be positive");
  require(alpha > 0.0 && sigma >= 0.0 && t > 0.0 && n >= 1 && d >= 1, "invalid bound inputs");
  const double slope = 4.0 * W2rd / (alpha * r_d) + 4.0 * T2rs / (alpha * r_s);
  const double tail = (10.0 * std::sqrt(static_cast<double>(d)) +
                       6.0 * std::sqrt(std::log(static_cast<double>(n))) + 4.0) /
                          alpha +
                      1.0;
  ScaleTunedRadiusBound out;
  out.full = slope + std::sqrt(8.0 * (B_d + B_s) / alpha) +
             tail * 4.0 * std::sqrt(2.0) * sigma * t / std::sqrt(static_cast<double>(n));
  out.simplified = std::max({r_d, r_s, slope});
  return out;
}

RhoTuneResult tune_rho_for_radius(const Trainer& trainer, const FixedDesignDataset& ds,
                                  const LossSpec& spec, const std::vector<int>& eps,
                                  double target_radius, WildSide side,
                                  std::pair<double, double> bracket, double tol, int max_evals,
                                  const SolveOptions& opts) {
  return tune_rho_for_radius(prepare_pilot(trainer, ds, spec), trainer, ds, spec, eps,
                             target_radius, side, bracket, tol, max_evals, opts);
}

RhoTuneResult tune_rho_for_radius(const PilotFit& pilot, const Trainer& trainer,
                                  const FixedDesignDataset& ds, const LossSpec& spec,
                                  const std::vector<int>& eps, double target_radius,
                                  WildSide side, std::pair<double, double> bracket, double tol,
                                  int max_evals, const SolveOptions& opts) {
  require(bracket.first > 0.0 && bracket.second > bracket.first, "bracket must be positive");
  require(target_radius >= 0.0, "target radius must be nonnegative");
  require(tol > 0.0 && max_evals >= 4, "tolerance and eval budget must be sensible");

  int evals = 0;
  RhoTuneResult result;
  auto gap = [&](double rho) {
    const SideRefit refit = refit_side(pilot, trainer, ds, spec, rho, side, eps, opts);
    ++evals;
    result.scan.emplace_back(rho, refit.radius);
    return refit.radius - target_radius;
  };
  auto finish = [&](double rho, double g) {
    result.rho = rho;
    result.achieved = g + target_radius;
    result.converged = std::abs(g) <= tol;
    return result;
  };

  // Geometric scan for a sign change.
  const int grid = std::min(24, std::max(4, max_evals / 3));
  std::vector<double> rhos(grid), gaps(grid);
  const double ratio = std::pow(bracket.second / bracket.first, 1.0 / (grid - 1));
  int best = 0;
  for (int k = 0; k < grid; ++k) {
    rhos[k] = bracket.first * std::pow(ratio, k);
    gaps[k] = gap(rhos[k]);
    if (std::abs(gaps[k]) < std::abs(gaps[best])) best = k;
    if (std::abs(gaps[k]) <= tol) return finish(rhos[k], gaps[k]);
  }

  for (int k = 0; k + 1 < grid; ++k) {
    if (gaps[k] == 0.0 || gaps[k] * gaps[k + 1] < 0.0) {
      double lo = rhos[k], hi = rhos[k + 1];
      double glo = gaps[k];
      while (evals < max_evals) {
        const double mid = 0.5 * (lo + hi);
        const double gm = gap(mid);
        if (std::abs(gm) <= tol) return finish(mid, gm);
        if ((gm < 0.0) == (glo < 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      return finish(0.5 * (lo + hi), gap(0.5 * (lo + hi)));
    }
  }

  // No sign change: the gap curve may dip toward the target without crossing
  // (it is V-shaped in rho for several losses). Shrink around the best point.
  double lo = rhos[std::max(0, best - 1)];
  double hi = rhos[std::min(grid - 1, best + 1)];
  double brho = rhos[best], bgap = gaps[best];
  while (evals + 2 <= max_evals && (hi - lo) > 1e-14 * hi) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    const double g1 = gap(m1);
    const double g2 = gap(m2);
    if (std::abs(g1) < std::abs(bgap)) {
      bgap = g1;
      brho = m1;
    }
    if (std::abs(g2) < std::abs(bgap)) {
      bgap = g2;
      brho = m2;
    }
    if (std::abs(bgap) <= tol) return finish(brho, bgap);
    if (std::abs(g1) <= std::abs(g2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return finish(brho, bgap);
}

}  // namespace riskwild
