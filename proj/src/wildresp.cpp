#include "riskwild/wildresp.hpp"

#include <cmath>

#include "riskwild/rootfind.hpp"

namespace riskwild {

std::pair<std::vector<Vec>, std::vector<Vec>> wild_target_gradients(
    const std::vector<Vec>& g_tilde, const std::vector<int>& eps, double rho1, double rho2) {
  require(g_tilde.size() == eps.size(), "gradient and sign lists have different lengths");
  require(rho1 > 0.0 && rho2 > 0.0, "noise scales must be positive");
  std::vector<Vec> diamond(g_tilde.size());
  std::vector<Vec> sharp(g_tilde.size());
  for (std::size_t i = 0; i < g_tilde.size(); ++i) {
    require(eps[i] == 1 || eps[i] == -1, "signs must be +1 or -1");
    diamond[i] = (1.0 - 2.0 * rho1 * eps[i]) * g_tilde[i];
    sharp[i] = (1.0 + 2.0 * rho2 * eps[i]) * g_tilde[i];
  }
  return {std::move(diamond), std::move(sharp)};
}

PpaReport ppa_solve(const MonotoneOperator& op, const Vec& z0, const PpaOptions& opts) {
  PpaReport rep;
  rep.z = z0;
  rep.residual = op(rep.z).norm();
  rep.residual_trace.push_back(rep.residual);

  for (int k = 0; k < opts.max_outer && rep.residual > opts.tol; ++k) {
    const double ck = opts.c(k);
    const double dk = opts.delta(k);
    require(ck > 0.0, "proximal step sizes must be positive");
    const Vec zk = rep.z;
    auto Sk = [&op, &zk, ck](const Vec& z) -> Vec { return op(z) + (z - zk) / ck; };

    // The regularized operator is strongly monotone, so Newton is well posed.
    // Solve tightly; the acceptance rule below is then satisfied with room.
    const double inner_tol = std::max(1e-14, 0.01 * opts.tol);
    const RootReport inner = damped_newton(Sk, zk, inner_tol, opts.inner_max_iter);

    const double moved = (inner.root - zk).norm();
    const double allowed = (dk / ck) * moved;
    if (inner.residual > allowed && inner.residual > inner_tol) rep.inner_rule_ok = false;

    rep.z = inner.root;
    rep.residual = op(rep.z).norm();
    rep.residual_trace.push_back(rep.residual);
    ++rep.outer_iterations;
    if (moved == 0.0 && rep.residual > opts.tol) break;  // stalled
  }
  rep.converged = rep.residual <= opts.tol;
  return rep;
}

SolveReport solve_wild_response(const LossSpec& spec, const Vec& z, const Vec& g_target,
                                const SolveOptions& opts, const Vec& y0) {
  require(z.size() == g_target.size(), "anchor and target dimensions differ");
  require(opts.tol > 0.0, "solver tolerance must be positive");

  SolveReport rep;
  if (opts.method == SolveMethod::automatic && spec.has_inverse()) {
    rep.y = spec.inverse_in_y(z, g_target);
    rep.residual_norm = (spec.grad1(z, rep.y) - g_target).norm();
    rep.iterations = 0;
    rep.method = "closed-form";
    if (rep.residual_norm <= opts.tol) return rep;
    // fall through to the numerical path if the provided inverse is off
  }

  auto residual_field = [&spec, &z, &g_target](const Vec& y) -> Vec {
    return spec.grad1(z, y) - g_target;
  };

  if (opts.method != SolveMethod::ppa) {
    const RootReport nr = damped_newton(residual_field, y0, opts.tol, opts.max_iter);
    if (nr.converged) {
      rep.y = nr.root;
      rep.residual_norm = nr.residual;
      rep.iterations = nr.iterations;
      rep.method = "newton";
      return rep;
    }
    if (opts.method == SolveMethod::newton) {
      throw SolveFailure("newton wild-response solve did not converge", nr.residual);
    }
  }

  // -grad1(z, .) is monotone, so op(y) = g_target - grad1(z, y) is monotone
  // with the wild response as its root.
  auto op = [&spec, &z, &g_target](const Vec& y) -> Vec {
    return g_target - spec.grad1(z, y);
  };
  PpaOptions popts;
  popts.tol = opts.tol;
  popts.max_outer = opts.max_iter;
  const PpaReport pr = ppa_solve(op, y0, popts);
  if (!pr.converged) {
    throw SolveFailure("wild-response solve did not converge (newton and ppa exhausted)",
                       pr.residual);
  }
  rep.y = pr.z;
  rep.residual_norm = pr.residual;
  rep.iterations = pr.outer_iterations;
  rep.method = "ppa";
  return rep;
}

WildBuild build_wild_datasets(const FixedDesignDataset& ds, const Predictor& f_hat,
                              const LossSpec& spec, const std::vector<int>& eps, double rho1,
                              double rho2, const SolveOptions& opts) {
  require(static_cast<int>(eps.size()) == ds.n(), "one sign per sample required");

  std::vector<Vec> g_tilde(ds.n());
  std::vector<Vec> anchors(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    anchors[i] = f_hat(ds.x[i]);
    g_tilde[i] = loss_grad1(spec, anchors[i], ds.y[i]);
  }
  auto [targets_diamond, targets_sharp] = wild_target_gradients(g_tilde, eps, rho1, rho2);

  WildBuild build;
  std::vector<Vec> y_diamond(ds.n());
  std::vector<Vec> y_sharp(ds.n());
  build.reports_diamond.resize(ds.n());
  build.reports_sharp.resize(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    try {
      build.reports_diamond[i] =
          solve_wild_response(spec, anchors[i], targets_diamond[i], opts, ds.y[i]);
      build.reports_sharp[i] =
          solve_wild_response(spec, anchors[i], targets_sharp[i], opts, ds.y[i]);
    } catch (const SolveFailure& failure) {
      throw SolveFailure("wild-response solve failed at sample " + std::to_string(i) + ": " +
                             failure.what(),
                         failure.best_residual, i);
    }
    y_diamond[i] = build.reports_diamond[i].y;
    y_sharp[i] = build.reports_sharp[i].y;
  }
  build.d_diamond = FixedDesignDataset::create(ds.x, std::move(y_diamond));
  build.d_sharp = FixedDesignDataset::create(ds.x, std::move(y_sharp));
  return build;
}

}  // namespace riskwild
