#include "riskwild/engine.hpp"

#include <random>

namespace riskwild {

std::vector<int> rademacher(int n, std::uint64_t seed) {
  require(n >= 1, "need at least one sign");
  std::mt19937_64 rng(seed);
  std::vector<int> eps(n);
  for (int i = 0; i < n; ++i) eps[i] = (rng() & 1ull) ? 1 : -1;
  return eps;
}

PilotFit prepare_pilot(const Trainer& trainer, const FixedDesignDataset& ds,
                       const LossSpec& spec) {
  PilotFit pilot;
  pilot.f_hat = trainer.fit(ds);
  pilot.g_tilde.resize(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    pilot.g_tilde[i] = loss_grad1(spec, pilot.f_hat(ds.x[i]), ds.y[i]);
  }
  if (trainer.stationarity) pilot.stationarity = trainer.stationarity(pilot.f_hat, ds);
  return pilot;
}

SideRefit refit_side(const PilotFit& pilot, const Trainer& trainer,
                     const FixedDesignDataset& ds, const LossSpec& spec, double rho,
                     WildSide side, const std::vector<int>& eps, const SolveOptions& opts) {
  require(rho > 0.0, "noise scale must be positive");
  require(static_cast<int>(eps.size()) == ds.n(), "one sign per sample required");

  const double orientation = side == WildSide::diamond ? -1.0 : 1.0;
  std::vector<Vec> outcomes(ds.n());
  SideRefit refit;
  refit.solves.resize(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    const Vec target = (1.0 + orientation * 2.0 * rho * eps[i]) * pilot.g_tilde[i];
    try {
      refit.solves[i] = solve_wild_response(spec, pilot.f_hat(ds.x[i]), target, opts, ds.y[i]);
    } catch (const SolveFailure& failure) {
      throw SolveFailure("wild-response solve failed at sample " + std::to_string(i) + ": " +
                             failure.what(),
                         failure.best_residual, i);
    }
    outcomes[i] = refit.solves[i].y;
  }
  refit.dataset = FixedDesignDataset::create(ds.x, std::move(outcomes));
  refit.f = trainer.fit(refit.dataset);
  refit.radius = empirical_norm(refit.f, pilot.f_hat, ds);
  if (trainer.stationarity) refit.stationarity = trainer.stationarity(refit.f, refit.dataset);
  return refit;
}

WildRefitOutput doubly_wild_refit_with_eps(const Trainer& trainer, const FixedDesignDataset& ds,
                                           const LossSpec& spec, double rho1, double rho2,
                                           const std::vector<int>& eps,
                                           const SolveOptions& opts) {
  require(rho1 > 0.0 && rho2 > 0.0, "noise scales must be positive");
  WildRefitOutput out;
  out.d0 = ds;
  out.eps = eps;
  out.rho1 = rho1;
  out.rho2 = rho2;

  PilotFit pilot = prepare_pilot(trainer, ds, spec);
  out.g_tilde = pilot.g_tilde;
  out.trainer_stationarity[0] = pilot.stationarity;

  WildBuild build = build_wild_datasets(ds, pilot.f_hat, spec, eps, rho1, rho2, opts);
  out.d_diamond = std::move(build.d_diamond);
  out.d_sharp = std::move(build.d_sharp);
  out.solves_diamond = std::move(build.reports_diamond);
  out.solves_sharp = std::move(build.reports_sharp);

  out.f_diamond = trainer.fit(out.d_diamond);
  out.f_sharp = trainer.fit(out.d_sharp);
  out.f_hat = std::move(pilot.f_hat);
  out.r_diamond = empirical_norm(out.f_diamond, out.f_hat, ds);
  out.r_sharp = empirical_norm(out.f_sharp, out.f_hat, ds);
  if (trainer.stationarity) {
    out.trainer_stationarity[1] = trainer.stationarity(out.f_diamond, out.d_diamond);
    out.trainer_stationarity[2] = trainer.stationarity(out.f_sharp, out.d_sharp);
  } else {
    out.trainer_stationarity[1] = std::numeric_limits<double>::quiet_NaN();
    out.trainer_stationarity[2] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

WildRefitOutput doubly_wild_refit(const Trainer& trainer, const FixedDesignDataset& ds,
                                  const LossSpec& spec, double rho1, double rho2,
                                  std::uint64_t seed, const SolveOptions& opts) {
  WildRefitOutput out = doubly_wild_refit_with_eps(trainer, ds, spec, rho1, rho2,
                                                   rademacher(ds.n(), seed), opts);
  out.seed = seed;
  return out;
}

}  // namespace riskwild
