#pragma once

#include <array>
#include <vector>

#include "riskwild/common.hpp"
#include "riskwild/losses.hpp"
#include "riskwild/models.hpp"
#include "riskwild/wildresp.hpp"

namespace riskwild {

// Deterministic +/-1 sequence.
std::vector<int> rademacher(int n, std::uint64_t seed);

enum class WildSide { diamond, sharp };

// First stage of the refitting run: the pilot fit and its loss gradients.
// Splitting this out lets rho tuning reuse one pilot across many refits.
struct PilotFit {
  Predictor f_hat;
  std::vector<Vec> g_tilde;
  double stationarity = std::numeric_limits<double>::quiet_NaN();
};

PilotFit prepare_pilot(const Trainer& trainer, const FixedDesignDataset& ds,
                       const LossSpec& spec);

struct SideRefit {
  Predictor f;
  FixedDesignDataset dataset;
  std::vector<SolveReport> solves;
  double radius = 0.0;  // |f - f_hat|_n
  double stationarity = std::numeric_limits<double>::quiet_NaN();
};

SideRefit refit_side(const PilotFit& pilot, const Trainer& trainer,
                     const FixedDesignDataset& ds, const LossSpec& spec, double rho,
                     WildSide side, const std::vector<int>& eps, const SolveOptions& opts = {});

struct WildRefitOutput {
  Predictor f_hat, f_diamond, f_sharp;
  FixedDesignDataset d0, d_diamond, d_sharp;
  std::vector<int> eps;
  std::vector<Vec> g_tilde;
  double rho1 = 0.0, rho2 = 0.0;
  double r_diamond = 0.0, r_sharp = 0.0;
  std::uint64_t seed = 0;
  std::array<double, 3> trainer_stationarity{};  // pilot, diamond, sharp
  std::vector<SolveReport> solves_diamond, solves_sharp;
};

// Full run: fit, perturb the gradients with one shared Rademacher draw, refit
// on both perturbed datasets, report the achieved radii. The same trainer is
// used for all three fits and is touched only through fit().
WildRefitOutput doubly_wild_refit(const Trainer& trainer, const FixedDesignDataset& ds,
                                  const LossSpec& spec, double rho1, double rho2,
                                  std::uint64_t seed, const SolveOptions& opts = {});

// Test/diagnostic hook: identical run with an explicit sign sequence.
WildRefitOutput doubly_wild_refit_with_eps(const Trainer& trainer, const FixedDesignDataset& ds,
                                           const LossSpec& spec, double rho1, double rho2,
                                           const std::vector<int>& eps,
                                           const SolveOptions& opts = {});

}  // namespace riskwild
