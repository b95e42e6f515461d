#include "riskwild/oracle.hpp"

#include <cmath>

#include "riskwild/risk.hpp"
#include "riskwild/wildresp.hpp"

namespace riskwild {

Vec NoiseModel::sample_gradient(int d, std::mt19937_64& rng) const {
  Vec w = Vec::Zero(d);
  if (sigma == 0.0) return w;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < d; ++j) w(j) = normal(rng);
  if (kind == Kind::isotropic_student_t) {
    require(df > 0.0, "student-t noise needs positive degrees of freedom");
    std::chi_squared_distribution<double> chi2(df);
    w *= std::sqrt(df / chi2(rng));
  }
  return sigma * w;
}

std::vector<Vec> generate_design(DesignRule rule, int n, int p, std::uint64_t seed) {
  require(n >= 1 && p >= 1, "design needs n >= 1 and p >= 1");
  std::vector<Vec> design(n);
  if (rule == DesignRule::uniform_cube) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      design[i].resize(p);
      for (int j = 0; j < p; ++j) design[i](j) = unif(rng);
    }
    return design;
  }
  // Lattice: k points per axis, first n entries of the product grid.
  const int k = std::max(2, static_cast<int>(std::ceil(std::pow(double(n), 1.0 / p))));
  for (int i = 0; i < n; ++i) {
    design[i].resize(p);
    int idx = i;
    for (int j = 0; j < p; ++j) {
      design[i](j) = -1.0 + 2.0 * (idx % k) / (k - 1);
      idx /= k;
    }
  }
  return design;
}

FixedDesignDataset sample_outcomes(const std::vector<Vec>& design, const Predictor& f_star,
                                   const NoiseModel& noise, const LossSpec& spec,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> ys(design.size());
  SolveOptions opts;
  opts.tol = 1e-12;
  for (std::size_t i = 0; i < design.size(); ++i) {
    const Vec anchor = f_star(design[i]);
    const Vec w = noise.sample_gradient(static_cast<int>(anchor.size()), rng);
    if (spec.has_inverse()) {
      ys[i] = spec.inverse_in_y(anchor, w);
    } else {
      ys[i] = solve_wild_response(spec, anchor, w, opts, anchor).y;
    }
  }
  return FixedDesignDataset::create(design, std::move(ys));
}

std::pair<FixedDesignDataset, Predictor> gen_fixed_design(const Scenario& scenario,
                                                          std::uint64_t seed) {
  const auto design =
      generate_design(scenario.design, scenario.n, scenario.p, derive_seed(seed, 11));
  FixedDesignDataset ds =
      sample_outcomes(design, scenario.f_star, scenario.noise, scenario.loss,
                      derive_seed(seed, 13));
  return {std::move(ds), scenario.f_star};
}

McEstimate true_excess_risk(const Predictor& f_hat, const Predictor& f_star,
                            const LossSpec& spec, const NoiseModel& noise,
                            const FixedDesignDataset& ds, int mc_samples, std::uint64_t seed) {
  McEstimate est;
  if (spec.name == "squared") {
    const double r = empirical_norm(f_hat, f_star, ds);
    est.value = r * r;
    est.std_error = 0.0;
    return est;
  }
  require(mc_samples >= 1, "Monte Carlo estimate needs at least one sample");
  std::mt19937_64 rng(seed);
  SolveOptions opts;
  opts.tol = 1e-12;
  std::vector<Vec> hat_vals(ds.n()), star_vals(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    hat_vals[i] = f_hat(ds.x[i]);
    star_vals[i] = f_star(ds.x[i]);
  }
  double mean = 0.0, m2 = 0.0;
  for (int k = 0; k < mc_samples; ++k) {
    double gap = 0.0;
    for (int i = 0; i < ds.n(); ++i) {
      const Vec w = noise.sample_gradient(ds.d(), rng);
      const Vec y = spec.has_inverse()
                        ? spec.inverse_in_y(star_vals[i], w)
                        : solve_wild_response(spec, star_vals[i], w, opts, star_vals[i]).y;
      gap += spec.value(hat_vals[i], y) - spec.value(star_vals[i], y);
    }
    gap /= ds.n();
    const double delta = gap - mean;
    mean += delta / (k + 1);
    m2 += delta * (gap - mean);
  }
  est.value = mean;
  est.std_error = mc_samples > 1 ? std::sqrt(m2 / (mc_samples - 1) / mc_samples) : 0.0;
  return est;
}

double empirical_excess_risk(const Predictor& f_hat, const Predictor& f_star,
                             const FixedDesignDataset& ds, const LossSpec& spec) {
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    acc += loss_value(spec, f_hat(ds.x[i]), ds.y[i]) - loss_value(spec, f_star(ds.x[i]), ds.y[i]);
  }
  return acc / ds.n();
}

double true_optimism(const Predictor& f_hat, const Predictor& f_star,
                     const FixedDesignDataset& ds, const LossSpec& spec) {
  return oracle_optimism(f_hat, f_star, f_star, ds, spec);
}

double oracle_optimism(const Predictor& f_hat, const Predictor& f_dagger,
                       const Predictor& f_star, const FixedDesignDataset& ds,
                       const LossSpec& spec) {
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    const Vec w = loss_grad1(spec, f_star(ds.x[i]), ds.y[i]);
    acc += w.dot(f_hat(ds.x[i]) - f_dagger(ds.x[i]));
  }
  return acc / ds.n();
}

Predictor best_in_class(const FunctionClass& cls, const NoiseModel& noise,
                        const Predictor& f_star, const FixedDesignDataset& ds,
                        const LossSpec& spec, int mc_samples, bool well_specified,
                        std::uint64_t seed) {
  if (well_specified) return f_star;

  if (spec.name == "squared") {
    // Noise-free projection: regress the f_star values onto the class.
    std::vector<Vec> targets(ds.n());
    for (int i = 0; i < ds.n(); ++i) targets[i] = f_star(ds.x[i]);
    const FixedDesignDataset proj = FixedDesignDataset::create(ds.x, std::move(targets));
    return ridge_closed_form_trainer(0.0, cls).fit(proj);
  }

  // General losses: ERM over a Monte Carlo augmented dataset with mc_samples
  // fresh outcomes per design point.
  require(mc_samples >= 1, "best_in_class needs at least one Monte Carlo sample per point");
  std::mt19937_64 rng(seed);
  SolveOptions opts;
  opts.tol = 1e-12;
  std::vector<Vec> xs, ys;
  xs.reserve(static_cast<std::size_t>(ds.n()) * mc_samples);
  ys.reserve(xs.capacity());
  for (int i = 0; i < ds.n(); ++i) {
    const Vec anchor = f_star(ds.x[i]);
    for (int k = 0; k < mc_samples; ++k) {
      const Vec w = noise.sample_gradient(ds.d(), rng);
      xs.push_back(ds.x[i]);
      ys.push_back(spec.has_inverse()
                       ? spec.inverse_in_y(anchor, w)
                       : solve_wild_response(spec, anchor, w, opts, anchor).y);
    }
  }
  const FixedDesignDataset augmented = FixedDesignDataset::create(std::move(xs), std::move(ys));
  return generic_convex_erm_trainer(spec, cls, 1e-8, 50000).fit(augmented);
}

Vec sample_conditional_copy(const NoiseModel& noise, const Vec& w, std::mt19937_64& rng) {
  if (w.norm() == 0.0) return Vec::Zero(w.size());
  const Vec e = w / w.norm();
  const double magnitude = noise.sample_gradient(static_cast<int>(w.size()), rng).norm();
  const double sign = (rng() & 1ull) ? 1.0 : -1.0;
  return sign * magnitude * e;
}

std::pair<double, double> symmetrized_processes(const WildRefitOutput& out,
                                                const Predictor& f_star,
                                                const Predictor& f_dagger,
                                                const NoiseModel& noise, const LossSpec& spec,
                                                const FunctionClass& cls, double r,
                                                std::uint64_t seed) {
  const int n = out.d0.n();
  std::mt19937_64 rng(derive_seed(seed, 31));
  const std::vector<int> eps = rademacher(n, derive_seed(seed, 37));
  std::vector<Vec> v(n);
  for (int i = 0; i < n; ++i) {
    const Vec w = loss_grad1(spec, f_star(out.d0.x[i]), out.d0.y[i]);
    const Vec w_copy = sample_conditional_copy(noise, w, rng);
    v[i] = eps[i] * 0.5 * (w - w_copy);
  }
  const double z = sup_process(f_dagger, v, r, out.d0, cls);
  const double u = sup_process(out.f_hat, v, 2.0 * r, out.d0, cls);
  return {z, u};
}

}  // namespace riskwild
