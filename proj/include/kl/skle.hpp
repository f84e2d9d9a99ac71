#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <span>
#include <thread>
#include <vector>

#include "kl/kernel.hpp"
#include "kl/sampling.hpp"
#include "kl/slit_flow.hpp"

namespace kl {

/// SDE coefficient on the configuration space, evaluated through horizontal
/// translation: f(xi0, s) := f(s - xi0_hat). Built-ins cover the evolutions of
/// interest; custom callables receive the translated configuration.
class Coefficient {
 public:
  enum class Kind { Zero, Constant, BmdScaled, Custom };

  static Coefficient zero() { return {Kind::Zero, 0.0, {}, -1}; }
  static Coefficient constant(double v) { return {Kind::Constant, v, {}, 0}; }
  /// b = lambda * b_BMD (homogeneous of degree -1).
  static Coefficient bmd_scaled(double lambda) {
    return {Kind::BmdScaled, lambda, {}, -1};
  }
  static Coefficient custom(std::function<double(const SlitVector&)> f, int degree) {
    return {Kind::Custom, 0.0, std::move(f), degree};
  }

  Kind kind() const { return kind_; }
  double value() const { return value_; }
  int degree() const { return degree_; }

  /// Evaluation at (xi0, s); `hint` may carry an already-solved kernel for the
  /// same (s, xi0) pair to reuse.
  double eval(double xi0, const SlitVector& s, const KernelSolution* hint = nullptr,
              KernelCache* cache = nullptr, const KernelConfig& kcfg = {}) const {
    switch (kind_) {
      case Kind::Zero: return 0.0;
      case Kind::Constant: return value_;
      case Kind::BmdScaled: {
        if (s.count() == 0) return 0.0;
        if (hint) return value_ * hint->bmd_constant();
        if (cache) return value_ * cache->get(s, xi0, kcfg)->bmd_constant();
        return value_ * KernelSolution(s, xi0, kcfg).bmd_constant();
      }
      case Kind::Custom: return custom_(s.translated(-xi0));
    }
    return 0.0;
  }

 private:
  Coefficient(Kind k, double v, std::function<double(const SlitVector&)> f, int deg)
      : kind_(k), value_(v), custom_(std::move(f)), degree_(deg) {}
  Kind kind_;
  double value_;
  std::function<double(const SlitVector&)> custom_;
  int degree_;
};

struct CoefficientSpec {
  Coefficient alpha = Coefficient::constant(0.0);  // degree 0, nonnegative
  Coefficient b = Coefficient::zero();             // degree -1
};

/// Checks the declared homogeneity degree on random (c, s) probes; returns the
/// worst relative defect.
inline double homogeneity_defect(const Coefficient& f, int n_probes,
                                 std::uint64_t seed, const KernelConfig& kcfg = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uc(0.3, 3.0);
  double worst = 0.0;
  for (int i = 0; i < n_probes; ++i) {
    const SlitVector s = random_slits(rng, 1 + int(rng() % 2), 0.5, 2.0);
    const double c = uc(rng);
    const double lhs = f.eval(0.0, s.scaled(c), nullptr, nullptr, kcfg);
    const double rhs = std::pow(c, f.degree()) * f.eval(0.0, s, nullptr, nullptr, kcfg);
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

struct SkleConfig {
  double c_step = 0.25;       // slit substep cap: dt_eff <= c_step * R^2
  double eps_explode = 1e-3;
  KernelConfig kernel{48, 384, 1e-8, false, false};
  bool record_increments = false;
  int sample_stride = 1;      // store every k-th macro sample
};

/// One sampled SKLE path on the Euler-Maruyama macro grid.
struct SklePath {
  FlowStatus status = FlowStatus::Completed;
  double zeta_est = 0.0;
  double t_end = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  int n_slits = 0;
  std::vector<double> t, xi, R;
  std::vector<std::vector<double>> states;
  std::vector<double> increments;  // dB per macro step, when recorded
  std::string failure;

  bool exploded() const { return status == FlowStatus::Exploded; }
  SlitVector state_at_index(std::size_t i) const {
    return SlitVector::validate(states[i]);
  }
};

/// Euler-Maruyama for the driving SDE coupled with RK4 substeps of the slit
/// motion (driver frozen across each macro step). Fully deterministic given
/// (seed, dt); explosion detection mirrors the deterministic flow.
inline SklePath sample_path(double xi_init, const SlitVector& s_init,
                            const CoefficientSpec& coeffs, double t_max, double dt,
                            std::uint64_t seed, const SkleConfig& cfg = {},
                            KernelCache* cache = nullptr,
                            std::span<const double> external_increments = {}) {
  if (!(dt > 0.0)) throw Error(ErrorCode::ConfigInvalid, "dt must be positive");
  const int n = s_init.count();
  const long n_steps = std::lround(std::ceil(t_max / dt - 1e-12));

  SklePath path;
  path.dt = dt;
  path.seed = seed;
  path.n_slits = n;

  std::vector<double> dB;
  if (!external_increments.empty()) {
    if (static_cast<long>(external_increments.size()) < n_steps)
      throw Error(ErrorCode::IncrementMismatch,
                  "need " + std::to_string(n_steps) + " increments");
    dB.assign(external_increments.begin(), external_increments.begin() + n_steps);
  } else {
    GaussianStream g(seed);
    const double sq = std::sqrt(dt);
    dB.resize(n_steps);
    for (long k = 0; k < n_steps; ++k) dB[k] = sq * g.next();
  }
  if (cfg.record_increments) path.increments = dB;

  Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(s_init.coords().data(), 3 * n);
  double xi = xi_init;
  double t = 0.0;

  auto record = [&](double tt, double xx, const Eigen::VectorXd& ss) {
    path.t.push_back(tt);
    path.xi.push_back(xx);
    path.R.push_back(n > 0 ? detail::distance_raw(ss, n, xx)
                           : std::numeric_limits<double>::infinity());
    path.states.emplace_back(ss.data(), ss.data() + 3 * n);
  };
  record(0.0, xi, s);

  auto drift_rhs = [&](double xi_frozen) {
    return [&, xi_frozen](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      if (!detail::coords_plausible(y, n)) return false;
      if (detail::distance_raw(y, n, xi_frozen) < 0.25 * cfg.eps_explode) return false;
      std::vector<double> coords(y.data(), y.data() + 3 * n);
      if (!SlitVector::is_valid(coords)) return false;
      const SlitVector sv = SlitVector::validate(std::move(coords));
      const DriftVector d = cache ? cache->get(sv, xi_frozen, cfg.kernel)->drift()
                                  : KernelSolution(sv, xi_frozen, cfg.kernel).drift();
      for (int l = 0; l < 3 * n; ++l) dy[l] = d.b[l];
      return true;
    };
  };

  for (long k = 0; k < n_steps; ++k) {
    const double step_dt = std::min(dt, t_max - t);
    double R = n > 0 ? detail::distance_raw(s, n, xi)
                     : std::numeric_limits<double>::infinity();
    if (R < cfg.eps_explode) {
      path.status = FlowStatus::Exploded;
      path.zeta_est = t;
      break;
    }

    // coefficients at the step-start state (Ito convention)
    double alpha_k = 0.0, b_k = 0.0;
    {
      std::vector<double> coords(s.data(), s.data() + 3 * n);
      const SlitVector sv = SlitVector::validate(std::move(coords));
      std::shared_ptr<const KernelSolution> sol;
      if (n > 0 && (coeffs.alpha.kind() == Coefficient::Kind::BmdScaled ||
                    coeffs.b.kind() == Coefficient::Kind::BmdScaled)) {
        sol = cache ? cache->get(sv, xi, cfg.kernel)
                    : std::make_shared<const KernelSolution>(sv, xi, cfg.kernel);
      }
      alpha_k = coeffs.alpha.eval(xi, sv, sol.get(), cache, cfg.kernel);
      b_k = coeffs.b.eval(xi, sv, sol.get(), cache, cfg.kernel);
    }

    // slit substeps with the driver frozen at xi
    bool exploded = false;
    if (n > 0) {
      const auto rhs = drift_rhs(xi);
      double tau = 0.0;
      while (tau < step_dt) {
        R = detail::distance_raw(s, n, xi);
        if (R < cfg.eps_explode) {
          exploded = true;
          break;
        }
        double h = std::min(step_dt - tau, cfg.c_step * R * R);
        std::optional<Eigen::VectorXd> next;
        while (!(next = rk4_step(rhs, t + tau, s, h))) {
          h *= 0.5;
          if (h < 1e-12)
            throw Error(ErrorCode::StepUnderflow,
                        "substep below 1e-12 at t = " + std::to_string(t + tau));
        }
        s = std::move(*next);
        tau += h;
        std::vector<double> coords(s.data(), s.data() + 3 * n);
        if (!SlitVector::is_valid(coords)) {
          exploded = true;
          break;
        }
      }
      if (!exploded) {
        R = detail::distance_raw(s, n, xi);
        if (R < cfg.eps_explode) exploded = true;
      }
      if (exploded) {
        path.status = FlowStatus::Exploded;
        path.zeta_est = t + std::min(tau, step_dt);
        record(path.zeta_est, xi, s);
        break;
      }
    }

    xi = xi + alpha_k * dB[k] + b_k * step_dt;
    t += step_dt;
    if ((k + 1) % cfg.sample_stride == 0 || k + 1 == n_steps) record(t, xi, s);
  }

  path.t_end = path.exploded() ? path.zeta_est : t;
  if (!path.exploded()) path.status = FlowStatus::Completed;
  return path;
}

struct PathSummary {
  int index;
  FlowStatus status;
  double zeta_est;   // when exploded
  double final_R;
  std::uint64_t seed;
};

struct McResult {
  int n_paths = 0, n_exploded = 0, n_failed = 0;
  double p_hat = 0.0, ci_lo = 0.0, ci_hi = 0.0;  // Wilson 95%
  std::vector<double> zetas;                     // sorted, exploded paths only
  double max_final_R = 0.0;                      // over exploded paths
  std::vector<PathSummary> paths;

  double zeta_quantile(double q) const {
    if (zetas.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double idx = q * (zetas.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, zetas.size() - 1);
    return zetas[lo] + (idx - lo) * (zetas[hi] - zetas[lo]);
  }
};

inline void wilson_interval(int k, int n, double& lo, double& hi) {
  const double z = 1.959963984540054;
  const double p = double(k) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  lo = std::max(0.0, center - half);
  hi = std::min(1.0, center + half);
}

/// Monte Carlo explosion study. Paths are independent tasks with per-path seeds
/// derived from the base seed, so the schedule cannot change results.
inline McResult mc_explosion(double xi_init, const SlitVector& s_init,
                             const CoefficientSpec& coeffs, double t_max,
                             double dt, int n_paths, std::uint64_t base_seed,
                             const SkleConfig& cfg = {}, int jobs = 0) {
  if (n_paths < 1) throw Error(ErrorCode::ConfigInvalid, "n_paths must be >= 1");
  if (jobs <= 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<int>(jobs, n_paths);

  McResult res;
  res.n_paths = n_paths;
  res.paths.resize(n_paths);
  std::atomic<int> next{0};

  auto worker = [&]() {
    // each worker keeps its own cache; kernel states are path-local anyway
    KernelCache cache;
    for (int i = next.fetch_add(1); i < n_paths; i = next.fetch_add(1)) {
      const std::uint64_t seed = splitmix64(base_seed + 0x1000 + i);
      PathSummary& ps = res.paths[i];
      ps.index = i;
      ps.seed = seed;
      try {
        const SklePath p =
            sample_path(xi_init, s_init, coeffs, t_max, dt, seed, cfg, &cache);
        ps.status = p.status;
        ps.zeta_est = p.exploded() ? p.zeta_est : 0.0;
        ps.final_R = p.R.empty() ? 0.0 : p.R.back();
      } catch (const Error&) {
        ps.status = FlowStatus::Failed;
        ps.zeta_est = 0.0;
        ps.final_R = 0.0;
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (const PathSummary& ps : res.paths) {
    if (ps.status == FlowStatus::Failed) {
      ++res.n_failed;
    } else if (ps.status == FlowStatus::Exploded) {
      ++res.n_exploded;
      res.zetas.push_back(ps.zeta_est);
      res.max_final_R = std::max(res.max_final_R, ps.final_R);
    }
  }
  std::sort(res.zetas.begin(), res.zetas.end());
  res.p_hat = double(res.n_exploded) / n_paths;
  wilson_interval(res.n_exploded, n_paths, res.ci_lo, res.ci_hi);
  return res;
}

struct ConditionBProbe {
  double sup_estimate = 0.0;
  double sup_first_half = 0.0;
  bool growth_flag = false;  // sup still growing as the sample doubles
};

/// Samples |f| over random configurations with R(0, s) > r. A probe cannot
/// certify boundedness; it can only refute it, hence the growth flag.
inline ConditionBProbe probe_condition_B(
    const std::function<double(const SlitVector&)>& f, double r, int n_samples,
    std::uint64_t seed = 1234, int max_slits = 3) {
  std::mt19937_64 rng(seed);
  ConditionBProbe out;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < n_samples; ++i) {
    const int n = 1 + int(rng() % max_slits);
    // half the draws hug the R = r boundary where 1/R-type coefficients peak
    const double lo = (i % 2 == 0) ? r * 1.0001 : r * 1.05;
    const double hi = (i % 2 == 0) ? r * 1.05 : r * 4.0;
    const SlitVector s = random_slits(rng, n, lo, hi);
    out.sup_estimate = std::max(out.sup_estimate, std::abs(f(s)));
    if (i + 1 == n_samples / 2) out.sup_first_half = out.sup_estimate;
  }
  out.growth_flag = out.sup_estimate > 1.05 * std::max(out.sup_first_half, 1e-300);
  return out;
}

}  // namespace kl
