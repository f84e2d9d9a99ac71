#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "kl/driver.hpp"
#include "kl/kernel.hpp"
#include "kl/rk.hpp"
#include "kl/slit.hpp"

namespace kl {

enum class FlowStatus { Completed, Exploded, Failed };

struct FlowConfig {
  RkOptions rk{1e-8, 1e-10, 1e-4, 0.05, 1e-12, 2'000'000};
  double eps_explode = 1e-3;
  double c_step = 0.25;  // accepted-step cap c_step * R^2
  // fixed charge budget inside the stepping loop; refinement is for one-shot solves
  KernelConfig kernel{48, 384, 1e-8, false, false};
};

/// Time series of a slit-motion solution: states, driver values, R values,
/// termination status, and a dense interpolant for downstream consumers.
struct Trajectory {
  FlowStatus status = FlowStatus::Completed;
  double t_end = 0.0;
  double zeta_est = 0.0;  // meaningful when status == Exploded
  std::string failure;
  int n_slits = 0;
  std::vector<double> t;
  std::vector<double> xi;
  std::vector<double> R;
  std::vector<std::vector<double>> states;  // 3N coords per sample
  DenseOutput dense;

  bool exploded() const { return status == FlowStatus::Exploded; }

  std::vector<double> coords_at(double tq) const {
    const Eigen::VectorXd y = dense.eval(tq);
    return std::vector<double>(y.data(), y.data() + y.size());
  }
  SlitVector state_at(double tq) const { return SlitVector::validate(coords_at(tq)); }
};

namespace detail {

inline bool coords_plausible(const Eigen::VectorXd& y, int n) {
  for (int j = 0; j < n; ++j) {
    if (!(y[j] > 0.0)) return false;                  // heights
    if (!(y[n + j] < y[2 * n + j])) return false;     // left < right
    if (!std::isfinite(y[j])) return false;
  }
  return true;
}

inline double distance_raw(const Eigen::VectorXd& y, int n, double xi0) {
  double r = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    const double gap = std::max({y[n + j] - xi0, xi0 - y[2 * n + j], 0.0});
    r = std::min(r, std::sqrt(gap * gap + y[j] * y[j]));
  }
  return r;
}

}  // namespace detail

/// Integrates ds_l/dt = b_l(xi(t), s(t)) with adaptive RK45 under the
/// half-plane-capacity time scale. Terminates with Exploded when
/// R(xi(t), s(t)) drops below eps_explode or validity is about to fail.
inline Trajectory evolve_slits(const SlitVector& s_init, const Driver& driver,
                               double t_max, const FlowConfig& cfg = {},
                               KernelCache* cache = nullptr) {
  const int n = s_init.count();
  Trajectory traj;
  traj.n_slits = n;

  Eigen::VectorXd y0 =
      Eigen::Map<const Eigen::VectorXd>(s_init.coords().data(), 3 * n);

  if (n == 0) {
    // no slits: nothing moves; record the two endpoints
    traj.status = FlowStatus::Completed;
    traj.t_end = t_max;
    traj.t = {0.0, t_max};
    traj.xi = {driver.xi(0.0), driver.xi(t_max)};
    traj.R = {std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
    traj.states = {{}, {}};
    Eigen::VectorXd f = Eigen::VectorXd::Zero(0);
    traj.dense.add({0.0, t_max, y0, f, y0, f});
    return traj;
  }

  auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    if (!detail::coords_plausible(y, n)) return false;
    const double xi = driver.xi(t);
    if (detail::distance_raw(y, n, xi) < 0.25 * cfg.eps_explode) return false;
    std::vector<double> coords(y.data(), y.data() + 3 * n);
    if (!SlitVector::is_valid(coords)) return false;
    const SlitVector s = SlitVector::validate(std::move(coords));
    DriftVector d;
    if (cache)
      d = cache->get(s, xi, cfg.kernel)->drift();
    else
      d = KernelSolution(s, xi, cfg.kernel).drift();
    for (int l = 0; l < 3 * n; ++l) dy[l] = d.b[l];
    return true;
  };

  auto record = [&](double t, const Eigen::VectorXd& y) {
    traj.t.push_back(t);
    traj.xi.push_back(driver.xi(t));
    traj.R.push_back(detail::distance_raw(y, n, driver.xi(t)));
    traj.states.emplace_back(y.data(), y.data() + 3 * n);
  };
  record(0.0, y0);

  auto observer = [&](double t, Eigen::VectorXd& y) {
    record(t, y);
    const double R = traj.R.back();
    if (R < cfg.eps_explode) {
      traj.status = FlowStatus::Exploded;
      traj.zeta_est = t;
      return StepAction::Stop;
    }
    // imminent invariant violation also ends the evolution
    std::vector<double> coords(y.data(), y.data() + 3 * n);
    if (!SlitVector::is_valid(coords)) {
      traj.status = FlowStatus::Exploded;
      traj.zeta_est = t;
      return StepAction::Stop;
    }
    return StepAction::Continue;
  };

  auto cap = [&](double t, const Eigen::VectorXd& y) {
    return cfg.c_step * std::pow(detail::distance_raw(y, n, driver.xi(t)), 2);
  };

  const RkResult res = rk45(rhs, 0.0, std::move(y0), t_max, cfg.rk, &traj.dense,
                            observer, cap);
  traj.t_end = res.t;
  if (!res.stopped) traj.status = FlowStatus::Completed;
  return traj;
}

struct ExplosionReport {
  double zeta_est;
  std::vector<double> R_tail;  // R over the trailing 10% of the lifetime
  double min_height;           // min_j y_j at the final state
};

inline ExplosionReport explosion_report(const Trajectory& traj) {
  if (traj.status != FlowStatus::Exploded)
    throw Error(ErrorCode::NotExploded, "trajectory did not explode");
  ExplosionReport rep;
  rep.zeta_est = traj.zeta_est;
  const double t_cut = 0.9 * traj.zeta_est;
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    if (traj.t[i] >= t_cut) rep.R_tail.push_back(traj.R[i]);
  const auto& last = traj.states.back();
  rep.min_height = *std::min_element(last.begin(), last.begin() + traj.n_slits);
  return rep;
}

/// Comparison-ODE lower bound for the explosion time, 2*y0^2.
inline double comparison_lower_bound(double y0) {
  if (!(y0 > 0.0)) throw Error(ErrorCode::ConfigInvalid, "y0 must be positive");
  return 2.0 * y0 * y0;
}

/// Sharp constant obtainable from the Koebe one-quarter theorem applied to the
/// kernel's pole-normalized inverse: |Psi| <= 4/(pi r) on {|z - xi0| >= r},
/// hence |dy/dt| <= 8/y and zeta >= y0^2/16.
inline double koebe_lower_bound(double y0) {
  if (!(y0 > 0.0)) throw Error(ErrorCode::ConfigInvalid, "y0 must be positive");
  return y0 * y0 / 16.0;
}

}  // namespace kl
