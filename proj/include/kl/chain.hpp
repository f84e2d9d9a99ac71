#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "kl/slit_flow.hpp"

namespace kl {

struct MapConfig {
  FlowConfig flow;
  double eps_swallow = 1e-4;
  bool store_dense = true;
};

/// Co-integrated Komatu-Loewner chain: slit trajectory plus tracked-point images
/// g_t(z) with swallow times. Swallowed points freeze at their last value.
struct MapResult {
  Trajectory slits;
  std::vector<Cplx> points;                    // initial positions z
  std::vector<std::optional<double>> swallowed_at;
  std::vector<Cplx> g_end;                     // final images (frozen if swallowed)
  DenseOutput dense;                           // [3N slit coords | 2K point coords]
  bool has_dense = false;

  Cplx g_at(double t, int point_idx) const {
    const Eigen::VectorXd y = dense.eval(t);
    const int off = slits.n_slits * 3 + 2 * point_idx;
    return {y[off], y[off + 1]};
  }
};

/// Integrates dg/dt = -2 pi Psi_{s(t)}(g, xi(t)) for each tracked point,
/// co-stepped with the slit motion. A point is swallowed at the first time
/// |g - xi(t)| <= eps_swallow (also on step collapse near xi) and then frozen.
inline MapResult evolve_map(const SlitVector& s_init, const Driver& driver,
                            const std::vector<Cplx>& points, double t_max,
                            const MapConfig& cfg = {}, KernelCache* cache = nullptr) {
  const int n = s_init.count();
  const int np = static_cast<int>(points.size());
  for (const Cplx& z : points)
    if (!s_init.contains(z))
      throw Error(ErrorCode::ConfigInvalid, "tracked point outside the slit domain");

  MapResult out;
  out.points = points;
  out.swallowed_at.assign(np, std::nullopt);
  out.slits.n_slits = n;

  Eigen::VectorXd y0(3 * n + 2 * np);
  for (int l = 0; l < 3 * n; ++l) y0[l] = s_init.coords()[l];
  for (int p = 0; p < np; ++p) {
    y0[3 * n + 2 * p] = points[p].real();
    y0[3 * n + 2 * p + 1] = points[p].imag();
  }

  std::vector<bool> frozen(np, false);

  auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    if (n > 0 && !detail::coords_plausible(y, n)) return false;
    const double xi = driver.xi(t);
    if (n > 0 && detail::distance_raw(y, n, xi) < 0.25 * cfg.flow.eps_explode)
      return false;
    std::vector<double> coords(y.data(), y.data() + 3 * n);
    if (n > 0 && !SlitVector::is_valid(coords)) return false;
    const SlitVector s = SlitVector::validate(std::move(coords));
    std::shared_ptr<const KernelSolution> sol;
    if (n > 0)
      sol = cache ? cache->get(s, xi, cfg.flow.kernel)
                  : std::make_shared<const KernelSolution>(s, xi, cfg.flow.kernel);
    if (n > 0) {
      const DriftVector d = sol->drift();
      for (int l = 0; l < 3 * n; ++l) dy[l] = d.b[l];
    }
    for (int p = 0; p < np; ++p) {
      const int off = 3 * n + 2 * p;
      if (frozen[p]) {
        dy[off] = dy[off + 1] = 0.0;
        continue;
      }
      const Cplx g{y[off], y[off + 1]};
      if (std::abs(g - xi) < 0.2 * cfg.eps_swallow) return false;
      if (g.imag() < -1e-12) return false;
      const Cplx v = 2.0 / (g - xi) - 2.0 * kPi * (n > 0 ? sol->h(g) : Cplx{0, 0});
      dy[off] = v.real();
      dy[off + 1] = v.imag();
    }
    return true;
  };

  auto record = [&](double t, const Eigen::VectorXd& y) {
    out.slits.t.push_back(t);
    out.slits.xi.push_back(driver.xi(t));
    out.slits.R.push_back(n > 0 ? detail::distance_raw(y, n, driver.xi(t))
                                : std::numeric_limits<double>::infinity());
    out.slits.states.emplace_back(y.data(), y.data() + 3 * n);
  };
  record(0.0, y0);

  auto do_swallow = [&](double t, Eigen::VectorXd& y, double radius) {
    bool any = false;
    const double xi = driver.xi(t);
    for (int p = 0; p < np; ++p) {
      if (frozen[p]) continue;
      const int off = 3 * n + 2 * p;
      const Cplx g{y[off], y[off + 1]};
      if (std::abs(g - xi) <= radius) {
        frozen[p] = true;
        out.swallowed_at[p] = t;
        any = true;
      }
    }
    return any;
  };

  auto observer = [&](double t, Eigen::VectorXd& y) {
    record(t, y);
    do_swallow(t, y, cfg.eps_swallow);
    if (n > 0) {
      if (out.slits.R.back() < cfg.flow.eps_explode) {
        out.slits.status = FlowStatus::Exploded;
        out.slits.zeta_est = t;
        return StepAction::Stop;
      }
      std::vector<double> coords(y.data(), y.data() + 3 * n);
      if (!SlitVector::is_valid(coords)) {
        out.slits.status = FlowStatus::Exploded;
        out.slits.zeta_est = t;
        return StepAction::Stop;
      }
    }
    return StepAction::Continue;
  };

  auto cap = [&](double t, const Eigen::VectorXd& y) {
    if (n == 0) return cfg.flow.rk.h_max;
    return cfg.flow.c_step * std::pow(detail::distance_raw(y, n, driver.xi(t)), 2);
  };

  // a point stalling against xi(t) collapses the step; swallow it and move on
  auto rescue = [&](double t, Eigen::VectorXd& y) {
    return do_swallow(t, y, 20.0 * cfg.eps_swallow);
  };

  DenseOutput* dense = cfg.store_dense ? &out.dense : nullptr;
  const RkResult res =
      rk45(rhs, 0.0, std::move(y0), t_max, cfg.flow.rk, dense, observer, cap, rescue);
  out.has_dense = cfg.store_dense;
  out.slits.t_end = res.t;
  if (!res.stopped) out.slits.status = FlowStatus::Completed;
  for (int p = 0; p < np; ++p) {
    const int off = 3 * n + 2 * p;
    out.g_end.push_back({res.y[off], res.y[off + 1]});
  }
  if (cfg.store_dense) out.slits.dense = out.dense.head(3 * n);
  return out;
}

/// Hull sample at time t: the tracked points swallowed by t. Monotone in t.
inline std::vector<Cplx> hull_at(const MapResult& hist, double t) {
  std::vector<Cplx> f;
  for (std::size_t p = 0; p < hist.points.size(); ++p)
    if (hist.swallowed_at[p] && *hist.swallowed_at[p] <= t)
      f.push_back(hist.points[p]);
  return f;
}

/// Approximates the trace tip gamma(t) by integrating the map equation backward
/// from xi(t) + i*delta along the stored slit trajectory.
inline Cplx trace_tip(const Trajectory& slit_traj, const Driver& driver, double t,
                      double delta = 1e-3, const FlowConfig& cfg = {},
                      KernelCache* cache = nullptr) {
  if (t <= 0.0) return Cplx{driver.xi(0.0), delta};
  if (t > slit_traj.t_end + 1e-12)
    throw Error(ErrorCode::ConfigInvalid, "t beyond trajectory");
  const int n = slit_traj.n_slits;

  auto rhs = [&](double sigma, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const double tau = t - sigma;
    const double xi = driver.xi(tau);
    const Cplx z{y[0], y[1]};
    if (!(z.imag() > 0.0)) return false;
    Cplx v = -2.0 / (z - xi);
    if (n > 0) {
      const SlitVector s = slit_traj.state_at(tau);
      if (s.distance_to_point(z) < 1e-6) return false;
      auto sol = cache ? cache->get(s, xi, cfg.kernel)
                       : std::make_shared<const KernelSolution>(s, xi, cfg.kernel);
      v += 2.0 * kPi * sol->h(z);
    }
    dy[0] = v.real();
    dy[1] = v.imag();
    return true;
  };

  Eigen::VectorXd y0(2);
  y0[0] = driver.xi(t);
  y0[1] = delta;
  RkOptions opt = cfg.rk;
  opt.h_init = std::min(1e-6, t / 16);  // the start sits near the singularity
  opt.h_max = 0.01;
  auto observer = [&](double sigma, Eigen::VectorXd& y) {
    if (!(y[1] > 0.0) ||
        (n > 0 && slit_traj.state_at(t - sigma).distance_to_point({y[0], y[1]}) < 1e-6))
      throw Error(ErrorCode::BackwardBlowup, "backward flow left the domain");
    return StepAction::Continue;
  };
  const RkResult res = rk45(rhs, 0.0, std::move(y0), t, opt, nullptr, observer);
  return {res.y[0], res.y[1]};
}

/// Half-plane capacity of F_t relative to D via the Laurent probe average of
/// z (g_t(z) - z) over a semicircle |z| = rho; Schwarz symmetry makes the
/// full-circle mean real, so the real part of the semicircle mean is returned.
inline double hcap_estimate(const Trajectory& slit_traj, const Driver& driver,
                            double t, double rho, const MapConfig& cfg = {},
                            KernelCache* cache = nullptr, int n_probes = 64) {
  double extent = 2.5 * std::sqrt(std::max(2.0 * t, 0.0));
  for (std::size_t i = 0; i < slit_traj.t.size(); ++i) {
    extent = std::max(extent, std::abs(slit_traj.xi[i]));
    const auto& st = slit_traj.states[i];
    const int n = slit_traj.n_slits;
    for (int j = 0; j < n; ++j) {
      extent = std::max(extent, std::abs(Cplx{st[n + j], st[j]}));
      extent = std::max(extent, std::abs(Cplx{st[2 * n + j], st[j]}));
    }
  }
  if (rho < 4.0 * extent)
    throw Error(ErrorCode::ProbeTooClose,
                "probe radius " + std::to_string(rho) + " < 4 * extent " +
                    std::to_string(extent));
  if (t <= 0.0) return 0.0;

  std::vector<Cplx> probes(n_probes);
  for (int k = 0; k < n_probes; ++k) {
    const double th = (k + 0.5) * kPi / n_probes;
    probes[k] = rho * Cplx{std::cos(th), std::sin(th)};
  }

  const int n = slit_traj.n_slits;
  auto rhs = [&](double tau, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const double xi = driver.xi(tau);
    std::shared_ptr<const KernelSolution> sol;
    if (n > 0) {
      const SlitVector s = slit_traj.state_at(std::min(tau, slit_traj.t_end));
      sol = cache ? cache->get(s, xi, cfg.flow.kernel)
                  : std::make_shared<const KernelSolution>(s, xi, cfg.flow.kernel);
    }
    for (int p = 0; p < n_probes; ++p) {
      const Cplx g{y[2 * p], y[2 * p + 1]};
      const Cplx v = 2.0 / (g - xi) - 2.0 * kPi * (n > 0 ? sol->h(g) : Cplx{0, 0});
      dy[2 * p] = v.real();
      dy[2 * p + 1] = v.imag();
    }
    return true;
  };

  Eigen::VectorXd y0(2 * n_probes);
  for (int p = 0; p < n_probes; ++p) {
    y0[2 * p] = probes[p].real();
    y0[2 * p + 1] = probes[p].imag();
  }
  const RkResult res = rk45(rhs, 0.0, std::move(y0), t, cfg.flow.rk);
  Cplx mean{0.0, 0.0};
  for (int p = 0; p < n_probes; ++p) {
    const Cplx g{res.y[2 * p], res.y[2 * p + 1]};
    mean += probes[p] * (g - probes[p]);
  }
  mean /= double(n_probes);
  return mean.real();
}

}  // namespace kl
