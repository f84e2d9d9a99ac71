#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "kl/chain.hpp"
#include "kl/series.hpp"
#include "kl/skle.hpp"
#include "kl/slit_flow.hpp"

namespace kl {

struct IotaConfig {
  int jet_order = 12;            // truncation order K; coefficients 0..K
  RkOptions rk{1e-9, 1e-11, 1e-4, 0.02, 1e-12, 2'000'000};
  KernelConfig kernel{48, 384, 1e-8, false, false};
  double min_clearance = 0.05;   // centers must keep this distance from slits/xi
  double eval_radius_frac = 0.75;
  int n_samples = 200;           // scalar history resolution (deterministic mode)
  int substeps_per_macro = 1;    // SKLE mode: RK4 substeps per Euler step
};

struct IotaSample {
  double t, xi, U, iota1, iota2, a0, bmd;
};

/// History of the half-plane transformation: scalar series (U, iota', iota'',
/// a0, b_BMD) plus truncated Taylor jets of iota_t at the tracked user points.
struct IotaResult {
  std::vector<IotaSample> samples;
  std::vector<Cplx> centers;
  std::vector<double> center_radius;  // conservative analyticity clearance
  int jet_order = 12;
  double t_end = 0.0;
  double max_imag_residual = 0.0;  // Schwarz-symmetry defect of the center data

  bool has_dense = false;  // deterministic mode: full jet state interpolant
  DenseOutput dense;
  std::vector<double> jet_t;  // SKLE mode: jet snapshot times
  std::vector<std::vector<std::vector<Cplx>>> jet_snaps;  // [time][point][coeff]

  int n_points() const { return static_cast<int>(centers.size()); }

  std::vector<Cplx> jet_at(double t, int point) const {
    const int K = jet_order;
    if (has_dense) {
      const Eigen::VectorXd y = dense.eval(t);
      std::vector<Cplx> out(K + 1);
      const int off = (K + 1) + 2 * (K + 1) * point;
      for (int i = 0; i <= K; ++i) out[i] = {y[off + 2 * i], y[off + 2 * i + 1]};
      return out;
    }
    if (jet_t.empty())
      throw Error(ErrorCode::ConfigInvalid, "no jets stored for this run");
    std::size_t best = 0;
    for (std::size_t i = 1; i < jet_t.size(); ++i)
      if (std::abs(jet_t[i] - t) < std::abs(jet_t[best] - t)) best = i;
    if (std::abs(jet_t[best] - t) > 1e-9)
      throw Error(ErrorCode::ConfigInvalid, "no jet snapshot near requested time");
    return jet_snaps[best][point];
  }

  /// iota_t(z) evaluated from the jet at the tracked point nearest z.
  Cplx iota_at(double t, int point, Cplx z) const {
    const auto jet = jet_at(t, point);
    const Cplx v = z - centers[point];
    if (std::abs(v) > eval_radius_frac_ * center_radius[point])
      throw Error(ErrorCode::CircleCollision,
                  "evaluation point outside the jet's validity radius", point);
    return series::eval(jet, v);
  }

  /// iota_t at the tracked point itself (the jet's constant coefficient).
  Cplx iota_at_center(double t, int point) const { return jet_at(t, point)[0]; }

  double U_at(double t) const { return scalar_at(t, &IotaSample::U); }
  double iota1_at(double t) const { return scalar_at(t, &IotaSample::iota1); }
  double iota2_at(double t) const { return scalar_at(t, &IotaSample::iota2); }

  /// a0(t) by monotone cubic Hermite with the exact derivative 2*iota1^2.
  double a0_at(double t) const {
    const auto [i, th] = bracket(t);
    const IotaSample &a = samples[i], &b = samples[i + 1];
    const double h = b.t - a.t;
    const double d0 = 2 * a.iota1 * a.iota1, d1 = 2 * b.iota1 * b.iota1;
    const double th2 = th * th, th3 = th2 * th;
    return (2 * th3 - 3 * th2 + 1) * a.a0 + (th3 - 2 * th2 + th) * h * d0 +
           (-2 * th3 + 3 * th2) * b.a0 + (th3 - th2) * h * d1;
  }

  /// Inverse of the strictly increasing t -> a0(t).
  double a0_inverse(double v) const {
    double lo = samples.front().t, hi = samples.back().t;
    if (v <= samples.front().a0) return lo;
    if (v >= samples.back().a0) return hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (a0_at(mid) < v)
        lo = mid;
      else
        hi = mid;
      if (hi - lo < 1e-15 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
  }

  double eval_radius_frac_ = 0.75;

 private:
  std::pair<std::size_t, double> bracket(double t) const {
    if (t <= samples.front().t) return {0, 0.0};
    if (t >= samples.back().t)
      return {samples.size() - 2, 1.0};
    std::size_t lo = 0, hi = samples.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (samples[mid].t <= t ? lo : hi) = mid;
    }
    return {lo, (t - samples[lo].t) / (samples[lo + 1].t - samples[lo].t)};
  }

  double scalar_at(double t, double IotaSample::*field) const {
    const auto [i, th] = bracket(t);
    return samples[i].*field + th * (samples[i + 1].*field - samples[i].*field);
  }
};

namespace detail {

// Right side of the jet system at one (xi, s) evaluation. Main jet is real and
// centered at xi; user jets are complex at fixed centers. All series are
// truncated at order K; the removable singularity at xi cancels exactly in
// coefficient space.
struct JetRhs {
  int K;
  const KernelSolution* sol;  // null when N = 0
  double xi;

  bool main(const std::vector<double>& c, std::vector<double>& dc,
            double xi_dot) const {
    if (!(c[1] > 0.0)) return false;  // iota' must stay positive
    std::vector<Cplx> iota_p(K + 1, Cplx{}), f(K + 1, Cplx{});
    for (int i = 0; i < K; ++i) {
      iota_p[i] = double(i + 1) * c[i + 1];
      f[i] = c[i + 1];
    }
    const auto finv = series::inv(f);
    const double c1sq2 = 2.0 * c[1] * c[1];
    std::vector<Cplx> comb(K + 1);
    for (int i = 0; i <= K; ++i) comb[i] = c1sq2 * finv[i] - 2.0 * iota_p[i];
    // comb[0] cancels analytically; drop the roundoff remainder and shift down
    std::vector<Cplx> theta(K + 1, Cplx{});
    for (int i = 0; i < K; ++i) theta[i] = comb[i + 1];
    std::vector<Cplx> rhs = theta;
    if (sol) {
      const auto hser = sol->h_jet(Cplx{xi, 0.0}, K);
      const auto prod = series::mul(iota_p, hser);
      for (int i = 0; i <= K; ++i) rhs[i] += 2.0 * kPi * prod[i];
    }
    for (int i = 0; i <= K; ++i) dc[i] = rhs[i].real();
    if (xi_dot != 0.0)
      for (int i = 0; i < K; ++i) dc[i] += xi_dot * double(i + 1) * c[i + 1];
    return true;
  }

  double imag_residual(const std::vector<double>& c) const {
    if (!sol) return 0.0;
    const auto hser = sol->h_jet(Cplx{xi, 0.0}, 2);
    double m = 0.0;
    for (const Cplx& h : hser) m = std::max(m, std::abs(h.imag()));
    return m;
  }

  bool point(const std::vector<Cplx>& b, Cplx center, double U, double iota1,
             std::vector<Cplx>& db) const {
    const Cplx d = center - xi;
    if (std::abs(d) < 1e-9) return false;
    std::vector<Cplx> ip(K + 1, Cplx{});
    for (int i = 0; i < K; ++i) ip[i] = double(i + 1) * b[i + 1];
    std::vector<Cplx> den = b;
    den[0] -= U;
    if (std::abs(den[0]) < 1e-9) return false;
    const auto t1 = series::inv(den);
    const auto geo = series::geometric(d, static_cast<std::size_t>(K));
    const auto t2 = series::mul(ip, geo);
    std::vector<Cplx> rhs(K + 1);
    const double c1sq2 = 2.0 * iota1 * iota1;
    for (int i = 0; i <= K; ++i) rhs[i] = c1sq2 * t1[i] - 2.0 * t2[i];
    if (sol) {
      const auto hp = sol->h_jet(center, K);
      const auto prod = series::mul(ip, hp);
      for (int i = 0; i <= K; ++i) rhs[i] += 2.0 * kPi * prod[i];
    }
    db = std::move(rhs);
    return true;
  }
};

inline double point_clearance(const Trajectory& traj, Cplx p) {
  double r = std::numeric_limits<double>::infinity();
  const int n = traj.n_slits;
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    r = std::min(r, std::abs(p - traj.xi[i]));
    if (n == 0) continue;
    const SlitVector s = SlitVector::validate(traj.states[i]);
    r = std::min(r, s.distance_to_point(p));
    r = std::min(r, s.distance_to_point(std::conj(p)));
  }
  return r;
}

}  // namespace detail

/// Evolves iota_t along a precomputed deterministic slit trajectory, tracking
/// the center data (U, iota', iota'', a0, b_BMD) and a truncated jet at each
/// user point. The driver must expose a derivative (closed forms do); table
/// drivers route through the SKLE-style frozen-step variant below.
inline IotaResult evolve_iota(const Trajectory& traj, const Driver& driver,
                              double t_max, const std::vector<Cplx>& points,
                              const IotaConfig& cfg = {},
                              KernelCache* cache = nullptr) {
  if (t_max > traj.t_end + 1e-12)
    throw Error(ErrorCode::ConfigInvalid, "t_max beyond the slit trajectory");
  if (!driver.has_derivative())
    throw Error(ErrorCode::ConfigInvalid,
                "driver lacks a derivative; use the path-driven overload");
  const int K = cfg.jet_order;
  const int P = static_cast<int>(points.size());
  const int n = traj.n_slits;

  IotaResult out;
  out.jet_order = K;
  out.centers = points;
  out.t_end = t_max;
  out.eval_radius_frac_ = cfg.eval_radius_frac;
  for (const Cplx& p : points) {
    const double r = detail::point_clearance(traj, p);
    if (r < cfg.min_clearance)
      throw Error(ErrorCode::CircleCollision,
                  "tracked point too close to a slit or the driving path");
    out.center_radius.push_back(r);
  }

  const int D = (K + 1) + 2 * (K + 1) * P + 1;
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(D);
  y0[0] = driver.xi(0.0);
  y0[1] = 1.0;
  for (int p = 0; p < P; ++p) {
    const int off = (K + 1) + 2 * (K + 1) * p;
    y0[off + 0] = points[p].real();
    y0[off + 1] = points[p].imag();
    y0[off + 2] = 1.0;
  }

  auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const double xi = driver.xi(std::min(t, traj.t_end));
    std::shared_ptr<const KernelSolution> sol;
    if (n > 0) {
      const std::vector<double> coords = traj.coords_at(std::min(t, traj.t_end));
      if (!SlitVector::is_valid(coords)) return false;
      const SlitVector s = SlitVector::validate(coords);
      if (s.distance(xi) < cfg.min_clearance) return false;
      sol = cache ? cache->get(s, xi, cfg.kernel)
                  : std::make_shared<const KernelSolution>(s, xi, cfg.kernel);
    }
    detail::JetRhs jr{K, sol.get(), xi};
    std::vector<double> c(y.data(), y.data() + K + 1), dc(K + 1);
    if (!jr.main(c, dc, driver.xi_dot(t))) return false;
    for (int i = 0; i <= K; ++i) dy[i] = dc[i];
    const double U = c[0], i1 = c[1];
    std::vector<Cplx> b(K + 1), db;
    for (int p = 0; p < P; ++p) {
      const int off = (K + 1) + 2 * (K + 1) * p;
      for (int i = 0; i <= K; ++i) b[i] = {y[off + 2 * i], y[off + 2 * i + 1]};
      if (!jr.point(b, points[p], U, i1, db)) return false;
      for (int i = 0; i <= K; ++i) {
        dy[off + 2 * i] = db[i].real();
        dy[off + 2 * i + 1] = db[i].imag();
      }
    }
    dy[D - 1] = 2.0 * i1 * i1;
    return true;
  };

  const RkResult res = rk45(rhs, 0.0, std::move(y0), t_max, cfg.rk, &out.dense);
  out.has_dense = true;

  // scalar history on a uniform grid, b_BMD by post-pass kernel solves
  for (int i = 0; i <= cfg.n_samples; ++i) {
    const double t = t_max * double(i) / cfg.n_samples;
    const Eigen::VectorXd y = out.dense.eval(t);
    IotaSample smp;
    smp.t = t;
    smp.xi = driver.xi(t);
    smp.U = y[0];
    smp.iota1 = y[1];
    smp.iota2 = 2.0 * y[2];
    smp.a0 = y[D - 1];
    smp.bmd = 0.0;
    if (n > 0) {
      const SlitVector s = traj.state_at(std::min(t, traj.t_end));
      auto sol = cache ? cache->get(s, smp.xi, cfg.kernel)
                       : std::make_shared<const KernelSolution>(s, smp.xi, cfg.kernel);
      smp.bmd = sol->bmd_constant();
      detail::JetRhs jr{K, sol.get(), smp.xi};
      out.max_imag_residual =
          std::max(out.max_imag_residual, jr.imag_residual({}));
    }
    out.samples.push_back(smp);
  }
  (void)res;
  return out;
}

/// Evolves iota_t along a sampled SKLE path: within each macro step the driver
/// is frozen at xi_k (matching the Euler-Maruyama construction of the path) and
/// the main jet is re-centered afterwards by an exact polynomial Taylor shift.
/// Scalar history lands on the macro grid, as the Ito comparison requires.
inline IotaResult evolve_iota(const SklePath& path,
                              const std::vector<Cplx>& points,
                              const IotaConfig& cfg = {},
                              KernelCache* cache = nullptr) {
  const int K = cfg.jet_order;
  const int P = static_cast<int>(points.size());
  const int n = path.n_slits;
  if (path.t.size() < 2)
    throw Error(ErrorCode::ConfigInvalid, "path too short");

  IotaResult out;
  out.jet_order = K;
  out.centers = points;
  out.t_end = path.t.back();
  out.eval_radius_frac_ = cfg.eval_radius_frac;
  for (const Cplx& p : points) {
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.t.size(); ++i) {
      r = std::min(r, std::abs(p - path.xi[i]));
      if (n > 0) {
        const SlitVector s = SlitVector::validate(path.states[i]);
        r = std::min(r, s.distance_to_point(p));
        r = std::min(r, s.distance_to_point(std::conj(p)));
      }
    }
    if (r < cfg.min_clearance)
      throw Error(ErrorCode::CircleCollision,
                  "tracked point too close to a slit or the driving path");
    out.center_radius.push_back(r);
  }

  std::vector<double> c(K + 1, 0.0);
  c[0] = path.xi.front();
  c[1] = 1.0;
  std::vector<std::vector<Cplx>> jets(P, std::vector<Cplx>(K + 1, Cplx{}));
  for (int p = 0; p < P; ++p) {
    jets[p][0] = points[p];
    jets[p][1] = 1.0;
  }
  double a0 = 0.0;

  const int jet_stride =
      std::max<std::size_t>(1, (path.t.size() - 1) / 50);

  auto snapshot = [&](std::size_t k, double bmd) {
    IotaSample smp;
    smp.t = path.t[k];
    smp.xi = path.xi[k];
    smp.U = c[0];
    smp.iota1 = c[1];
    smp.iota2 = 2.0 * c[2];
    smp.a0 = a0;
    smp.bmd = bmd;
    out.samples.push_back(smp);
    if (P > 0 && (k % jet_stride == 0 || k + 1 == path.t.size())) {
      out.jet_t.push_back(path.t[k]);
      out.jet_snaps.push_back(jets);
    }
  };

  for (std::size_t k = 0; k + 1 < path.t.size(); ++k) {
    const double xi = path.xi[k];
    const double h_macro = path.t[k + 1] - path.t[k];
    const auto& s0 = path.states[k];
    const auto& s1 = path.states[k + 1];

    auto kernel_at = [&](double th) -> std::shared_ptr<const KernelSolution> {
      if (n == 0) return nullptr;
      std::vector<double> coords(s0.size());
      for (std::size_t i = 0; i < coords.size(); ++i)
        coords[i] = s0[i] + th * (s1[i] - s0[i]);
      const SlitVector s = SlitVector::validate(std::move(coords));
      if (s.distance(xi) < cfg.min_clearance)
        throw Error(ErrorCode::CircleCollision,
                    "driving point too close to a slit for the transform");
      return cache ? cache->get(s, xi, cfg.kernel)
                   : std::make_shared<const KernelSolution>(s, xi, cfg.kernel);
    };

    double bmd_k = 0.0;
    if (n > 0) bmd_k = kernel_at(0.0)->bmd_constant();
    snapshot(k, bmd_k);

    const int m = cfg.substeps_per_macro;
    for (int sub = 0; sub < m; ++sub) {
      const double h = h_macro / m;
      const double th0 = double(sub) / m;
      // RK4 on [jets | a0] with xi frozen and s(t) interpolated
      auto eval = [&](double th, const std::vector<double>& cc,
                      const std::vector<std::vector<Cplx>>& bb,
                      std::vector<double>& dcc,
                      std::vector<std::vector<Cplx>>& dbb) {
        auto sol = kernel_at(th);
        detail::JetRhs jr{K, sol.get(), xi};
        if (!jr.main(cc, dcc, 0.0))
          throw Error(ErrorCode::StepUnderflow, "iota' lost positivity");
        dbb.resize(P);
        for (int p = 0; p < P; ++p)
          if (!jr.point(bb[p], points[p], cc[0], cc[1], dbb[p]))
            throw Error(ErrorCode::CircleCollision,
                        "tracked point collided with the driving point", p);
      };
      std::vector<double> k1(K + 1), k2(K + 1), k3(K + 1), k4(K + 1), tmp(K + 1);
      std::vector<std::vector<Cplx>> b1, b2, b3, b4, btmp(P);
      auto advance = [&](const std::vector<double>& kc,
                         const std::vector<std::vector<Cplx>>& kb, double f) {
        for (int i = 0; i <= K; ++i) tmp[i] = c[i] + f * kc[i];
        for (int p = 0; p < P; ++p) {
          btmp[p].resize(K + 1);
          for (int i = 0; i <= K; ++i) btmp[p][i] = jets[p][i] + f * kb[p][i];
        }
      };
      const double dth = (h / h_macro);
      eval(th0, c, jets, k1, b1);
      advance(k1, b1, 0.5 * h);
      eval(th0 + 0.5 * dth, tmp, btmp, k2, b2);
      advance(k2, b2, 0.5 * h);
      eval(th0 + 0.5 * dth, tmp, btmp, k3, b3);
      advance(k3, b3, h);
      eval(th0 + dth, tmp, btmp, k4, b4);
      double a0_incr = 0.0;
      {
        auto sq = [&](const std::vector<double>& kc, double f) {
          // a0' = 2 iota1^2 evaluated at the RK4 stage states
          const double i1 = c[1] + f * kc[1];
          return 2.0 * i1 * i1;
        };
        a0_incr = (h / 6.0) * (2.0 * c[1] * c[1] + 2.0 * sq(k1, 0.5 * h) +
                               2.0 * sq(k2, 0.5 * h) + sq(k3, h));
      }
      for (int i = 0; i <= K; ++i)
        c[i] += (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      for (int p = 0; p < P; ++p)
        for (int i = 0; i <= K; ++i)
          jets[p][i] += (h / 6.0) * (b1[p][i] + 2.0 * b2[p][i] + 2.0 * b3[p][i] +
                                     b4[p][i]);
      a0 += a0_incr;
    }

    // re-center the main jet at the next driver value (exact polynomial shift)
    const double dxi = path.xi[k + 1] - path.xi[k];
    if (dxi != 0.0) {
      std::vector<Cplx> cc(c.begin(), c.end());
      cc = series::shift(cc, Cplx{dxi, 0.0});
      for (int i = 0; i <= K; ++i) c[i] = cc[i].real();
    }
    if (!(c[1] > 0.0))
      throw Error(ErrorCode::StepUnderflow, "iota' lost positivity after shift");
  }
  snapshot(path.t.size() - 1,
           out.samples.empty() ? 0.0 : out.samples.back().bmd);
  return out;
}

/// Half-plane Loewner chain g0 driven by the transformed data (U, iota'):
/// dg0/dt = 2 iota1(t)^2 / (g0 - U(t)).
struct HalfplaneChain {
  std::vector<Cplx> points;
  std::vector<std::optional<double>> swallowed_at;
  std::vector<Cplx> g_end;
  DenseOutput dense;

  Cplx g_at(double t, int p) const {
    const Eigen::VectorXd y = dense.eval(t);
    return {y[2 * p], y[2 * p + 1]};
  }
};

inline HalfplaneChain loewner_halfplane(const IotaResult& hist,
                                        const std::vector<Cplx>& points,
                                        double t_max, double eps_swallow = 1e-4,
                                        const RkOptions& rk = {1e-10, 1e-12, 1e-4,
                                                               0.02, 1e-12,
                                                               2'000'000}) {
  const int P = static_cast<int>(points.size());
  HalfplaneChain out;
  out.points = points;
  out.swallowed_at.assign(P, std::nullopt);
  std::vector<bool> frozen(P, false);

  auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const double U = hist.U_at(t);
    const double i1 = hist.iota1_at(t);
    for (int p = 0; p < P; ++p) {
      if (frozen[p]) {
        dy[2 * p] = dy[2 * p + 1] = 0.0;
        continue;
      }
      const Cplx g{y[2 * p], y[2 * p + 1]};
      if (std::abs(g - U) < 0.2 * eps_swallow) return false;
      const Cplx v = 2.0 * i1 * i1 / (g - U);
      dy[2 * p] = v.real();
      dy[2 * p + 1] = v.imag();
    }
    return true;
  };

  Eigen::VectorXd y0(2 * P);
  for (int p = 0; p < P; ++p) {
    y0[2 * p] = points[p].real();
    y0[2 * p + 1] = points[p].imag();
  }

  auto do_swallow = [&](double t, Eigen::VectorXd& y, double radius) {
    bool any = false;
    const double U = hist.U_at(t);
    for (int p = 0; p < P; ++p) {
      if (frozen[p]) continue;
      const Cplx g{y[2 * p], y[2 * p + 1]};
      if (std::abs(g - U) <= radius) {
        frozen[p] = true;
        out.swallowed_at[p] = t;
        any = true;
      }
    }
    return any;
  };
  auto observer = [&](double t, Eigen::VectorXd& y) {
    do_swallow(t, y, eps_swallow);
    return StepAction::Continue;
  };
  auto rescue = [&](double t, Eigen::VectorXd& y) {
    return do_swallow(t, y, 20.0 * eps_swallow);
  };

  const RkResult res =
      rk45(rhs, 0.0, std::move(y0), t_max, rk, &out.dense, observer, {}, rescue);
  for (int p = 0; p < P; ++p) out.g_end.push_back({res.y[2 * p], res.y[2 * p + 1]});
  return out;
}

/// hcap^H of the transformed hull via the probe average of z (g0(z) - z) on a
/// semicircle of radius rho; compare against the accumulated a0.
inline double hcap_halfplane_estimate(const IotaResult& hist, double t, double rho,
                                      int n_probes = 64) {
  std::vector<Cplx> probes(n_probes);
  for (int k = 0; k < n_probes; ++k) {
    const double th = (k + 0.5) * kPi / n_probes;
    probes[k] = rho * Cplx{std::cos(th), std::sin(th)};
  }
  const HalfplaneChain ch = loewner_halfplane(hist, probes, t);
  Cplx mean{0, 0};
  for (int k = 0; k < n_probes; ++k) mean += probes[k] * (ch.g_end[k] - probes[k]);
  mean /= double(n_probes);
  return mean.real();
}

struct ItoGap {
  double rms_gap = 0.0;
  double max_gap = 0.0;
  std::vector<double> gaps;
};

/// Integrates the semimartingale form of the transformed driver,
///   dU = iota1 * alpha dB + iota1 (b_BMD + b) dt + (1/2) iota2 (alpha^2 - 6) dt,
/// with the same increments as the path, and compares against the geometric
/// U(t) = iota_t(xi(t)) from the jet evolution. The drift term follows from
/// d/dt iota_t(xi) = -3 iota'' + iota' b_BMD together with dxi = alpha dB + b dt;
/// with b = -b_BMD it cancels, so the transformed driver of the locality
/// evolution is a time-changed sqrt(6) Brownian motion.
inline ItoGap ito_drive_check(const SklePath& path, const CoefficientSpec& coeffs,
                              const IotaResult& hist,
                              KernelCache* cache = nullptr,
                              const KernelConfig& kcfg = {}) {
  if (path.increments.empty())
    throw Error(ErrorCode::IncrementMismatch, "path has no recorded increments");
  if (hist.samples.size() != path.t.size())
    throw Error(ErrorCode::IncrementMismatch,
                "iota history grid does not match the path grid");
  ItoGap out;
  double u = path.xi.front();
  out.gaps.push_back(0.0);
  double sq_acc = 0.0;
  for (std::size_t k = 0; k + 1 < path.t.size(); ++k) {
    const IotaSample& smp = hist.samples[k];
    const double dt = path.t[k + 1] - path.t[k];
    const SlitVector s = path.state_at_index(k);
    const double alpha = coeffs.alpha.eval(path.xi[k], s, nullptr, cache, kcfg);
    double b;
    if (coeffs.b.kind() == Coefficient::Kind::BmdScaled)
      b = coeffs.b.value() * smp.bmd;
    else
      b = coeffs.b.eval(path.xi[k], s, nullptr, cache, kcfg);
    u += smp.iota1 * alpha * path.increments[k] +
         smp.iota1 * (smp.bmd + b) * dt +
         0.5 * smp.iota2 * (alpha * alpha - 6.0) * dt;
    const double gap = u - hist.samples[k + 1].U;
    out.gaps.push_back(gap);
    out.max_gap = std::max(out.max_gap, std::abs(gap));
    sq_acc += gap * gap;
  }
  out.rms_gap = std::sqrt(sq_acc / out.gaps.size());
  return out;
}

}  // namespace kl
