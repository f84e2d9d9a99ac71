#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "kl/common.hpp"

namespace kl {

/// Right-hand side evaluation; returns false when the stage state is outside the
/// domain of validity (the step is then rejected and halved).
using Rhs = std::function<bool(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;

enum class StepAction { Continue, Stop };

struct RkOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h_init = 1e-3;
  double h_max = 0.1;
  double h_min = 1e-12;
  long max_steps = 2'000'000;
};

struct DenseSeg {
  double t0, t1;
  Eigen::VectorXd y0, f0, y1, f1;
};

/// Piecewise cubic Hermite interpolant assembled from accepted steps.
class DenseOutput {
 public:
  void add(DenseSeg seg) { segs_.push_back(std::move(seg)); }
  bool empty() const { return segs_.empty(); }
  double t_front() const { return segs_.front().t0; }
  double t_back() const { return segs_.back().t1; }
  const std::vector<DenseSeg>& segments() const { return segs_; }

  /// Interpolant of the first m state components only.
  DenseOutput head(Eigen::Index m) const {
    DenseOutput out;
    for (const DenseSeg& s : segs_)
      out.add({s.t0, s.t1, s.y0.head(m), s.f0.head(m), s.y1.head(m), s.f1.head(m)});
    return out;
  }

  Eigen::VectorXd eval(double t) const {
    if (segs_.empty())
      throw Error(ErrorCode::ConfigInvalid, "empty dense output");
    const DenseSeg& s = locate(t);
    const double h = s.t1 - s.t0;
    const double th = std::clamp((t - s.t0) / h, 0.0, 1.0);
    const double th2 = th * th, th3 = th2 * th;
    return (2 * th3 - 3 * th2 + 1) * s.y0 + ((th3 - 2 * th2 + th) * h) * s.f0 +
           (-2 * th3 + 3 * th2) * s.y1 + ((th3 - th2) * h) * s.f1;
  }

 private:
  const DenseSeg& locate(double t) const {
    std::size_t lo = 0, hi = segs_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (segs_[mid].t1 < t)
        lo = mid + 1;
      else
        hi = mid;
    }
    return segs_[lo];
  }
  std::vector<DenseSeg> segs_;
};

struct RkResult {
  bool stopped = false;  // observer requested stop before t_end
  double t = 0.0;
  Eigen::VectorXd y;
  long steps = 0;
};

/// Dormand-Prince 5(4) with FSAL, error-based step control, an optional step-size
/// cap, a post-step observer that may mutate the state (freezing coordinates) or
/// stop the run, and an underflow hook that may rescue a collapsing step.
inline RkResult rk45(
    const Rhs& rhs, double t0, Eigen::VectorXd y0, double t_end,
    const RkOptions& opt = {}, DenseOutput* dense = nullptr,
    const std::function<StepAction(double, Eigen::VectorXd&)>& observer = {},
    const std::function<double(double, const Eigen::VectorXd&)>& step_cap = {},
    const std::function<bool(double, Eigen::VectorXd&)>& on_underflow = {}) {
  static const double A[6][6] = {
      {1.0 / 5, 0, 0, 0, 0, 0},
      {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
      {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
      {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static const double C[6] = {1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static const double E[7] = {35.0 / 384 - 5179.0 / 57600,
                              0.0,
                              500.0 / 1113 - 7571.0 / 16695,
                              125.0 / 192 - 393.0 / 640,
                              -2187.0 / 6784 + 92097.0 / 339200,
                              11.0 / 84 - 187.0 / 2100,
                              -1.0 / 40};

  const auto n = y0.size();
  std::vector<Eigen::VectorXd> k(7, Eigen::VectorXd(n));
  Eigen::VectorXd y = std::move(y0), ytmp(n), ynew(n), err(n);

  RkResult res;
  res.t = t0;
  double t = t0;
  if (!rhs(t, y, k[0])) throw Error(ErrorCode::StepUnderflow, "invalid initial state");
  double h = std::min(opt.h_init, t_end - t0);
  bool have_k0 = true;

  while (t < t_end) {
    if (step_cap) h = std::min(h, std::max(step_cap(t, y), opt.h_min));
    h = std::min(h, t_end - t);
    if (h < opt.h_min) {
      if (on_underflow && on_underflow(t, y)) {
        h = std::min(opt.h_init, t_end - t);
        have_k0 = false;
        if (!rhs(t, y, k[0]))
          throw Error(ErrorCode::StepUnderflow, "state invalid after rescue");
        have_k0 = true;
        continue;
      }
      throw Error(ErrorCode::StepUnderflow,
                  "step below minimum at t = " + std::to_string(t));
    }
    if (++res.steps > opt.max_steps)
      throw Error(ErrorCode::StepUnderflow, "step budget exhausted");

    if (!have_k0) {
      if (!rhs(t, y, k[0])) throw Error(ErrorCode::StepUnderflow, "invalid state");
      have_k0 = true;
    }

    bool stage_ok = true;
    for (int s = 1; s < 7 && stage_ok; ++s) {
      ytmp = y;
      for (int j = 0; j < s; ++j)
        if (A[s - 1][j] != 0.0) ytmp += (h * A[s - 1][j]) * k[j];
      stage_ok = rhs(t + C[s - 1] * h, ytmp, k[s]);
    }
    if (!stage_ok) {
      h *= 0.5;
      continue;
    }
    ynew = ytmp;  // stage 7 uses the 5th-order weights: ynew = y + h sum b_i k_i

    err.setZero();
    for (int s = 0; s < 7; ++s)
      if (E[s] != 0.0) err += (h * E[s]) * k[s];
    double nrm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      nrm += std::pow(err[i] / sc, 2);
    }
    nrm = std::sqrt(nrm / double(n));

    if (nrm <= 1.0) {
      if (dense) dense->add({t, t + h, y, k[0], ynew, k[6]});
      t += h;
      y.swap(ynew);
      k[0].swap(k[6]);  // FSAL
      have_k0 = true;
      if (observer) {
        const StepAction act = observer(t, y);
        if (act == StepAction::Stop) {
          res.stopped = true;
          break;
        }
        have_k0 = false;  // observer may have mutated y
      }
      const double fac = std::clamp(0.9 * std::pow(std::max(nrm, 1e-10), -0.2), 0.2, 5.0);
      h = std::min(h * fac, opt.h_max);
    } else {
      const double fac = std::clamp(0.9 * std::pow(nrm, -0.2), 0.2, 1.0);
      h *= fac;
    }
  }
  res.t = t;
  res.y = std::move(y);
  return res;
}

/// One classical RK4 step; empty when any stage leaves the validity domain.
inline std::optional<Eigen::VectorXd> rk4_step(const Rhs& rhs, double t,
                                               const Eigen::VectorXd& y, double h) {
  Eigen::VectorXd k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size());
  if (!rhs(t, y, k1)) return std::nullopt;
  if (!rhs(t + 0.5 * h, y + (0.5 * h) * k1, k2)) return std::nullopt;
  if (!rhs(t + 0.5 * h, y + (0.5 * h) * k2, k3)) return std::nullopt;
  if (!rhs(t + h, y + h * k3, k4)) return std::nullopt;
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace kl
