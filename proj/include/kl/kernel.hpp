#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "kl/common.hpp"
#include "kl/slit.hpp"

namespace kl {

struct KernelConfig {
  int charges_per_slit = 48;       // M, charge points per slit
  int max_charges_per_slit = 384;  // refinement ceiling
  double residual_tol = 1e-8;      // RMS collocation residual (canonical frame)
  bool refine = true;              // double M until residual_tol or ceiling
  bool throw_if_unconverged = false;
};

/// Slit-coordinate drift b_l(xi0, s), l = 1..3N, ordered (heights, left x, right x).
struct DriftVector {
  std::vector<double> b;
};

/// Discretized BMD complex Poisson kernel Psi_s(., xi0) for a standard slit domain.
///
/// Construction and storage are in a canonical frame: xi0 translated to the
/// origin and all coordinates divided by a power of two picked from the largest
/// coordinate's binade. Every exported quantity maps back through that frame, so
/// translation invariance is exact and scaling by powers of two is bit-exact.
///
/// Im Psi = P + u with P the half-plane Poisson kernel (1/pi) Im(-1/z) and u a
/// mirror-image log potential of point charges on the slits. Charges sit at M
/// Chebyshev roots per slit; the per-slit zero-sum constraint is eliminated
/// exactly by solving for partial sums Q, which telescopes the potential into
/// consecutive-pair log differences whose branch cuts lie on the slits.
class KernelSolution {
 public:
  KernelSolution(const SlitVector& s, double xi0, const KernelConfig& cfg = {})
      : slits_(s), xi0_(xi0), cfg_(cfg) {
    const double r = s.distance(xi0);
    if (!(r > kEpsGeom))
      throw Error(ErrorCode::PointTooClose, "xi0 within eps_geom of a slit");
    scale_ = s.count() == 0 ? 1.0 : pow2_floor(s.frame_magnitude(xi0));
    canon_ = s.translated(-xi0).scaled(1.0 / scale_);
    int m = cfg.charges_per_slit;
    solve(m);
    while (cfg.refine && residual_ > cfg.residual_tol &&
           2 * m <= cfg.max_charges_per_slit) {
      m *= 2;
      solve(m);
    }
    if (cfg.refine && cfg.throw_if_unconverged && residual_ > cfg.residual_tol)
      throw Error(ErrorCode::IllConditioned,
                  "collocation residual " + std::to_string(residual_));
  }

  const SlitVector& slits() const { return slits_; }
  double xi0() const { return xi0_; }
  int charges_per_slit() const { return m_; }
  /// RMS collocation residual in the canonical frame.
  double residual() const { return residual_; }

  /// Psi_s(z, xi0), original frame.
  Cplx psi(Cplx z) const {
    const Cplx zc = (z - xi0_) / scale_;
    if (std::abs(zc) < kEpsGeom)
      throw Error(ErrorCode::EvalOnSingularity, "z at the driving point");
    guard_on_slit(z);
    return psi_canonical(zc) / scale_;
  }

  /// H(z, xi0) = Psi + 1/(pi (z - xi0)): the regular part, original frame.
  Cplx h(Cplx z) const {
    guard_on_slit(z);
    return h_canonical((z - xi0_) / scale_) / scale_;
  }

  /// Taylor coefficients of H(., xi0) about z = center, orders 0..order,
  /// original frame. center must be off the slits.
  std::vector<Cplx> h_jet(Cplx center, int order) const {
    const Cplx zc = (center - xi0_) / scale_;
    std::vector<Cplx> out(order + 1, Cplx{0.0, 0.0});
    out[0] = h_canonical(zc);
    std::vector<Cplx> pa(order + 1), pb(order + 1), pa2(order + 1), pb2(order + 1);
    for (std::size_t j = 0; j < w_.size(); ++j) {
      const auto& w = w_[j];
      for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        const Cplx ia = 1.0 / (zc - w[k]), ib = 1.0 / (zc - w[k + 1]);
        const Cplx ia2 = 1.0 / (zc - std::conj(w[k])),
                   ib2 = 1.0 / (zc - std::conj(w[k + 1]));
        Cplx fa = ia, fb = ib, fa2 = ia2, fb2 = ib2;
        const double q = Q_[j][k];
        double sgn = 1.0;
        for (int m = 1; m <= order; ++m) {
          out[m] += Cplx(0, 1) * q * (sgn / m) * (fa - fb - fa2 + fb2);
          fa *= ia; fb *= ib; fa2 *= ia2; fb2 *= ib2;
          sgn = -sgn;
        }
      }
    }
    // map to original frame: coefficient of (z-center)^m picks 1/scale^{m+1}
    double f = 1.0 / scale_;
    for (int m = 0; m <= order; ++m) {
      out[m] *= f;
      f /= scale_;
    }
    return out;
  }

  /// Constant boundary value of Im Psi on slit j, original frame.
  double slit_constant(int j) const { return c_[j] / scale_; }

  /// BMD domain constant b_BMD(xi0, s) = 2 pi H(xi0, xi0).
  double bmd_constant() const {
    if (slits_.count() == 0) return 0.0;
    const Cplx h0 = h_canonical(Cplx{0.0, 0.0}) / scale_;
    // exact anti-symmetry of the mirror pairs makes this real up to roundoff
    if (std::abs(h0.imag()) > 1e-10)
      throw Error(ErrorCode::IllConditioned,
                  "Im H(xi0) = " + std::to_string(h0.imag()));
    return 2.0 * kPi * h0.real();
  }

  /// The 3N slit drifts. Heights use the solved slit constants (Im Psi is
  /// constant on each slit; the constant is the enforced unknown), horizontal
  /// components evaluate Re Psi at the tips.
  DriftVector drift() const {
    const int n = slits_.count();
    DriftVector d;
    d.b.resize(3 * n);
    for (int j = 0; j < n; ++j) {
      d.b[j] = -2.0 * kPi * c_[j] / scale_;
      const Cplx pl = psi_canonical((slits_.left(j) - xi0_) / scale_) / scale_;
      const Cplx pr = psi_canonical((slits_.right(j) - xi0_) / scale_) / scale_;
      d.b[n + j] = -2.0 * kPi * pl.real();
      d.b[2 * n + j] = -2.0 * kPi * pr.real();
    }
    return d;
  }

  /// Psi in the canonical frame (xi0 = 0, unit-scale slits).
  Cplx psi_canonical(Cplx z) const { return -1.0 / (kPi * z) + h_canonical(z); }

  Cplx h_canonical(Cplx z) const {
    Cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < w_.size(); ++j) {
      if (use_far(j, z)) {
        acc += far_eval(j, z);
        continue;
      }
      const auto& w = w_[j];
      Cplx sum{0.0, 0.0};
      for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        const Cplx d = std::log((z - w[k]) / (z - w[k + 1])) -
                       std::log((z - std::conj(w[k])) / (z - std::conj(w[k + 1])));
        sum += Q_[j][k] * d;
      }
      acc += Cplx(0, 1) * sum;
    }
    return acc;
  }

 private:
  static std::vector<double> cheb_roots(double a, double b, int m) {
    std::vector<double> out(m);
    for (int k = 1; k <= m; ++k)
      out[k - 1] = 0.5 * (a + b) + 0.5 * (b - a) * std::cos((2 * k - 1) * kPi / (2 * m));
    return out;
  }

  void guard_on_slit(Cplx z) const {
    for (int j = 0; j < slits_.count(); ++j) {
      if (std::abs(z.imag() - slits_.y(j)) < kEpsGeom && z.real() > slits_.x(j) + kEpsGeom &&
          z.real() < slits_.xr(j) - kEpsGeom)
        throw Error(ErrorCode::EvalOnSingularity, "z in the interior of a slit", j + 1);
    }
  }

  void solve(int m) {
    m_ = m;
    const int n = canon_.count();
    w_.assign(n, {});
    Q_.assign(n, {});
    c_.assign(n, 0.0);
    residual_ = 0.0;
    if (n == 0) return;

    for (int j = 0; j < n; ++j) {
      auto xs = cheb_roots(canon_.x(j), canon_.xr(j), m);
      w_[j].resize(m);
      for (int k = 0; k < m; ++k) w_[j][k] = Cplx(xs[k], canon_.y(j));
    }

    const int rows = 2 * m * n;
    const int nq = n * (m - 1);
    Eigen::MatrixXd A(rows, nq + n);
    Eigen::VectorXd rhs(rows);
    int r = 0;
    for (int j = 0; j < n; ++j) {
      auto px = cheb_roots(canon_.x(j), canon_.xr(j), 2 * m);
      for (double x : px) {
        const Cplx p(x, canon_.y(j));
        int col = 0;
        for (int jj = 0; jj < n; ++jj) {
          for (int k = 0; k + 1 < m; ++k) {
            const Cplx a = w_[jj][k], b = w_[jj][k + 1];
            // Re of the telescoped pair difference: continuous across the cut
            A(r, col++) = std::log(std::abs((p - a) / (p - b))) -
                          std::log(std::abs((p - std::conj(a)) / (p - std::conj(b))));
          }
        }
        for (int jj = 0; jj < n; ++jj) A(r, nq + jj) = (jj == j) ? -1.0 : 0.0;
        rhs(r) = -(1.0 / kPi) * (p.imag() / std::norm(p));
        ++r;
      }
    }
    Eigen::VectorXd sol = A.colPivHouseholderQr().solve(rhs);
    residual_ = std::sqrt((A * sol - rhs).squaredNorm() / rows);
    for (int j = 0; j < n; ++j) {
      Q_[j].assign(sol.data() + j * (m - 1), sol.data() + (j + 1) * (m - 1));
      c_[j] = sol(nq + j);
    }
    build_far_field();
  }

  // Far-field multipole per slit: with q = diff(Q) (zero total charge), the
  // telescoped log sum equals -i sum_m A_m / (m (z-c)^m) plus the mirrored
  // conjugate series; truncation (1/2.5)^P at the switch radius.
  void build_far_field() {
    const int P = 44;
    const int n = canon_.count();
    far_center_.assign(n, Cplx{});
    far_radius_.assign(n, 0.0);
    far_mom_.assign(n, {});
    for (int j = 0; j < n; ++j) {
      const double half = 0.5 * (canon_.xr(j) - canon_.x(j));
      far_center_[j] = Cplx(0.5 * (canon_.x(j) + canon_.xr(j)), canon_.y(j));
      far_radius_[j] = 2.5 * half;
      const int m = static_cast<int>(w_[j].size());
      std::vector<double> q(m);
      q[0] = Q_[j][0];
      for (int k = 1; k + 1 < m; ++k) q[k] = Q_[j][k] - Q_[j][k - 1];
      q[m - 1] = -Q_[j][m - 2];
      far_mom_[j].assign(P, Cplx{});
      for (int k = 0; k < m; ++k) {
        const Cplx d = w_[j][k] - far_center_[j];
        Cplx p = d;
        for (int mm = 0; mm < P; ++mm) {
          far_mom_[j][mm] += q[k] * p;
          p *= d;
        }
      }
    }
  }

  bool use_far(std::size_t j, Cplx z) const {
    return std::abs(z - far_center_[j]) > far_radius_[j] &&
           std::abs(z - std::conj(far_center_[j])) > far_radius_[j];
  }

  Cplx far_eval(std::size_t j, Cplx z) const {
    const Cplx iu = 1.0 / (z - far_center_[j]);
    const Cplx il = 1.0 / (z - std::conj(far_center_[j]));
    Cplx pu = iu, pl = il, acc{0.0, 0.0};
    const auto& mom = far_mom_[j];
    for (std::size_t m = 0; m < mom.size(); ++m) {
      acc += (mom[m] * pu - std::conj(mom[m]) * pl) / double(m + 1);
      pu *= iu;
      pl *= il;
    }
    return Cplx(0, -1) * acc;
  }

  SlitVector slits_;
  double xi0_ = 0.0;
  KernelConfig cfg_;
  double scale_ = 1.0;
  SlitVector canon_;
  int m_ = 0;
  std::vector<std::vector<Cplx>> w_;    // charge points per slit (canonical)
  std::vector<std::vector<double>> Q_;  // partial charge sums per slit
  std::vector<double> c_;               // slit constants (canonical)
  double residual_ = 0.0;
  std::vector<Cplx> far_center_;
  std::vector<double> far_radius_;
  std::vector<std::vector<Cplx>> far_mom_;
};

inline KernelSolution solve_kernel(const SlitVector& s, double xi0,
                                   const KernelConfig& cfg = {}) {
  return KernelSolution(s, xi0, cfg);
}

inline DriftVector drift_b(const SlitVector& s, double xi0,
                           const KernelConfig& cfg = {}) {
  return KernelSolution(s, xi0, cfg).drift();
}

inline double bmd_constant(const SlitVector& s, double xi0,
                           const KernelConfig& cfg = {}) {
  return KernelSolution(s, xi0, cfg).bmd_constant();
}

/// Concurrent kernel cache keyed by (s, xi0) quantized to 1e-9 and the charge
/// budget. Values are immutable; insertion is last-writer-wins.
class KernelCache {
 public:
  explicit KernelCache(double quantum = 1e-9, std::size_t max_entries = 4096)
      : quantum_(quantum), max_entries_(max_entries) {}

  std::shared_ptr<const KernelSolution> get(const SlitVector& s, double xi0,
                                            const KernelConfig& cfg = {}) {
    const std::uint64_t key = hash_key(s, xi0, cfg);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end()) {
        ++hits_;
        return it->second;
      }
    }
    auto sol = std::make_shared<const KernelSolution>(s, xi0, cfg);
    std::lock_guard<std::mutex> lock(mu_);
    ++misses_;
    if (map_.size() >= max_entries_) map_.clear();  // stepping locality: cheap reset
    map_[key] = sol;
    return sol;
  }

  std::uint64_t hash_key(const SlitVector& s, double xi0,
                         const KernelConfig& cfg) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::int64_t v) { h = fnv1a(&v, sizeof(v), h); };
    for (double u : s.coords()) mix(std::llround(u / quantum_));
    mix(std::llround(xi0 / quantum_));
    mix(cfg.charges_per_slit);
    mix(cfg.refine ? cfg.max_charges_per_slit : cfg.charges_per_slit);
    return h;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return map_.size();
  }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

  void clear() {
    std::lock_guard<std::mutex> lock(mu_);
    map_.clear();
  }

 private:
  double quantum_;
  std::size_t max_entries_;
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, std::shared_ptr<const KernelSolution>> map_;
  std::size_t hits_ = 0, misses_ = 0;
};

}  // namespace kl
