#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <vector>

#include "kl/kernel.hpp"
#include "kl/slit.hpp"

namespace kl {

struct LatticeConfig {
  double h = 0.02;        // grid spacing
  double half_width = 4.0;
  double height = 4.0;
};

/// Finite-difference darning oracle for Im Psi: the discrete Laplace problem on
/// a truncated grid with a unit-mass boundary source at xi0, each slit's nodes
/// merged into one super-node (constant value and zero net flux follow from the
/// merged stencil), zero data on the rest of the real axis, and the exact
/// half-plane kernel on the artificial truncation sides (the slit correction
/// decays like |z|^-2, so zero side data would dominate the error budget).
class LatticeSolution {
 public:
  LatticeSolution(const SlitVector& s, double xi0, const LatticeConfig& cfg = {})
      : slits_(s), xi0_(xi0), cfg_(cfg) {
    build();
  }

  double h() const { return cfg_.h; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  /// Im Psi at (x, y), bilinear between grid nodes.
  double value_at(double x, double y) const {
    const double fx = (x - x_lo_) / cfg_.h;
    const double fy = y / cfg_.h;
    const int i = std::clamp(int(std::floor(fx)), 0, nx_ - 1);
    const int j = std::clamp(int(std::floor(fy)), 0, ny_ - 1);
    const double tx = fx - i, ty = fy - j;
    return (1 - tx) * (1 - ty) * V_[node(i, j)] + tx * (1 - ty) * V_[node(i + 1, j)] +
           (1 - tx) * ty * V_[node(i, j + 1)] + tx * ty * V_[node(i + 1, j + 1)];
  }

  /// Merged (darned) value on slit j, the oracle counterpart of the slit constant.
  double slit_value(int j) const { return slit_value_[j]; }

  /// Snapped slit geometry actually used by the lattice.
  const SlitVector& snapped() const { return snapped_; }

  /// Oracle drift: heights from super-node values, horizontal tips from the
  /// discrete harmonic conjugate (anchored to the far-field closed form).
  DriftVector drift() const {
    const int n = slits_.count();
    DriftVector d;
    d.b.resize(3 * n);
    for (int j = 0; j < n; ++j) {
      d.b[j] = -2.0 * kPi * slit_value_[j];
      d.b[n + j] = -2.0 * kPi * tip_re_psi_[2 * j];
      d.b[2 * n + j] = -2.0 * kPi * tip_re_psi_[2 * j + 1];
    }
    return d;
  }

 private:
  int node(int i, int j) const { return j * (nx_ + 1) + i; }

  double halfplane_p(double x, double y) const {
    const double dx = x - xi0_;
    return (1.0 / kPi) * y / (dx * dx + y * y);
  }
  double halfplane_re(double x, double y) const {
    const Cplx z{x, y};
    return std::real(-1.0 / (kPi * (z - xi0_)));
  }

  void build() {
    const double h = cfg_.h;
    nx_ = int(std::lround(2.0 * cfg_.half_width / h));
    ny_ = int(std::lround(cfg_.height / h));
    x_lo_ = xi0_ - cfg_.half_width;
    const int n = slits_.count();

    // snap slits to grid rows/columns
    std::vector<double> snap(3 * n);
    std::vector<int> jrow(n), i0(n), i1(n);
    for (int j = 0; j < n; ++j) {
      jrow[j] = int(std::lround(slits_.y(j) / h));
      i0[j] = int(std::lround((slits_.x(j) - x_lo_) / h));
      i1[j] = int(std::lround((slits_.xr(j) - x_lo_) / h));
      if (i1[j] - i0[j] < 2)
        throw Error(ErrorCode::LatticeTooCoarse,
                    "slit " + std::to_string(j + 1) + " spans fewer than 2 cells",
                    j + 1);
      if (jrow[j] < 2 || jrow[j] > ny_ - 2 || i0[j] < 2 || i1[j] > nx_ - 2)
        throw Error(ErrorCode::ConfigInvalid, "slit outside the lattice box");
      snap[j] = jrow[j] * h;
      snap[n + j] = x_lo_ + i0[j] * h;
      snap[2 * n + j] = x_lo_ + i1[j] * h;
    }
    snapped_ = n > 0 ? SlitVector::validate(snap) : SlitVector::empty();

    // unknown ids: slit groups first, then remaining interior nodes
    std::vector<int> id((nx_ + 1) * (ny_ + 1), -1);
    int nid = 0;
    for (int j = 0; j < n; ++j) {
      for (int i = i0[j]; i <= i1[j]; ++i) id[node(i, jrow[j])] = nid;
      ++nid;
    }
    for (int j = 1; j < ny_; ++j)
      for (int i = 1; i < nx_; ++i)
        if (id[node(i, j)] < 0) id[node(i, j)] = nid++;

    const int src_i = int(std::lround((xi0_ - x_lo_) / h));
    auto boundary_value = [&](int i, int j) -> double {
      const double x = x_lo_ + i * h, y = j * h;
      if (j == 0) return i == src_i ? 1.0 / h : 0.0;
      return halfplane_p(x, y);  // truncation sides and top
    };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * nid);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nid);
    for (int j = 1; j < ny_; ++j)
      for (int i = 1; i < nx_; ++i) {
        const int m = id[node(i, j)];
        const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
        trip.emplace_back(m, m, 4.0);
        for (const auto& q : nb) {
          const bool interior =
              q[0] >= 1 && q[0] <= nx_ - 1 && q[1] >= 1 && q[1] <= ny_ - 1;
          if (interior)
            trip.emplace_back(m, id[node(q[0], q[1])], -1.0);
          else
            rhs[m] += boundary_value(q[0], q[1]);
        }
      }
    Eigen::SparseMatrix<double> A(nid, nid);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
      throw Error(ErrorCode::IllConditioned, "lattice factorization failed");
    const Eigen::VectorXd u = solver.solve(rhs);

    V_.assign((nx_ + 1) * (ny_ + 1), 0.0);
    for (int j = 0; j <= ny_; ++j)
      for (int i = 0; i <= nx_; ++i) {
        const int m = id[node(i, j)];
        V_[node(i, j)] = m >= 0 ? u[m] : boundary_value(i, j);
      }
    slit_value_.resize(n);
    for (int j = 0; j < n; ++j) slit_value_[j] = u[j];

    conjugate_tips(jrow, i0, i1);
  }

  // Discrete harmonic conjugate on the dual lattice; path independence holds
  // because the darned groups carry zero net flux. Anchored to the far-field
  // closed form at a top corner dual node.
  void conjugate_tips(const std::vector<int>& jrow, const std::vector<int>& i0,
                      const std::vector<int>& i1) {
    const int n = slits_.count();
    tip_re_psi_.assign(2 * n, 0.0);
    if (n == 0) return;
    const double h = cfg_.h;
    // dual node (i+1/2, j+1/2) indexed by (i, j), i in [0, nx-1], j in [0, ny-1]
    std::vector<double> v(nx_ * ny_, 0.0);
    auto uval = [&](int i, int j) { return V_[node(i, j)]; };
    const int ia = 1, ja = ny_ - 2;  // anchor dual node near the top-left corner
    v[ja * nx_ + ia] =
        halfplane_re(x_lo_ + (ia + 0.5) * h, (ja + 0.5) * h);
    // Cauchy-Riemann for the real part given the imaginary part:
    // d(Re)/dx = d(Im)/dy and d(Re)/dy = -d(Im)/dx.
    // anchor column vertically: moving +y crosses edge {(ia,j),(ia+1,j)}
    for (int j = ja - 1; j >= 0; --j)
      v[j * nx_ + ia] = v[(j + 1) * nx_ + ia] + (uval(ia + 1, j + 1) - uval(ia, j + 1));
    for (int j = ja + 1; j < ny_; ++j)
      v[j * nx_ + ia] = v[(j - 1) * nx_ + ia] - (uval(ia + 1, j) - uval(ia, j));
    // rows horizontally: moving +x crosses the primal column between rows j, j+1
    for (int j = 0; j < ny_; ++j) {
      for (int i = ia + 1; i < nx_; ++i)
        v[j * nx_ + i] = v[j * nx_ + i - 1] + (uval(i, j + 1) - uval(i, j));
      for (int i = ia - 1; i >= 0; --i)
        v[j * nx_ + i] = v[j * nx_ + i + 1] - (uval(i + 1, j + 1) - uval(i + 1, j));
    }
    // Re Psi at a tip ~ average of the four dual neighbors just outside the slit
    for (int j = 0; j < n; ++j) {
      const int jr = jrow[j];
      const int il = i0[j], ir = i1[j];
      tip_re_psi_[2 * j] = 0.25 * (v[(jr - 1) * nx_ + (il - 1)] + v[jr * nx_ + (il - 1)] +
                                   v[(jr - 1) * nx_ + il] + v[jr * nx_ + il]);
      tip_re_psi_[2 * j + 1] =
          0.25 * (v[(jr - 1) * nx_ + (ir - 1)] + v[jr * nx_ + (ir - 1)] +
                  v[(jr - 1) * nx_ + ir] + v[jr * nx_ + ir]);
    }
  }

  SlitVector slits_, snapped_;
  double xi0_;
  LatticeConfig cfg_;
  int nx_ = 0, ny_ = 0;
  double x_lo_ = 0.0;
  std::vector<double> V_;
  std::vector<double> slit_value_;
  std::vector<double> tip_re_psi_;
};

inline LatticeSolution oracle_kernel_fd(const SlitVector& s, double xi0,
                                        const LatticeConfig& cfg = {}) {
  return LatticeSolution(s, xi0, cfg);
}

}  // namespace kl
