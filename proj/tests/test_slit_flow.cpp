#include <catch2/catch_amalgamated.hpp>

#include "kl/lattice.hpp"
#include "kl/slit_flow.hpp"
#include "support.hpp"

using namespace kl;

namespace {
FlowConfig fast_flow() {
  FlowConfig cfg;
  cfg.kernel = KernelConfig{24, 384, 1e-8, false, false};
  return cfg;
}
}  // namespace

TEST_CASE("no slits: nothing to evolve") {
  const Trajectory traj =
      evolve_slits(SlitVector::empty(), Driver::constant(0.0), 2.0);
  CHECK(traj.status == FlowStatus::Completed);
  CHECK(traj.t_end == 2.0);
}

TEST_CASE("far driver barely moves the configuration") {
  // |b_l| <= 8/R gives |delta s| <= 8 t / (xi - extent)
  const double xi = 1e6;
  KernelCache cache;
  const Trajectory traj = evolve_slits(test::unit_slit(), Driver::constant(xi),
                                       1.0, fast_flow(), &cache);
  REQUIRE(traj.status == FlowStatus::Completed);
  const auto& s0 = traj.states.front();
  const auto& s1 = traj.states.back();
  const double bound = 8.0 / (xi - 3.0);
  for (std::size_t l = 0; l < s0.size(); ++l)
    CHECK(std::abs(s1[l] - s0[l]) <= bound);
}

TEST_CASE("driver under the slit center forces explosion") {
  KernelCache cache;
  const Trajectory traj = evolve_slits(test::unit_slit(), Driver::constant(0.0),
                                       8.0, fast_flow(), &cache);
  REQUIRE(traj.status == FlowStatus::Exploded);
  // value frozen from two independent integrations (coarse RK4 and this solver)
  CHECK(traj.zeta_est > 0.70);
  CHECK(traj.zeta_est < 0.78);
  CHECK(traj.zeta_est >= 0.99 * koebe_lower_bound(1.0));
  CHECK(traj.R.back() <= 1e-3);
  CHECK(traj.R.back() > 0.0);

  // heights strictly decrease along the run
  for (std::size_t i = 1; i < traj.states.size(); ++i)
    CHECK(traj.states[i][0] < traj.states[i - 1][0]);

  const ExplosionReport rep = explosion_report(traj);
  CHECK(rep.zeta_est == traj.zeta_est);
  CHECK(rep.min_height < 5e-3);
  REQUIRE(!rep.R_tail.empty());
  const double last = rep.R_tail.back();
  for (double r : rep.R_tail) CHECK(last <= r + 1e-15);
  CHECK(last <= 5.0 * 1e-3);
}

TEST_CASE("explosion_report rejects completed runs") {
  const Trajectory traj = evolve_slits(test::unit_slit(), Driver::constant(100.0),
                                       0.1, fast_flow());
  REQUIRE(traj.status == FlowStatus::Completed);
  CHECK_THROWS_AS(explosion_report(traj), Error);
}

TEST_CASE("comparison bounds") {
  CHECK(comparison_lower_bound(1.0) == 2.0);
  CHECK(comparison_lower_bound(0.5) == 0.5);
  CHECK(koebe_lower_bound(1.0) == Catch::Approx(1.0 / 16.0));
  CHECK_THROWS_AS(comparison_lower_bound(0.0), Error);
}

TEST_CASE("translation equivariance") {
  KernelCache cache;
  const double c = 3.25;
  const Driver base = Driver::sine(0.0, 0.3, 2.0);
  const Driver shifted = Driver::sine(c, 0.3, 2.0);
  const SlitVector s = test::single_slit(1.2, -0.8, 0.9);
  const Trajectory a = evolve_slits(s, base, 0.5, fast_flow(), &cache);
  const Trajectory b = evolve_slits(s.translated(c), shifted, 0.5, fast_flow(), &cache);
  REQUIRE(a.status == FlowStatus::Completed);
  REQUIRE(b.status == FlowStatus::Completed);
  const auto ya = a.coords_at(0.5);
  const auto yb = b.coords_at(0.5);
  CHECK(yb[0] == Catch::Approx(ya[0]).margin(1e-8));
  CHECK(yb[1] == Catch::Approx(ya[1] + c).margin(1e-8));
  CHECK(yb[2] == Catch::Approx(ya[2] + c).margin(1e-8));
}

TEST_CASE("space-time scaling equivariance") {
  KernelCache cache;
  const double T = 0.4;
  const Driver base = Driver::sine(0.1, 0.25, 3.0);
  const Driver scaled_driver = Driver::from_function(
      [&](double t) { return 2.0 * base.xi(t / 4.0); },
      [&](double t) { return 0.5 * base.xi_dot(t / 4.0); });
  const SlitVector s = test::single_slit(1.0, -0.7, 0.9);
  const Trajectory a = evolve_slits(s, base, T, fast_flow(), &cache);
  const Trajectory b = evolve_slits(s.scaled(2.0), scaled_driver, 4.0 * T,
                                    fast_flow(), &cache);
  REQUIRE(a.status == FlowStatus::Completed);
  REQUIRE(b.status == FlowStatus::Completed);
  for (double t : {0.1, 0.25, T}) {
    const auto ya = a.coords_at(t);
    const auto yb = b.coords_at(4.0 * t);
    for (std::size_t l = 0; l < ya.size(); ++l)
      CHECK(yb[l] == Catch::Approx(2.0 * ya[l]).margin(1e-6));
  }
}

TEST_CASE("step underflow is reported, not swallowed") {
  auto bad = [](double, const Eigen::VectorXd&, Eigen::VectorXd&) { return false; };
  Eigen::VectorXd y0(1);
  y0[0] = 1.0;
  RkOptions opt;
  // initial evaluation already fails
  CHECK_THROWS_AS(rk45(bad, 0.0, y0, 1.0, opt), Error);
  int calls = 0;
  auto stalls = [&](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) {
    dy[0] = 0.0;
    return ++calls <= 1;  // first call (initial f) fine, all stages fail
  };
  try {
    rk45(stalls, 0.0, y0, 1.0, opt);
    FAIL("expected StepUnderflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepUnderflow);
  }
}

TEST_CASE("coarse run with the lattice-oracle drift tracks the primary run") {
  const SlitVector s = test::unit_slit();
  const double T = 0.2, h = 0.05;
  LatticeConfig lat_cfg;
  lat_cfg.h = 0.02;

  auto oracle_drift = [&](const Eigen::VectorXd& y) {
    const SlitVector sv =
        SlitVector::validate(std::vector<double>(y.data(), y.data() + 3));
    return LatticeSolution(sv, 0.0, lat_cfg).drift();
  };
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(s.coords().data(), 3);
  for (int k = 0; k < int(T / h + 0.5); ++k) {
    auto rhs = [&](const Eigen::VectorXd& u) {
      const DriftVector d = oracle_drift(u);
      return Eigen::Map<const Eigen::VectorXd>(d.b.data(), 3).eval();
    };
    const Eigen::VectorXd k1 = rhs(y);
    const Eigen::VectorXd k2 = rhs(y + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(y + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(y + h * k3);
    y += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  }

  KernelCache cache;
  const Trajectory ref =
      evolve_slits(s, Driver::constant(0.0), T, fast_flow(), &cache);
  const auto yr = ref.coords_at(T);
  for (int l = 0; l < 3; ++l)
    CHECK(y[l] == Catch::Approx(yr[l]).epsilon(0.05).margin(5e-3));
}
