#include <catch2/catch_amalgamated.hpp>

#include "kl/transform.hpp"
#include "support.hpp"

using namespace kl;

namespace {
IotaConfig fast_iota() {
  IotaConfig cfg;
  cfg.kernel = KernelConfig{24, 384, 1e-8, false, false};
  return cfg;
}
FlowConfig fast_flow() {
  FlowConfig cfg;
  cfg.kernel = KernelConfig{24, 384, 1e-8, false, false};
  return cfg;
}
}  // namespace

TEST_CASE("N = 0 degenerate: iota stays the identity") {
  const Driver drv = Driver::sine(0.1, 0.4, 2.0);
  const Trajectory traj = evolve_slits(SlitVector::empty(), drv, 0.6);
  IotaConfig icfg = fast_iota();
  icfg.rk.rtol = 1e-11;
  icfg.rk.atol = 1e-13;
  const IotaResult hist =
      evolve_iota(traj, drv, 0.6, {Cplx{0.5, 1.5}}, icfg);
  for (const IotaSample& s : hist.samples) {
    CHECK(std::abs(s.U - s.xi) < 1e-10);
    CHECK(std::abs(s.iota1 - 1.0) < 1e-10);
    CHECK(std::abs(s.iota2) < 1e-9);
    CHECK(std::abs(s.a0 - 2.0 * s.t) < 1e-9);
    CHECK(s.bmd == 0.0);
  }
  // the tracked point's jet stays the identity jet
  const Cplx v = hist.iota_at(0.6, 0, Cplx{0.55, 1.45});
  CHECK(std::abs(v - Cplx{0.55, 1.45}) < 1e-9);
}

TEST_CASE("initial sample is the identity data") {
  KernelCache cache;
  const Driver drv = Driver::constant(0.2);
  const Trajectory traj =
      evolve_slits(test::unit_slit(), drv, 0.1, fast_flow(), &cache);
  const IotaResult hist = evolve_iota(traj, drv, 0.1, {}, fast_iota(), &cache);
  const IotaSample& s0 = hist.samples.front();
  CHECK(s0.t == 0.0);
  CHECK(s0.U == Catch::Approx(0.2));
  CHECK(s0.iota1 == Catch::Approx(1.0));
  CHECK(std::abs(s0.iota2) < 1e-12);
  CHECK(s0.a0 == 0.0);
}

TEST_CASE("consistency: iota composed with g equals the half-plane chain") {
  KernelCache cache;
  const SlitVector s = test::single_slit(1.5, -0.5, 0.8);
  const Driver drv = Driver::sine(0.0, 0.35, 2.0);
  const double T = 0.5;

  // sample points and their image paths
  const std::vector<Cplx> pts{{0.0, 2.6}, {-1.5, 1.9}, {1.2, 2.6}, {-2.6, 0.8}};
  MapConfig mcfg;
  mcfg.flow = fast_flow();
  const MapResult maps = evolve_map(s, drv, pts, T, mcfg, &cache);
  REQUIRE(maps.slits.status == FlowStatus::Completed);

  // jets centered at the midpoint of each image path
  std::vector<Cplx> centers;
  for (std::size_t p = 0; p < pts.size(); ++p)
    centers.push_back(0.5 * (pts[p] + maps.g_end[p]));

  const IotaResult hist =
      evolve_iota(maps.slits, drv, T, centers, fast_iota(), &cache);
  const HalfplaneChain hp = loewner_halfplane(hist, pts, T);

  for (double t : {0.2, 0.35, T}) {
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const Cplx w = maps.g_at(t, int(p));
      const Cplx lhs = hist.iota_at(t, int(p), w);
      const Cplx rhs = hp.g_at(t, int(p));
      CHECK(std::abs(lhs - rhs) < 1e-6);
    }
  }

  // center data invariants over the window
  double min_R = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < maps.slits.t.size(); ++i)
    min_R = std::min(min_R, maps.slits.R[i]);
  for (const IotaSample& smp : hist.samples) {
    CHECK(smp.iota1 > 0.0);
    CHECK(std::abs(smp.iota2) <= (4.0 / min_R) * smp.iota1 * 1.05);
  }

  // a0 strictly increases and the time change round-trips
  for (std::size_t i = 1; i < hist.samples.size(); ++i)
    CHECK(hist.samples[i].a0 > hist.samples[i - 1].a0);
  for (double t : {0.1, 0.27, 0.44}) {
    CHECK(hist.a0_inverse(hist.a0_at(t)) == Catch::Approx(t).margin(1e-10));
  }

  // transformed capacity: probe-based hcap^H equals the accumulated a0
  const double est = hcap_halfplane_estimate(hist, T, 24.0);
  CHECK(est == Catch::Approx(hist.samples.back().a0).epsilon(0.01));
}

TEST_CASE("half-plane chain with constant data reduces to sqrt(z^2 + 4t)") {
  IotaResult hist;
  hist.jet_order = 2;
  for (int i = 0; i <= 100; ++i) {
    IotaSample s{};
    s.t = i * 0.01;
    s.U = 0.0;
    s.iota1 = 1.0;
    s.a0 = 2.0 * s.t;
    hist.samples.push_back(s);
  }
  hist.t_end = 1.0;
  const std::vector<Cplx> pts{{0.7, 1.1}, {-1.0, 0.4}};
  const HalfplaneChain ch = loewner_halfplane(hist, pts, 1.0);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const Cplx w = std::sqrt(pts[p] * pts[p] + 4.0);
    const Cplx expect = w.imag() >= 0.0 ? w : -w;
    CHECK(std::abs(ch.g_end[p] - expect) < 1e-7);
  }
  // swallow of a point on the axis trace
  const HalfplaneChain sw = loewner_halfplane(hist, {Cplx{0.0, 1.0}}, 1.0);
  REQUIRE(sw.swallowed_at[0].has_value());
  CHECK(*sw.swallowed_at[0] == Catch::Approx(0.25).margin(1e-5));
}

TEST_CASE("tracked point too close to the slits is rejected") {
  KernelCache cache;
  const Driver drv = Driver::constant(0.0);
  const Trajectory traj =
      evolve_slits(test::unit_slit(), drv, 0.05, fast_flow(), &cache);
  CHECK_THROWS_AS(
      evolve_iota(traj, drv, 0.05, {Cplx{0.0, 1.02}}, fast_iota(), &cache), Error);
  try {
    evolve_iota(traj, drv, 0.05, {Cplx{0.0, 1.02}}, fast_iota(), &cache);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CircleCollision);
  }
}

TEST_CASE("path-driven transform matches the deterministic one for a frozen driver") {
  KernelCache cache;
  const SlitVector s = test::single_slit(1.3, -0.6, 0.6);
  CoefficientSpec coeffs;  // alpha = 0, b = 0: xi stays at 0.05
  SkleConfig scfg;
  scfg.kernel = KernelConfig{24, 384, 1e-8, false, false};
  scfg.record_increments = true;
  const SklePath path = sample_path(0.05, s, coeffs, 0.3, 1e-3, 3, scfg, &cache);
  REQUIRE(path.status == FlowStatus::Completed);
  const IotaResult a = evolve_iota(path, {}, fast_iota(), &cache);

  const Driver drv = Driver::constant(0.05);
  const Trajectory traj = evolve_slits(s, drv, 0.3, fast_flow(), &cache);
  const IotaResult b = evolve_iota(traj, drv, 0.3, {}, fast_iota(), &cache);

  CHECK(a.samples.back().U == Catch::Approx(b.samples.back().U).margin(1e-7));
  CHECK(a.samples.back().iota1 ==
        Catch::Approx(b.samples.back().iota1).margin(1e-7));
  CHECK(a.samples.back().a0 == Catch::Approx(b.samples.back().a0).margin(1e-7));
}

TEST_CASE("Ito drive comparison: degenerate case vanishes, dt halving improves") {
  KernelCache cache;
  const SlitVector s = test::single_slit(1.2, -0.6, 0.6);

  // degenerate: N = 0, alpha = 0, b = 0: both routes equal the initial point
  CoefficientSpec none;
  SkleConfig scfg0;
  scfg0.record_increments = true;
  const SklePath p0 =
      sample_path(0.1, SlitVector::empty(), none, 0.2, 1e-3, 1, scfg0);
  const IotaResult h0 = evolve_iota(p0, {}, fast_iota());
  const ItoGap g0 = ito_drive_check(p0, none, h0);
  CHECK(g0.max_gap < 1e-12);

  // stochastic single-slit scenario: strong-order trend under dt halving
  CoefficientSpec coeffs;
  coeffs.alpha = Coefficient::constant(std::sqrt(6.0));
  coeffs.b = Coefficient::bmd_scaled(-1.0);
  const double T = 0.25;
  const double dt_fine = 5e-4;
  const int n_fine = int(T / dt_fine + 0.5);
  GaussianStream g(1234);
  std::vector<double> fine(n_fine);
  for (double& w : fine) w = std::sqrt(dt_fine) * g.next();
  std::vector<double> coarse(n_fine / 2);
  for (std::size_t k = 0; k < coarse.size(); ++k)
    coarse[k] = fine[2 * k] + fine[2 * k + 1];

  SkleConfig scfg;
  scfg.kernel = KernelConfig{16, 384, 1e-8, false, false};
  scfg.record_increments = true;
  IotaConfig icfg = fast_iota();
  icfg.kernel = scfg.kernel;

  double rms[2];
  int i = 0;
  for (auto [dt, inc] : {std::pair{2.0 * dt_fine, &coarse},
                         std::pair{dt_fine, &fine}}) {
    const SklePath p =
        sample_path(0.0, s, coeffs, T, dt, 0, scfg, &cache, *inc);
    REQUIRE(p.status == FlowStatus::Completed);
    const IotaResult h = evolve_iota(p, {}, icfg, &cache);
    rms[i++] = ito_drive_check(p, coeffs, h, &cache, scfg.kernel).rms_gap;
  }
  CHECK(rms[0] / rms[1] >= 1.2);  // ~sqrt(2) expected for strong order 1/2
  CHECK(rms[1] < 5e-3);

  // mismatched grids are rejected
  const SklePath pbad = sample_path(0.0, s, coeffs, T, 1e-3, 0, scfg, &cache);
  CHECK_THROWS_AS(ito_drive_check(pbad, coeffs, h0), Error);
}
