#include <catch2/catch_amalgamated.hpp>

#include "kl/lattice.hpp"
#include "support.hpp"

using namespace kl;

TEST_CASE("N = 0 lattice matches the closed-form half-plane kernel") {
  const double xi0 = 0.0;
  auto closed = [&](double x, double y) {
    return (1.0 / kPi) * y / ((x - xi0) * (x - xi0) + y * y);
  };
  double prev_err = 0.0;
  for (double h : {0.04, 0.02}) {
    LatticeConfig cfg;
    cfg.h = h;
    const LatticeSolution lat(SlitVector::empty(), xi0, cfg);
    double err = 0.0;
    for (double x = -1.5; x <= 1.5; x += 0.25)
      for (double y = 0.25; y <= 2.0; y += 0.25)
        err = std::max(err, std::abs(lat.value_at(x, y) - closed(x, y)) /
                                closed(x, y));
    if (prev_err > 0.0) CHECK(prev_err / err >= 1.7);
    CHECK(err < 0.05);
    prev_err = err;
  }
}

TEST_CASE("single-slit lattice agrees with the charge-simulation kernel") {
  const SlitVector s = test::unit_slit();
  const KernelConfig kcfg{64, 384, 1e-8, false, false};
  const KernelSolution sol(s, 0.0, kcfg);
  const LatticeSolution lat(s, 0.0, {});
  // super-node value vs slit constant
  CHECK(lat.slit_value(0) == Catch::Approx(sol.slit_constant(0)).epsilon(0.01));
  double worst = 0.0;
  for (double x = -2.0; x <= 2.0; x += 0.2) {
    for (double y = 0.25; y <= 2.5; y += 0.2) {
      const Cplx z{x, y};
      if (s.distance_to_point(z) < 3.0 * lat.h()) continue;
      const double ref = sol.psi(z).imag();
      worst = std::max(worst, std::abs(lat.value_at(x, y) - ref) / std::abs(ref));
    }
  }
  CHECK(worst <= 0.02);
}

TEST_CASE("oracle drift approximates the kernel drift") {
  const SlitVector s = test::unit_slit();
  const DriftVector ref = KernelSolution(s, 0.0, {64, 384, 1e-8, false, false}).drift();
  LatticeConfig cfg;
  cfg.h = 0.01;
  const DriftVector lat = LatticeSolution(s, 0.0, cfg).drift();
  CHECK(lat.b[0] == Catch::Approx(ref.b[0]).epsilon(0.02));   // height
  CHECK(lat.b[1] == Catch::Approx(ref.b[1]).epsilon(0.10));   // left tip
  CHECK(lat.b[2] == Catch::Approx(ref.b[2]).epsilon(0.10));   // right tip
}

TEST_CASE("lattice rejects slits it cannot resolve") {
  const SlitVector thin = SlitVector::validate({1.0, 0.0, 0.01});
  CHECK_THROWS_AS(LatticeSolution(thin, 0.0, {}), Error);
  try {
    LatticeSolution(thin, 0.0, {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LatticeTooCoarse);
  }
}
