#include <cmath>
#include <vector>

#include "doctest.h"
#include "ionolink/estimator.hpp"
#include "ionolink/rng.hpp"

using namespace ionolink;
using kf::FilterState;
using kf::NoiseConfig;

namespace {

/// Simulate the filter's own model (truth drawn from the prior) and run the
/// filter against it; used for the NIS and coverage self-consistency checks.
///
/// Coverage is pooled over independent runs: the GF observable pins only the
/// K_eff*dVTEC + bias combination, so a single long trajectory's coverage
/// indicator mixes far too slowly to be a valid frequency estimate.
struct SelfConsistentRun {
  double mean_nis = 0.0;
  double coverage = 0.0;
};

SelfConsistentRun run_self_consistent(int runs, int steps, std::uint64_t seed) {
  const double dt = 0.1;
  const double k_eff = 0.0154;
  NoiseConfig noise;
  noise.r_var = NoiseConfig::measurement_variance(52.0, dt);

  double nis_sum = 0.0;
  long covered = 0;
  for (int r = 0; r < runs; ++r) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
    FilterState state = kf::kf_init();
    kf::Vec4 truth{};
    for (int i = 0; i < 4; ++i) truth[i] = std::sqrt(state.p[i][i]) * rng.gaussian();
    for (int k = 0; k < steps; ++k) {
      truth[0] += dt * truth[1] + std::sqrt(noise.q1 * dt) * rng.gaussian();
      truth[1] += std::sqrt(noise.q2 * dt) * rng.gaussian();
      truth[2] += dt * truth[3] + std::sqrt(noise.q3 * dt) * rng.gaussian();
      truth[3] += std::sqrt(noise.q4 * dt) * rng.gaussian();
      const double y = k_eff * truth[0] + truth[2] + std::sqrt(noise.r_var) * rng.gaussian();

      state = kf::kf_step(state, y, dt, k_eff, noise);
      nis_sum += state.last_nis;
      if (std::abs(truth[0] - state.x_hat[0]) <= kf::confidence_band(state)) ++covered;
    }
  }
  const double n = static_cast<double>(runs) * steps;
  return {nis_sum / n, static_cast<double>(covered) / n};
}

}  // namespace

TEST_CASE("kf_init defaults and scaling") {
  const FilterState s = kf::kf_init();
  for (double v : s.x_hat) CHECK(v == 0.0);
  CHECK(s.p[0][0] == doctest::Approx(1.0));

  const FilterState wide = kf::kf_init(0.0, 4.0);
  CHECK(kf::confidence_band(wide) == doctest::Approx(2.0 * kf::confidence_band(s)));

  CHECK_THROWS_AS(kf::kf_init(0.0, -1.0), Error);
}

TEST_CASE("information accumulates under repeated measurements") {
  NoiseConfig noise;
  noise.q1 = noise.q2 = noise.q3 = noise.q4 = 1e-30;  // effectively Q = 0
  noise.r_var = 1e-4;
  FilterState s = kf::kf_init();
  double prev = s.p[0][0];
  for (int k = 0; k < 50; ++k) {
    s = kf::kf_step(s, 0.01, 0.1, 0.0154, noise);
    CHECK(s.p[0][0] <= prev + 1e-15);
    prev = s.p[0][0];
  }
}

TEST_CASE("zero K_eff leaves the dVTEC states untouched by the update") {
  NoiseConfig noise;
  FilterState s = kf::kf_init();
  s.x_hat = {0.5, 0.01, 0.0, 0.0};
  const FilterState next = kf::kf_step(s, 0.3, 0.1, 0.0, noise);
  // predict still advances the mean, but the gain on states 1-2 is zero
  CHECK(next.x_hat[0] == doctest::Approx(0.5 + 0.1 * 0.01));
  CHECK(next.x_hat[1] == doctest::Approx(0.01));
}

TEST_CASE("covariance stays symmetric and PSD along a run") {
  NoiseConfig noise;
  noise.r_var = NoiseConfig::measurement_variance(52.0, 0.1);
  Rng rng(7u);
  FilterState s = kf::kf_init();
  for (int k = 0; k < 2000; ++k) {
    s = kf::kf_step(s, 0.01 * rng.gaussian(), 0.1, 0.0154, noise);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(std::abs(s.p[i][j] - s.p[j][i]) < 1e-12);
    for (int i = 0; i < 4; ++i) CHECK(s.p[i][i] >= -1e-12);
    CHECK(s.last_nis >= 0.0);
  }
}

TEST_CASE("self-consistent simulation: mean NIS near 1 and 95% coverage") {
  const auto run = run_self_consistent(200, 100, 12345u);
  CHECK(run.mean_nis == doctest::Approx(1.0).epsilon(0.03));
  CHECK(run.coverage == doctest::Approx(0.95).epsilon(0.015));
}

TEST_CASE("non-positive innovation variance raises NumericalBreakdown") {
  NoiseConfig noise;
  FilterState s = kf::kf_init();
  s.p[0][0] = -1e12;  // corrupted covariance drives S below zero
  try {
    kf::kf_step(s, 0.0, 0.1, 1.0, noise);
    FAIL("expected NumericalBreakdown");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NumericalBreakdown);
  }
}

TEST_CASE("confidence band formula") {
  FilterState s = kf::kf_init();
  s.p[0][0] = 1.0;
  CHECK(kf::confidence_band(s) == doctest::Approx(1.96));
  s.p[0][0] = 0.0;
  CHECK(kf::confidence_band(s) == doctest::Approx(0.0));
}

TEST_CASE("horizon propagation") {
  NoiseConfig noise;
  FilterState s = kf::kf_init();
  s.x_hat = {1.0, 0.01, 0.0, 0.0};

  SUBCASE("mean extrapolates linearly") {
    const auto f = kf::propagate_horizon(s, 60.0, noise);
    CHECK(f.mu1_tecu == doctest::Approx(1.6));
    CHECK(f.mu2_tecu_s == doctest::Approx(0.01));
  }

  SUBCASE("q = 0 reduces to the rotated prior block") {
    NoiseConfig q0;
    q0.q1 = q0.q2 = 1e-300;
    const double h = 60.0;
    const auto f = kf::propagate_horizon(s, h, q0);
    const double p11 = s.p[0][0], p12 = s.p[0][1], p22 = s.p[1][1];
    CHECK(f.p_xixi[0][0] == doctest::Approx(p11 + 2 * h * p12 + h * h * p22).epsilon(1e-12));
    CHECK(f.p_xixi[0][1] == doctest::Approx(p12 + h * p22).epsilon(1e-12));
    CHECK(f.p_xixi[1][1] == doctest::Approx(p22).epsilon(1e-12));
  }

  SUBCASE("600 chained 0.1 s propagations equal one 60 s propagation") {
    FilterState step = s;
    for (int k = 0; k < 600; ++k) {
      const auto f = kf::propagate_horizon(step, 0.1, noise);
      step.x_hat[0] = f.mu1_tecu;
      step.x_hat[1] = f.mu2_tecu_s;
      step.p[0][0] = f.p_xixi[0][0];
      step.p[0][1] = step.p[1][0] = f.p_xixi[0][1];
      step.p[1][1] = f.p_xixi[1][1];
    }
    const auto once = kf::propagate_horizon(s, 60.0, noise);
    CHECK(step.x_hat[0] == doctest::Approx(once.mu1_tecu).epsilon(1e-9));
    CHECK(step.p[0][0] == doctest::Approx(once.p_xixi[0][0]).epsilon(1e-9));
    CHECK(step.p[0][1] == doctest::Approx(once.p_xixi[0][1]).epsilon(1e-9));
    CHECK(step.p[1][1] == doctest::Approx(once.p_xixi[1][1]).epsilon(1e-9));
  }
}
