#include <cmath>

#include "doctest.h"
#include "ionolink/phy.hpp"
#include "ionolink/rng.hpp"

using namespace ionolink;
using phy::BlerAnchor;
using phy::McsLadder;

TEST_CASE("available extra margin across the ladder") {
  const McsLadder ladder = McsLadder::defaults();
  CHECK(phy::available_extra_margin(6.4, ladder) == doctest::Approx(0.0));
  CHECK(phy::available_extra_margin(4.0, ladder) == doctest::Approx(12.0));
  CHECK(phy::available_extra_margin(5.0, ladder) == doctest::Approx(7.0));
  CHECK_THROWS_AS(phy::available_extra_margin(5.5, ladder), Error);
}

TEST_CASE("effective margin is a plain difference") {
  CHECK(phy::effective_margin(12.0, 3.2) == doctest::Approx(8.8));
  CHECK(phy::effective_margin(4.0, 4.0) == doctest::Approx(0.0));
  CHECK(phy::effective_margin(0.0, 5.0) == doctest::Approx(-5.0));
}

TEST_CASE("logistic BLER map: midpoint, saturation, monotonicity") {
  BlerAnchor anchor;  // k=1.01, m_piv=0.72, floors (0,1)
  CHECK(phy::bler(anchor.m_piv_db, anchor) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(phy::bler(80.0, anchor) == doctest::Approx(anchor.bler_min).epsilon(1e-9));
  CHECK(phy::bler(-80.0, anchor) == doctest::Approx(anchor.bler_max).epsilon(1e-9));
  CHECK(phy::bler(0.72 + 2.1755, anchor) == doctest::Approx(0.10).epsilon(1e-3));

  double prev = phy::bler(-10.0, anchor);
  for (double m = -9.0; m <= 10.0; m += 1.0) {
    const double b = phy::bler(m, anchor);
    CHECK(b < prev);
    prev = b;
  }
}

TEST_CASE("margin threshold inverts the BLER map exactly") {
  BlerAnchor anchor;
  CHECK(phy::margin_threshold(0.5, anchor) == doctest::Approx(anchor.m_piv_db).epsilon(1e-12));
  for (double beta : {0.01, 0.1, 0.5, 0.9}) {
    const double m = phy::margin_threshold(beta, anchor);
    CHECK(phy::bler(m, anchor) == doctest::Approx(beta).epsilon(1e-9));
  }
  CHECK(phy::margin_threshold(0.10, anchor) ==
        doctest::Approx(0.72 + std::log(9.0) / 1.01).epsilon(1e-9));
  CHECK_THROWS_AS(phy::margin_threshold(0.0, anchor), Error);
  CHECK_THROWS_AS(phy::margin_threshold(1.0, anchor), Error);
}

TEST_CASE("bler and margin_threshold stay exact inverses on random anchors") {
  Rng rng(808u);
  for (int i = 0; i < 300; ++i) {
    BlerAnchor anchor;
    anchor.k_slope = 0.2 + 3.0 * rng.uniform();
    anchor.m_piv_db = -2.0 + 4.0 * rng.uniform();
    anchor.bler_min = 0.02 * rng.uniform();
    anchor.bler_max = 1.0 - 0.02 * rng.uniform();
    const double beta =
        anchor.bler_min + (anchor.bler_max - anchor.bler_min) * (0.01 + 0.98 * rng.uniform());
    const double m = phy::margin_threshold(beta, anchor);
    CHECK(phy::bler(m, anchor) == doctest::Approx(beta).epsilon(1e-9));
  }
}

TEST_CASE("goodput accounting") {
  CHECK(phy::goodput(0.0, 0.0, 5.0) == doctest::Approx(5.0));
  CHECK(phy::goodput(0.2, 0.1, 5.0) == doctest::Approx(3.6));
  CHECK(phy::goodput(1.0, 0.0, 6.4) == doctest::Approx(0.0));
}

TEST_CASE("rate-margin slope hits the quoted range") {
  CHECK(phy::rate_margin_slope(0.75, 10.0) == doctest::Approx(0.226).epsilon(5e-3));
  CHECK(phy::rate_margin_slope(0.75, 30.0) == doctest::Approx(0.241).epsilon(5e-3));
  // large-SINR limit
  CHECK(phy::rate_margin_slope(0.75, 1e9) == doctest::Approx(0.249).epsilon(2e-3));
}

TEST_CASE("anchor fit recovers the generator") {
  const double k_true = 1.01;
  const double piv_true = 0.72;
  BlerAnchor truth;
  truth.k_slope = k_true;
  truth.m_piv_db = piv_true;

  SUBCASE("noiseless data is interpolated exactly") {
    std::vector<phy::BlerSample> pairs;
    for (double m = -4.0; m <= 6.0; m += 0.25)
      pairs.push_back({m, phy::bler(m, truth), 1.0});
    BlerAnchor fit;
    phy::fit_bler_anchor(fit, pairs);
    CHECK(fit.frozen);
    CHECK(fit.k_slope == doctest::Approx(k_true).epsilon(1e-6));
    CHECK(fit.m_piv_db == doctest::Approx(piv_true).epsilon(1e-6));
  }

  SUBCASE("noisy data recovered within 5 percent") {
    Rng rng(20231u);
    std::vector<phy::BlerSample> pairs;
    for (double m = -4.0; m <= 6.0; m += 0.1) {
      const double b = phy::bler(m, truth) + 0.005 * rng.gaussian();
      pairs.push_back({m, std::clamp(b, 0.0, 1.0), 1.0});
    }
    BlerAnchor fit;
    phy::fit_bler_anchor(fit, pairs);
    CHECK(fit.k_slope == doctest::Approx(k_true).epsilon(0.05));
    CHECK(fit.m_piv_db == doctest::Approx(piv_true).epsilon(0.05));
  }

  SUBCASE("refit attempts are rejected") {
    std::vector<phy::BlerSample> pairs;
    for (double m = -4.0; m <= 6.0; m += 0.25)
      pairs.push_back({m, phy::bler(m, truth), 1.0});
    BlerAnchor fit;
    phy::fit_bler_anchor(fit, pairs);
    CHECK_THROWS_AS(phy::fit_bler_anchor(fit, pairs), Error);
    try {
      phy::fit_bler_anchor(fit, pairs);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::AlreadyFrozen);
      CHECK(e.exit_code() == 3);
    }
  }

  SUBCASE("identical m_eff values are rejected as poor conditioning") {
    std::vector<phy::BlerSample> pairs(25, phy::BlerSample{1.0, 0.4, 1.0});
    BlerAnchor fit;
    CHECK_THROWS_AS(phy::fit_bler_anchor(fit, pairs), Error);
  }
}
