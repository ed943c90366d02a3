#include <doctest.h>

#include <cmath>
#include <random>

#include "tridomain/errors.hpp"
#include "tridomain/ionics.hpp"

using namespace tridomain;

TEST_CASE("FHN currents at reference points") {
    const IonicModel m = IonicModel::fhn(1.0, 1.0, -1.0, 0.25);
    const IonicCurrents z = eval_ion(m, 0.0, 0.0);
    CHECK(z.Ia == 0.0);
    CHECK(z.Ib == 0.0);
    CHECK(z.H == 0.0);
    CHECK(eval_ion(m, 0.25, 0.0).Ia == doctest::Approx(0.0));
    CHECK(eval_ion(m, 1.0, 0.0).Ia == doctest::Approx(0.0));
    // -1 * 0.5 * 0.5 * 0.25
    CHECK(eval_ion(m, 0.5, 0.0).Ia == doctest::Approx(-0.0625).epsilon(1e-15));
    const IonicCurrents c = eval_ion(m, 0.3, 0.7);
    CHECK(c.Ib == doctest::Approx(0.7));
    CHECK(c.H == doctest::Approx(0.3 - 0.7));
}

TEST_CASE("current decomposition and parity") {
    const IonicModel m = IonicModel::fhn(0.8, 1.3, -2.0, 0.4);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double v = U(rng), w = U(rng), w2 = U(rng);
        CHECK(eval_ion(m, v, w).Ia == eval_ion(m, v, w2).Ia);
        CHECK(eval_ion(m, w, v).Ib == eval_ion(m, w2, v).Ib);
        CHECK(m.Ib(-w) == -m.Ib(w));
        CHECK(m.dIa(v) == doctest::Approx((m.Ia(v + 1e-6) - m.Ia(v - 1e-6)) / 2e-6).epsilon(1e-6));
    }
}

TEST_CASE("gap current") {
    GapModel g;
    CHECK(eval_gap(g, 0.0) == 0.0);
    g.G_gap = 2.0;
    CHECK(eval_gap(g, 1.5) == 3.0);
    CHECK(eval_gap(g, -0.7) == -eval_gap(g, 0.7));
    g.G_gap = 0.0;
    CHECK_THROWS_AS(g.validate(), InvalidSpec);
    g = {};
    g.C_ratio = -1.0;
    CHECK_THROWS_AS(g.validate(), InvalidSpec);
}

TEST_CASE("model validation") {
    CHECK_NOTHROW(IonicModel{}.validate());
    CHECK_THROWS_AS(IonicModel::fhn(1, 1, 1, 0.25).validate(), InvalidSpec);
    CHECK_THROWS_AS(IonicModel::fhn(0, 1, -1, 0.25).validate(), InvalidSpec);
    CHECK_THROWS_AS(IonicModel::fhn(1, 1, -1, 1.0).validate(), InvalidSpec);
    IonicModel m;
    m.r = 2.0;
    CHECK_THROWS_AS(m.validate(), InvalidSpec);
}

TEST_CASE("growth constants from the FHN remark") {
    // theta = 1/4, |rho| = 1: (2/3 theta + (1+theta)/3) = 7/12 and
    // (theta/3 + 2(1+theta)/3 + 1) = 23/12
    const IonicModel m = IonicModel::fhn(1.0, 1.0, -1.0, 0.25);
    CHECK(m.growth_c0() == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
    CHECK(m.growth_c1() == doctest::Approx(23.0 / 12.0).epsilon(1e-15));
    CHECK(m.alpha4() == doctest::Approx(1.0));
    // the bound c0 + c1 |v|^3 holds pointwise
    for (double v = -10.0; v <= 10.0; v += 1e-3)
        CHECK(std::abs(m.Ia(v)) <= m.growth_c0() + m.growth_c1() * std::pow(std::abs(v), 3) + 1e-12);
}

TEST_CASE("default FHN model passes certification") {
    const IonicModel m = IonicModel::fhn(1.0, 1.0, -1.0, 0.25);
    const AssumptionReport rep = certify_assumptions(m, {-10, 10}, {-10, 10}, 401);
    CHECK(rep.all_pass());
    for (char c : {'1', '2', '3', '4'}) CHECK(rep.check_pass(c));
    CHECK(rep.e_coefficient >= 0.0);
    REQUIRE(rep.find("iii_E") != nullptr);
    CHECK(rep.find("iii_E")->pass);
    CHECK(!rep.csv().empty());
    CHECK(rep.csv().rfind("assumption,worst_margin,constant,pass", 0) == 0);
}

TEST_CASE("E(v,w) is a fixed multiple of w^2") {
    struct P {
        double a1, b1, rho, theta;
    };
    for (const P& p : {P{1, 1, -1, 0.25}, P{2, 0.5, -3, 0.1}, P{0.3, 4, -0.5, 0.7}}) {
        const IonicModel m = IonicModel::fhn(p.a1, p.b1, p.rho, p.theta);
        const AssumptionReport rep = certify_assumptions(m, {-5, 5}, {-5, 5}, 101);
        // expand I_b(w) v - alpha4 H(v,w) w directly
        const double a4 = -p.rho / p.a1;
        double lo = 1e300, hi = -1e300;
        for (double v = -5; v <= 5; v += 0.37)
            for (double w = -5; w <= 5; w += 0.41) {
                if (std::abs(w) < 1e-3) continue;
                const double E = (-p.rho * w) * v - a4 * (p.a1 * v - p.b1 * w) * w;
                lo = std::min(lo, E / (w * w));
                hi = std::max(hi, E / (w * w));
            }
        CHECK(hi - lo <= 1e-12 * std::abs(hi));
        const double expected = -p.rho * p.b1 / p.a1;
        CHECK(lo == doctest::Approx(expected).epsilon(1e-12));
        CHECK(rep.e_coefficient == doctest::Approx(expected).epsilon(1e-12));
        CHECK(m.alpha5() == doctest::Approx(expected).epsilon(1e-15));
        CHECK(rep.e_coefficient > 0.0);
    }
}

TEST_CASE("printed coefficient rho/a1 has the wrong sign") {
    const IonicModel m = IonicModel::fhn(1.0, 1.0, -1.0, 0.25);
    const double w = 0.8, v = 0.3;
    const double E = m.Ib(w) * v - m.alpha4() * m.H(v, w) * w;
    CHECK(E == doctest::Approx(w * w));
    CHECK(E != doctest::Approx(m.rho / m.a1 * w * w));
}

TEST_CASE("beta1 = 0 breaks monotonicity") {
    IonicModel m = IonicModel::fhn(1.0, 1.0, -1.0, 0.25);
    m.beta1 = 0.0;
    // brute-force: the cubic has interior extrema, so differences change sign on [0, 1]
    bool up = false, down = false;
    for (double v = 0.0; v < 1.0; v += 1e-3) {
        const double d = m.Ia_tilde(v + 1e-3) - m.Ia_tilde(v);
        up = up || d > 0;
        down = down || d < 0;
    }
    REQUIRE((up && down));
    const AssumptionReport rep = certify_assumptions(m, {-10, 10}, {-10, 10}, 401);
    CHECK_FALSE(rep.check_pass('4'));
    CHECK_FALSE(rep.all_pass());
    CHECK(rep.check_pass('2'));
    CHECK(rep.check_pass('3'));
}

TEST_CASE("fitted quadratic bound holds on random pairs") {
    const IonicModel m = IonicModel::fhn(1.0, 1.0, -1.0, 0.25);
    const AssumptionReport rep = certify_assumptions(m, {-10, 10}, {-10, 10}, 401);
    REQUIRE(rep.fitted_inv_C > 0.0);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    for (int i = 0; i < 20000; ++i) {
        const double v = U(rng), vp = U(rng);
        const double lhs = (m.Ia_tilde(v) - m.Ia_tilde(vp)) * (v - vp);
        const double rhs =
            rep.fitted_inv_C * std::pow(1.0 + std::abs(v) + std::abs(vp), m.r - 2.0) * (v - vp) * (v - vp);
        CHECK(lhs >= rhs * (1.0 - 1e-9) - 1e-12);
    }
}

TEST_CASE("report table lists every record") {
    const AssumptionReport rep = certify_assumptions(IonicModel{}, {}, {}, 51);
    const std::string t = rep.table();
    for (const auto& r : rep.records) CHECK(t.find(r.name) != std::string::npos);
}
