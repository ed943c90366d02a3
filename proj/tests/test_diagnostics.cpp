#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>

#include "tridomain/diagnostics.hpp"

using namespace tridomain;

namespace {

struct Fixture {
    MicroMesh mesh;
    BlockOperator op;
    explicit Fixture(int density = 4, std::array<int, 2> counts = {1, 1}, double eps = 1.0)
        : mesh(tile([&] {
                   UnitCellSpec s;
                   s.mesh_density = density;
                   return build_unit_cell(s);
               }(),
                    {counts, eps})) {
        op = assemble(mesh, ConductivitySpec::isotropic(1.0, 2.0));
    }
};

SystemState with_traces(const Fixture& f, double u1, double u2, double ue) {
    SystemState s = zero_state(f.op);
    const DofLayout& L = f.op.layout;
    s.x.segment(0, L.n1).setConstant(u1);
    s.x.segment(L.n1, L.n2).setConstant(u2);
    s.x.segment(L.n1 + L.n2, L.ne).setConstant(ue);
    return s;
}

InitialData bump() {
    InitialData d;
    d.v0[0] = {FieldSpec::Kind::Bump, 0.8, 0.0, {0.4, 0.5}, 0.3};
    d.v0[1] = FieldSpec::constant(-0.3);
    d.w0[1] = FieldSpec::constant(0.2);
    d.s0 = FieldSpec::constant(0.25);
    return d;
}

}  // namespace

TEST_CASE("energy of simple states") {
    Fixture f(8);
    const SolverConfig cfg;
    const IonicModel m;
    const EnergyReport z = energy(zero_state(f.op), f.op, m, cfg);
    CHECK(z.total == 0.0);
    CHECK(z.membrane[0] == 0.0);
    CHECK(z.r_norm == 0.0);
    CHECK(z.dissipation == 0.0);

    const Measures mu = interface_measures(f.mesh);
    const EnergyReport e = energy(with_traces(f, 1.0, 0.0, 0.0), f.op, m, cfg);
    CHECK(e.membrane[0] == doctest::Approx(mu.gamma1).epsilon(1e-13));
    CHECK(e.membrane[1] == 0.0);
    CHECK(e.gap == doctest::Approx(mu.gamma12).epsilon(1e-13));

    const double c = 1.7;
    const EnergyReport r = energy(with_traces(f, c, c, 0.0), f.op, m, cfg);
    CHECK(r.r_norm == doctest::Approx(std::pow(c, 4) * (mu.gamma1 + mu.gamma2)).epsilon(1e-12));
    CHECK(r.gap == 0.0);
    CHECK(r.nonnegative());
    CHECK(r.power_mean_ok);
}

TEST_CASE("energy entries are nonnegative on random states") {
    Fixture f(4);
    SolverConfig cfg;
    cfg.delta = 1e-2;
    std::mt19937 rng(5);
    std::normal_distribution<double> N;
    for (int i = 0; i < 50; ++i) {
        SystemState s = zero_state(f.op);
        for (auto& v : s.x) v = N(rng);
        for (auto& v : s.w[0]) v = N(rng);
        for (auto& v : s.w[1]) v = N(rng);
        const EnergyReport e = energy(s, f.op, IonicModel{}, cfg);
        CHECK(e.nonnegative());
        CHECK(e.power_mean_ok);
    }
}

TEST_CASE("interface integral of a constant trace") {
    Fixture f(4);
    const Measures mu = interface_measures(f.mesh);
    const Vec v = Vec::Constant(f.op.layout.n_membrane(Interface::Gamma2), 2.0);
    CHECK(interface_integral(f.op, 1, v, [](double x) { return x * x; }) ==
          doctest::Approx(4.0 * mu.gamma2).epsilon(1e-13));
    CHECK(lr_norm_pow(f.op, 1, v, 3.0) == doctest::Approx(8.0 * mu.gamma2).epsilon(1e-13));
}

TEST_CASE("dissipative energy never increases") {
    Fixture f(4, {2, 1}, 0.5);
    SolverConfig cfg;
    cfg.eps = 0.5;
    cfg.dt = 0.02;
    cfg.t_end = 1.0;
    cfg.ionic_mode = IonicMode::Linear;
    cfg.gating = GatingScheme::Implicit;
    for (double delta : {0.0, 1e-2}) {
        cfg.delta = delta;
        const IonicModel m;
        Stepper st(f.op, m, GapModel{}, cfg);
        const Trajectory tr = st.run(initialize(f.op, cfg, bump()));
        const double E0 = energy(tr.states.front(), f.op, m, cfg).total;
        REQUIRE(E0 > 0.0);
        double prev = E0;
        for (std::size_t j = 1; j < tr.states.size(); ++j) {
            const double E = energy(tr.states[j], f.op, m, cfg).total;
            CHECK(E <= prev + 1e-12 * E0);
            prev = E;
        }
        CHECK(prev < 0.5 * E0);
    }
}

TEST_CASE("a priori monitors") {
    Fixture f(4);
    SolverConfig cfg;
    cfg.t_end = 0.2;
    const IonicModel m;
    Stepper st(f.op, m, GapModel{}, cfg);

    const Trajectory zero = st.run(zero_state(f.op));
    const AprioriReport z = apriori_monitor(zero, f.op, m, cfg);
    CHECK(z.vw_sup == 0.0);
    CHECK(z.u_l2h1 == 0.0);
    CHECK(z.vr_norm == 0.0);
    CHECK(z.ia_dual == 0.0);
    CHECK(z.dt_norms == 0.0);

    const Trajectory tr = st.run(initialize(f.op, cfg, bump()));
    const AprioriReport full = apriori_monitor(tr, f.op, m, cfg);
    CHECK(full.duality_ok);
    CHECK(full.vw_sup > 0.0);
    // sups and integrals grow with the horizon
    Trajectory half = tr;
    half.states.resize(tr.states.size() / 2 + 1);
    half.step_index.resize(half.states.size());
    half.reports.resize(half.states.size() - 1);
    const AprioriReport h = apriori_monitor(half, f.op, m, cfg);
    CHECK(h.vw_sup <= full.vw_sup);
    CHECK(h.u_l2h1 <= full.u_l2h1);
    CHECK(h.vr_norm <= full.vr_norm);
    CHECK(h.ia_dual <= full.ia_dual);
    CHECK(h.dt_norms <= full.dt_norms);
}

TEST_CASE("Poincare trace ratio") {
    Fixture f(8);
    for (const auto& c : poincare_trace_ratio(zero_state(f.op), f.op, 1.0)) CHECK_FALSE(c.defined);

    const Measures mu = interface_measures(f.mesh);
    const auto ratios = poincare_trace_ratio(with_traces(f, 1.0, 1.0, 0.0), f.op, 1.0);
    REQUIRE(ratios.size() == 2);
    for (const auto& c : ratios) {
        CHECK(c.defined);
        const double expect = c.region == Region::I1 ? mu.omega_i1 / mu.gamma1 : mu.omega_i2 / mu.gamma2;
        CHECK(c.ratio == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("Poincare constant is mesh stable") {
    auto worst = [](int density) {
        Fixture f(density);
        std::mt19937 rng(21);
        std::normal_distribution<double> N;
        double w = 0.0;
        for (int i = 0; i < 100; ++i) {
            // smooth random fields: a constant plus a linear part per region
            SystemState s = zero_state(f.op);
            const double a[3] = {N(rng), N(rng), N(rng)}, b[3] = {N(rng), N(rng), N(rng)};
            for (std::size_t v = 0; v < f.mesh.num_vertices(); ++v) {
                const int r = static_cast<int>(f.mesh.vertex_region[v]);
                s.x[f.op.layout.dof_of_vertex[v]] = a[r] + b[r] * f.mesh.vertices[v].x;
            }
            for (const auto& c : poincare_trace_ratio(s, f.op, 1.0))
                if (c.defined) w = std::max(w, c.ratio);
        }
        return w;
    };
    const double w8 = worst(8), w16 = worst(16);
    CHECK(std::isfinite(w8));
    CHECK(w16 < 2.0 * w8);
    CHECK(w8 < 2.0 * w16);
}

TEST_CASE("nondimensional groups") {
    const NondimReport r = nondimensionalize(PhysicalUnits{});
    // sqrt(0.01 cm / (1e4 Ohm cm^2 * 5e-3 S/cm)) = sqrt(0.01 / 50)
    CHECK(r.epsilon == doctest::Approx(std::sqrt(0.01 / 50.0)).epsilon(1e-12));
    CHECK(r.sqrt_ratio == doctest::Approx(std::sqrt(0.01 / 50.0)).epsilon(1e-15));
    CHECK(std::abs(r.eps_from_L - r.sqrt_ratio) <= 1e-12 * r.sqrt_ratio);
    CHECK(r.identity_rel_err <= 1e-12);
    CHECK(r.tau_m_ms == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(r.L_cm == doctest::Approx(std::sqrt(50.0 * 0.01)).epsilon(1e-14));
    CHECK(r.reported_epsilon == 7.1e-3);
    CHECK(r.discrepancy_flagged);
    CHECK(r.discrepancy_factor == doctest::Approx(1.414213562e-2 / 7.1e-3).epsilon(1e-6));
    CHECK(r.text().find("0.0071") != std::string::npos);

    PhysicalUnits u;
    u.ell_mic_cm *= 4.0;
    CHECK(nondimensionalize(u).epsilon == doctest::Approx(2.0 * r.epsilon).epsilon(1e-14));
    // only the ratio ell / (R_m lambda) matters
    u = {};
    u.ell_mic_cm *= 3.0;
    u.R_m *= 3.0;
    CHECK(nondimensionalize(u).epsilon == doctest::Approx(r.epsilon).epsilon(1e-14));
    u = {};
    u.lambda = -1.0;
    CHECK_THROWS_AS(nondimensionalize(u), InvalidSpec);
}

TEST_CASE("stability experiment") {
    Fixture f(4);
    ExperimentSpec e;
    e.op = &f.op;
    e.cfg.t_end = 0.1;
    e.init = bump();
    const StabilityReport r = stability_experiment(e, {1e-2, 1e-3}, 2);
    REQUIRE(r.rows.size() >= 2);
    CHECK(r.zero_bitwise);
    CHECK(r.ratios_agree);
    CHECK(r.ratio_spread <= 0.05);
    CHECK(r.rows[0].amplification > 0.0);
    CHECK(r.gronwall_C >= 0.0);
    CHECK(r.gronwall_ok);
}

TEST_CASE("delta limit sequence") {
    Fixture f(4);
    ExperimentSpec e;
    e.op = &f.op;
    e.cfg.t_end = 0.1;
    e.init = bump();
    const DeltaLimitReport r = delta_limit(e, {1e-2, 1e-3, 1e-4}, 3);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.strictly_decreasing);
    for (const auto& row : r.rows) CHECK(row.distance > 0.0);
}

TEST_CASE("manufactured solutions") {
    for (MmsKind k : {MmsKind::Constant, MmsKind::PiecewiseLinear}) {
        const MmsReport r = mms_convergence(k, {4, 8}, 2);
        REQUIRE(r.rows.size() == 2);
        for (const auto& row : r.rows) {
            CHECK(row.err_u <= 1e-9);
            CHECK(row.err_v <= 1e-9);
        }
    }
    const MmsReport t = mms_convergence(MmsKind::Trig, {8, 16}, 2);
    CHECK(t.rows[1].err_u < t.rows[0].err_u / 3.0);
    CHECK(parse_mms_kind("trig") == MmsKind::Trig);
    CHECK(parse_mms_kind("linear") == MmsKind::PiecewiseLinear);
    CHECK_THROWS(parse_mms_kind("quartic"));
}

TEST_CASE("slope fit") {
    const std::vector<double> h{0.1, 0.05, 0.025};
    std::vector<double> e;
    for (double x : h) e.push_back(3.0 * x * x);
    CHECK(fit_slope(h, e) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("parallel_for visits each index once and propagates errors") {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(37, 4, [&](int i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(5, 3, [](int i) {
                        if (i == 3) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
}
