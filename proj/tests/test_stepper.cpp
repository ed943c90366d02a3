#include <doctest.h>

#include <cmath>
#include <cstring>

#include <Eigen/Dense>

#include "tridomain/stepper.hpp"

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

SolverConfig config(double eps = 1.0) {
    SolverConfig c;
    c.eps = eps;
    c.dt = 0.01;
    c.t_end = 0.05;
    return c;
}

InitialData bump(double amp = 1.0) {
    InitialData d;
    d.v0[0] = {FieldSpec::Kind::Bump, amp, 0.0, {0.4, 0.5}, 0.3};
    d.v0[1] = FieldSpec::constant(-0.2 * amp);
    d.w0[0] = FieldSpec::constant(0.1 * amp);
    d.s0 = FieldSpec::constant(0.3 * amp);
    return d;
}

bool bitwise_equal(const Vec& a, const Vec& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("config parsing helpers") {
    CHECK(parse_gating("explicit_euler") == GatingScheme::ExplicitEuler);
    CHECK(parse_gating("exact_linear") == GatingScheme::ExactLinear);
    CHECK(parse_gating("implicit") == GatingScheme::Implicit);
    CHECK_THROWS_AS(parse_gating("rk4"), ConfigError);
    CHECK(parse_ionic_mode("linear") == IonicMode::Linear);
    CHECK(parse_solver("cg") == LinearSolver::CG);
    SolverConfig c;
    c.dt = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidSpec);
    c = {};
    c.lin_tol = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidSpec);
    c = {};
    c.t_end = 0.3;
    c.dt = 0.1;
    CHECK(c.num_steps() == 3);
}

TEST_CASE("applied current schedule") {
    IappSpec p{IappSpec::Kind::Pulse, 2.0, 0.1, 0.3};
    CHECK(p.at(0.05) == 0.0);
    CHECK(p.at(0.1) == 2.0);
    CHECK(p.at(0.29) == 2.0);
    CHECK(p.at(0.3) == 0.0);
    CHECK(IappSpec{IappSpec::Kind::Constant, -1.5}.at(7.0) == -1.5);
}

TEST_CASE("zero data is an equilibrium") {
    Fixture f;
    Stepper st(f.op, IonicModel{}, GapModel{}, config());
    const SystemState x0 = initialize(f.op, config(), InitialData{});
    CHECK(x0.x.cwiseAbs().maxCoeff() == 0.0);
    const Trajectory tr = st.run_steps(x0, 20);
    for (const auto& s : tr.states) {
        CHECK(s.x.cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.w[0].cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.w[1].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("initial traces follow the prescribed data") {
    Fixture f(4);
    const SolverConfig cfg = config();
    InitialData d;
    d.v0[0] = FieldSpec::constant(0.7);
    const SystemState s = initialize(f.op, cfg, d);
    const Vec v1 = s.v(f.op, 0);
    CHECK((v1.array() - 0.7).abs().maxCoeff() <= 1e-10);
    CHECK(s.v(f.op, 1).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::abs(f.op.c.dot(s.x)) <= 1e-10);
    // gap difference follows its spec away from the triple points
    d = bump();
    const SystemState b = initialize(f.op, cfg, d);
    const Vec sv = b.s(f.op);
    for (int k = 0; k < sv.size(); ++k)
        if (f.op.layout.constrained[2][k]) CHECK(sv[k] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(b.w[0].size() == f.op.layout.n_membrane(Interface::Gamma1));
    CHECK((b.w[0].array() - 0.1).abs().maxCoeff() == 0.0);
}

TEST_CASE("one stimulated step matches a dense solve") {
    Fixture f(3);
    SolverConfig cfg = config(0.5);
    cfg.iapp[0] = {IappSpec::Kind::Constant, 1.0};
    const IonicModel model;
    const GapModel gap;
    Stepper st(f.op, model, gap, cfg);
    const auto [next, rep] = st.step(zero_state(f.op));

    // build the bordered system from the raw blocks
    const double eps = cfg.eps, dt = cfg.dt;
    Eigen::MatrixXd A = Eigen::MatrixXd(f.op.K);
    for (int k = 0; k < 2; ++k) {
        const Eigen::MatrixXd D = Eigen::MatrixXd(f.op.D[k]);
        A += eps * (1.0 / dt + model.beta1) * D.transpose() * Eigen::MatrixXd(f.op.B[k]) * D;
    }
    const Eigen::MatrixXd D12 = Eigen::MatrixXd(f.op.D[2]);
    A += eps * cfg.C_ratio * (1.0 / dt + gap.G_gap) * D12.transpose() * Eigen::MatrixXd(f.op.B[2]) * D12;
    const int n = f.op.layout.n();
    Eigen::MatrixXd Bd = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Bd.topLeftCorner(n, n) = A;
    Bd.col(n).head(n) = f.op.c;
    Bd.row(n).head(n) = f.op.c.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(f.op.D[0].rows());
    rhs.head(n) = eps * Eigen::MatrixXd(f.op.D[0]).transpose() * (Eigen::MatrixXd(f.op.B[0]) * ones);
    const Eigen::VectorXd ref = Bd.fullPivLu().solve(rhs);

    CHECK((next.x - ref.head(n)).cwiseAbs().maxCoeff() <= 1e-10 * ref.cwiseAbs().maxCoeff());
    CHECK(next.v(f.op, 0).mean() > 0.0);
    CHECK(rep.converged);
    CHECK(next.t == doctest::Approx(dt));
}

TEST_CASE("loop contract and stride") {
    Fixture f;
    SolverConfig cfg = config();
    cfg.t_end = 3 * cfg.dt;
    Stepper st(f.op, IonicModel{}, GapModel{}, cfg);
    const SystemState x0 = initialize(f.op, cfg, bump());
    const Trajectory tr = st.run(x0);
    CHECK(tr.reports.size() == 3);
    REQUIRE(tr.states.size() == 4);
    for (std::size_t j = 1; j < tr.states.size(); ++j) CHECK(tr.states[j].t > tr.states[j - 1].t);
    const Trajectory strided = st.run_steps(x0, 7, 3);
    CHECK(strided.step_index == std::vector<int>{0, 3, 6, 7});
}

TEST_CASE("restart reproduces a single run bitwise") {
    Fixture f;
    const SolverConfig cfg = config();
    Stepper st(f.op, IonicModel{}, GapModel{}, cfg);
    const SystemState x0 = initialize(f.op, cfg, bump());
    const Trajectory full = st.run_steps(x0, 10);
    const Trajectory a = st.run_steps(x0, 5);
    const Trajectory b = st.run_steps(a.states.back(), 5);
    CHECK(bitwise_equal(full.states.back().x, b.states.back().x));
    CHECK(bitwise_equal(full.states.back().w[0], b.states.back().w[0]));
    CHECK(bitwise_equal(full.states.back().w[1], b.states.back().w[1]));
}

TEST_CASE("flux balance and mean-zero gauge hold every step") {
    Fixture f(4, {2, 2}, 0.5);
    SolverConfig cfg = config(0.5);
    cfg.t_end = 0.2;
    cfg.iapp[0] = {IappSpec::Kind::Constant, 0.8};
    for (double delta : {0.0, 1e-3}) {
        cfg.delta = delta;
        Stepper st(f.op, IonicModel{}, GapModel{}, cfg);
        const Trajectory tr = st.run(initialize(f.op, cfg, bump()));
        for (const StepReport& r : tr.reports) {
            for (double fl : r.flux) CHECK(fl <= 10.0 * cfg.lin_tol * r.state_norm);
            CHECK(std::abs(r.mean_ue) <= cfg.lin_tol);
        }
    }
}

TEST_CASE("constant shift of the potentials leaves v, s and w unchanged") {
    Fixture f;
    const SolverConfig cfg = config();
    Stepper st(f.op, IonicModel{}, GapModel{}, cfg);
    SystemState a = initialize(f.op, cfg, bump());
    SystemState b = a;
    b.x.array() += 5.0;
    const Trajectory ta = st.run_steps(a, 20), tb = st.run_steps(b, 20);
    for (std::size_t j = 0; j < ta.states.size(); ++j) {
        for (int k = 0; k < 2; ++k) {
            CHECK((ta.states[j].v(f.op, k) - tb.states[j].v(f.op, k)).cwiseAbs().maxCoeff() <= cfg.lin_tol);
            CHECK((ta.states[j].w[k] - tb.states[j].w[k]).cwiseAbs().maxCoeff() <= cfg.lin_tol);
        }
        CHECK((ta.states[j].s(f.op) - tb.states[j].s(f.op)).cwiseAbs().maxCoeff() <= cfg.lin_tol);
    }
    // after one step the gauge is restored
    CHECK((ta.states[1].x - tb.states[1].x).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("trajectories converge as delta shrinks") {
    Fixture f;
    SolverConfig cfg = config();
    cfg.t_end = 0.1;
    auto final_u = [&](double delta) {
        SolverConfig c = cfg;
        c.delta = delta;
        Stepper st(f.op, IonicModel{}, GapModel{}, c);
        return st.run(initialize(f.op, c, bump())).states.back().x;
    };
    const Vec u1 = final_u(1e-3), u2 = final_u(5e-4), u3 = final_u(2.5e-4);
    CHECK((u1 - u2).norm() > 0.0);
    CHECK((u2 - u3).norm() < (u1 - u2).norm());
}

TEST_CASE("conjugate gradients agree with the direct solver") {
    Fixture f(4);
    SolverConfig cfg = config(0.5);
    cfg.lin_tol = 1e-12;
    cfg.iapp[1] = {IappSpec::Kind::Constant, -0.5};
    Stepper direct(f.op, IonicModel{}, GapModel{}, cfg);
    cfg.solver = LinearSolver::CG;
    Stepper cg(f.op, IonicModel{}, GapModel{}, cfg);
    const SystemState x0 = initialize(f.op, cfg, bump());
    const auto [a, ra] = direct.step(x0);
    const auto [b, rb] = cg.step(x0);
    CHECK(rb.iterations > 1);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() <= 1e-9 * a.x.cwiseAbs().maxCoeff());
}

TEST_CASE("gating schemes") {
    Fixture f(3);
    SolverConfig cfg = config();
    IonicModel m;
    m.a1 = 0.7;
    m.b1 = 1.3;
    InitialData d;
    d.v0[0] = FieldSpec::constant(0.5);
    d.w0[0] = FieldSpec::constant(0.2);
    for (GatingScheme g : {GatingScheme::ExplicitEuler, GatingScheme::ExactLinear, GatingScheme::Implicit}) {
        cfg.gating = g;
        Stepper st(f.op, m, GapModel{}, cfg);
        const SystemState x0 = initialize(f.op, cfg, d);
        const auto [x1, rep] = st.step(x0);
        const Vec v0 = x0.v(f.op, 0), v1 = x1.v(f.op, 0);
        for (int i = 0; i < v0.size(); ++i) {
            const double w0 = x0.w[0][i], dt = cfg.dt;
            double expect;
            if (g == GatingScheme::ExplicitEuler) expect = w0 + dt * (m.a1 * v0[i] - m.b1 * w0);
            else if (g == GatingScheme::ExactLinear)
                expect = m.a1 / m.b1 * v0[i] + (w0 - m.a1 / m.b1 * v0[i]) * std::exp(-m.b1 * dt);
            else expect = (w0 + dt * m.a1 * v1[i]) / (1.0 + dt * m.b1);
            CHECK(x1.w[0][i] == doctest::Approx(expect).epsilon(1e-13));
        }
    }
}

TEST_CASE("non-finite states raise divergence") {
    Fixture f(2);
    Stepper st(f.op, IonicModel{}, GapModel{}, config());
    SystemState s = zero_state(f.op);
    s.w[0][0] = std::nan("");
    CHECK_THROWS_AS(st.step(s), Divergence);
}
