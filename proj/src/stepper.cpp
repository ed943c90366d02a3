#include "tridomain/stepper.hpp"

#include <cmath>
#include <map>

#include <Eigen/SparseLU>
#include <spdlog/spdlog.h>

#include "tridomain/errors.hpp"

namespace tridomain {

GatingScheme parse_gating(const std::string& s) {
    if (s == "explicit_euler") return GatingScheme::ExplicitEuler;
    if (s == "exact_linear") return GatingScheme::ExactLinear;
    if (s == "implicit") return GatingScheme::Implicit;
    throw ConfigError("unknown gating_scheme '" + s + "'");
}

IonicMode parse_ionic_mode(const std::string& s) {
    if (s == "fhn") return IonicMode::FHN;
    if (s == "linear") return IonicMode::Linear;
    throw ConfigError("unknown ionic_mode '" + s + "'");
}

LinearSolver parse_solver(const std::string& s) {
    if (s == "direct") return LinearSolver::Direct;
    if (s == "cg") return LinearSolver::CG;
    throw ConfigError("unknown linear_solver '" + s + "'");
}

double IappSpec::at(double t) const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return amplitude;
        case Kind::Pulse: return (t >= t_on && t < t_off) ? amplitude : 0.0;
    }
    return 0.0;
}

void SolverConfig::validate() const {
    if (!(eps > 0.0)) throw InvalidSpec("solver eps must be positive");
    if (!(delta >= 0.0)) throw InvalidSpec("solver delta must be nonnegative");
    if (!(dt > 0.0)) throw InvalidSpec("solver dt must be positive");
    if (!(t_end >= dt)) throw InvalidSpec("solver t_end must be at least dt");
    if (!(C_ratio > 0.0)) throw InvalidSpec("solver C_ratio must be positive");
    if (!(lin_tol > 0.0 && lin_tol < 1.0)) throw InvalidSpec("solver lin_tol must lie in (0, 1)");
    if (lin_maxit < 1) throw InvalidSpec("solver lin_maxit must be positive");
}

int SolverConfig::num_steps() const { return static_cast<int>(std::lround(t_end / dt)); }

double FieldSpec::at(const Vec2& x) const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return value;
        case Kind::LinearX: return value + slope * x.x;
        case Kind::Bump: {
            const double r2 = ((x.x - center.x) * (x.x - center.x) + (x.y - center.y) * (x.y - center.y)) /
                              (width * width);
            return value * std::exp(-r2);
        }
    }
    return 0.0;
}

bool SystemState::finite() const { return x.allFinite() && w[0].allFinite() && w[1].allFinite(); }
double SystemState::norm() const { return x.norm() + w[0].norm() + w[1].norm(); }

SystemState zero_state(const BlockOperator& op) {
    SystemState s;
    s.n1 = op.layout.n1;
    s.n2 = op.layout.n2;
    s.ne = op.layout.ne;
    s.x = Vec::Zero(op.layout.n());
    s.w[0] = Vec::Zero(op.layout.n_membrane(Interface::Gamma1));
    s.w[1] = Vec::Zero(op.layout.n_membrane(Interface::Gamma2));
    return s;
}

namespace {

Vec sample(const BlockOperator& op, int f, const FieldSpec& spec) {
    const auto& pairs = op.layout.pairs[f];
    Vec out(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = spec.at(op.mesh->vertices[pairs[k][0]]);
    return out;
}

// integral of a nodal membrane field over one interface, trapezoid per facet
double facet_integral(const BlockOperator& op, int f, const Vec& nodal, const std::vector<std::array<int, 2>>& idx) {
    const auto& facets = op.mesh->facets(static_cast<Interface>(f));
    double sum = 0.0;
    for (std::size_t e = 0; e < facets.size(); ++e)
        sum += 0.5 * facet_length(*op.mesh, facets[e]) * (nodal[idx[e][0]] + nodal[idx[e][1]]);
    return sum;
}

// integral of a potential over the trace of one side of an interface
double trace_integral(const BlockOperator& op, int f, bool inner, const Vec& x) {
    const auto& dof = op.layout.dof_of_vertex;
    double sum = 0.0;
    for (const Facet& e : op.mesh->facets(static_cast<Interface>(f))) {
        const auto& v = inner ? e.inner : e.outer;
        sum += 0.5 * facet_length(*op.mesh, e) * (x[dof[v[0]]] + x[dof[v[1]]]);
    }
    return sum;
}

double region_integral(const BlockOperator& op, Region r, const Vec& x) {
    const MicroMesh& m = *op.mesh;
    const auto& dof = op.layout.dof_of_vertex;
    double sum = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        if (m.triangle_region[t] != r) continue;
        const auto& tri = m.triangles[t];
        sum += m.triangle_area(t) / 3.0 * (x[dof[tri[0]]] + x[dof[tri[1]]] + x[dof[tri[2]]]);
    }
    return sum;
}

}  // namespace

SystemState initialize(const BlockOperator& op, const SolverConfig& cfg, const InitialData& data) {
    const int n = op.layout.n();
    SystemState st = zero_state(op);

    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < op.K.outerSize(); ++k)
        for (SpMat::InnerIterator it(op.K, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    std::vector<double> g;
    int row = n;
    auto add_rows = [&](int f, const Vec& target) {
        const SpMat& D = op.D[f];
        const SpMat Dt = D.transpose();
        for (int k = 0; k < D.rows(); ++k) {
            if (!op.layout.constrained[f][k]) continue;
            for (SpMat::InnerIterator it(Dt, k); it; ++it) {
                t.emplace_back(row, it.row(), it.value());
                t.emplace_back(it.row(), row, it.value());
            }
            g.push_back(target[k]);
            ++row;
        }
    };
    const Vec v1 = sample(op, 0, data.v0[0]);
    const Vec v2 = sample(op, 1, data.v0[1]);
    const Vec s0 = sample(op, 2, data.s0);
    add_rows(0, v1);
    add_rows(1, v2);
    add_rows(2, s0);
    for (int i = 0; i < n; ++i) {
        if (op.c[i] == 0.0) continue;
        t.emplace_back(row, i, op.c[i]);
        t.emplace_back(i, row, op.c[i]);
    }
    g.push_back(0.0);
    ++row;

    SpMat kkt(row, row);
    kkt.setFromTriplets(t.begin(), t.end());
    kkt.makeCompressed();
    Vec rhs = Vec::Zero(row);
    for (std::size_t k = 0; k < g.size(); ++k) rhs[n + static_cast<int>(k)] = g[k];

    if (rhs.squaredNorm() > 0.0) {
        Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu(kkt);
        if (lu.info() != Eigen::Success) throw SolverFailure("initial elliptic system is singular", INFINITY);
        const Vec sol = lu.solve(rhs);
        const double res = (kkt * sol - rhs).norm() / rhs.norm();
        if (!(res <= cfg.lin_tol)) throw SolverFailure("initial elliptic solve did not converge", res);
        st.x = sol.head(n);
    }
    st.w[0] = sample(op, 0, data.w0[0]);
    st.w[1] = sample(op, 1, data.w0[1]);

    for (int k = 0; k < 2; ++k) {
        const Vec v = st.v(op, k);
        spdlog::debug("initial ||sqrt(eps) v{}||^2 on gamma{} = {:.6e}", k + 1, k + 1, cfg.eps * v.dot(op.B[k] * v));
    }
    return st;
}

struct Stepper::Factor {
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    SpMat bordered;
    Vec inv_diag;
    double omega_e = 0.0;
};

Stepper::Stepper(const BlockOperator& op, const IonicModel& model, const GapModel& gap, const SolverConfig& cfg)
    : op_(op), model_(model), gap_(gap), cfg_(cfg), factor_(std::make_unique<Factor>()) {
    cfg_.validate();
    model_.validate();
    gap_.validate();
    if (cfg_.gating == GatingScheme::Implicit)
        gating_coeff_ = -model_.rho * cfg_.dt * model_.a1 / (1.0 + cfg_.dt * model_.b1);
    sys_ = build_system_matrix(op_, cfg_.eps, cfg_.delta, cfg_.dt, model_.beta1, gap_.G_gap, cfg_.C_ratio,
                               gating_coeff_);
    if (cfg_.solver == LinearSolver::Direct) {
        factor_->bordered = bordered(sys_.A, sys_.c);
        factor_->lu.compute(factor_->bordered);
        if (factor_->lu.info() != Eigen::Success) throw SolverFailure("system factorization failed", INFINITY);
    } else {
        factor_->inv_diag = sys_.A.diagonal().cwiseInverse();
    }
    factor_->omega_e = sys_.c.sum();
}

Stepper::~Stepper() = default;

Vec Stepper::solve(const Vec& b, double& lambda, StepReport& rep) const {
    const int n = static_cast<int>(b.size());
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        lambda = 0.0;
        rep.converged = true;
        return Vec::Zero(n);
    }
    const SpMat& A = sys_.A;
    const Vec& c = sys_.c;
    if (cfg_.solver == LinearSolver::Direct) {
        Vec rhs(n + 1);
        rhs << b, 0.0;
        Vec sol = factor_->lu.solve(rhs);
        Vec r = rhs - factor_->bordered * sol;
        rep.iterations = 1;
        // a few rounds of iterative refinement keep the residual at round-off
        for (int it = 0; it < 3 && r.norm() > 0.1 * cfg_.lin_tol * bnorm; ++it) {
            sol += factor_->lu.solve(r);
            r = rhs - factor_->bordered * sol;
            ++rep.iterations;
        }
        rep.residual = r.norm() / bnorm;
        lambda = sol[n];
        rep.converged = rep.residual <= cfg_.lin_tol;
        if (!rep.converged) throw SolverFailure("direct solve residual above lin_tol", rep.residual);
        return sol.head(n);
    }

    // conjugate gradients on the complement of c, Jacobi preconditioned
    const double cc = c.squaredNorm();
    auto P = [&](const Vec& y) -> Vec { return y - c * (c.dot(y) / cc); };
    Vec x = Vec::Zero(n);
    Vec r = P(b);
    const double target = cfg_.lin_tol * bnorm;
    Vec z = P(factor_->inv_diag.cwiseProduct(r));
    Vec p = z;
    double rz = r.dot(z);
    int it = 0;
    while (r.norm() > target && it < cfg_.lin_maxit) {
        const Vec Ap = P(A * p);
        const double alpha = rz / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        z = P(factor_->inv_diag.cwiseProduct(r));
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++it;
    }
    x = P(x);
    const Vec full = b - A * x;
    lambda = c.dot(full) / cc;
    rep.iterations = it;
    rep.residual = (full - c * lambda).norm() / bnorm;
    rep.converged = rep.residual <= cfg_.lin_tol;
    if (!rep.converged) throw SolverFailure("conjugate gradients stagnated", rep.residual);
    return x;
}

Vec Stepper::gating_explicit(int k, const Vec& v, const Vec& w) const {
    const double dt = cfg_.dt, a1 = model_.a1, b1 = model_.b1;
    switch (cfg_.gating) {
        case GatingScheme::ExplicitEuler: return w + dt * (a1 * v - b1 * w);
        case GatingScheme::ExactLinear: {
            const double e = std::exp(-b1 * dt);
            return w * e + (a1 / b1) * (1.0 - e) * v;
        }
        case GatingScheme::Implicit: return w;  // completed after the potential solve
    }
    (void)k;
    return w;
}

std::pair<SystemState, StepReport> Stepper::step(const SystemState& s) const {
    if (!s.finite()) throw Divergence("non-finite input state", s.t);
    const double eps = cfg_.eps, dt = cfg_.dt;
    const int n = op_.layout.n();
    Vec b = Vec::Zero(n);
    std::array<Vec, 2> v_old, w_new;

    for (int k = 0; k < 2; ++k) {
        v_old[k] = s.v(op_, k);
        const Vec& v = v_old[k];
        w_new[k] = gating_explicit(k, v, s.w[k]);
        const double iapp = cfg_.iapp[k].at(s.t);
        Vec f = v / dt + Vec::Constant(v.size(), iapp);
        if (cfg_.ionic_mode == IonicMode::FHN) f -= v.unaryExpr([&](double x) { return model_.Ia(x); }) - model_.beta1 * v;
        if (cfg_.gating == GatingScheme::Implicit)
            f -= (-model_.rho / (1.0 + dt * model_.b1)) * s.w[k];
        else
            f -= -model_.rho * w_new[k];
        b += op_.D[k].transpose() * (op_.B[k] * (eps * f));
    }
    const Vec s_old = s.s(op_);
    b += op_.D[2].transpose() * (op_.B[2] * ((eps * cfg_.C_ratio / dt) * s_old));
    if (cfg_.delta > 0.0) b += (cfg_.delta / dt) * (op_.R * s.x);

    StepReport rep;
    SystemState next = s;
    next.x = solve(b, rep.lambda, rep);
    next.t = s.t + dt;
    for (int k = 0; k < 2; ++k) {
        if (cfg_.gating == GatingScheme::Implicit)
            next.w[k] = (s.w[k] + dt * model_.a1 * next.v(op_, k)) / (1.0 + dt * model_.b1);
        else
            next.w[k] = w_new[k];
    }
    if (!next.finite()) throw Divergence("non-finite state", next.t);

    const BoundaryFluxes F = fluxes(s, next);
    const double dd = cfg_.delta / dt;
    const Vec dx = next.x - s.x;
    auto reg = [&](Region r) { return dd * region_integral(op_, r, dx); };
    rep.flux[0] = std::abs(F.gamma1 + F.gamma12 + reg(Region::I1) +
                           dd * (trace_integral(op_, 0, true, dx) + trace_integral(op_, 2, true, dx)));
    rep.flux[1] = std::abs(F.gamma2 - F.gamma12 + reg(Region::I2) +
                           dd * (trace_integral(op_, 1, true, dx) + trace_integral(op_, 2, false, dx)));
    rep.flux[2] = std::abs(-F.gamma1 - F.gamma2 + reg(Region::E) + rep.lambda * factor_->omega_e +
                           dd * (trace_integral(op_, 0, false, dx) + trace_integral(op_, 1, false, dx)));
    rep.state_norm = next.norm();
    rep.max_change = dx.size() ? dx.cwiseAbs().maxCoeff() : 0.0;
    rep.mean_ue = sys_.c.dot(next.x);
    return {std::move(next), rep};
}

BoundaryFluxes Stepper::fluxes(const SystemState& a, const SystemState& b) const {
    const double eps = cfg_.eps, dt = cfg_.dt;
    BoundaryFluxes F;
    for (int k = 0; k < 2; ++k) {
        const Vec v0 = a.v(op_, k), v1 = b.v(op_, k);
        Vec ia(v0.size());
        for (int i = 0; i < v0.size(); ++i)
            ia[i] = cfg_.ionic_mode == IonicMode::FHN ? model_.Ia(v0[i]) + model_.beta1 * (v1[i] - v0[i])
                                                      : model_.beta1 * v1[i];
        const double iapp = cfg_.iapp[k].at(a.t);
        Vec Im(v0.size());
        for (int i = 0; i < v0.size(); ++i)
            Im[i] = eps * ((v1[i] - v0[i]) / dt + ia[i] + model_.Ib(b.w[k][i]) - iapp);
        (k == 0 ? F.gamma1 : F.gamma2) = facet_integral(op_, k, Im, op_.facet_nodes[k]);
    }
    const Vec s0 = a.s(op_), s1 = b.s(op_);
    const Vec I12 = eps * cfg_.C_ratio * ((s1 - s0) / dt + gap_.G_gap * s1);
    F.gamma12 = facet_integral(op_, 2, I12, op_.facet_nodes[2]);
    return F;
}

Trajectory Stepper::run_steps(const SystemState& initial, int steps, int stride, const Probe& probe) const {
    if (stride < 1) stride = 1;
    Trajectory traj;
    traj.states.push_back(initial);
    traj.step_index.push_back(0);
    traj.reports.reserve(steps);
    if (probe) probe(initial, nullptr);
    SystemState cur = initial;
    for (int n = 1; n <= steps; ++n) {
        try {
            auto [next, rep] = step(cur);
            cur = std::move(next);
            traj.reports.push_back(rep);
        } catch (const SolverFailure& e) {
            throw SolverFailure(std::string(e.what()) + " at t=" + std::to_string(cur.t + cfg_.dt), e.residual);
        }
        if (n % stride == 0 || n == steps) {
            traj.states.push_back(cur);
            traj.step_index.push_back(n);
            if (probe) probe(cur, &traj.reports.back());
        }
    }
    return traj;
}

Trajectory Stepper::run(const SystemState& initial, int stride, const Probe& probe) const {
    return run_steps(initial, cfg_.num_steps(), stride, probe);
}

}  // namespace tridomain
