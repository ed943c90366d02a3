#include "tridomain/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "tridomain/errors.hpp"

namespace tridomain {

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::clamp(jobs, 1, std::max(1, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lk(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

double interface_integral(const BlockOperator& op, int f, const Vec& v, const std::function<double(double)>& g,
                          const std::vector<double>& breaks) {
    static const double gx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    static const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    const auto& facets = op.mesh->facets(static_cast<Interface>(f));
    const auto& idx = op.facet_nodes[f];
    double sum = 0.0;
    std::vector<double> cuts;
    for (std::size_t e = 0; e < facets.size(); ++e) {
        const double h = facet_length(*op.mesh, facets[e]);
        const double a = v[idx[e][0]], b = v[idx[e][1]];
        cuts.assign({0.0, 1.0});
        for (double br : breaks)
            if ((a - br) * (b - br) < 0.0) cuts.push_back((br - a) / (b - a));
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double t0 = cuts[c], len = cuts[c + 1] - cuts[c];
            for (int q = 0; q < 3; ++q) {
                const double t = t0 + len * gx[q];
                sum += h * len * gw[q] * g(a + (b - a) * t);
            }
        }
    }
    return sum;
}

double lr_norm_pow(const BlockOperator& op, int f, const Vec& v, double r) {
    return interface_integral(op, f, v, [r](double x) { return std::pow(std::abs(x), r); }, {0.0});
}

bool EnergyReport::nonnegative() const {
    for (double x : {membrane[0], membrane[1], gating[0], gating[1], gap, delta_energy, dissipation, r_norm, dt_v,
                     dt_w, dt_s})
        if (x < 0.0) return false;
    return true;
}

EnergyReport energy(const SystemState& s, const BlockOperator& op, const IonicModel& model, const SolverConfig& cfg,
                    const SystemState* prev) {
    const double eps = cfg.eps;
    const Measures meas = interface_measures(*op.mesh);
    const double glen[2] = {meas.gamma1, meas.gamma2};
    EnergyReport E;
    for (int k = 0; k < 2; ++k) {
        const Vec v = s.v(op, k);
        E.membrane[k] = eps * v.dot(op.B[k] * v);
        E.gating[k] = eps * s.w[k].dot(op.B[k] * s.w[k]);
        E.ionic_dissipation +=
            eps * interface_integral(op, k, v, [&](double x) { return model.Ia_tilde(x) * x; });
        const double lr = lr_norm_pow(op, k, v, model.r);
        E.r_norm += eps * lr;
        // Hoelder: ||v||_2^2 <= ||v||_r^2 |Gamma|^{1-2/r}
        const double l2 = v.dot(op.B[k] * v);
        if (glen[k] > 0.0 && l2 > std::pow(lr, 2.0 / model.r) * std::pow(glen[k], 1.0 - 2.0 / model.r) * (1 + 1e-9) + 1e-300)
            E.power_mean_ok = false;
        if (prev) {
            const double dt = s.t - prev->t;
            if (dt > 0.0) {
                const Vec dv = (v - prev->v(op, k)) / dt;
                const Vec dw = (s.w[k] - prev->w[k]) / dt;
                E.dt_v += eps * dv.dot(op.B[k] * dv);
                E.dt_w += eps * dw.dot(op.B[k] * dw);
            }
        }
    }
    const Vec sg = s.s(op);
    E.gap = eps * sg.dot(op.B[2] * sg);
    if (prev && s.t > prev->t) {
        const Vec ds = (sg - prev->s(op)) / (s.t - prev->t);
        E.dt_s = eps * ds.dot(op.B[2] * ds);
    }
    E.delta_energy = cfg.delta * s.x.dot(op.R * s.x);
    E.dissipation = std::max(0.0, s.x.dot(op.K * s.x));  // K is PSD, clip round-off
    E.total = 0.5 * (E.membrane[0] + E.membrane[1] + model.alpha4() * (E.gating[0] + E.gating[1]) +
                     cfg.C_ratio * E.gap + E.delta_energy);
    return E;
}

AprioriReport apriori_monitor(const Trajectory& traj, const BlockOperator& op, const IonicModel& model,
                              const SolverConfig& cfg) {
    const double eps = cfg.eps, r = model.r, rp = r / (r - 1.0);
    const Measures meas = interface_measures(*op.mesh);
    const double glen[2] = {meas.gamma1, meas.gamma2};
    const std::vector<double> roots{0.0, model.theta, 1.0};

    AprioriReport rep;
    rep.duality_margin = INFINITY;
    double prev_h1 = 0.0, prev_vr = 0.0, prev_ia = 0.0;
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        const SystemState& s = traj.states[j];
        rep.times.push_back(s.t);
        double vw = 0.0, vr = 0.0, ia = 0.0;
        for (int k = 0; k < 2; ++k) {
            const Vec v = s.v(op, k);
            vw += eps * (v.dot(op.B[k] * v) + s.w[k].dot(op.B[k] * s.w[k]));
            const double lr = lr_norm_pow(op, k, v, r);
            const double iak = interface_integral(
                op, k, v, [&](double x) { return std::pow(std::abs(model.Ia(x)), rp); }, roots);
            vr += eps * lr;
            ia += eps * iak;
            const double lhs = std::pow(eps * iak, 1.0 / rp);
            const double rhs = model.alpha1() * (std::pow(eps * lr, (r - 1.0) / r) +
                                                 std::pow(eps, (r - 1.0) / r) * std::pow(glen[k], (r - 1.0) / r));
            rep.duality_margin = std::min(rep.duality_margin, rhs - lhs);
        }
        const Vec sg = s.s(op);
        vw += eps * sg.dot(op.B[2] * sg);
        const double h1 = s.x.dot(op.Mvol * s.x) + s.x.dot(op.L * s.x);
        rep.vw_sup = std::max(rep.vw_sup, vw);
        if (j > 0) {
            const SystemState& p = traj.states[j - 1];
            const double dt = s.t - p.t;
            rep.u_l2h1 += 0.5 * dt * (h1 + prev_h1);
            rep.vr_norm += 0.5 * dt * (vr + prev_vr);
            rep.ia_dual += 0.5 * dt * (ia + prev_ia);
            if (dt > 0.0) {
                double d = 0.0;
                for (int k = 0; k < 2; ++k) {
                    const Vec dv = s.v(op, k) - p.v(op, k);
                    const Vec dw = s.w[k] - p.w[k];
                    d += dv.dot(op.B[k] * dv) + dw.dot(op.B[k] * dw);
                }
                const Vec ds = sg - p.s(op);
                d += ds.dot(op.B[2] * ds);
                rep.dt_norms += eps * d / dt;
            }
        }
        prev_h1 = h1;
        prev_vr = vr;
        prev_ia = ia;
    }
    if (traj.states.empty()) rep.duality_margin = 0.0;
    rep.duality_ok = rep.duality_margin >= -1e-12;
    return rep;
}

namespace {

double elem_mass_sq(const MicroMesh& m, std::size_t t, const double u[3]) {
    const double s = u[0] + u[1] + u[2];
    return m.triangle_area(t) / 12.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + s * s);
}

double elem_grad_sq(const MicroMesh& m, std::size_t t, const double u[3]) {
    const auto& tri = m.triangles[t];
    const Vec2 &p0 = m.vertices[tri[0]], &p1 = m.vertices[tri[1]], &p2 = m.vertices[tri[2]];
    const double area = m.triangle_area(t);
    const double gx = ((p1.y - p2.y) * u[0] + (p2.y - p0.y) * u[1] + (p0.y - p1.y) * u[2]) / (2.0 * area);
    const double gy = ((p2.x - p1.x) * u[0] + (p0.x - p2.x) * u[1] + (p1.x - p0.x) * u[2]) / (2.0 * area);
    return area * (gx * gx + gy * gy);
}

}  // namespace

std::vector<ComponentRatio> poincare_trace_ratio(const SystemState& s, const BlockOperator& op, double eps) {
    const MicroMesh& m = *op.mesh;
    const auto& dof = op.layout.dof_of_vertex;
    std::map<std::pair<int, int>, ComponentRatio> comp;
    double grad_e = 0.0;
    std::map<std::pair<int, int>, double> grad_i;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const auto& tri = m.triangles[t];
        const double u[3] = {s.x[dof[tri[0]]], s.x[dof[tri[1]]], s.x[dof[tri[2]]]};
        const Region r = m.triangle_region[t];
        if (r == Region::E) {
            grad_e += elem_grad_sq(m, t, u);
            continue;
        }
        auto& c = comp[{m.triangle_cell[t], static_cast<int>(r)}];
        c.cell = m.triangle_cell[t];
        c.region = r;
        c.numerator += elem_mass_sq(m, t, u);
        grad_i[{c.cell, static_cast<int>(r)}] += elem_grad_sq(m, t, u);
    }
    std::map<std::pair<int, int>, double> trace;
    for (int k = 0; k < 2; ++k) {
        for (const Facet& f : m.facets(static_cast<Interface>(k))) {
            const double a = s.x[dof[f.inner[0]]] - s.x[dof[f.outer[0]]];
            const double b = s.x[dof[f.inner[1]]] - s.x[dof[f.outer[1]]];
            trace[{f.cell, k}] += eps * facet_length(m, f) / 3.0 * (a * a + a * b + b * b);
        }
    }
    std::vector<ComponentRatio> out;
    for (auto& [key, c] : comp) {
        c.denominator = trace[key] + grad_i[key] + grad_e;
        c.defined = c.denominator > 0.0;
        c.ratio = c.defined ? c.numerator / c.denominator : 0.0;
        out.push_back(c);
    }
    return out;
}

void PhysicalUnits::validate() const {
    for (double x : {ell_mic_cm, R_m, C_m, lambda, delta_v, delta_w})
        if (!(x > 0.0)) throw InvalidSpec("physical units must all be positive");
}

NondimReport nondimensionalize(const PhysicalUnits& u) {
    u.validate();
    NondimReport r;
    const double lambda_S = u.lambda * 1e-3;     // S/cm
    const double Rl = u.R_m * lambda_S;          // Ohm cm^2 * S/cm = cm
    r.L_cm = std::sqrt(Rl * u.ell_mic_cm);
    r.tau_m_ms = u.R_m * u.C_m * 1e-6 * 1e3;     // Ohm cm^2 * F/cm^2 = s
    r.epsilon = u.ell_mic_cm / r.L_cm;
    r.sqrt_ratio = std::sqrt(u.ell_mic_cm / Rl);
    r.eps_from_L = r.L_cm / Rl;
    r.identity_rel_err = std::abs(r.eps_from_L - r.sqrt_ratio) / r.sqrt_ratio;
    r.discrepancy_factor = r.sqrt_ratio / r.reported_epsilon;
    r.discrepancy_flagged = std::abs(r.discrepancy_factor - 1.0) > 0.05;
    r.current_scale = u.delta_v / u.R_m;         // mV / (Ohm cm^2) = mA/cm^2
    r.gating_scale = u.delta_w / u.delta_v;
    return r;
}

std::string NondimReport::text() const {
    std::ostringstream os;
    os << fmt::format("L = sqrt(R_m lambda ell_mic)  = {:.17g} cm\n", L_cm);
    os << fmt::format("tau_m = R_m C_m               = {:.17g} ms\n", tau_m_ms);
    os << fmt::format("epsilon = ell_mic / L         = {:.17g}\n", epsilon);
    os << fmt::format("sqrt(ell_mic / (R_m lambda))  = {:.17g}\n", sqrt_ratio);
    os << fmt::format("L / (R_m lambda)              = {:.17g}\n", eps_from_L);
    os << fmt::format("identity relative error       = {:.3e}\n", identity_rel_err);
    os << fmt::format("current scale delta_v / R_m   = {:.6g} mA/cm^2\n", current_scale);
    os << fmt::format("reported epsilon              = {:.3g}\n", reported_epsilon);
    os << fmt::format("computed / reported           = {:.6g}\n", discrepancy_factor);
    if (discrepancy_flagged)
        os << fmt::format("DISCREPANCY: computed epsilon {:.4g} differs from the reported {:.3g} by a factor {:.3f}\n",
                          sqrt_ratio, reported_epsilon, discrepancy_factor);
    return os.str();
}

namespace {

double pert_norm2(const BlockOperator& op, const SolverConfig& cfg, const SystemState& a, const SystemState& b,
                  double* dv = nullptr, double* dw = nullptr, double* ds = nullptr) {
    double v2 = 0.0, w2 = 0.0;
    for (int k = 0; k < 2; ++k) {
        const Vec d = op.D[k] * (a.x - b.x);
        const Vec e = a.w[k] - b.w[k];
        v2 += cfg.eps * d.dot(op.B[k] * d);
        w2 += cfg.eps * e.dot(op.B[k] * e);
    }
    const Vec g = op.D[2] * (a.x - b.x);
    const double s2 = cfg.eps * g.dot(op.B[2] * g);
    if (dv) *dv = std::sqrt(v2);
    if (dw) *dw = std::sqrt(w2);
    if (ds) *ds = std::sqrt(s2);
    return v2 + w2 + cfg.C_ratio * s2;
}

bool same_bits(const Trajectory& a, const Trajectory& b) {
    if (a.states.size() != b.states.size()) return false;
    for (std::size_t j = 0; j < a.states.size(); ++j) {
        const auto& p = a.states[j];
        const auto& q = b.states[j];
        if (p.t != q.t || p.x.size() != q.x.size()) return false;
        if (std::memcmp(p.x.data(), q.x.data(), sizeof(double) * p.x.size()) != 0) return false;
        for (int k = 0; k < 2; ++k)
            if (p.w[k].size() != q.w[k].size() ||
                std::memcmp(p.w[k].data(), q.w[k].data(), sizeof(double) * p.w[k].size()) != 0)
                return false;
    }
    return true;
}

}  // namespace

StabilityReport stability_experiment(const ExperimentSpec& base, const std::vector<double>& etas, int jobs,
                                     double tolerance) {
    if (etas.size() < 2) throw InvalidSpec("stability experiment needs at least two perturbation sizes");
    const BlockOperator& op = *base.op;
    const int N = base.cfg.num_steps();

    const SystemState s0 = initialize(op, base.cfg, base.init);
    InitialData unit;
    unit.v0[0] = FieldSpec::constant(1.0);
    const SystemState p1 = initialize(op, base.cfg, unit);

    // member 0 is the base run, the last one the zero perturbation
    std::vector<double> sizes{0.0};
    sizes.insert(sizes.end(), etas.begin(), etas.end());
    sizes.push_back(0.0);
    std::vector<Trajectory> runs(sizes.size());
    std::vector<SystemState> starts(sizes.size(), s0);
    parallel_for(static_cast<int>(sizes.size()), jobs, [&](int i) {
        SystemState st = s0;
        if (sizes[i] != 0.0) st.x += sizes[i] * p1.x;
        starts[i] = st;
        Stepper stepper(op, base.model, base.gap, base.cfg);
        runs[i] = stepper.run_steps(st, 2 * N, 1);
    });

    StabilityReport rep;
    rep.tolerance = tolerance;
    for (std::size_t i = 1; i + 1 < sizes.size(); ++i) {
        StabilityRow row;
        row.eta = sizes[i];
        const double g0 = pert_norm2(op, base.cfg, starts[i], starts[0]);
        const double gT = pert_norm2(op, base.cfg, runs[i].states[N], runs[0].states[N], &row.dv, &row.dw, &row.ds);
        row.amplification = g0 > 0.0 ? std::sqrt(gT / g0) : 0.0;
        row.dv_over_eta = row.eta > 0.0 ? row.dv / row.eta : 0.0;
        rep.rows.push_back(row);
    }
    double lo = INFINITY, hi = 0.0;
    for (const auto& r : rep.rows) {
        lo = std::min(lo, r.amplification);
        hi = std::max(hi, r.amplification);
    }
    rep.ratio_spread = lo > 0.0 ? (hi - lo) / lo : INFINITY;
    rep.ratios_agree = rep.ratio_spread <= tolerance;

    const Trajectory zero_run = runs.back();
    rep.zero_bitwise = same_bits(zero_run, runs[0]);

    // Gronwall fit on the smallest perturbation, validated on twice the horizon
    std::size_t best = 1;
    for (std::size_t i = 1; i + 1 < sizes.size(); ++i)
        if (sizes[i] > 0.0 && std::abs(sizes[i]) < std::abs(sizes[best])) best = i;
    const double g0 = pert_norm2(op, base.cfg, starts[best], starts[0]);
    double C = 0.0;
    for (int n = 1; n <= N; ++n) {
        const double t = runs[0].states[n].t - runs[0].states[0].t;
        const double ratio = std::sqrt(pert_norm2(op, base.cfg, runs[best].states[n], runs[0].states[n]) / g0);
        C = std::max(C, std::log(ratio) / t);
    }
    rep.gronwall_C = C;
    for (int n = 0; n <= 2 * N; ++n) {
        const double t = runs[0].states[n].t - runs[0].states[0].t;
        const double ratio = std::sqrt(pert_norm2(op, base.cfg, runs[best].states[n], runs[0].states[n]) / g0);
        rep.validation_worst = std::max(rep.validation_worst, ratio / std::exp(C * t));
    }
    rep.gronwall_ok = rep.validation_worst <= 1.2;
    return rep;
}

std::string StabilityReport::text() const {
    std::ostringstream os;
    os << fmt::format("{:>10} {:>14} {:>14} {:>14} {:>14} {:>14}\n", "eta", "dv(T)", "dw(T)", "ds(T)",
                      "amplification", "dv/eta");
    for (const auto& r : rows)
        os << fmt::format("{:>10.3e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.8f} {:>14.8f}\n", r.eta, r.dv, r.dw, r.ds,
                          r.amplification, r.dv_over_eta);
    os << fmt::format("amplification spread {:.3e} (tolerance {:.3g}): {}\n", ratio_spread, tolerance,
                      ratios_agree ? "pass" : "fail");
    os << fmt::format("zero perturbation reproduces base bitwise: {}\n", zero_bitwise ? "pass" : "fail");
    os << fmt::format("Gronwall rate C = {:.6g}, worst ratio/exp(Ct) on 2T = {:.4f}: {}\n", gronwall_C,
                      validation_worst, gronwall_ok ? "pass" : "fail");
    return os.str();
}

DeltaLimitReport delta_limit(const ExperimentSpec& base, const std::vector<double>& deltas, int jobs) {
    const BlockOperator& op = *base.op;
    std::vector<double> all;
    for (double d : deltas) {
        all.push_back(d);
        all.push_back(0.5 * d);
    }
    std::vector<Trajectory> runs(all.size());
    parallel_for(static_cast<int>(all.size()), jobs, [&](int i) {
        SolverConfig cfg = base.cfg;
        cfg.delta = all[i];
        const SystemState s0 = initialize(op, cfg, base.init);
        Stepper stepper(op, base.model, base.gap, cfg);
        runs[i] = stepper.run(s0, 1);
    });
    DeltaLimitReport rep;
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        const Trajectory& a = runs[2 * j];
        const Trajectory& b = runs[2 * j + 1];
        double d2 = 0.0;
        for (std::size_t n = 1; n < a.states.size(); ++n) {
            const Vec e = a.states[n].x - b.states[n].x;
            d2 += (a.states[n].t - a.states[n - 1].t) * e.dot(op.Mvol * e);
        }
        rep.rows.push_back({deltas[j], std::sqrt(d2)});
    }
    rep.strictly_decreasing = true;
    for (std::size_t j = 1; j < rep.rows.size(); ++j)
        if (!(rep.rows[j].distance < rep.rows[j - 1].distance)) rep.strictly_decreasing = false;
    return rep;
}

std::string DeltaLimitReport::text() const {
    std::ostringstream os;
    os << fmt::format("{:>12} {:>16}\n", "delta", "d(delta)");
    for (const auto& r : rows) os << fmt::format("{:>12.3e} {:>16.8e}\n", r.delta, r.distance);
    os << fmt::format("strictly decreasing: {}\n", strictly_decreasing ? "pass" : "fail");
    return os.str();
}

double fit_slope(const std::vector<double>& h, const std::vector<double>& err) {
    const std::size_t n = h.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(h[i]), y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace tridomain
