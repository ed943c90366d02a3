// Manufactured solutions for the stationary transmission problem
//   -div(sigma grad u_j) = f_j in each region,
// coupled on the interfaces through alpha (u_i - u_e) and gamma (u_1 - u_2),
// with the mean of u_e fixed by the Lagrange row.

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "tridomain/diagnostics.hpp"
#include "tridomain/errors.hpp"

namespace tridomain {

MmsKind parse_mms_kind(const std::string& s) {
    if (s == "constant") return MmsKind::Constant;
    if (s == "linear" || s == "piecewise_linear") return MmsKind::PiecewiseLinear;
    if (s == "trig") return MmsKind::Trig;
    throw ConfigError("unknown mms kind '" + s + "'");
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAlpha = 1.0;  // membrane coupling
constexpr double kGamma = 1.0;  // gap coupling
constexpr double kSigmaI = 1.0;
constexpr double kSigmaE = 2.0;

struct Exact {
    std::function<double(double, double)> u;
    std::function<Vec2(double, double)> grad;
    std::function<double(double, double)> lap;
};

std::array<Exact, 3> exact_fields(MmsKind kind) {
    switch (kind) {
        case MmsKind::Constant: {
            Exact c{[](double, double) { return 0.7; }, [](double, double) { return Vec2{0, 0}; },
                    [](double, double) { return 0.0; }};
            return {c, c, c};
        }
        case MmsKind::PiecewiseLinear: {
            auto lin = [](double a, double b, double c) {
                return Exact{[=](double x, double y) { return a + b * x + c * y; },
                             [=](double, double) { return Vec2{b, c}; }, [](double, double) { return 0.0; }};
            };
            return {lin(1.0, 0.5, -0.3), lin(-0.5, 0.2, 0.4), lin(0.3, -0.1, 0.25)};
        }
        case MmsKind::Trig:
            break;
    }
    Exact i1{[](double x, double y) { return std::cos(kPi * x) * std::cos(kPi * y) + 1.0; },
             [](double x, double y) {
                 return Vec2{-kPi * std::sin(kPi * x) * std::cos(kPi * y), -kPi * std::cos(kPi * x) * std::sin(kPi * y)};
             },
             [](double x, double y) { return -2.0 * kPi * kPi * std::cos(kPi * x) * std::cos(kPi * y); }};
    Exact i2{[](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y) - 0.5; },
             [](double x, double y) {
                 return Vec2{kPi * std::cos(kPi * x) * std::sin(kPi * y), kPi * std::sin(kPi * x) * std::cos(kPi * y)};
             },
             [](double x, double y) { return -2.0 * kPi * kPi * std::sin(kPi * x) * std::sin(kPi * y); }};
    Exact e{[](double x, double y) { return 0.5 * std::cos(2 * kPi * x) * std::cos(kPi * y) + 0.2; },
            [](double x, double y) {
                return Vec2{-kPi * std::sin(2 * kPi * x) * std::cos(kPi * y),
                            -0.5 * kPi * std::cos(2 * kPi * x) * std::sin(kPi * y)};
            },
            [](double x, double y) { return -2.5 * kPi * kPi * std::cos(2 * kPi * x) * std::cos(kPi * y); }};
    return {i1, i2, e};
}

// degree-5 rule on the reference triangle, barycentric points
struct TriRule {
    std::array<std::array<double, 3>, 7> p;
    std::array<double, 7> w;
};

const TriRule& tri_rule() {
    static const TriRule rule = [] {
        const double s = std::sqrt(15.0);
        const double a1 = (6.0 - s) / 21.0, b1 = (9.0 + 2.0 * s) / 21.0, w1 = (155.0 - s) / 1200.0;
        const double a2 = (6.0 + s) / 21.0, b2 = (9.0 - 2.0 * s) / 21.0, w2 = (155.0 + s) / 1200.0;
        TriRule r;
        r.p = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, {a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1}, {a2, a2, b2}, {a2, b2, a2},
                {b2, a2, a2}}};
        r.w = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
        return r;
    }();
    return rule;
}

const double kGx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
const double kGw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

double sigma(Region r) { return r == Region::E ? kSigmaE : kSigmaI; }

MmsRow solve_one(MmsKind kind, int density) {
    UnitCellSpec spec;
    spec.mesh_density = density;
    const MicroMesh mesh = build_unit_cell(spec);
    const BlockOperator op = assemble(mesh, ConductivitySpec::isotropic(kSigmaI, kSigmaE));
    const auto ex = exact_fields(kind);
    const auto& dof = op.layout.dof_of_vertex;
    const int n = op.layout.n();
    const TriRule& rule = tri_rule();

    Vec b = Vec::Zero(n + 1);
    double mean_e = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Region r = mesh.triangle_region[t];
        const Exact& u = ex[static_cast<int>(r)];
        const double area = mesh.triangle_area(t);
        for (int q = 0; q < 7; ++q) {
            double x = 0, y = 0;
            for (int a = 0; a < 3; ++a) {
                x += rule.p[q][a] * mesh.vertices[tri[a]].x;
                y += rule.p[q][a] * mesh.vertices[tri[a]].y;
            }
            const double f = -sigma(r) * u.lap(x, y);
            for (int a = 0; a < 3; ++a) b[dof[tri[a]]] += area * rule.w[q] * f * rule.p[q][a];
            if (r == Region::E) mean_e += area * rule.w[q] * u.u(x, y);
        }
    }
    b[n] = mean_e;

    for (int k = 0; k < 3; ++k) {
        const double coupling = k == 2 ? kGamma : kAlpha;
        for (const Facet& f : mesh.facets(static_cast<Interface>(k))) {
            const Region rin = mesh.vertex_region[f.inner[0]];
            const Region rout = mesh.vertex_region[f.outer[0]];
            const Exact& ui = ex[static_cast<int>(rin)];
            const Exact& uo = ex[static_cast<int>(rout)];
            const Vec2 p0 = mesh.vertices[f.inner[0]], p1 = mesh.vertices[f.inner[1]];
            const double h = std::hypot(p1.x - p0.x, p1.y - p0.y);
            for (int q = 0; q < 3; ++q) {
                const double s = kGx[q];
                const double x = p0.x + s * (p1.x - p0.x), y = p0.y + s * (p1.y - p0.y);
                const Vec2 gi = ui.grad(x, y), go = uo.grad(x, y);
                const double jump = ui.u(x, y) - uo.u(x, y);
                const double g_in = sigma(rin) * (gi.x * f.normal.x + gi.y * f.normal.y) + coupling * jump;
                const double g_out = -sigma(rout) * (go.x * f.normal.x + go.y * f.normal.y) - coupling * jump;
                const double phi[2] = {1.0 - s, s};
                for (int a = 0; a < 2; ++a) {
                    b[dof[f.inner[a]]] += h * kGw[q] * g_in * phi[a];
                    b[dof[f.outer[a]]] += h * kGw[q] * g_out * phi[a];
                }
            }
        }
    }
    for (const ExteriorEdge& e : mesh.exterior) {
        const Vec2 p0 = mesh.vertices[e.v[0]], p1 = mesh.vertices[e.v[1]];
        const double h = std::hypot(p1.x - p0.x, p1.y - p0.y);
        for (int q = 0; q < 3; ++q) {
            const double s = kGx[q];
            const double x = p0.x + s * (p1.x - p0.x), y = p0.y + s * (p1.y - p0.y);
            const Vec2 g = ex[2].grad(x, y);
            const double flux = kSigmaE * (g.x * e.normal.x + g.y * e.normal.y);
            b[dof[e.v[0]]] += h * kGw[q] * flux * (1.0 - s);
            b[dof[e.v[1]]] += h * kGw[q] * flux * s;
        }
    }

    const SpMat A = op.K + interface_operator(op, kAlpha, kGamma);
    const SpMat Ab = bordered(A, op.c);
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu(Ab);
    if (lu.info() != Eigen::Success) throw SolverFailure("manufactured-solution system is singular", INFINITY);
    Vec sol = lu.solve(b);
    for (int it = 0; it < 2; ++it) sol += lu.solve(Vec(b - Ab * sol));
    const Vec uh = sol.head(n);

    MmsRow row;
    row.density = density;
    row.h = 1.0 / density;
    row.dofs = n;
    double eu = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Exact& u = ex[static_cast<int>(mesh.triangle_region[t])];
        const double area = mesh.triangle_area(t);
        for (int q = 0; q < 7; ++q) {
            double x = 0, y = 0, vh = 0;
            for (int a = 0; a < 3; ++a) {
                x += rule.p[q][a] * mesh.vertices[tri[a]].x;
                y += rule.p[q][a] * mesh.vertices[tri[a]].y;
                vh += rule.p[q][a] * uh[dof[tri[a]]];
            }
            const double d = vh - u.u(x, y);
            eu += area * rule.w[q] * d * d;
        }
    }
    double ev = 0.0;
    for (int k = 0; k < 2; ++k) {
        for (const Facet& f : mesh.facets(static_cast<Interface>(k))) {
            const Exact& ui = ex[static_cast<int>(mesh.vertex_region[f.inner[0]])];
            const Exact& ue = ex[2];
            const Vec2 p0 = mesh.vertices[f.inner[0]], p1 = mesh.vertices[f.inner[1]];
            const double h = std::hypot(p1.x - p0.x, p1.y - p0.y);
            const double j0 = uh[dof[f.inner[0]]] - uh[dof[f.outer[0]]];
            const double j1 = uh[dof[f.inner[1]]] - uh[dof[f.outer[1]]];
            for (int q = 0; q < 3; ++q) {
                const double s = kGx[q];
                const double x = p0.x + s * (p1.x - p0.x), y = p0.y + s * (p1.y - p0.y);
                const double d = (1.0 - s) * j0 + s * j1 - (ui.u(x, y) - ue.u(x, y));
                ev += h * kGw[q] * d * d;
            }
        }
    }
    row.err_u = std::sqrt(eu);
    row.err_v = std::sqrt(ev);
    return row;
}

}  // namespace

MmsReport mms_convergence(MmsKind kind, const std::vector<int>& densities, int jobs) {
    MmsReport rep;
    rep.kind = kind;
    rep.rows.resize(densities.size());
    parallel_for(static_cast<int>(densities.size()), jobs, [&](int i) { rep.rows[i] = solve_one(kind, densities[i]); });
    if (rep.rows.size() >= 2 && kind == MmsKind::Trig) {
        std::vector<double> h, eu, ev;
        for (const auto& r : rep.rows) {
            h.push_back(r.h);
            eu.push_back(r.err_u);
            ev.push_back(r.err_v);
        }
        rep.slope_u = fit_slope(h, eu);
        rep.slope_v = fit_slope(h, ev);
    }
    return rep;
}

std::string MmsReport::text() const {
    std::ostringstream os;
    os << fmt::format("{:>8} {:>10} {:>8} {:>16} {:>16}\n", "density", "h", "dofs", "L2 err u", "L2 err v");
    for (const auto& r : rows)
        os << fmt::format("{:>8} {:>10.4g} {:>8} {:>16.8e} {:>16.8e}\n", r.density, r.h, r.dofs, r.err_u, r.err_v);
    if (kind == MmsKind::Trig) os << fmt::format("fitted slope: u {:.4f}, v {:.4f}\n", slope_u, slope_v);
    return os.str();
}

}  // namespace tridomain
