#include "tridomain/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>

#include "tridomain/errors.hpp"

namespace tridomain {

using Triplets = std::vector<Eigen::Triplet<double>>;

ConductivitySpec ConductivitySpec::isotropic(double sigma_i, double sigma_e) {
    ConductivitySpec c;
    c.tensor_i1 = sigma_i * Mat2::Identity();
    c.tensor_i2 = sigma_i * Mat2::Identity();
    c.tensor_e = sigma_e * Mat2::Identity();
    c.alpha = 0.5 * std::min(sigma_i, sigma_e);
    c.beta = 2.0 * std::max(sigma_i, sigma_e);
    return c;
}

void ConductivitySpec::validate() const {
    if (!(alpha > 0.0 && alpha < beta)) throw InvalidConductivity("need 0 < alpha < beta");
    if (!(std::abs(modulation) < 1.0)) throw InvalidConductivity("modulation amplitude must be below 1");
    const std::array<std::pair<const char*, const Mat2*>, 3> all{
        {{"tensor_i1", &tensor_i1}, {"tensor_i2", &tensor_i2}, {"tensor_e", &tensor_e}}};
    for (const auto& [name, M] : all) {
        if ((*M)(0, 1) != (*M)(1, 0)) throw InvalidConductivity(std::string(name) + " is not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat2> es(*M);
        const double lo = es.eigenvalues()(0) * (1.0 - std::abs(modulation));
        const double hi = es.eigenvalues()(1) * (1.0 + std::abs(modulation));
        if (!(lo >= alpha && hi <= beta))
            throw InvalidConductivity(std::string(name) + " eigenvalues leave [alpha, beta]");
    }
}

Mat2 ConductivitySpec::tensor(Region r, const Vec2& x, const MicroMesh& mesh) const {
    const Mat2& M = r == Region::I1 ? tensor_i1 : r == Region::I2 ? tensor_i2 : tensor_e;
    if (modulation == 0.0) return M;
    const double period = mesh.epsilon * mesh.cell_lengths[1];
    return M * (1.0 + modulation * std::sin(2.0 * std::numbers::pi * x.y / period));
}

namespace {

DofLayout make_layout(const MicroMesh& mesh) {
    DofLayout L;
    const int nv = static_cast<int>(mesh.num_vertices());
    L.dof_of_vertex.assign(nv, -1);
    for (Region r : {Region::I1, Region::I2, Region::E}) {
        int count = 0;
        for (int v = 0; v < nv; ++v) {
            if (mesh.vertex_region[v] != r) continue;
            L.dof_of_vertex[v] = static_cast<int>(L.vertex_of_dof.size());
            L.vertex_of_dof.push_back(v);
            ++count;
        }
        (r == Region::I1 ? L.n1 : r == Region::I2 ? L.n2 : L.ne) = count;
    }
    return L;
}

// membrane index of each facet endpoint, building the pair list on the way
std::vector<std::array<int, 2>> index_pairs(const std::vector<Facet>& facets,
                                            std::vector<std::array<int, 2>>& pairs) {
    std::map<std::pair<int, int>, int> seen;
    std::vector<std::array<int, 2>> local(facets.size());
    for (std::size_t f = 0; f < facets.size(); ++f) {
        for (int j = 0; j < 2; ++j) {
            auto [it, fresh] = seen.try_emplace({facets[f].inner[j], facets[f].outer[j]}, static_cast<int>(pairs.size()));
            if (fresh) pairs.push_back({facets[f].inner[j], facets[f].outer[j]});
            local[f][j] = it->second;
        }
    }
    return local;
}

SpMat from_triplets(int rows, int cols, const Triplets& t) {
    SpMat M(rows, cols);
    M.setFromTriplets(t.begin(), t.end());
    M.makeCompressed();
    return M;
}

}  // namespace

BlockOperator assemble(const MicroMesh& mesh, const ConductivitySpec& cond) {
    cond.validate();
    BlockOperator op;
    op.mesh = &mesh;
    op.layout = make_layout(mesh);
    DofLayout& L = op.layout;
    const int n = L.n();

    Triplets tk, tl, tm;
    tk.reserve(9 * mesh.triangles.size());
    tl.reserve(9 * mesh.triangles.size());
    tm.reserve(9 * mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2 &p0 = mesh.vertices[tri[0]], &p1 = mesh.vertices[tri[1]], &p2 = mesh.vertices[tri[2]];
        const double area = mesh.triangle_area(t);
        if (!(area > 0.0)) throw InvalidSpec("degenerate triangle in mesh");
        const Vec2 centroid{(p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0};
        const Mat2 M = cond.tensor(mesh.triangle_region[t], centroid, mesh);
        Eigen::Matrix<double, 2, 3> g;
        g << p1.y - p2.y, p2.y - p0.y, p0.y - p1.y,
             p2.x - p1.x, p0.x - p2.x, p1.x - p0.x;
        g /= 2.0 * area;
        const Eigen::Matrix3d ke = area * g.transpose() * M * g;
        const Eigen::Matrix3d le = area * g.transpose() * g;
        for (int a = 0; a < 3; ++a) {
            const int da = L.dof_of_vertex[tri[a]];
            for (int b = 0; b < 3; ++b) {
                const int db = L.dof_of_vertex[tri[b]];
                // mirror the upper triangle so every block is exactly symmetric
                const int i = std::min(a, b), j = std::max(a, b);
                tk.emplace_back(da, db, ke(i, j));
                tl.emplace_back(da, db, le(i, j));
                tm.emplace_back(da, db, area / 12.0 * (a == b ? 2.0 : 1.0));
            }
        }
    }
    op.K = from_triplets(n, n, tk);
    op.L = from_triplets(n, n, tl);
    op.Mvol = from_triplets(n, n, tm);

    Triplets tr(tm);
    for (int f = 0; f < 3; ++f) {
        const auto& facets = mesh.facets(static_cast<Interface>(f));
        op.facet_nodes[f] = index_pairs(facets, L.pairs[f]);
        const auto& local = op.facet_nodes[f];
        const int nm = static_cast<int>(L.pairs[f].size());
        Triplets tb, td, ti, to;
        for (std::size_t e = 0; e < facets.size(); ++e) {
            const double h = facet_length(mesh, facets[e]);
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    const double m = h / 6.0 * (a == b ? 2.0 : 1.0);
                    tb.emplace_back(local[e][a], local[e][b], m);
                    tr.emplace_back(L.dof_of_vertex[facets[e].inner[a]], L.dof_of_vertex[facets[e].inner[b]], m);
                    tr.emplace_back(L.dof_of_vertex[facets[e].outer[a]], L.dof_of_vertex[facets[e].outer[b]], m);
                }
            }
        }
        for (int k = 0; k < nm; ++k) {
            const int din = L.dof_of_vertex[L.pairs[f][k][0]];
            const int dout = L.dof_of_vertex[L.pairs[f][k][1]];
            td.emplace_back(k, din, 1.0);
            td.emplace_back(k, dout, -1.0);
            ti.emplace_back(k, din, 1.0);
            to.emplace_back(k, dout, 1.0);
        }
        op.B[f] = from_triplets(nm, nm, tb);
        op.D[f] = from_triplets(nm, n, td);
        op.Tin[f] = from_triplets(nm, n, ti);
        op.Tout[f] = from_triplets(nm, n, to);
    }
    op.R = from_triplets(n, n, tr);

    // gap-junction nodes that also carry both membranes are triple points
    for (int f = 0; f < 3; ++f) L.constrained[f].assign(L.pairs[f].size(), 1);
    std::vector<char> on1(mesh.num_vertices(), 0), on2(mesh.num_vertices(), 0);
    for (const auto& p : L.pairs[0]) on1[p[0]] = 1;
    for (const auto& p : L.pairs[1]) on2[p[0]] = 1;
    for (std::size_t k = 0; k < L.pairs[2].size(); ++k)
        if (on1[L.pairs[2][k][0]] && on2[L.pairs[2][k][1]]) L.constrained[2][k] = 0;

    op.c = Vec::Zero(n);
    const Vec ones = Vec::Ones(n);
    const Vec rows = op.Mvol * ones;
    const int e0 = L.offset(Region::E);
    op.c.segment(e0, L.ne) = rows.segment(e0, L.ne);
    return op;
}

SpMat interface_operator(const BlockOperator& op, double mem, double gap) {
    const MicroMesh& mesh = *op.mesh;
    const auto& dof = op.layout.dof_of_vertex;
    Triplets t;
    for (int f = 0; f < 3; ++f) {
        const double coeff = f == 2 ? gap : mem;
        if (coeff == 0.0) continue;
        for (const Facet& e : mesh.facets(static_cast<Interface>(f))) {
            const double h = facet_length(mesh, e);
            const std::array<int, 4> d{dof[e.inner[0]], dof[e.inner[1]], dof[e.outer[0]], dof[e.outer[1]]};
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    const double m = coeff * (h / 6.0) * ((a % 2) == (b % 2) ? 2.0 : 1.0);
                    t.emplace_back(d[a], d[b], (a < 2) == (b < 2) ? m : -m);
                }
            }
        }
    }
    return from_triplets(op.layout.n(), op.layout.n(), t);
}

SystemMatrix build_system_matrix(const BlockOperator& op, double eps, double delta, double dt, double beta1,
                                 double G_gap, double C_ratio, double gating_coeff) {
    SystemMatrix S;
    S.membrane_coeff = eps * (1.0 / dt + beta1 + gating_coeff);
    S.gap_coeff = eps * C_ratio * (1.0 / dt + G_gap);
    S.delta_coeff = delta / dt;
    S.A = op.K + interface_operator(op, S.membrane_coeff, S.gap_coeff);
    if (delta > 0.0) S.A += S.delta_coeff * op.R;
    S.A.makeCompressed();
    S.c = op.c;
    return S;
}

SpMat bordered(const SpMat& A, const Vec& c) {
    const int n = static_cast<int>(A.rows());
    Triplets t;
    t.reserve(A.nonZeros() + 2 * n);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) {
        if (c[i] == 0.0) continue;
        t.emplace_back(i, n, c[i]);
        t.emplace_back(n, i, c[i]);
    }
    return from_triplets(n + 1, n + 1, t);
}

namespace {

double inf_norm(const SpMat& A) {
    Vec rows = Vec::Zero(A.rows());
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) rows[it.row()] += std::abs(it.value());
    return A.rows() ? rows.maxCoeff() : 0.0;
}

// Lanczos with full reorthogonalization; smallest Ritz value
double lanczos_min(const SpMat& A, unsigned seed, int& steps) {
    const int n = static_cast<int>(A.rows());
    const int m = std::min(n, 300);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd V(n, m);
    Vec q(n);
    for (int i = 0; i < n; ++i) q[i] = nd(rng);
    q.normalize();
    std::vector<double> alpha, beta;
    const double scale = inf_norm(A);
    for (int j = 0; j < m; ++j) {
        V.col(j) = q;
        Vec z = A * q;
        const double a = q.dot(z);
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass) z -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * z);
        const double b = z.norm();
        steps = j + 1;
        if (j + 1 == m || b <= 1e-13 * std::max(scale, 1e-300)) break;
        beta.push_back(b);
        q = z / b;
    }
    const int k = static_cast<int>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

}  // namespace

SpdReport check_spd(const SpMat& A, SpdMode mode, unsigned seed) {
    if (A.rows() != A.cols()) throw std::invalid_argument("check_spd: matrix is not square");
    const SpMat At = A.transpose();
    if ((A - At).norm() != 0.0) throw std::invalid_argument("check_spd: matrix is not symmetric");

    SpdReport rep;
    rep.mode = mode;
    rep.norm = inf_norm(A);
    const double n = static_cast<double>(A.rows());
    if (mode == SpdMode::Strict) {
        rep.threshold = n * std::numeric_limits<double>::epsilon() * rep.norm;
        Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(A);
        const bool ok = ldlt.info() == Eigen::Success;
        rep.min_pivot = ok ? ldlt.vectorD().minCoeff() : 0.0;
        rep.pass = ok && rep.min_pivot > rep.threshold;
        rep.detail = ok ? "factorization succeeded" : "factorization hit a zero pivot";
    } else {
        rep.threshold = -1e-10 * rep.norm;
        rep.min_ritz = lanczos_min(A, seed, rep.lanczos_steps);
        rep.pass = rep.min_ritz >= rep.threshold;
        rep.detail = "lanczos steps " + std::to_string(rep.lanczos_steps);
    }
    return rep;
}

void write_matrix_market(const SpMat& A, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write matrix market file " + path);
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    os << std::setprecision(17);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    if (!os) throw Error("write failed: " + path);
}

}  // namespace tridomain
