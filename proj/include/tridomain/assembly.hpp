#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "tridomain/geometry.hpp"

namespace tridomain {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;

/// Piecewise-constant tensors per region, optionally modulated in y with the
/// cell period: M(x) = M_region * (1 + amplitude * sin(2 pi y / (eps l2))).
struct ConductivitySpec {
    Mat2 tensor_i1 = Mat2::Identity();
    Mat2 tensor_i2 = Mat2::Identity();
    Mat2 tensor_e = Mat2::Identity();
    double modulation = 0.0;
    double alpha = 0.1;
    double beta = 10.0;

    static ConductivitySpec isotropic(double sigma_i, double sigma_e);
    void validate() const;  // throws InvalidConductivity
    Mat2 tensor(Region r, const Vec2& x, const MicroMesh& mesh) const;
};

/// Potential dofs are the mesh vertices renumbered region by region
/// [I1 | I2 | E]. Membrane dofs are the (inner, outer) vertex pairs of each
/// interface.
struct DofLayout {
    int n1 = 0, n2 = 0, ne = 0;
    std::vector<int> dof_of_vertex;
    std::vector<int> vertex_of_dof;
    std::array<std::vector<std::array<int, 2>>, 3> pairs;  // vertex ids, per interface
    std::array<std::vector<char>, 3> constrained;          // false at triple points of gamma12

    int n() const { return n1 + n2 + ne; }
    int offset(Region r) const { return r == Region::I1 ? 0 : r == Region::I2 ? n1 : n1 + n2; }
    int size(Region r) const { return r == Region::I1 ? n1 : r == Region::I2 ? n2 : ne; }
    int n_membrane(Interface f) const { return static_cast<int>(pairs[static_cast<int>(f)].size()); }
};

struct BlockOperator {
    const MicroMesh* mesh = nullptr;
    DofLayout layout;
    SpMat K;       // conductivity-weighted stiffness, block diagonal over regions
    SpMat L;       // identity-tensor stiffness, used for H1 norms
    SpMat Mvol;    // volume mass, block diagonal
    SpMat R;       // regularization mass: Mvol plus every trace mass
    std::array<SpMat, 3> B;       // membrane masses on gamma1, gamma2, gamma12
    std::array<SpMat, 3> D;       // difference maps (membrane x potential)
    std::array<SpMat, 3> Tin;     // inner trace selection
    std::array<SpMat, 3> Tout;    // outer trace selection
    Vec c;         // represents the integral over the extracellular region
    std::array<std::vector<std::array<int, 2>>, 3> facet_nodes;  // membrane index of each facet endpoint

    const SpMat& mass(Interface f) const { return B[static_cast<int>(f)]; }
    const SpMat& diff(Interface f) const { return D[static_cast<int>(f)]; }
};

BlockOperator assemble(const MicroMesh& mesh, const ConductivitySpec& cond);

// sum_k mem * D_k^T B_k D_k + gap * D12^T B12 D12
SpMat interface_operator(const BlockOperator& op, double mem, double gap);

struct SystemMatrix {
    SpMat A;
    Vec c;
    double membrane_coeff = 0.0;
    double gap_coeff = 0.0;
    double delta_coeff = 0.0;
};

/// K + eps (1/dt + beta1 + gating) DtBD + eps C_ratio (1/dt + G_gap) D12tB12D12 + (delta/dt) R
SystemMatrix build_system_matrix(const BlockOperator& op, double eps, double delta, double dt, double beta1,
                                 double G_gap, double C_ratio, double gating_coeff = 0.0);

enum class SpdMode { Strict, Semidefinite };

struct SpdReport {
    SpdMode mode = SpdMode::Strict;
    bool pass = false;
    double min_pivot = 0.0;
    double min_ritz = 0.0;
    double norm = 0.0;       // infinity norm of the input
    double threshold = 0.0;
    int lanczos_steps = 0;
    std::string detail;
};

SpdReport check_spd(const SpMat& A, SpdMode mode, unsigned seed = 12345);

// Symmetric bordered system [A c; c^T 0]
SpMat bordered(const SpMat& A, const Vec& c);

void write_matrix_market(const SpMat& A, const std::string& path);

}  // namespace tridomain
