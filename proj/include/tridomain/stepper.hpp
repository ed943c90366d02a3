#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tridomain/assembly.hpp"
#include "tridomain/ionics.hpp"

namespace tridomain {

enum class GatingScheme { ExplicitEuler, ExactLinear, Implicit };
enum class IonicMode { FHN, Linear };  // Linear: I_a(v) replaced by beta1 v
enum class LinearSolver { Direct, CG };

GatingScheme parse_gating(const std::string& s);
IonicMode parse_ionic_mode(const std::string& s);
LinearSolver parse_solver(const std::string& s);

struct IappSpec {
    enum class Kind { Zero, Constant, Pulse } kind = Kind::Zero;
    double amplitude = 0.0;
    double t_on = 0.0;
    double t_off = 0.0;
    double at(double t) const;
};

struct SolverConfig {
    double eps = 1.0;
    double delta = 0.0;
    double dt = 0.01;
    double t_end = 0.1;
    double C_ratio = 0.5;
    double lin_tol = 1e-10;
    int lin_maxit = 5000;
    GatingScheme gating = GatingScheme::ExplicitEuler;
    IonicMode ionic_mode = IonicMode::FHN;
    LinearSolver solver = LinearSolver::Direct;
    std::array<IappSpec, 2> iapp{};

    void validate() const;  // throws InvalidSpec
    int num_steps() const;
};

/// Scalar field on the plane used for initial data.
struct FieldSpec {
    enum class Kind { Zero, Constant, LinearX, Bump } kind = Kind::Zero;
    double value = 0.0;
    double slope = 0.0;
    Vec2 center{0.5, 0.5};
    double width = 0.25;
    double at(const Vec2& x) const;
    static FieldSpec constant(double c) { return {Kind::Constant, c}; }
};

struct InitialData {
    std::array<FieldSpec, 2> v0{};
    std::array<FieldSpec, 2> w0{};
    FieldSpec s0{};
};

struct SystemState {
    double t = 0.0;
    Vec x;                // potentials [u1 | u2 | ue]
    std::array<Vec, 2> w;  // gating per membrane node
    int n1 = 0, n2 = 0, ne = 0;

    auto u1() const { return x.segment(0, n1); }
    auto u2() const { return x.segment(n1, n2); }
    auto ue() const { return x.segment(n1 + n2, ne); }
    Vec v(const BlockOperator& op, int k) const { return op.D[k] * x; }
    Vec s(const BlockOperator& op) const { return op.D[2] * x; }
    bool finite() const;
    double norm() const;  // ||x||_2 + ||w1||_2 + ||w2||_2
};

struct StepReport {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::array<double, 3> flux{};  // balance residuals for I1, I2 and E
    double state_norm = 0.0;
    double max_change = 0.0;
    double lambda = 0.0;
    double mean_ue = 0.0;
};

struct BoundaryFluxes {
    double gamma1 = 0.0;   // integral of I_m on gamma1
    double gamma2 = 0.0;
    double gamma12 = 0.0;  // integral of I_12
};

struct Trajectory {
    std::vector<SystemState> states;  // stride snapshots, t=0 included
    std::vector<StepReport> reports;  // one per step
    std::vector<int> step_index;      // step number of each stored state
};

using Probe = std::function<void(const SystemState&, const StepReport*)>;

class Stepper {
public:
    Stepper(const BlockOperator& op, const IonicModel& model, const GapModel& gap, const SolverConfig& cfg);
    ~Stepper();
    Stepper(const Stepper&) = delete;
    Stepper& operator=(const Stepper&) = delete;

    std::pair<SystemState, StepReport> step(const SystemState& s) const;
    Trajectory run(const SystemState& initial, int stride = 1, const Probe& probe = {}) const;
    Trajectory run_steps(const SystemState& initial, int steps, int stride = 1, const Probe& probe = {}) const;

    // Flux integrals computed by facet quadrature of the nodal membrane
    // currents implied by the step from `a` to `b`.
    BoundaryFluxes fluxes(const SystemState& a, const SystemState& b) const;

    const SystemMatrix& system() const { return sys_; }
    const BlockOperator& op() const { return op_; }
    const SolverConfig& config() const { return cfg_; }
    const IonicModel& model() const { return model_; }
    const GapModel& gap() const { return gap_; }

private:
    struct Factor;
    Vec solve(const Vec& b, double& lambda, StepReport& rep) const;
    Vec gating_explicit(int k, const Vec& v, const Vec& w) const;

    const BlockOperator& op_;
    IonicModel model_;
    GapModel gap_;
    SolverConfig cfg_;
    SystemMatrix sys_;
    double gating_coeff_ = 0.0;
    std::unique_ptr<Factor> factor_;
};

/// Potentials from an elliptic solve honouring the prescribed membrane and gap
/// traces and the mean-zero extracellular gauge.
SystemState initialize(const BlockOperator& op, const SolverConfig& cfg, const InitialData& data);

SystemState zero_state(const BlockOperator& op);

}  // namespace tridomain
