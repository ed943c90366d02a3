#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tridomain/stepper.hpp"

namespace tridomain {

struct EnergyReport {
    std::array<double, 2> membrane{};  // eps ||v_k||^2
    std::array<double, 2> gating{};    // eps ||w_k||^2
    double gap = 0.0;                  // eps ||s||^2
    double delta_energy = 0.0;         // delta x^T R x
    double dissipation = 0.0;          // x^T K x
    double ionic_dissipation = 0.0;    // eps sum_k int I~_a(v) v
    double r_norm = 0.0;               // eps sum_k ||v||_r^r
    double dt_v = 0.0, dt_w = 0.0, dt_s = 0.0;
    double total = 0.0;                // 1/2 (membrane + alpha4 gating + C_ratio gap + delta energy)
    bool power_mean_ok = true;

    bool nonnegative() const;
};

EnergyReport energy(const SystemState& s, const BlockOperator& op, const IonicModel& model, const SolverConfig& cfg,
                    const SystemState* prev = nullptr);

// int over interface f of g(v) for the P1 trace v; facets are split at the
// given breakpoints of v before 3-point Gauss quadrature
double interface_integral(const BlockOperator& op, int f, const Vec& v, const std::function<double(double)>& g,
                          const std::vector<double>& breaks = {});

double lr_norm_pow(const BlockOperator& op, int f, const Vec& v, double r);  // int |v|^r

struct AprioriReport {
    double vw_sup = 0.0;     // sup_t eps(||v||^2 + ||w||^2) + eps ||s||^2
    double u_l2h1 = 0.0;     // int_0^T ||u||_{H1}^2
    double vr_norm = 0.0;    // int_0^T eps ||v||_r^r
    double ia_dual = 0.0;    // int_0^T ||eps^{(r-1)/r} I_a(v)||_{r'}^{r'}
    double dt_norms = 0.0;   // int_0^T eps(||dv||^2 + ||dw||^2 + ||ds||^2)
    bool duality_ok = true;
    double duality_margin = 0.0;  // min over time of rhs - lhs
    std::vector<double> times;
};

AprioriReport apriori_monitor(const Trajectory& traj, const BlockOperator& op, const IonicModel& model,
                              const SolverConfig& cfg);

struct ComponentRatio {
    int cell = 0;
    Region region = Region::I1;
    double numerator = 0.0;
    double denominator = 0.0;
    double ratio = 0.0;
    bool defined = false;
};

std::vector<ComponentRatio> poincare_trace_ratio(const SystemState& s, const BlockOperator& op, double eps);

struct PhysicalUnits {
    double ell_mic_cm = 0.01;  // 100 um
    double R_m = 1.0e4;        // Ohm cm^2
    double C_m = 1.0;          // uF/cm^2
    double lambda = 5.0;       // mS/cm
    double delta_v = 100.0;    // mV
    double delta_w = 1.0;
    void validate() const;
};

struct NondimReport {
    double L_cm = 0.0;
    double tau_m_ms = 0.0;
    double epsilon = 0.0;           // ell_mic / L
    double sqrt_ratio = 0.0;        // sqrt(ell_mic / (R_m lambda))
    double eps_from_L = 0.0;        // L / (R_m lambda)
    double identity_rel_err = 0.0;
    double reported_epsilon = 7.1e-3;
    double discrepancy_factor = 0.0;
    bool discrepancy_flagged = false;
    double current_scale = 0.0;     // delta_v / R_m in mA/cm^2
    double gating_scale = 0.0;      // delta_w / delta_v
    std::string text() const;
};

NondimReport nondimensionalize(const PhysicalUnits& u);

/// One simulation setup shared by the experiment drivers.
struct ExperimentSpec {
    const BlockOperator* op = nullptr;
    IonicModel model;
    GapModel gap;
    SolverConfig cfg;
    InitialData init;
};

struct StabilityRow {
    double eta = 0.0;
    double dv = 0.0, dw = 0.0, ds = 0.0;  // at T
    double amplification = 0.0;           // ||D(T)|| / ||D(0)||
    double dv_over_eta = 0.0;
};

struct StabilityReport {
    std::vector<StabilityRow> rows;
    double ratio_spread = 0.0;  // max relative deviation of amplification between sizes
    bool ratios_agree = false;
    bool zero_bitwise = false;
    double gronwall_C = 0.0;
    double validation_worst = 0.0;  // max over t <= 2T of ratio(t) / exp(C t)
    bool gronwall_ok = false;
    double tolerance = 0.05;
    std::string text() const;
};

StabilityReport stability_experiment(const ExperimentSpec& base, const std::vector<double>& etas, int jobs = 1,
                                     double tolerance = 0.05);

struct DeltaRow {
    double delta = 0.0;
    double distance = 0.0;  // ||u^delta - u^{delta/2}||_{L2(0,T;L2)}
};

struct DeltaLimitReport {
    std::vector<DeltaRow> rows;
    bool strictly_decreasing = false;
    std::string text() const;
};

DeltaLimitReport delta_limit(const ExperimentSpec& base, const std::vector<double>& deltas, int jobs = 1);

enum class MmsKind { Constant, PiecewiseLinear, Trig };
MmsKind parse_mms_kind(const std::string& s);

struct MmsRow {
    int density = 0;
    double h = 0.0;
    int dofs = 0;
    double err_u = 0.0;  // L2 over all regions
    double err_v = 0.0;  // L2 over gamma1 and gamma2
};

struct MmsReport {
    MmsKind kind = MmsKind::Trig;
    std::vector<MmsRow> rows;
    double slope_u = 0.0;
    double slope_v = 0.0;
    std::string text() const;
};

MmsReport mms_convergence(MmsKind kind, const std::vector<int>& densities, int jobs = 1);

// least-squares slope of log(err) against log(h)
double fit_slope(const std::vector<double>& h, const std::vector<double>& err);

// runs fn(i) for i in [0, n) on at most `jobs` threads
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace tridomain
