#pragma once

#include <string>
#include <vector>

namespace tridomain {

struct IonicCurrents {
    double Ia = 0.0;
    double Ib = 0.0;
    double H = 0.0;
};

/// FitzHugh-Nagumo membrane model, I_a(v) = rho v (1-v)(v-theta),
/// I_b(w) = -rho w, H(v,w) = a1 v - b1 w.
struct IonicModel {
    double a1 = 1.0;
    double b1 = 1.0;
    double rho = -1.0;
    double theta = 0.25;
    double r = 4.0;
    double beta1 = default_beta1(-1.0, 0.25);
    double beta2 = 0.0;

    static double default_beta1(double rho, double theta);
    static IonicModel fhn(double a1, double b1, double rho, double theta);

    void validate() const;  // throws InvalidSpec

    double Ia(double v) const { return rho * v * (1.0 - v) * (v - theta); }
    double dIa(double v) const { return rho * (-3.0 * v * v + 2.0 * (1.0 + theta) * v - theta); }
    double Ib(double w) const { return -rho * w; }
    double H(double v, double w) const { return a1 * v - b1 * w; }
    double Ia_tilde(double v) const { return Ia(v) + beta1 * v + beta2; }

    // structural constants
    double alpha1() const;  // growth constant of |I_a|
    double alpha2() const { return -rho; }
    double alpha3() const { return a1 > b1 ? a1 : b1; }
    double alpha4() const { return -rho / a1; }
    double alpha5() const { return -rho * b1 / a1; }
    // coefficients of |I_a| <= c0 + c1 |v|^3 from the Young-inequality bound
    double growth_c0() const;
    double growth_c1() const;
};

IonicCurrents eval_ion(const IonicModel& m, double v, double w);

struct GapModel {
    double G_gap = 1.0;
    double C_ratio = 0.5;
    void validate() const;
};

double eval_gap(const GapModel& g, double s);

struct AssumptionRecord {
    std::string name;
    std::string domain;
    double worst_margin = 0.0;
    double constant = 0.0;
    bool pass = false;
    bool required = true;
    std::string note;
};

struct AssumptionReport {
    std::vector<AssumptionRecord> records;
    double e_coefficient = 0.0;         // E(v,w) / w^2 measured on samples
    double e_coefficient_spread = 0.0;  // max - min of that ratio
    double fitted_inv_C = 0.0;

    bool all_pass() const;
    bool check_pass(char roman) const;  // 'i'..'iv' style, see certify_assumptions
    const AssumptionRecord* find(const std::string& name) const;
    std::string table() const;
    std::string csv() const;
};

struct Interval {
    double lo = -10.0;
    double hi = 10.0;
};

/// Sample-based check of the growth, linearity, coercivity and monotonicity
/// assumptions on [v_range] x [w_range]. Records are named i_*, ii_*, iii_*,
/// iv_*; non-required records are informational.
AssumptionReport certify_assumptions(const IonicModel& m, Interval v_range = {}, Interval w_range = {},
                                     int samples = 401, double tol = 1e-12);

}  // namespace tridomain
