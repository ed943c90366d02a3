#include "tridomain/ionics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "tridomain/errors.hpp"

namespace tridomain {

double IonicModel::default_beta1(double rho, double theta) {
    // cancels the most negative slope of the cubic, leaving I~_a' >= |rho| theta
    return std::abs(rho) * (1.0 + theta) * (1.0 + theta) / 3.0;
}

IonicModel IonicModel::fhn(double a1, double b1, double rho, double theta) {
    IonicModel m;
    m.a1 = a1;
    m.b1 = b1;
    m.rho = rho;
    m.theta = theta;
    m.beta1 = default_beta1(rho, theta);
    return m;
}

void IonicModel::validate() const {
    if (!(a1 > 0.0)) throw InvalidSpec("ionic a1 must be positive");
    if (!(b1 > 0.0)) throw InvalidSpec("ionic b1 must be positive");
    if (!(rho < 0.0)) throw InvalidSpec("ionic rho must be negative");
    if (!(theta > 0.0 && theta < 1.0)) throw InvalidSpec("ionic theta must lie in (0, 1)");
    if (!(r > 2.0)) throw InvalidSpec("ionic r must exceed 2");
    if (!(beta1 >= 0.0) || !(beta2 >= 0.0)) throw InvalidSpec("ionic beta1, beta2 must be nonnegative");
}

double IonicModel::growth_c0() const { return (2.0 * theta / 3.0 + (1.0 + theta) / 3.0) * std::abs(rho); }
double IonicModel::growth_c1() const { return (theta / 3.0 + 2.0 * (1.0 + theta) / 3.0 + 1.0) * std::abs(rho); }
double IonicModel::alpha1() const { return std::max(growth_c0(), growth_c1()); }

IonicCurrents eval_ion(const IonicModel& m, double v, double w) { return {m.Ia(v), m.Ib(w), m.H(v, w)}; }

void GapModel::validate() const {
    if (!(G_gap > 0.0)) throw InvalidSpec("G_gap must be positive");
    if (!(C_ratio > 0.0)) throw InvalidSpec("C_ratio must be positive");
}

double eval_gap(const GapModel& g, double s) { return g.G_gap * s; }

bool AssumptionReport::all_pass() const {
    return std::all_of(records.begin(), records.end(), [](const auto& r) { return !r.required || r.pass; });
}

bool AssumptionReport::check_pass(char roman) const {
    static const char* prefix[] = {"i_", "ii_", "iii_", "iv_"};
    const int k = roman - '1';
    if (k < 0 || k > 3) return false;
    bool any = false;
    for (const auto& r : records) {
        if (!r.required || r.name.rfind(prefix[k], 0) != 0) continue;
        any = true;
        if (!r.pass) return false;
    }
    return any;
}

const AssumptionRecord* AssumptionReport::find(const std::string& name) const {
    for (const auto& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

std::string AssumptionReport::table() const {
    std::ostringstream os;
    os << fmt::format("{:<16} {:<22} {:>14} {:>14} {:>6}  {}\n", "assumption", "domain", "worst_margin", "constant",
                      "pass", "note");
    for (const auto& r : records)
        os << fmt::format("{:<16} {:<22} {:>14.6e} {:>14.6e} {:>6}  {}{}\n", r.name, r.domain, r.worst_margin,
                          r.constant, r.pass ? "yes" : "no", r.required ? "" : "(informational) ", r.note);
    os << fmt::format("E(v,w)/w^2 coefficient: {:.17g} (sample spread {:.3e})\n", e_coefficient,
                      e_coefficient_spread);
    return os.str();
}

std::string AssumptionReport::csv() const {
    std::ostringstream os;
    os << "assumption,worst_margin,constant,pass\n";
    for (const auto& r : records)
        os << fmt::format("{},{:.17g},{:.17g},{}\n", r.name, r.worst_margin, r.constant, r.pass ? 1 : 0);
    return os.str();
}

namespace {

std::vector<double> linspace(Interval I, int n) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = I.lo + (I.hi - I.lo) * i / (n - 1);
    return x;
}

std::string box(Interval v, Interval w) {
    return fmt::format("[{:g},{:g}]x[{:g},{:g}]", v.lo, v.hi, w.lo, w.hi);
}

}  // namespace

AssumptionReport certify_assumptions(const IonicModel& m, Interval v_range, Interval w_range, int samples,
                                     double tol) {
    if (samples < 2) throw InvalidSpec("certify_assumptions needs at least 2 samples");
    if (!(v_range.hi > v_range.lo) || !(w_range.hi > w_range.lo)) throw InvalidSpec("empty certification range");

    const auto vs = linspace(v_range, samples);
    const auto ws = linspace(w_range, samples);
    const std::string vdom = fmt::format("v in [{:g},{:g}]", v_range.lo, v_range.hi);
    const std::string wdom = fmt::format("w in [{:g},{:g}]", w_range.lo, w_range.hi);
    const double inf = std::numeric_limits<double>::infinity();
    AssumptionReport rep;
    auto push = [&](AssumptionRecord rec) {
        rec.pass = rec.worst_margin >= -tol;
        rep.records.push_back(std::move(rec));
    };

    // (i) growth of I_a with the explicit cubic coefficients, and of I_b
    {
        const double c0 = m.growth_c0(), c1 = m.growth_c1(), a1 = m.alpha1();
        double up = inf, lo = inf;
        for (double v : vs) {
            const double ia = std::abs(m.Ia(v));
            up = std::min(up, c0 + c1 * std::pow(std::abs(v), m.r - 1.0) - ia);
            lo = std::min(lo, ia - std::pow(std::abs(v), m.r - 1.0) / a1);
        }
        push({"i_Ia_upper", vdom, up, a1, false, true, fmt::format("c0={:.6g} c1={:.6g}", c0, c1)});
        double ib = inf;
        for (double w : ws) ib = std::min(ib, m.alpha2() * (std::abs(w) + 1.0) - std::abs(m.Ib(w)));
        push({"i_Ib", wdom, ib, m.alpha2(), false, true, ""});
        // the lower growth bound cannot hold at the roots of the cubic
        push({"i_Ia_lower", vdom, lo, a1, false, false, "vanishes at v=theta and v=1"});
    }

    // (ii) and (iii) on the (v,w) grid
    {
        const double a3 = m.alpha3(), a4 = m.alpha4(), a5 = m.alpha5();
        double hm = inf, em = inf, cmin = inf, cmax = -inf;
        for (double v : vs) {
            for (double w : ws) {
                hm = std::min(hm, a3 * (std::abs(v) + std::abs(w) + 1.0) - std::abs(m.H(v, w)));
                const double E = m.Ib(w) * v - a4 * m.H(v, w) * w;
                em = std::min(em, E - a5 * w * w);
                if (w != 0.0) {
                    const double c = E / (w * w);
                    cmin = std::min(cmin, c);
                    cmax = std::max(cmax, c);
                }
            }
        }
        push({"ii_H", box(v_range, w_range), hm, a3, false, true, ""});
        rep.e_coefficient = 0.5 * (cmin + cmax);
        rep.e_coefficient_spread = cmax - cmin;
        AssumptionRecord e{"iii_E", box(v_range, w_range), em, a5, false, true,
                           fmt::format("alpha4={:.6g} alpha5=-rho*b1/a1", a4)};
        push(e);
        if (!(a5 > 0.0)) rep.records.back().pass = false;
    }

    // (iv) monotonicity of I~_a and the quadratic lower bound with fitted C
    {
        double mono = inf;
        for (std::size_t j = 0; j + 1 < vs.size(); ++j) mono = std::min(mono, m.Ia_tilde(vs[j + 1]) - m.Ia_tilde(vs[j]));
        push({"iv_monotone", vdom, mono, m.beta1, false, true, "min consecutive difference"});

        double ratio = inf;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            for (std::size_t j = i + 1; j < vs.size(); ++j) {
                const double d = vs[i] - vs[j];
                const double lhs = (m.Ia_tilde(vs[i]) - m.Ia_tilde(vs[j])) * d;
                const double w = std::pow(1.0 + std::abs(vs[i]) + std::abs(vs[j]), m.r - 2.0) * d * d;
                ratio = std::min(ratio, lhs / w);
            }
        }
        AssumptionRecord q{"iv_quadratic", vdom, 0.0, 0.0, false, true, ""};
        if (ratio > 0.0) {
            const double invC = ratio * (1.0 - 1e-6);
            rep.fitted_inv_C = invC;
            double margin = inf;
            for (std::size_t i = 0; i < vs.size(); ++i) {
                for (std::size_t j = i + 1; j < vs.size(); ++j) {
                    const double d = vs[i] - vs[j];
                    const double lhs = (m.Ia_tilde(vs[i]) - m.Ia_tilde(vs[j])) * d;
                    const double w = std::pow(1.0 + std::abs(vs[i]) + std::abs(vs[j]), m.r - 2.0) * d * d;
                    margin = std::min(margin, lhs - invC * w);
                }
            }
            q.worst_margin = margin;
            q.constant = 1.0 / invC;
            q.note = "constant is the fitted C";
            push(q);
        } else {
            q.worst_margin = ratio;
            q.note = "no positive constant fits";
            push(q);
            rep.records.back().pass = false;
        }

        // limit clause of the monotonicity assumption; I~_a(v)/v -> beta1 - rho*theta
        const double lim = m.beta1 - m.rho * m.theta;
        push({"iv_limit", "v -> 0", -std::abs(lim), lim, false, false, "limit of I~_a(v)/v, required to be 0"});
    }
    return rep;
}

}  // namespace tridomain
