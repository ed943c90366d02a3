#include "tridomain/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "tridomain/errors.hpp"

namespace tridomain {

namespace {

class Section {
public:
    Section(const toml::table* t, std::string name, std::set<std::string> allowed)
        : t_(t), name_(std::move(name)), allowed_(std::move(allowed)) {
        if (!t_) return;
        for (const auto& [k, v] : *t_) {
            const std::string key(k.str());
            if (!allowed_.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
        }
    }

    bool has(const std::string& key) const { return t_ && t_->contains(key); }

    double num(const std::string& key, double def) const {
        if (!has(key)) return def;
        auto v = (*t_)[key].value<double>();
        if (!v) throw ConfigError("config key '" + qualified(key) + "' must be a number");
        return *v;
    }

    int integer(const std::string& key, int def) const {
        if (!has(key)) return def;
        auto v = (*t_)[key].value<int64_t>();
        if (!v) throw ConfigError("config key '" + qualified(key) + "' must be an integer");
        return static_cast<int>(*v);
    }

    bool boolean(const std::string& key, bool def) const {
        if (!has(key)) return def;
        auto v = (*t_)[key].value<bool>();
        if (!v) throw ConfigError("config key '" + qualified(key) + "' must be a boolean");
        return *v;
    }

    std::string str(const std::string& key, const std::string& def) const {
        if (!has(key)) return def;
        auto v = (*t_)[key].value<std::string>();
        if (!v) throw ConfigError("config key '" + qualified(key) + "' must be a string");
        return *v;
    }

    std::vector<double> nums(const std::string& key, std::vector<double> def) const {
        if (!has(key)) return def;
        const toml::array* a = (*t_)[key].as_array();
        if (!a) throw ConfigError("config key '" + qualified(key) + "' must be an array");
        std::vector<double> out;
        for (const auto& e : *a) {
            auto v = e.value<double>();
            if (!v) throw ConfigError("config key '" + qualified(key) + "' must hold numbers");
            out.push_back(*v);
        }
        return out;
    }

    Mat2 tensor(const std::string& key, const Mat2& def) const {
        if (!has(key)) return def;
        if (auto s = (*t_)[key].value<double>()) return *s * Mat2::Identity();
        const toml::array* a = (*t_)[key].as_array();
        Mat2 M;
        if (!a || a->size() != 2) throw ConfigError("config key '" + qualified(key) + "' must be a 2x2 array");
        for (int i = 0; i < 2; ++i) {
            const toml::array* row = (*a)[i].as_array();
            if (!row || row->size() != 2) throw ConfigError("config key '" + qualified(key) + "' must be a 2x2 array");
            for (int j = 0; j < 2; ++j) {
                auto v = (*row)[j].value<double>();
                if (!v) throw ConfigError("config key '" + qualified(key) + "' must hold numbers");
                M(i, j) = *v;
            }
        }
        return M;
    }

    const toml::table* sub(const std::string& key) const {
        if (!has(key)) return nullptr;
        const toml::table* s = (*t_)[key].as_table();
        if (!s) throw ConfigError("config key '" + qualified(key) + "' must be a table");
        return s;
    }

    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

private:
    const toml::table* t_;
    std::string name_;
    std::set<std::string> allowed_;
};

FieldSpec read_field(const Section& parent, const std::string& key) {
    Section s(parent.sub(key), parent.qualified(key), {"kind", "value", "slope", "center", "width"});
    FieldSpec f;
    const std::string kind = s.str("kind", s.has("value") ? "constant" : "zero");
    if (kind == "zero") f.kind = FieldSpec::Kind::Zero;
    else if (kind == "constant") f.kind = FieldSpec::Kind::Constant;
    else if (kind == "linear_x") f.kind = FieldSpec::Kind::LinearX;
    else if (kind == "bump") f.kind = FieldSpec::Kind::Bump;
    else throw ConfigError("config key '" + s.qualified("kind") + "' has unknown value '" + kind + "'");
    f.value = s.num("value", 0.0);
    f.slope = s.num("slope", 0.0);
    const auto c = s.nums("center", {0.5, 0.5});
    if (c.size() != 2) throw ConfigError("config key '" + s.qualified("center") + "' needs two entries");
    f.center = {c[0], c[1]};
    f.width = s.num("width", 0.25);
    return f;
}

IappSpec read_iapp(const Section& parent, const std::string& key) {
    Section s(parent.sub(key), parent.qualified(key), {"kind", "amplitude", "t_on", "t_off"});
    IappSpec a;
    const std::string kind = s.str("kind", s.has("amplitude") ? "constant" : "zero");
    if (kind == "zero") a.kind = IappSpec::Kind::Zero;
    else if (kind == "constant") a.kind = IappSpec::Kind::Constant;
    else if (kind == "pulse") a.kind = IappSpec::Kind::Pulse;
    else throw ConfigError("config key '" + s.qualified("kind") + "' has unknown value '" + kind + "'");
    a.amplitude = s.num("amplitude", 0.0);
    a.t_on = s.num("t_on", 0.0);
    a.t_off = s.num("t_off", 0.0);
    return a;
}

Interval read_interval(const Section& s, const std::string& key, Interval def) {
    const auto v = s.nums(key, {def.lo, def.hi});
    if (v.size() != 2) throw ConfigError("config key '" + s.qualified(key) + "' needs two entries");
    return {v[0], v[1]};
}

}  // namespace

void RunConfig::validate() const {
    try {
        cell.validate();
        if (tiling.counts[0] < 1 || tiling.counts[1] < 1) throw InvalidSpec("tiling counts must be >= 1");
        if (!(tiling.epsilon > 0.0)) throw InvalidSpec("tiling epsilon must be positive");
        conductivity.validate();
        ionic.validate();
        gap.validate();
        solver.validate();
        units.validate();
        if (output.stride < 1) throw InvalidSpec("output stride must be >= 1");
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    toml::table root;
    try {
        root = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "cannot parse " << origin << ": " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(os.str());
    }
    Section top(&root, "",
                {"geometry", "conductivity", "ionic", "gap", "solver", "iapp", "initial", "output", "experiment",
                 "units"});
    RunConfig c;

    Section g(top.sub("geometry"), "geometry",
              {"cell_lengths", "inner_margin", "split_fraction", "mesh_density", "counts", "epsilon"});
    const auto cl = g.nums("cell_lengths", {1.0, 1.0});
    if (cl.size() != 2) throw ConfigError("config key 'geometry.cell_lengths' needs two entries");
    c.cell.cell_lengths = {cl[0], cl[1]};
    c.cell.inner_margin = g.num("inner_margin", c.cell.inner_margin);
    c.cell.split_fraction = g.num("split_fraction", c.cell.split_fraction);
    c.cell.mesh_density = g.integer("mesh_density", c.cell.mesh_density);
    const auto counts = g.nums("counts", {1, 1});
    if (counts.size() != 2) throw ConfigError("config key 'geometry.counts' needs two entries");
    c.tiling.counts = {static_cast<int>(counts[0]), static_cast<int>(counts[1])};
    c.tiling.epsilon = g.num("epsilon", 1.0);

    Section k(top.sub("conductivity"), "conductivity",
              {"tensor_i", "tensor_i1", "tensor_i2", "tensor_e", "modulation", "alpha", "beta"});
    const Mat2 ti = k.tensor("tensor_i", Mat2::Identity());
    c.conductivity.tensor_i1 = k.tensor("tensor_i1", ti);
    c.conductivity.tensor_i2 = k.tensor("tensor_i2", ti);
    c.conductivity.tensor_e = k.tensor("tensor_e", Mat2::Identity());
    c.conductivity.modulation = k.num("modulation", 0.0);
    c.conductivity.alpha = k.num("alpha", c.conductivity.alpha);
    c.conductivity.beta = k.num("beta", c.conductivity.beta);

    Section io(top.sub("ionic"), "ionic", {"a1", "b1", "rho", "theta", "r", "beta1", "beta2", "mode"});
    c.ionic = IonicModel::fhn(io.num("a1", 1.0), io.num("b1", 1.0), io.num("rho", -1.0), io.num("theta", 0.25));
    c.ionic.r = io.num("r", 4.0);
    c.ionic.beta1 = io.num("beta1", c.ionic.beta1);
    c.ionic.beta2 = io.num("beta2", 0.0);

    Section gp(top.sub("gap"), "gap", {"G_gap", "C_ratio"});
    c.gap.G_gap = gp.num("G_gap", 1.0);
    c.gap.C_ratio = gp.num("C_ratio", 0.5);

    Section s(top.sub("solver"), "solver",
              {"eps", "delta", "dt", "t_end", "lin_tol", "lin_maxit", "gating_scheme", "linear_solver"});
    c.solver.eps = s.num("eps", c.tiling.epsilon);
    c.solver.delta = s.num("delta", 0.0);
    c.solver.dt = s.num("dt", 0.01);
    c.solver.t_end = s.num("t_end", 0.1);
    c.solver.lin_tol = s.num("lin_tol", 1e-10);
    c.solver.lin_maxit = s.integer("lin_maxit", 5000);
    c.solver.gating = parse_gating(s.str("gating_scheme", "explicit_euler"));
    c.solver.solver = parse_solver(s.str("linear_solver", "direct"));
    c.solver.ionic_mode = parse_ionic_mode(io.str("mode", "fhn"));
    c.solver.C_ratio = c.gap.C_ratio;

    Section ia(top.sub("iapp"), "iapp", {"gamma1", "gamma2"});
    c.solver.iapp[0] = read_iapp(ia, "gamma1");
    c.solver.iapp[1] = read_iapp(ia, "gamma2");

    Section in(top.sub("initial"), "initial", {"v1", "v2", "w1", "w2", "s"});
    c.initial.v0[0] = read_field(in, "v1");
    c.initial.v0[1] = read_field(in, "v2");
    c.initial.w0[0] = read_field(in, "w1");
    c.initial.w0[1] = read_field(in, "w2");
    c.initial.s0 = read_field(in, "s");

    Section o(top.sub("output"), "output", {"directory", "stride", "vtk", "binary", "matrix_market"});
    c.output.directory = o.str("directory", "out");
    c.output.stride = o.integer("stride", 1);
    c.output.vtk = o.boolean("vtk", false);
    c.output.binary = o.boolean("binary", true);
    c.output.matrix_market = o.boolean("matrix_market", false);

    Section e(top.sub("experiment"), "experiment",
              {"kind", "etas", "deltas", "densities", "mms_kind", "v_range", "w_range", "samples",
               "stability_tolerance"});
    c.experiment.kind = e.str("kind", "");
    c.experiment.etas = e.nums("etas", c.experiment.etas);
    c.experiment.deltas = e.nums("deltas", c.experiment.deltas);
    c.experiment.densities.clear();
    for (double d : e.nums("densities", {8, 16, 32})) c.experiment.densities.push_back(static_cast<int>(d));
    c.experiment.mms_kind = e.str("mms_kind", "trig");
    c.experiment.v_range = read_interval(e, "v_range", c.experiment.v_range);
    c.experiment.w_range = read_interval(e, "w_range", c.experiment.w_range);
    c.experiment.samples = e.integer("samples", c.experiment.samples);
    c.experiment.stability_tolerance = e.num("stability_tolerance", 0.05);

    Section u(top.sub("units"), "units", {"ell_mic_cm", "R_m", "C_m", "lambda", "delta_v", "delta_w"});
    c.units.ell_mic_cm = u.num("ell_mic_cm", c.units.ell_mic_cm);
    c.units.R_m = u.num("R_m", c.units.R_m);
    c.units.C_m = u.num("C_m", c.units.C_m);
    c.units.lambda = u.num("lambda", c.units.lambda);
    c.units.delta_v = u.num("delta_v", c.units.delta_v);
    c.units.delta_w = u.num("delta_w", c.units.delta_w);

    c.validate();
    return c;
}

RunConfig load_config(const std::string& path, std::string* raw_bytes) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::ostringstream os;
    os << is.rdbuf();
    const std::string text = os.str();
    if (raw_bytes) *raw_bytes = text;
    return parse_config(text, path);
}

}  // namespace tridomain
