#include "tridomain/io.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Core>
#include <fmt/format.h>
#include <json.hpp>

#include "tridomain/errors.hpp"
#include "tridomain/version.hpp"

namespace tridomain {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << content;
    if (!os) throw Error("write failed: " + path);
}

std::string timeseries_csv(const Trajectory& traj, const BlockOperator& op, const IonicModel& model,
                           const SolverConfig& cfg, int /*stride*/) {
    std::ostringstream os;
    os << "step,t,energy,membrane1,membrane2,gating1,gating2,gap,delta_energy,dissipation,r_norm,"
          "flux_i1,flux_i2,flux_e,residual,mean_ue\n";
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        const SystemState& s = traj.states[j];
        const EnergyReport E = energy(s, op, model, cfg);
        const int n = j < traj.step_index.size() ? traj.step_index[j] : static_cast<int>(j);
        StepReport r;
        if (n > 0 && n <= static_cast<int>(traj.reports.size())) r = traj.reports[n - 1];
        os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},"
                          "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                          n, s.t, E.total, E.membrane[0], E.membrane[1], E.gating[0], E.gating[1], E.gap,
                          E.delta_energy, E.dissipation, E.r_norm, r.flux[0], r.flux[1], r.flux[2], r.residual,
                          op.c.dot(s.x));
    }
    return os.str();
}

void write_final_state(const SystemState& s, const std::string& bin_path, const std::string& json_path) {
    std::ofstream os(bin_path, std::ios::binary);
    if (!os) throw Error("cannot open " + bin_path + " for writing");
    auto put = [&](const Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &v[i], sizeof bits);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
            os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    };
    put(s.x);
    put(s.w[0]);
    put(s.w[1]);
    if (!os) throw Error("write failed: " + bin_path);
    json h;
    h["format"] = "float64 little-endian";
    h["t"] = s.t;
    h["blocks"] = json::array({{{"name", "u1"}, {"size", s.n1}},
                               {{"name", "u2"}, {"size", s.n2}},
                               {{"name", "ue"}, {"size", s.ne}},
                               {{"name", "w1"}, {"size", s.w[0].size()}},
                               {{"name", "w2"}, {"size", s.w[1].size()}}});
    write_text(json_path, h.dump(2) + "\n");
}

SystemState read_final_state(const std::string& bin_path, const std::string& json_path) {
    std::ifstream hs(json_path);
    if (!hs) throw Error("cannot open " + json_path);
    const json h = json::parse(hs);
    std::vector<long> sizes;
    for (const auto& b : h.at("blocks")) sizes.push_back(b.at("size").get<long>());
    std::ifstream is(bin_path, std::ios::binary);
    if (!is) throw Error("cannot open " + bin_path);
    auto get = [&](long n) {
        Vec v(n);
        for (long i = 0; i < n; ++i) {
            std::uint64_t bits;
            is.read(reinterpret_cast<char*>(&bits), sizeof bits);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
            std::memcpy(&v[i], &bits, sizeof bits);
        }
        return v;
    };
    SystemState s;
    s.t = h.at("t").get<double>();
    s.n1 = static_cast<int>(sizes.at(0));
    s.n2 = static_cast<int>(sizes.at(1));
    s.ne = static_cast<int>(sizes.at(2));
    s.x = get(sizes[0] + sizes[1] + sizes[2]);
    s.w[0] = get(sizes.at(3));
    s.w[1] = get(sizes.at(4));
    if (!is) throw Error("truncated state file " + bin_path);
    return s;
}

std::vector<std::string> emit_outputs(const Trajectory& traj, const BlockOperator& op, const IonicModel& model,
                                      const RunConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    write_text((fs::path(dir) / "timeseries.csv").string(),
               timeseries_csv(traj, op, model, cfg.solver, cfg.output.stride));
    files.push_back("timeseries.csv");
    if (cfg.output.binary && !traj.states.empty()) {
        write_final_state(traj.states.back(), (fs::path(dir) / "final_state.bin").string(),
                          (fs::path(dir) / "final_state.json").string());
        files.push_back("final_state.bin");
        files.push_back("final_state.json");
    }
    if (cfg.output.vtk) {
        write_vtk(*op.mesh, (fs::path(dir) / "mesh.vtk").string());
        files.push_back("mesh.vtk");
        for (std::size_t j = 0; j < traj.states.size(); ++j) {
            const SystemState& s = traj.states[j];
            std::vector<double> u(op.mesh->num_vertices());
            for (std::size_t v = 0; v < u.size(); ++v) u[v] = s.x[op.layout.dof_of_vertex[v]];
            const std::string name = fmt::format("fields_{:06d}.vtk", traj.step_index[j]);
            write_vtk(*op.mesh, (fs::path(dir) / name).string(), {{"u", u}});
            files.push_back(name);
        }
    }
    return files;
}

void write_verdict(const Verdict& v, const std::string& path) {
    json j;
    j["experiment"] = v.experiment;
    j["pass"] = v.pass;
    json checks = json::object();
    for (const auto& [k, ok] : v.checks) checks[k] = ok;
    j["checks"] = checks;
    json metrics = json::object();
    for (const auto& [k, x] : v.metrics) metrics[k] = x;
    j["metrics"] = metrics;
    write_text(path, j.dump(2) + "\n");
}

void write_manifest(const std::string& path, const std::string& config_bytes, const std::string& command,
                    double wall_seconds, const std::vector<std::string>& outputs) {
    json j;
    j["command"] = command;
    j["config_hash"] = hex64(fnv1a64(config_bytes));
    j["version"] = kVersion;
    j["eigen"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
    j["wall_time_s"] = wall_seconds;
    j["outputs"] = outputs;
    write_text(path, j.dump(2) + "\n");
}

}  // namespace tridomain
