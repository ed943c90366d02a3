#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tridomain/config.hpp"

namespace tridomain {

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t h);

void write_text(const std::string& path, const std::string& content);

// CSV with one row per stored state: t, energies, norms, residuals
std::string timeseries_csv(const Trajectory& traj, const BlockOperator& op, const IonicModel& model,
                           const SolverConfig& cfg, int stride);

// plain little-endian doubles [u1 u2 ue w1 w2] plus a JSON header
void write_final_state(const SystemState& s, const std::string& bin_path, const std::string& json_path);
SystemState read_final_state(const std::string& bin_path, const std::string& json_path);

/// Writes timeseries.csv, final_state.{bin,json} and optional VTK dumps into
/// `dir`; returns the file names written.
std::vector<std::string> emit_outputs(const Trajectory& traj, const BlockOperator& op, const IonicModel& model,
                                      const RunConfig& cfg, const std::string& dir);

struct Verdict {
    std::string experiment;
    bool pass = false;
    std::vector<std::pair<std::string, bool>> checks;
    std::vector<std::pair<std::string, double>> metrics;
};

void write_verdict(const Verdict& v, const std::string& path);

void write_manifest(const std::string& path, const std::string& config_bytes, const std::string& command,
                    double wall_seconds, const std::vector<std::string>& outputs);

}  // namespace tridomain
