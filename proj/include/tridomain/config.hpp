#pragma once

#include <string>
#include <vector>

#include "tridomain/assembly.hpp"
#include "tridomain/diagnostics.hpp"
#include "tridomain/geometry.hpp"
#include "tridomain/ionics.hpp"
#include "tridomain/stepper.hpp"

namespace tridomain {

struct OutputSpec {
    std::string directory = "out";
    int stride = 1;
    bool vtk = false;
    bool binary = true;
    bool matrix_market = false;
};

struct ExperimentParams {
    std::string kind;  // empty: taken from the subcommand
    std::vector<double> etas{1e-2, 1e-3};
    std::vector<double> deltas{1e-2, 1e-3, 1e-4};
    std::vector<int> densities{8, 16, 32};
    std::string mms_kind = "trig";
    Interval v_range{-10.0, 10.0};
    Interval w_range{-10.0, 10.0};
    int samples = 401;
    double stability_tolerance = 0.05;
};

struct RunConfig {
    UnitCellSpec cell;
    TilingSpec tiling;
    ConductivitySpec conductivity;
    IonicModel ionic;
    GapModel gap;
    SolverConfig solver;
    InitialData initial;
    OutputSpec output;
    ExperimentParams experiment;
    PhysicalUnits units;

    void validate() const;
};

// throws ConfigError naming the offending key, or for malformed TOML
RunConfig parse_config(const std::string& toml_text, const std::string& origin = "<string>");
RunConfig load_config(const std::string& path, std::string* raw_bytes = nullptr);

}  // namespace tridomain
