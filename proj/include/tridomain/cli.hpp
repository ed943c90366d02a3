#pragma once

#include <memory>

#include "tridomain/config.hpp"

namespace tridomain {

/// Mesh and assembled operators for one configuration. Not movable since the
/// operator keeps a pointer to the mesh.
struct Problem {
    MicroMesh mesh;
    BlockOperator op;

    explicit Problem(const RunConfig& cfg);
    Problem(const UnitCellSpec& cell, const TilingSpec& tiling, const ConductivitySpec& cond);
    Problem(const Problem&) = delete;
    Problem& operator=(const Problem&) = delete;
};

// exit codes: 0 success, 1 experiment failure, 2 usage or configuration error
int run_cli(int argc, char** argv);

}  // namespace tridomain
