#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tridomain/errors.hpp"

namespace tridomain {

enum class Region : std::uint8_t { I1 = 0, I2 = 1, E = 2 };
enum class Interface : std::uint8_t { Gamma1 = 0, Gamma2 = 1, Gamma12 = 2 };

const char* region_name(Region r);
const char* interface_name(Interface f);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct UnitCellSpec {
    std::array<double, 2> cell_lengths{1.0, 1.0};
    double inner_margin = 0.25;
    double split_fraction = 0.5;
    int mesh_density = 8;

    // throws InvalidSpec
    void validate() const;
};

struct TilingSpec {
    std::array<int, 2> counts{1, 1};
    double epsilon = 1.0;
};

/// Interface edge. `inner` holds the intracellular side (I1 for the gap
/// junction), `outer` the other side; inner[j] and outer[j] are coincident.
struct Facet {
    std::array<int, 2> inner{};
    std::array<int, 2> outer{};
    Vec2 normal;  // unit normal leaving the inner side
    int cell = 0;
};

struct ExteriorEdge {
    std::array<int, 2> v{};
    Vec2 normal;
};

struct MicroMesh {
    std::vector<Vec2> vertices;
    std::vector<Region> vertex_region;
    std::vector<std::array<int, 2>> vertex_grid;  // lattice index of the node
    std::vector<int> vertex_cell;                 // owning cell (first one for shared E nodes)

    std::vector<std::array<int, 3>> triangles;  // counter-clockwise
    std::vector<Region> triangle_region;
    std::vector<int> triangle_cell;

    std::vector<Facet> gamma1;
    std::vector<Facet> gamma2;
    std::vector<Facet> gamma12;
    std::vector<ExteriorEdge> exterior;

    std::array<double, 2> cell_lengths{1.0, 1.0};  // reference cell, before scaling
    std::array<int, 2> grid_intervals{0, 0};       // per cell
    std::array<int, 2> counts{1, 1};
    double epsilon = 1.0;

    const std::vector<Facet>& facets(Interface f) const;
    int num_cells() const { return counts[0] * counts[1]; }
    std::size_t num_vertices() const { return vertices.size(); }
    double triangle_area(std::size_t t) const;
};

struct Measures {
    double gamma1 = 0, gamma2 = 0, gamma12 = 0;
    double omega_i1 = 0, omega_i2 = 0, omega_e = 0;
};

MicroMesh build_unit_cell(const UnitCellSpec& spec);
MicroMesh tile(const MicroMesh& cell, const TilingSpec& tiling);
Measures interface_measures(const MicroMesh& mesh);

double facet_length(const MicroMesh& mesh, const Facet& f);

// Number of connected components among triangles of region r (edge adjacency).
int region_components(const MicroMesh& mesh, Region r);

// Legacy ASCII VTK, subdomain tag as cell data plus optional point fields.
struct PointField {
    std::string name;
    std::vector<double> values;  // one per vertex
};
void write_vtk(const MicroMesh& mesh, const std::string& path,
               const std::vector<PointField>& fields = {});

}  // namespace tridomain
