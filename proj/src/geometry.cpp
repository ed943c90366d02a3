#include "tridomain/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

namespace tridomain {

const char* region_name(Region r) {
    switch (r) {
        case Region::I1: return "I1";
        case Region::I2: return "I2";
        case Region::E: return "E";
    }
    return "?";
}

const char* interface_name(Interface f) {
    switch (f) {
        case Interface::Gamma1: return "gamma1";
        case Interface::Gamma2: return "gamma2";
        case Interface::Gamma12: return "gamma12";
    }
    return "?";
}

void UnitCellSpec::validate() const {
    if (!(cell_lengths[0] > 0.0) || !(cell_lengths[1] > 0.0))
        throw InvalidSpec("cell lengths must be positive");
    if (!(inner_margin > 0.0 && inner_margin < 0.5))
        throw InvalidSpec("inner_margin must lie in (0, 0.5), got " + std::to_string(inner_margin));
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw InvalidSpec("split_fraction must lie in (0, 1), got " + std::to_string(split_fraction));
    if (mesh_density < 1) throw InvalidSpec("mesh_density must be a positive integer");
}

const std::vector<Facet>& MicroMesh::facets(Interface f) const {
    switch (f) {
        case Interface::Gamma1: return gamma1;
        case Interface::Gamma2: return gamma2;
        default: return gamma12;
    }
}

double MicroMesh::triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Vec2& a = vertices[tri[0]];
    const Vec2& b = vertices[tri[1]];
    const Vec2& c = vertices[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double facet_length(const MicroMesh& mesh, const Facet& f) {
    const Vec2& a = mesh.vertices[f.inner[0]];
    const Vec2& b = mesh.vertices[f.inner[1]];
    return std::hypot(b.x - a.x, b.y - a.y);
}

namespace {

// Subdivide [0, len] at the given breakpoints; returns coordinates and the
// grid index of every breakpoint.
std::vector<double> graded_axis(const std::vector<double>& breaks, int density,
                                std::vector<int>& break_index) {
    std::vector<double> coords{breaks.front()};
    break_index.assign(1, 0);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k], b = breaks[k + 1];
        const int n = std::max(1, static_cast<int>(std::lround((b - a) * density)));
        for (int s = 1; s < n; ++s) coords.push_back(a + (b - a) * s / n);
        coords.push_back(b);
        break_index.push_back(static_cast<int>(coords.size()) - 1);
    }
    return coords;
}

}  // namespace

MicroMesh build_unit_cell(const UnitCellSpec& spec) {
    spec.validate();
    const double l1 = spec.cell_lengths[0], l2 = spec.cell_lengths[1];
    const double m = spec.inner_margin;
    const double xs = m * l1 + spec.split_fraction * (1.0 - 2.0 * m) * l1;

    std::vector<int> bx, by;
    const auto X = graded_axis({0.0, m * l1, xs, (1.0 - m) * l1, l1}, spec.mesh_density, bx);
    const auto Y = graded_axis({0.0, m * l2, (1.0 - m) * l2, l2}, spec.mesh_density, by);
    const int nx = static_cast<int>(X.size()) - 1;
    const int ny = static_cast<int>(Y.size()) - 1;

    auto cell_region = [&](int i, int j) {
        if (i < bx[1] || i >= bx[3] || j < by[1] || j >= by[2]) return Region::E;
        return i < bx[2] ? Region::I1 : Region::I2;
    };

    MicroMesh mesh;
    mesh.cell_lengths = spec.cell_lengths;
    mesh.grid_intervals = {nx, ny};

    // one vertex copy per (grid node, adjacent region)
    std::vector<std::array<int, 3>> copy((nx + 1) * (ny + 1), {-1, -1, -1});
    auto vertex = [&](int i, int j, Region r) {
        int& id = copy[j * (nx + 1) + i][static_cast<int>(r)];
        if (id < 0) {
            id = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back({X[i], Y[j]});
            mesh.vertex_region.push_back(r);
            mesh.vertex_grid.push_back({i, j});
            mesh.vertex_cell.push_back(0);
        }
        return id;
    };

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Region r = cell_region(i, j);
            const int p00 = vertex(i, j, r), p10 = vertex(i + 1, j, r);
            const int p11 = vertex(i + 1, j + 1, r), p01 = vertex(i, j + 1, r);
            mesh.triangles.push_back({p00, p10, p11});
            mesh.triangles.push_back({p00, p11, p01});
            mesh.triangle_region.insert(mesh.triangle_region.end(), 2, r);
            mesh.triangle_cell.insert(mesh.triangle_cell.end(), 2, 0);
        }
    }

    // a = region on the negative side, b = positive side along `axis`
    auto add_interface = [&](Region a, Region b, std::array<int, 2> n0, std::array<int, 2> n1,
                             Vec2 axis) {
        if (a == b) return;
        const bool a_inner = (a == Region::I1) || (a == Region::I2 && b == Region::E);
        const Region in = a_inner ? a : b;
        const Region out = a_inner ? b : a;
        Facet f;
        f.inner = {vertex(n0[0], n0[1], in), vertex(n1[0], n1[1], in)};
        f.outer = {vertex(n0[0], n0[1], out), vertex(n1[0], n1[1], out)};
        f.normal = a_inner ? axis : Vec2{-axis.x, -axis.y};
        if (out == Region::E)
            (in == Region::I1 ? mesh.gamma1 : mesh.gamma2).push_back(f);
        else
            mesh.gamma12.push_back(f);
    };

    for (int j = 0; j < ny; ++j)
        for (int i = 1; i < nx; ++i)
            add_interface(cell_region(i - 1, j), cell_region(i, j), {i, j}, {i, j + 1}, {1.0, 0.0});
    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            add_interface(cell_region(i, j - 1), cell_region(i, j), {i, j}, {i + 1, j}, {0.0, 1.0});

    for (int i = 0; i < nx; ++i) {
        mesh.exterior.push_back({{vertex(i, 0, Region::E), vertex(i + 1, 0, Region::E)}, {0.0, -1.0}});
        mesh.exterior.push_back({{vertex(i, ny, Region::E), vertex(i + 1, ny, Region::E)}, {0.0, 1.0}});
    }
    for (int j = 0; j < ny; ++j) {
        mesh.exterior.push_back({{vertex(0, j, Region::E), vertex(0, j + 1, Region::E)}, {-1.0, 0.0}});
        mesh.exterior.push_back({{vertex(nx, j, Region::E), vertex(nx, j + 1, Region::E)}, {1.0, 0.0}});
    }
    return mesh;
}

MicroMesh tile(const MicroMesh& cell, const TilingSpec& tiling) {
    if (cell.num_cells() != 1) throw InvalidSpec("tile expects a single-cell mesh");
    if (tiling.counts[0] < 1 || tiling.counts[1] < 1) throw InvalidSpec("tiling counts must be >= 1");
    if (!(tiling.epsilon > 0.0)) throw InvalidSpec("tiling epsilon must be positive");

    const int cx_n = tiling.counts[0], cy_n = tiling.counts[1];
    const int nx = cell.grid_intervals[0], ny = cell.grid_intervals[1];
    const double eps = tiling.epsilon;
    const double l1 = cell.cell_lengths[0], l2 = cell.cell_lengths[1];

    MicroMesh out;
    out.cell_lengths = cell.cell_lengths;
    out.grid_intervals = cell.grid_intervals;
    out.counts = tiling.counts;
    out.epsilon = eps;

    const long long row = static_cast<long long>(cx_n) * nx + 1;
    std::unordered_map<long long, int> shared;
    std::vector<int> map(cell.vertices.size());

    for (int cy = 0; cy < cy_n; ++cy) {
        for (int cx = 0; cx < cx_n; ++cx) {
            const int cid = cy * cx_n + cx;
            for (std::size_t v = 0; v < cell.vertices.size(); ++v) {
                const int gx = cx * nx + cell.vertex_grid[v][0];
                const int gy = cy * ny + cell.vertex_grid[v][1];
                if (cell.vertex_region[v] == Region::E) {
                    auto [it, fresh] = shared.try_emplace(gy * row + gx, static_cast<int>(out.vertices.size()));
                    map[v] = it->second;
                    if (!fresh) continue;
                } else {
                    map[v] = static_cast<int>(out.vertices.size());
                }
                out.vertices.push_back({eps * (cx * l1 + cell.vertices[v].x), eps * (cy * l2 + cell.vertices[v].y)});
                out.vertex_region.push_back(cell.vertex_region[v]);
                out.vertex_grid.push_back({gx, gy});
                out.vertex_cell.push_back(cid);
            }
            for (std::size_t t = 0; t < cell.triangles.size(); ++t) {
                const auto& tri = cell.triangles[t];
                out.triangles.push_back({map[tri[0]], map[tri[1]], map[tri[2]]});
                out.triangle_region.push_back(cell.triangle_region[t]);
                out.triangle_cell.push_back(cid);
            }
            auto copy_facets = [&](const std::vector<Facet>& src, std::vector<Facet>& dst) {
                for (const Facet& f : src) {
                    Facet g = f;
                    g.inner = {map[f.inner[0]], map[f.inner[1]]};
                    g.outer = {map[f.outer[0]], map[f.outer[1]]};
                    g.cell = cid;
                    dst.push_back(g);
                }
            };
            copy_facets(cell.gamma1, out.gamma1);
            copy_facets(cell.gamma2, out.gamma2);
            copy_facets(cell.gamma12, out.gamma12);
            for (const ExteriorEdge& e : cell.exterior) {
                const bool keep = (e.normal.x < 0 && cx == 0) || (e.normal.x > 0 && cx == cx_n - 1) ||
                                  (e.normal.y < 0 && cy == 0) || (e.normal.y > 0 && cy == cy_n - 1);
                if (keep) out.exterior.push_back({{map[e.v[0]], map[e.v[1]]}, e.normal});
            }
        }
    }
    return out;
}

Measures interface_measures(const MicroMesh& mesh) {
    Measures m;
    for (const Facet& f : mesh.gamma1) m.gamma1 += facet_length(mesh, f);
    for (const Facet& f : mesh.gamma2) m.gamma2 += facet_length(mesh, f);
    for (const Facet& f : mesh.gamma12) m.gamma12 += facet_length(mesh, f);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const double a = mesh.triangle_area(t);
        switch (mesh.triangle_region[t]) {
            case Region::I1: m.omega_i1 += a; break;
            case Region::I2: m.omega_i2 += a; break;
            case Region::E: m.omega_e += a; break;
        }
    }
    return m;
}

int region_components(const MicroMesh& mesh, Region r) {
    const std::size_t nt = mesh.triangles.size();
    std::vector<int> parent(nt);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    std::map<std::pair<int, int>, int> edge_owner;
    int count = 0;
    for (std::size_t t = 0; t < nt; ++t) {
        if (mesh.triangle_region[t] != r) continue;
        ++count;
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k], b = tri[(k + 1) % 3];
            auto [it, fresh] = edge_owner.try_emplace({std::min(a, b), std::max(a, b)}, static_cast<int>(t));
            if (fresh) continue;
            const int ra = find(it->second), rb = find(static_cast<int>(t));
            if (ra != rb) {
                parent[ra] = rb;
                --count;
            }
        }
    }
    return count;
}

void write_vtk(const MicroMesh& mesh, const std::string& path, const std::vector<PointField>& fields) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os.precision(17);
    os << "# vtk DataFile Version 3.0\n"
       << "tridomain micro mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.vertices.size() << " double\n";
    for (const Vec2& p : mesh.vertices) os << p.x << ' ' << p.y << " 0\n";
    const std::size_t nt = mesh.triangles.size();
    os << "CELLS " << nt << ' ' << 4 * nt << '\n';
    for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os << "CELL_TYPES " << nt << '\n';
    for (std::size_t t = 0; t < nt; ++t) os << "5\n";
    os << "CELL_DATA " << nt << "\nSCALARS subdomain int 1\nLOOKUP_TABLE default\n";
    for (Region r : mesh.triangle_region) os << static_cast<int>(r) << '\n';
    if (!fields.empty()) {
        os << "POINT_DATA " << mesh.vertices.size() << '\n';
        for (const PointField& f : fields) {
            if (f.values.size() != mesh.vertices.size())
                throw Error("point field '" + f.name + "' has wrong length");
            os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values) os << v << '\n';
        }
    }
    if (!os) throw Error("write failed: " + path);
}

}  // namespace tridomain
