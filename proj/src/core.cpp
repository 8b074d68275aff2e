#include "ddm/core.hpp"

#include <algorithm>
#include <string>

namespace ddm {

namespace {

void check_finite(const std::vector<Vec3>& pts, const char* what)
{
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!pts[i].allFinite())
            throw InvalidInput(std::string(what) + " " + std::to_string(i) + " has a non-finite coordinate");
    }
}

}  // namespace

void validate(const PointCloud& cloud)
{
    if (cloud.empty()) throw InvalidInput("point cloud is empty");
    check_finite(cloud.points, "point");
}

void validate(const TriangleMesh& mesh)
{
    if (mesh.vertices.empty()) throw InvalidInput("mesh has no vertices");
    check_finite(mesh.vertices, "vertex");
    const int n = static_cast<int>(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (int idx : face) {
            if (idx < 0 || idx >= n)
                throw InvalidInput("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                   " out of range");
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
            throw InvalidInput("face " + std::to_string(f) + " repeats a vertex index");
    }
}

void validate(const Surface& surface)
{
    std::visit([](const auto& s) { validate(s); }, surface);
}

Surface with_positions(const Surface& s, std::vector<Vec3> positions)
{
    if (positions.size() != element_count(s)) throw InvalidInput("position count does not match surface");
    if (std::holds_alternative<PointCloud>(s)) return PointCloud{std::move(positions)};
    TriangleMesh m;
    m.vertices = std::move(positions);
    m.faces = std::get<TriangleMesh>(s).faces;
    return m;
}

std::vector<std::array<int, 2>> unique_edges(const TriangleMesh& mesh)
{
    std::vector<std::array<int, 2>> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.push_back({a, b});
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::vector<int>> vertex_adjacency(const TriangleMesh& mesh)
{
    std::vector<std::vector<int>> adj(mesh.vertices.size());
    for (const auto& e : unique_edges(mesh)) {
        adj[e[0]].push_back(e[1]);
        adj[e[1]].push_back(e[0]);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

double mean_edge_length(const TriangleMesh& mesh)
{
    const auto edges = unique_edges(mesh);
    if (edges.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& e : edges) sum += (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm();
    return sum / static_cast<double>(edges.size());
}

}  // namespace ddm
