#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ddm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

/// Raised for any precondition violation on caller-supplied data.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an optimization produces a non-finite objective or gradient.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PointCloud {
    std::vector<Vec3> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_faces() const { return faces.size(); }
};

using Surface = std::variant<PointCloud, TriangleMesh>;

inline bool is_mesh(const Surface& s) { return std::holds_alternative<TriangleMesh>(s); }

/// Number of movable coordinates-carrying elements (points or vertices).
inline std::size_t element_count(const Surface& s)
{
    if (const auto* pc = std::get_if<PointCloud>(&s)) return pc->size();
    return std::get<TriangleMesh>(s).num_vertices();
}

inline const std::vector<Vec3>& element_positions(const Surface& s)
{
    if (const auto* pc = std::get_if<PointCloud>(&s)) return pc->points;
    return std::get<TriangleMesh>(s).vertices;
}

/// Throws InvalidInput unless every coordinate is finite and, for meshes,
/// every face references three distinct in-range vertices.
void validate(const PointCloud& cloud);
void validate(const TriangleMesh& mesh);
void validate(const Surface& surface);

/// Replaces the positions of a surface's points/vertices, keeping connectivity.
Surface with_positions(const Surface& s, std::vector<Vec3> positions);

double mean_edge_length(const TriangleMesh& mesh);

/// Unique undirected edges (i < j), sorted.
std::vector<std::array<int, 2>> unique_edges(const TriangleMesh& mesh);

/// Sorted vertex adjacency lists built from face edges.
std::vector<std::vector<int>> vertex_adjacency(const TriangleMesh& mesh);

}  // namespace ddm
