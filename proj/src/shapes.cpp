#include "ddm/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ddm::shapes {

TriangleMesh icosphere(int subdivisions)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : m.vertices) v.normalize();
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int id = static_cast<int>(m.vertices.size());
            m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<Face> faces;
        faces.reserve(m.faces.size() * 4);
        for (const auto& f : m.faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            faces.push_back({f[0], ab, ca});
            faces.push_back({f[1], bc, ab});
            faces.push_back({f[2], ca, bc});
            faces.push_back({ab, bc, ca});
        }
        m.faces = std::move(faces);
    }
    return m;
}

TriangleMesh blob(int subdivisions)
{
    TriangleMesh m = icosphere(subdivisions);
    for (auto& v : m.vertices) {
        const double r = 1.0 + 0.15 * std::sin(3.0 * v.x() + 0.5) * std::cos(2.0 * v.y()) + 0.1 * v.z() * v.x();
        v = (r * v).cwiseProduct(Vec3(1.0, 0.75, 0.55));
    }
    Vec3 centre = Vec3::Zero();
    for (const auto& v : m.vertices) centre += v;
    centre /= static_cast<double>(m.vertices.size());
    double radius = 0.0;
    for (auto& v : m.vertices) {
        v -= centre;
        radius = std::max(radius, v.norm());
    }
    for (auto& v : m.vertices) v /= 2.0 * radius;
    return m;
}

TriangleMesh box(const Vec3& extents, int n)
{
    TriangleMesh m;
    std::map<std::array<long long, 3>, int> index;
    const Vec3 half = 0.5 * extents;
    // Vertices are keyed on integer lattice coordinates so shared edges weld.
    auto vertex = [&](const std::array<int, 3>& lattice) {
        const std::array<long long, 3> key{lattice[0], lattice[1], lattice[2]};
        auto it = index.find(key);
        if (it != index.end()) return it->second;
        const int id = static_cast<int>(m.vertices.size());
        Vec3 p;
        for (int k = 0; k < 3; ++k) p[k] = -half[k] + extents[k] * lattice[k] / n;
        m.vertices.push_back(p);
        index.emplace(key, id);
        return id;
    };
    for (int axis = 0; axis < 3; ++axis) {
        const int u = (axis + 1) % 3, v = (axis + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    auto corner = [&](int di, int dj) {
                        std::array<int, 3> l{};
                        l[axis] = side * n;
                        l[u] = i + di;
                        l[v] = j + dj;
                        return vertex(l);
                    };
                    const int a = corner(0, 0), b = corner(1, 0), c = corner(1, 1), d = corner(0, 1);
                    if (side == 1) {
                        m.faces.push_back({a, b, c});
                        m.faces.push_back({a, c, d});
                    } else {
                        m.faces.push_back({a, c, b});
                        m.faces.push_back({a, d, c});
                    }
                }
            }
        }
    }
    return m;
}

TriangleMesh grid(int n, double size)
{
    TriangleMesh m;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) m.vertices.emplace_back(size * i / (n - 1), size * j / (n - 1), 0.0);
    for (int j = 0; j + 1 < n; ++j) {
        for (int i = 0; i + 1 < n; ++i) {
            const int a = j * n + i, b = a + 1, c = a + n + 1, d = a + n;
            m.faces.push_back({a, b, c});
            m.faces.push_back({a, c, d});
        }
    }
    return m;
}

PointCloud random_cloud(std::size_t n, double half, Rng& rng)
{
    std::uniform_real_distribution<double> u(-half, half);
    PointCloud c;
    c.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = u(rng), y = u(rng), z = u(rng);
        c.points.emplace_back(x, y, z);
    }
    return c;
}

TriangleMesh scaled(const TriangleMesh& mesh, const Vec3& s)
{
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = v.cwiseProduct(s);
    return out;
}

std::vector<Vec3> sample_ellipsoid(const Vec3& semi_axes, std::size_t n, Rng& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double abc = semi_axes.prod();
    const double gmax = abc / semi_axes.minCoeff();
    std::vector<Vec3> out;
    out.reserve(n);
    while (out.size() < n) {
        const double x = g(rng), y = g(rng), z = g(rng);
        Vec3 d(x, y, z);
        const double len = d.norm();
        if (len == 0.0) continue;
        d /= len;
        // Area scale of the sphere-to-ellipsoid map at direction d.
        const double scale = abc * d.cwiseQuotient(semi_axes).norm();
        if (u(rng) * gmax <= scale) out.push_back(d.cwiseProduct(semi_axes));
    }
    return out;
}

std::vector<Vec3> sample_box(const Vec3& extents, std::size_t n, Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double areas[3] = {extents.y() * extents.z(), extents.z() * extents.x(), extents.x() * extents.y()};
    const double total = areas[0] + areas[1] + areas[2];
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = u(rng) * total;
        const int axis = r < areas[0] ? 0 : (r < areas[0] + areas[1] ? 1 : 2);
        const double side = u(rng) < 0.5 ? -0.5 : 0.5;
        Vec3 p;
        p[axis] = side * extents[axis];
        const int a = (axis + 1) % 3, b = (axis + 2) % 3;
        p[a] = (u(rng) - 0.5) * extents[a];
        p[b] = (u(rng) - 0.5) * extents[b];
        out.push_back(p);
    }
    return out;
}

}  // namespace ddm::shapes
