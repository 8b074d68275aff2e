#include "ddm/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace ddm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Summed in x, y, z order so the box bound never exceeds a contained point's
// squared distance after rounding.
double box_sq_distance(const Eigen::AlignedBox3d& box, const Vec3& q)
{
    double d = 0.0;
    for (int i = 0; i < 3; ++i) {
        double e = 0.0;
        if (q[i] < box.min()[i])
            e = box.min()[i] - q[i];
        else if (q[i] > box.max()[i])
            e = q[i] - box.max()[i];
        d += e * e;
    }
    return d;
}

double sq_dist(const Vec3& a, const Vec3& b)
{
    const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

struct Candidate {
    double d2;
    int index;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

// Bounded sorted buffer of the best k candidates. Small k stays on the stack.
class KBest {
public:
    explicit KBest(int k) : k_(k)
    {
        if (k_ > kInline) heap_.resize(k_ + 1);
        data_ = k_ > kInline ? heap_.data() : inline_;
    }

    double worst() const { return size_ == k_ ? data_[size_ - 1].d2 : kInf; }

    void offer(const Candidate& c)
    {
        if (size_ == k_ && !(c < data_[size_ - 1])) return;
        insert(c);
    }

    const Candidate* begin() const { return data_; }
    const Candidate* end() const { return data_ + size_; }

private:
    void insert(const Candidate& c)
    {
        int i = size_ == k_ ? size_ - 1 : size_++;
        while (i > 0 && c < data_[i - 1]) {
            data_[i] = data_[i - 1];
            --i;
        }
        data_[i] = c;
    }

    static constexpr int kInline = 32;
    int k_;
    int size_ = 0;
    Candidate inline_[kInline + 1];
    std::vector<Candidate> heap_;
    Candidate* data_;
};

BarycentricFoot closest_on_segment(const Vec3& q, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp((q - a).dot(ab) / len2, 0.0, 1.0);
    BarycentricFoot foot;
    foot.weights = {1.0 - t, t, 0.0};
    foot.point = (1.0 - t) * a + t * b;
    return foot;
}

}  // namespace

// ---------------------------------------------------------------------------
// KdTree

KdTree::KdTree(std::vector<Vec3> points, int leaf_size) : points_(std::move(points))
{
    if (points_.empty()) throw InvalidInput("cannot index an empty point set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * points_.size() / std::max(1, leaf_size) + 1);
    build(0, static_cast<int>(points_.size()), std::max(1, leaf_size));
    ordered_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) ordered_[i] = points_[order_[i]];
}

int KdTree::build(int begin, int end, int leaf_size)
{
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box;
    for (int i = begin; i < end; ++i) box.extend(points_[order_[i]]);
    nodes_[id].box = box;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= leaf_size) return id;

    int axis;
    box.sizes().maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
    const int left = build(begin, mid, leaf_size);
    const int right = build(mid, end, leaf_size);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::knn(const Vec3& q, int k, std::vector<Neighbor>& out) const
{
    if (k < 1 || static_cast<std::size_t>(k) > points_.size())
        throw InvalidInput("knn: K=" + std::to_string(k) + " outside [1, " + std::to_string(points_.size()) + "]");
    KBest best(k);
    // Depth-first with near-child-first ordering; each entry carries its box bound.
    struct Entry {
        int node;
        double bound;
    };
    Entry stack[128];
    int top = 0;
    stack[top++] = {0, box_sq_distance(nodes_[0].box, q)};
    while (top > 0) {
        const Entry e = stack[--top];
        if (e.bound > best.worst()) continue;
        const Node& node = nodes_[e.node];
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) best.offer({sq_dist(ordered_[i], q), order_[i]});
            continue;
        }
        const double dl = box_sq_distance(nodes_[node.left].box, q);
        const double dr = box_sq_distance(nodes_[node.right].box, q);
        if (dl <= dr) {
            stack[top++] = {node.right, dr};
            stack[top++] = {node.left, dl};
        } else {
            stack[top++] = {node.left, dl};
            stack[top++] = {node.right, dr};
        }
    }
    out.clear();
    for (const auto& c : best) out.push_back({c.index, std::sqrt(c.d2)});
}

std::vector<Neighbor> KdTree::knn(const Vec3& q, int k) const
{
    std::vector<Neighbor> out;
    knn(q, k, out);
    return out;
}

Neighbor KdTree::nearest(const Vec3& q) const
{
    std::vector<Neighbor> out;
    knn(q, 1, out);
    return out.front();
}

// ---------------------------------------------------------------------------
// MeshBvh

MeshBvh::MeshBvh(const TriangleMesh& mesh, int leaf_size)
{
    if (mesh.faces.empty()) throw InvalidInput("mesh has no faces");
    faces_.resize(mesh.faces.size());
    std::iota(faces_.begin(), faces_.end(), 0);
    std::vector<Vec3> centroids(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        centroids[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    }
    nodes_.reserve(2 * faces_.size() / std::max(1, leaf_size) + 1);
    build(mesh, centroids, 0, static_cast<int>(faces_.size()), std::max(1, leaf_size));
}

int MeshBvh::build(const TriangleMesh& mesh, std::vector<Vec3>& centroids, int begin, int end, int leaf_size)
{
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box;
    Eigen::AlignedBox3d cbox;
    for (int i = begin; i < end; ++i) {
        const auto& t = mesh.faces[faces_[i]];
        for (int v : t) box.extend(mesh.vertices[v]);
        cbox.extend(centroids[faces_[i]]);
    }
    // Feet are reconstructed from barycentric weights and can land a few ulps
    // outside the exact vertex box.
    const double pad = 1e-9 * (box.sizes().maxCoeff() + box.min().cwiseAbs().maxCoeff() + box.max().cwiseAbs().maxCoeff()) + 1e-300;
    box.min().array() -= pad;
    box.max().array() += pad;
    nodes_[id].box = box;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= leaf_size) return id;

    int axis;
    cbox.sizes().maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(faces_.begin() + begin, faces_.begin() + mid, faces_.begin() + end,
                     [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });
    const int left = build(mesh, centroids, begin, mid, leaf_size);
    const int right = build(mesh, centroids, mid, end, leaf_size);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

BarycentricFoot MeshBvh::closest_point(const TriangleMesh& mesh, const Vec3& q) const
{
    BarycentricFoot best;
    Candidate best_c{kInf, std::numeric_limits<int>::max()};
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (box_sq_distance(node.box, q) > best_c.d2) continue;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int f = faces_[i];
                const auto& t = mesh.faces[f];
                BarycentricFoot foot =
                    closest_point_on_triangle(q, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
                const Candidate c{sq_dist(foot.point, q), f};
                if (c < best_c) {
                    best_c = c;
                    best = foot;
                    best.face_index = f;
                }
            }
            continue;
        }
        const double dl = box_sq_distance(nodes_[node.left].box, q);
        const double dr = box_sq_distance(nodes_[node.right].box, q);
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

SpatialIndex build_index(const Surface& surface)
{
    if (const auto* pc = std::get_if<PointCloud>(&surface)) {
        if (pc->empty()) throw InvalidInput("cannot index an empty point cloud");
        return KdTree(pc->points);
    }
    const auto& mesh = std::get<TriangleMesh>(surface);
    if (mesh.vertices.empty()) throw InvalidInput("cannot index an empty mesh");
    return MeshBvh(mesh);
}

std::vector<Neighbor> knn(const SpatialIndex& index, const Vec3& q, int k)
{
    const auto* tree = std::get_if<KdTree>(&index);
    if (!tree) throw InvalidInput("knn requires a point-cloud index");
    return tree->knn(q, k);
}

BarycentricFoot closest_point_on_mesh(const SpatialIndex& index, const TriangleMesh& mesh, const Vec3& q)
{
    const auto* bvh = std::get_if<MeshBvh>(&index);
    if (!bvh) throw InvalidInput("closest_point_on_mesh requires a mesh index");
    if (mesh.faces.empty() || bvh->num_faces() != mesh.faces.size())
        throw InvalidInput("mesh has no faces or does not match its index");
    return bvh->closest_point(mesh, q);
}

BarycentricFoot closest_point_on_triangle(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const double scale = std::max({ab.squaredNorm(), ac.squaredNorm(), (c - b).squaredNorm()});
    if (ab.cross(ac).squaredNorm() <= 1e-24 * scale * scale) {
        // Degenerate: best of the three edges.
        BarycentricFoot e0 = closest_on_segment(q, a, b);
        BarycentricFoot e1 = closest_on_segment(q, b, c);
        BarycentricFoot e2 = closest_on_segment(q, c, a);
        e1.weights = {0.0, e1.weights[0], e1.weights[1]};
        e2.weights = {e2.weights[1], 0.0, e2.weights[0]};
        BarycentricFoot* best = &e0;
        double bd = sq_dist(e0.point, q);
        for (BarycentricFoot* e : {&e1, &e2}) {
            const double d = sq_dist(e->point, q);
            if (d < bd) {
                bd = d;
                best = e;
            }
        }
        return *best;
    }

    BarycentricFoot foot;
    auto finish = [&](double u, double v, double w) {
        foot.weights = {u, v, w};
        foot.point = u * a + v * b + w * c;
        return foot;
    };

    const Vec3 ap = q - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return finish(1.0, 0.0, 0.0);

    const Vec3 bp = q - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return finish(0.0, 1.0, 0.0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return finish(1.0 - v, v, 0.0);
    }

    const Vec3 cp = q - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return finish(0.0, 0.0, 1.0);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return finish(1.0 - w, 0.0, w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(0.0, 1.0 - w, w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return finish(va * denom, v, w);
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c)
{
    return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 face_normal(const TriangleMesh& mesh, int face)
{
    const auto& t = mesh.faces[face];
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

MeshSamples sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng)
{
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw InvalidInput("mesh has zero surface area");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MeshSamples out;
    out.points.reserve(n);
    out.faces.reserve(n);
    out.weights.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = unit(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        int f = static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), cumulative.size() - 1));
        const double s = std::sqrt(unit(rng));
        const double r2 = unit(rng);
        const std::array<double, 3> w{1.0 - s, s * (1.0 - r2), s * r2};
        const auto& t = mesh.faces[f];
        out.points.push_back(w[0] * mesh.vertices[t[0]] + w[1] * mesh.vertices[t[1]] + w[2] * mesh.vertices[t[2]]);
        out.faces.push_back(f);
        out.weights.push_back(w);
    }
    return out;
}

PointCloud sample_points_on_mesh(const TriangleMesh& mesh, std::size_t n, Rng& rng)
{
    return PointCloud{sample_mesh_surface(mesh, n, rng).points};
}

std::vector<std::pair<int, double>> geodesic_distances(const TriangleMesh& mesh,
                                                       const std::vector<std::vector<int>>& adjacency,
                                                       int source_vertex, double cutoff)
{
    const int n = static_cast<int>(mesh.vertices.size());
    if (source_vertex < 0 || source_vertex >= n) throw InvalidInput("geodesic source vertex out of range");

    std::vector<double> dist(n, kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source_vertex] = 0.0;
    heap.push({0.0, source_vertex});
    std::vector<std::pair<int, double>> result;
    while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[v]) continue;
        result.emplace_back(v, d);
        for (int u : adjacency[v]) {
            const double nd = d + (mesh.vertices[u] - mesh.vertices[v]).norm();
            if (nd <= cutoff && nd < dist[u]) {
                dist[u] = nd;
                heap.push({nd, u});
            }
        }
    }
    std::sort(result.begin(), result.end());
    return result;
}

std::vector<std::pair<int, double>> geodesic_distances(const TriangleMesh& mesh, int source_vertex, double cutoff)
{
    return geodesic_distances(mesh, vertex_adjacency(mesh), source_vertex, cutoff);
}

}  // namespace ddm
