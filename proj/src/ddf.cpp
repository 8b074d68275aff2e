#include "ddm/ddf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddm/parallel.hpp"

namespace ddm {

namespace {

constexpr double kSingular = 1e-12;

struct BaseSet {
    std::vector<Vec3> points;
    std::vector<double> sigma;  // per-point std-dev
};

std::vector<int> cycle_indices(std::size_t n, std::size_t m, Rng& rng)
{
    std::vector<int> out;
    out.reserve(m);
    const std::size_t full = m / n;
    for (std::size_t pass = 0; pass < full; ++pass)
        for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<int>(i));
    const std::size_t rem = m % n;
    if (rem > 0) {
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        out.insert(out.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(rem));
    }
    return out;
}

std::vector<double> nearest_other_distance(const PointCloud& cloud)
{
    std::vector<double> out(cloud.size(), 0.0);
    if (cloud.size() < 2) return out;
    KdTree tree(cloud.points);
    std::vector<Neighbor> nb;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        tree.knn(cloud.points[i], 2, nb);
        out[i] = nb[1].distance;
    }
    return out;
}

void append_base(const Surface& s, const RefGenConfig& cfg, bool cycle_cloud, Rng& rng, BaseSet& base)
{
    if (const auto* pc = std::get_if<PointCloud>(&s)) {
        if (pc->empty()) throw InvalidInput("reference generation: empty point cloud");
        std::vector<double> local_sigma(pc->size(), cfg.sigma);
        if (cfg.adaptive_sigma_scale) {
            local_sigma = nearest_other_distance(*pc);
            for (double& v : local_sigma) v *= *cfg.adaptive_sigma_scale;
        }
        std::vector<int> idx;
        if (cycle_cloud) {
            idx = cycle_indices(pc->size(), cfg.M, rng);
        } else {
            idx.resize(pc->size());
            std::iota(idx.begin(), idx.end(), 0);
        }
        for (int i : idx) {
            base.points.push_back(pc->points[i]);
            base.sigma.push_back(local_sigma[i]);
        }
        return;
    }
    const auto& mesh = std::get<TriangleMesh>(s);
    if (mesh.vertices.empty() || mesh.faces.empty()) throw InvalidInput("reference generation: empty mesh");
    MeshSamples samples = sample_mesh_surface(mesh, cfg.M, rng);
    std::vector<double> local_sigma(samples.points.size(), cfg.sigma);
    if (cfg.adaptive_sigma_scale) {
        local_sigma = nearest_other_distance(PointCloud{samples.points});
        for (double& v : local_sigma) v *= *cfg.adaptive_sigma_scale;
    }
    base.points.insert(base.points.end(), samples.points.begin(), samples.points.end());
    base.sigma.insert(base.sigma.end(), local_sigma.begin(), local_sigma.end());
}

}  // namespace

ReferencePointSet generate_reference_points(const Surface& fixed, const RefGenConfig& cfg, const Surface* moving)
{
    if (cfg.M < 1) throw InvalidInput("reference generation: M must be >= 1");
    if (!std::isfinite(cfg.sigma) || cfg.sigma < 0.0) throw InvalidInput("reference generation: sigma must be finite and >= 0");
    if (cfg.sources == RefSources::BothSurfaces && moving == nullptr)
        throw InvalidInput("reference generation: both-surfaces mode needs the moving surface");

    Rng rng(cfg.seed);
    BaseSet base;
    if (cfg.sources == RefSources::FixedOnly) {
        append_base(fixed, cfg, true, rng, base);
    } else {
        append_base(fixed, cfg, false, rng, base);
        append_base(*moving, cfg, false, rng, base);
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    ReferencePointSet out;
    out.config = cfg;
    out.points.resize(base.points.size());
    for (std::size_t i = 0; i < base.points.size(); ++i) {
        const double nx = gauss(rng), ny = gauss(rng), nz = gauss(rng);
        out.points[i] = base.points[i] + base.sigma[i] * Vec3(nx, ny, nz);
    }
    return out;
}

std::pair<DdfSample, Vec3> ddf_point_cloud(const KdTree& index, const Vec3& q, const DdfConfig& cfg)
{
    thread_local std::vector<Neighbor> nb;
    index.knn(q, cfg.K, nb);
    const auto& pts = index.points();
    Vec3 qhat;
    if (nb.size() == 1 || nb.front().distance < kSingular) {
        qhat = pts[nb.front().index];
    } else {
        Vec3 acc = Vec3::Zero();
        double wsum = 0.0;
        for (const auto& n : nb) {
            const double w = 1.0 / (n.distance * n.distance);
            acc += w * pts[n.index];
            wsum += w;
        }
        qhat = acc / wsum;
    }
    DdfSample s;
    s.h = qhat - q;
    s.f = s.h.norm();
    return {s, qhat};
}

std::pair<DdfSample, DdfGradient> ddf_grad_point_cloud(const KdTree& index, const Vec3& q, const DdfConfig& cfg)
{
    DdfGradient g;
    const DdfSample s = ddf_grad_point_cloud(index, q, cfg, g);
    return {s, std::move(g)};
}

DdfSample ddf_grad_point_cloud(const KdTree& index, const Vec3& q, const DdfConfig& cfg, DdfGradient& g)
{
    thread_local std::vector<Neighbor> nb;
    index.knn(q, cfg.K, nb);
    const auto& pts = index.points();
    g.support.clear();
    g.dh.clear();
    g.df.clear();

    DdfSample s;
    if (nb.size() == 1 || nb.front().distance < kSingular) {
        // Single neighbor or coincident point: the blend collapses onto it; weights carry no gradient.
        const Vec3 qhat = pts[nb.front().index];
        s.h = qhat - q;
        s.f = s.h.norm();
        for (std::size_t k = 0; k < nb.size(); ++k) {
            g.support.push_back(nb[k].index);
            g.dh.push_back(k == 0 ? Mat3(Mat3::Identity()) : Mat3(Mat3::Zero()));
        }
    } else {
        thread_local std::vector<double> w;
        w.resize(nb.size());
        Vec3 acc = Vec3::Zero();
        double wsum = 0.0;
        for (std::size_t k = 0; k < nb.size(); ++k) {
            w[k] = 1.0 / (nb[k].distance * nb[k].distance);
            acc += w[k] * pts[nb[k].index];
            wsum += w[k];
        }
        const Vec3 qhat = acc / wsum;
        s.h = qhat - q;
        s.f = s.h.norm();
        // q_hat = sum(w_k p_k) / sum(w_k), w_k = 1 / |p_k - q|^2
        // d q_hat / d p_k = (w_k I + (p_k - q_hat) (d w_k / d p_k)^T) / W
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const Vec3 r = pts[nb[k].index] - q;
            const Vec3 dw = -2.0 * w[k] * w[k] * r;
            Mat3 J = w[k] * Mat3::Identity() + (pts[nb[k].index] - qhat) * dw.transpose();
            g.support.push_back(nb[k].index);
            g.dh.push_back(J / wsum);
        }
    }
    for (const auto& J : g.dh) {
        if (s.f > kSingular)
            g.df.push_back((s.h / s.f).transpose() * J);
        else
            g.df.push_back(Eigen::RowVector3d::Zero());
    }
    return s;
}

std::pair<DdfSample, BarycentricFoot> ddf_mesh(const MeshBvh& index, const TriangleMesh& mesh, const Vec3& q)
{
    if (mesh.faces.empty()) throw InvalidInput("DDF of a faceless mesh");
    BarycentricFoot foot = index.closest_point(mesh, q);
    DdfSample s;
    s.h = foot.point - q;
    s.f = s.h.norm();
    return {s, foot};
}

std::pair<DdfSample, DdfGradient> ddf_grad_mesh(const MeshBvh& index, const TriangleMesh& mesh, const Vec3& q,
                                                bool project_jacobian)
{
    DdfGradient g;
    const DdfSample s = ddf_grad_mesh(index, mesh, q, g, project_jacobian);
    return {s, std::move(g)};
}

DdfSample ddf_grad_mesh(const MeshBvh& index, const TriangleMesh& mesh, const Vec3& q, DdfGradient& g,
                        bool project_jacobian)
{
    const auto [s, foot] = ddf_mesh(index, mesh, q);
    g.support.clear();
    g.dh.clear();
    g.df.clear();
    const auto& face = mesh.faces[foot.face_index];
    // Translating the closest feature moves the foot only across it: along n
    // for a face interior, orthogonal to the edge for an edge, fully at a vertex.
    Mat3 P = Mat3::Identity();
    if (project_jacobian) {
        const Vec3& a = mesh.vertices[face[0]];
        const Vec3& b = mesh.vertices[face[1]];
        const Vec3& c = mesh.vertices[face[2]];
        const auto& w = foot.weights;
        const int nonzero = (w[0] > 0.0) + (w[1] > 0.0) + (w[2] > 0.0);
        const Vec3 n = (b - a).cross(c - a);
        if (nonzero == 3 && n.squaredNorm() > 0.0) {
            const Vec3 u = n.normalized();
            P = u * u.transpose();
        } else if (nonzero == 2) {
            const Vec3 e = (w[0] == 0.0 ? c - b : w[1] == 0.0 ? c - a : b - a).normalized();
            P -= e * e.transpose();
        }
    }
    for (int j = 0; j < 3; ++j) {
        const Mat3 J = foot.weights[j] * P;
        g.support.push_back(face[j]);
        g.dh.push_back(J);
        if (s.f > kSingular)
            g.df.push_back((s.h / s.f).transpose() * J);
        else
            g.df.push_back(Eigen::RowVector3d::Zero());
    }
    return s;
}

DdfField::DdfField(Surface surface, DdfConfig cfg) : surface_(std::move(surface)), cfg_(cfg)
{
    if (cfg_.K < 1) throw InvalidInput("DDF: K must be >= 1");
    validate(surface_);
    if (const auto* pc = std::get_if<PointCloud>(&surface_)) {
        if (static_cast<std::size_t>(cfg_.K) > pc->size())
            throw InvalidInput("DDF: K=" + std::to_string(cfg_.K) + " exceeds the cloud size " +
                               std::to_string(pc->size()));
    } else if (std::get<TriangleMesh>(surface_).faces.empty()) {
        throw InvalidInput("DDF of a faceless mesh");
    }
    index_ = build_index(surface_);
}

DdfSample DdfField::evaluate(const Vec3& q) const
{
    if (const auto* tree = std::get_if<KdTree>(&index_)) return ddf_point_cloud(*tree, q, cfg_).first;
    return ddf_mesh(std::get<MeshBvh>(index_), std::get<TriangleMesh>(surface_), q).first;
}

DdfSample DdfField::evaluate(const Vec3& q, DdfGradient& grad) const
{
    if (const auto* tree = std::get_if<KdTree>(&index_)) return ddf_grad_point_cloud(*tree, q, cfg_, grad);
    return ddf_grad_mesh(std::get<MeshBvh>(index_), std::get<TriangleMesh>(surface_), q, grad,
                         cfg_.project_mesh_jacobian);
}

std::vector<DdfSample> DdfField::evaluate_all(const std::vector<Vec3>& queries) const
{
    std::vector<DdfSample> out(queries.size());
    parallel_for(queries.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = evaluate(queries[i]);
    });
    return out;
}

}  // namespace ddm
