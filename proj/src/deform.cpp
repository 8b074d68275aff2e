#include "ddm/deform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SparseCholesky>

#include "ddm/rigid.hpp"

namespace ddm {

namespace {

std::vector<Vec3> unflatten(const Eigen::VectorXd& x)
{
    std::vector<Vec3> out(static_cast<std::size_t>(x.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.segment<3>(3 * static_cast<Eigen::Index>(i));
    return out;
}

Eigen::VectorXd flatten(const std::vector<Vec3>& v)
{
    Eigen::VectorXd x(3 * static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) x.segment<3>(3 * static_cast<Eigen::Index>(i)) = v[i];
    return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Deformation graph

Eigen::VectorXd DeformationGraph::params() const
{
    Eigen::VectorXd x(6 * static_cast<Eigen::Index>(num_nodes()));
    for (std::size_t j = 0; j < num_nodes(); ++j) {
        x.segment<3>(6 * j) = omega[j];
        x.segment<3>(6 * j + 3) = translation[j];
    }
    return x;
}

void DeformationGraph::set_params(const Eigen::VectorXd& x)
{
    if (x.size() != 6 * static_cast<Eigen::Index>(num_nodes()))
        throw InvalidInput("deformation graph parameter vector has the wrong size");
    for (std::size_t j = 0; j < num_nodes(); ++j) {
        omega[j] = x.segment<3>(6 * j);
        translation[j] = x.segment<3>(6 * j + 3);
    }
}

double node_weight(double geodesic, double epsilon)
{
    const double r = 1.0 - geodesic * geodesic / (epsilon * epsilon);
    return std::max(0.0, r * r * r);
}

DeformationGraph build_deformation_graph(const TriangleMesh& mesh, double epsilon, int K, Rng& rng)
{
    validate(mesh);
    if (!(epsilon > 0.0)) throw InvalidInput("deformation graph: epsilon must be > 0");
    if (K < 1) throw InvalidInput("deformation graph: K must be >= 1");
    const int n = static_cast<int>(mesh.num_vertices());
    const auto adjacency = vertex_adjacency(mesh);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    DeformationGraph g;
    g.epsilon = epsilon;
    std::vector<char> removed(n, 0);
    // Per-vertex candidate links, collected while carving the net.
    std::vector<std::vector<std::pair<double, int>>> candidates(n);
    for (int v : order) {
        if (removed[v]) continue;
        const int node = static_cast<int>(g.node_vertex_indices.size());
        g.node_vertex_indices.push_back(v);
        g.node_positions.push_back(mesh.vertices[v]);
        for (const auto& [u, d] : geodesic_distances(mesh, adjacency, v, epsilon)) {
            if (d < epsilon) {
                removed[u] = 1;
                candidates[u].emplace_back(d, node);
            }
        }
    }

    g.vertex_links.resize(n);
    for (int v = 0; v < n; ++v) {
        auto& c = candidates[v];
        std::sort(c.begin(), c.end());
        if (static_cast<int>(c.size()) > K) c.resize(K);
        for (const auto& [d, node] : c) g.vertex_links[v].push_back({node, node_weight(d, epsilon)});
        // Alg. invariant: every vertex was carved out by some node.
        if (g.vertex_links[v].empty() || g.vertex_links[v].front().weight <= 0.0)
            throw std::logic_error("deformation graph: vertex without a covering node");
    }
    g.omega.assign(g.num_nodes(), Vec3::Zero());
    g.translation.assign(g.num_nodes(), Vec3::Zero());
    return g;
}

std::vector<Vec3> deform_vertices(const TriangleMesh& mesh, const DeformationGraph& graph)
{
    if (graph.vertex_links.size() != mesh.num_vertices())
        throw InvalidInput("deformation graph was built for a different mesh");
    std::vector<Mat3> R(graph.num_nodes());
    std::vector<char> identity(graph.num_nodes());
    for (std::size_t j = 0; j < graph.num_nodes(); ++j) {
        R[j] = so3_exp(graph.omega[j]);
        identity[j] = graph.omega[j].isZero(0.0) && graph.translation[j].isZero(0.0);
    }
    std::vector<Vec3> out(mesh.num_vertices());
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        const Vec3& v = mesh.vertices[i];
        const auto& links = graph.vertex_links[i];
        double wsum = 0.0;
        bool all_identity = true;
        for (const auto& l : links) {
            wsum += l.weight;
            all_identity = all_identity && identity[l.node];
        }
        if (!(wsum > 0.0)) throw InvalidInput("deformation graph: vertex " + std::to_string(i) + " has zero total weight");
        if (all_identity) {
            out[i] = v;
            continue;
        }
        Vec3 acc = Vec3::Zero();
        for (const auto& l : links) {
            const Vec3& g = graph.node_positions[l.node];
            acc += l.weight * (R[l.node] * (v - g) + g + graph.translation[l.node]);
        }
        out[i] = acc / wsum;
    }
    return out;
}

Eigen::VectorXd deform_vertices_pullback(const TriangleMesh& mesh, const DeformationGraph& graph,
                                         const std::vector<Vec3>& grad_vertices)
{
    const std::size_t nodes = graph.num_nodes();
    std::vector<Mat3> RT(nodes);
    for (std::size_t j = 0; j < nodes; ++j) RT[j] = so3_exp(graph.omega[j]).transpose();
    std::vector<Vec3> g_rot(nodes, Vec3::Zero()), g_t(nodes, Vec3::Zero());
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        const auto& links = graph.vertex_links[i];
        double wsum = 0.0;
        for (const auto& l : links) wsum += l.weight;
        const Vec3& gv = grad_vertices[i];
        for (const auto& l : links) {
            const double a = l.weight / wsum;
            const Vec3 u = mesh.vertices[i] - graph.node_positions[l.node];
            g_t[l.node] += a * gv;
            g_rot[l.node] += a * u.cross(RT[l.node] * gv);
        }
    }
    Eigen::VectorXd out(6 * static_cast<Eigen::Index>(nodes));
    for (std::size_t j = 0; j < nodes; ++j) {
        out.segment<3>(6 * j) = so3_right_jacobian(graph.omega[j]).transpose() * g_rot[j];
        out.segment<3>(6 * j + 3) = g_t[j];
    }
    return out;
}

double smooth_reg_mesh(const TriangleMesh& mesh, const std::vector<Vec3>& deformed, std::vector<Vec3>* grad)
{
    if (deformed.size() != mesh.num_vertices()) throw InvalidInput("deformed vertices do not match the mesh");
    if (mesh.faces.empty()) return 0.0;
    const double scale = 1.0 / (3.0 * static_cast<double>(mesh.faces.size()));
    if (grad) grad->assign(mesh.num_vertices(), Vec3::Zero());
    double sum = 0.0;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k == 2 ? 1 : 0];
            const int b = f[k == 0 ? 1 : 2];
            const Vec3 e = (deformed[a] - mesh.vertices[a]) - (deformed[b] - mesh.vertices[b]);
            const double len = e.norm();
            sum += len;
            if (grad && len > 0.0) {
                const Vec3 dir = scale * e / len;
                (*grad)[a] += dir;
                (*grad)[b] -= dir;
            }
        }
    }
    return scale * sum;
}

NonrigidConfig default_nonrigid_config()
{
    NonrigidConfig cfg;
    cfg.epsilon_factor = 5.0;  // 5x the average edge length
    cfg.refgen.M = 40000;      // M = 4e4
    cfg.refgen.sigma = 0.1;    // sigma = 0.1
    cfg.node_neighbors = 5;    // K = 5
    cfg.lambda = 500.0;        // lambda = 500
    cfg.optim.algorithm = Algorithm::GD;
    cfg.optim.learning_rate = 2.0;  // SGD, lr 2.0
    cfg.optim.iterations = 1000;    // 1000 iterations
    // Without the projection the h residuals shear individual graph patches
    // tangentially and the solver stalls short of the target.
    cfg.metric.ddf.project_mesh_jacobian = true;
    return cfg;
}

NonrigidObjective::NonrigidObjective(const TriangleMesh& src, const TriangleMesh& tgt, DeformationGraph graph,
                                     ReferencePointSet refs, MetricConfig metric, double lambda)
    : src_(src), graph_(std::move(graph)), refs_(std::move(refs)), metric_(metric), lambda_(lambda)
{
    target_values_ = DdfField(tgt, metric_.ddf).evaluate_all(refs_.points);
}

double NonrigidObjective::value(const Eigen::VectorXd& x) const
{
    graph_.set_params(x);
    const auto deformed = deform_vertices(src_, graph_);
    TriangleMesh moved{deformed, src_.faces};
    return ddm_against(target_values_, moved, refs_, metric_).value + lambda_ * smooth_reg_mesh(src_, deformed);
}

double NonrigidObjective::operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const
{
    graph_.set_params(x);
    auto deformed = deform_vertices(src_, graph_);
    std::vector<Vec3> g_smooth;
    const double smooth = smooth_reg_mesh(src_, deformed, &g_smooth);
    TriangleMesh moved{std::move(deformed), src_.faces};
    auto [val, g] = ddm_grad_against(target_values_, moved, refs_, metric_);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda_ * g_smooth[i];
    grad = deform_vertices_pullback(src_, graph_, g);
    return val.value + lambda_ * smooth;
}

NonrigidResult register_nonrigid(const TriangleMesh& src, const TriangleMesh& tgt, const NonrigidConfig& cfg)
{
    validate(src);
    validate(tgt);
    if (src.faces.empty() || tgt.faces.empty()) throw InvalidInput("non-rigid registration needs meshes with faces");
    if (cfg.lambda < 0.0) throw InvalidInput("non-rigid registration: lambda must be >= 0");
    const double eps = cfg.epsilon_factor * mean_edge_length(src);
    Rng rng(cfg.graph_seed);
    DeformationGraph graph = build_deformation_graph(src, eps, cfg.node_neighbors, rng);
    RefGenConfig rg = cfg.refgen;
    rg.sources = RefSources::FixedOnly;
    NonrigidObjective objective(src, tgt, graph, generate_reference_points(tgt, rg), cfg.metric, cfg.lambda);
    OptimTrace trace = optimize(std::cref(objective), graph.params(), cfg.optim);
    graph.set_params(trace.x);
    NonrigidResult result{graph, TriangleMesh{deform_vertices(src, graph), src.faces}, std::move(trace)};
    return result;
}

// ---------------------------------------------------------------------------
// Diffusion reparameterization

struct DiffusionSystem::Solver {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

DiffusionSystem::DiffusionSystem(const TriangleMesh& mesh, double alpha) : alpha_(alpha)
{
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("diffusion system: alpha must be >= 0");
    const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
    std::vector<Eigen::Triplet<double>> lap;
    std::vector<double> degree(mesh.num_vertices(), 0.0);
    for (const auto& e : unique_edges(mesh)) {
        lap.emplace_back(e[0], e[1], -1.0);
        lap.emplace_back(e[1], e[0], -1.0);
        degree[e[0]] += 1.0;
        degree[e[1]] += 1.0;
    }
    for (Eigen::Index i = 0; i < n; ++i) lap.emplace_back(i, i, degree[i]);
    laplacian_.resize(n, n);
    laplacian_.setFromTriplets(lap.begin(), lap.end());
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    system_ = eye + alpha_ * laplacian_;
    solver_ = std::make_unique<Solver>();
    solver_->ldlt.compute(system_);
    if (solver_->ldlt.info() != Eigen::Success) throw InvalidInput("diffusion system: factorization failed");
}

DiffusionSystem::~DiffusionSystem() = default;
DiffusionSystem::DiffusionSystem(DiffusionSystem&&) noexcept = default;
DiffusionSystem& DiffusionSystem::operator=(DiffusionSystem&&) noexcept = default;

Eigen::MatrixXd DiffusionSystem::to_latent(const Eigen::MatrixXd& V) const { return system_ * V; }

Eigen::MatrixXd DiffusionSystem::to_vertices(const Eigen::MatrixXd& u) const
{
    if (alpha_ == 0.0) return u;
    return solver_->ldlt.solve(u);
}

Eigen::MatrixXd DiffusionSystem::pullback(const Eigen::MatrixXd& grad_vertices) const
{
    return to_vertices(grad_vertices);
}

Eigen::MatrixXd to_matrix(const std::vector<Vec3>& pts)
{
    Eigen::MatrixXd M(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    return M;
}

std::vector<Vec3> to_points(const Eigen::MatrixXd& M)
{
    std::vector<Vec3> out(static_cast<std::size_t>(M.rows()));
    for (Eigen::Index i = 0; i < M.rows(); ++i) out[static_cast<std::size_t>(i)] = M.row(i).transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Density adaptation

std::vector<double> vertex_mean_edge_length(const TriangleMesh& mesh)
{
    std::vector<double> sum(mesh.num_vertices(), 0.0), count(mesh.num_vertices(), 0.0);
    for (const auto& e : unique_edges(mesh)) {
        const double len = (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm();
        sum[e[0]] += len;
        sum[e[1]] += len;
        count[e[0]] += 1.0;
        count[e[1]] += 1.0;
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = count[i] > 0.0 ? sum[i] / count[i] : 0.0;
    return sum;
}

ExpectedLengths expected_edge_lengths(const TriangleMesh& mesh)
{
    ExpectedLengths out;
    const auto edges = unique_edges(mesh);
    std::vector<double> len(edges.size());
    double total = 0.0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        len[k] = (mesh.vertices[edges[k][0]] - mesh.vertices[edges[k][1]]).norm();
        total += len[k];
    }
    out.global = edges.empty() ? 0.0 : total / static_cast<double>(edges.size());

    // Edge ids incident to each vertex.
    std::vector<std::vector<int>> incident(mesh.num_vertices());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        incident[edges[k][0]].push_back(static_cast<int>(k));
        incident[edges[k][1]].push_back(static_cast<int>(k));
    }
    const auto adjacency = vertex_adjacency(mesh);
    out.local.assign(mesh.num_vertices(), out.global);
    std::vector<int> seen(edges.size(), -1);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        double sum = 0.0;
        int count = 0;
        auto visit = [&](int vertex) {
            for (int k : incident[vertex]) {
                if (seen[k] == static_cast<int>(v)) continue;
                seen[k] = static_cast<int>(v);
                sum += len[k];
                ++count;
            }
        };
        visit(static_cast<int>(v));
        for (int u : adjacency[v]) visit(u);
        if (count > 0) out.local[v] = sum / count;
    }
    return out;
}

double density_adaptation_reg(const TriangleMesh& mesh, const ExpectedLengths& targets, double lambda1,
                              double lambda2, std::vector<Vec3>* grad)
{
    const std::size_t n = mesh.num_vertices();
    if (targets.local.size() != n) throw InvalidInput("density adaptation: target lengths do not match the mesh");
    const auto edges = unique_edges(mesh);
    std::vector<double> sum(n, 0.0), count(n, 0.0);
    std::vector<double> len(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        len[k] = (mesh.vertices[edges[k][0]] - mesh.vertices[edges[k][1]]).norm();
        sum[edges[k][0]] += len[k];
        sum[edges[k][1]] += len[k];
        count[edges[k][0]] += 1.0;
        count[edges[k][1]] += 1.0;
    }
    double value = 0.0;
    // coef[v] = dR/dl(v)
    std::vector<double> coef(n, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (count[v] == 0.0) continue;
        const double l = sum[v] / count[v];
        const double ea = l - targets.global;
        const double ek = l - targets.local[v];
        value += inv_n * (lambda1 * ea * ea + lambda2 * ek * ek);
        coef[v] = 2.0 * inv_n * (lambda1 * ea + lambda2 * ek);
    }
    if (grad) {
        grad->assign(n, Vec3::Zero());
        for (std::size_t k = 0; k < edges.size(); ++k) {
            if (len[k] == 0.0) continue;
            const int a = edges[k][0], b = edges[k][1];
            const Vec3 dir = (mesh.vertices[a] - mesh.vertices[b]) / len[k];
            // Edge length enters l(a) and l(b), each with weight 1/deg.
            const double c = coef[a] / count[a] + coef[b] / count[b];
            (*grad)[a] += c * dir;
            (*grad)[b] -= c * dir;
        }
    }
    return value;
}

TemplateFitConfig default_template_config()
{
    TemplateFitConfig cfg;
    cfg.alpha = 1.0;     // alpha = 1
    cfg.lambda1 = 1.5;   // lambda1 = 1.5
    cfg.lambda2 = 4.5;   // lambda2 = 4.5
    cfg.refgen.M = 40000;
    cfg.refgen.sigma = 0.05;
    cfg.optim.algorithm = Algorithm::Adam;
    cfg.optim.learning_rate = 0.05;  // Adam, lr 0.05
    cfg.optim.iterations = 500;
    cfg.metric.ddf.project_mesh_jacobian = true;
    return cfg;
}

TemplateObjective::TemplateObjective(const TriangleMesh& init, const TriangleMesh& tgt, ReferencePointSet refs,
                                     const TemplateFitConfig& cfg)
    : init_(init), refs_(std::move(refs)), cfg_(cfg), system_(init, cfg.alpha)
{
    target_values_ = DdfField(tgt, cfg_.metric.ddf).evaluate_all(refs_.points);
}

Eigen::VectorXd TemplateObjective::initial_latent() const
{
    const Eigen::MatrixXd u = system_.to_latent(to_matrix(init_.vertices));
    return flatten(to_points(u));
}

TriangleMesh TemplateObjective::mesh_from_latent(const Eigen::VectorXd& u) const
{
    return TriangleMesh{to_points(system_.to_vertices(to_matrix(unflatten(u)))), init_.faces};
}

double TemplateObjective::operator()(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const
{
    const TriangleMesh mesh = mesh_from_latent(u);
    auto [val, g] = ddm_grad_against(target_values_, mesh, refs_, cfg_.metric);
    std::vector<Vec3> g_da;
    const ExpectedLengths targets = expected_edge_lengths(mesh);
    const double da = density_adaptation_reg(mesh, targets, cfg_.lambda1, cfg_.lambda2, &g_da);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += g_da[i];
    grad = flatten(to_points(system_.pullback(to_matrix(g))));
    return val.value + da;
}

std::pair<TriangleMesh, OptimTrace> fit_template(const TriangleMesh& init, const TriangleMesh& tgt,
                                                 const TemplateFitConfig& cfg)
{
    validate(init);
    validate(tgt);
    if (init.faces.empty() || tgt.faces.empty()) throw InvalidInput("template fitting needs meshes with faces");
    RefGenConfig rg = cfg.refgen;
    rg.sources = RefSources::FixedOnly;
    TemplateObjective objective(init, tgt, generate_reference_points(tgt, rg), cfg);
    OptimTrace trace = optimize(std::cref(objective), objective.initial_latent(), cfg.optim);
    TriangleMesh fitted = objective.mesh_from_latent(trace.x);
    return {std::move(fitted), std::move(trace)};
}

}  // namespace ddm
