#pragma once

#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "ddm/ddf.hpp"
#include "ddm/metric.hpp"
#include "ddm/optim.hpp"

namespace ddm {

struct NodeLink {
    int node = -1;
    double weight = 0.0;
};

/// Embedded deformation graph: nodes sit on source vertices, each carries a
/// rigid transform, and every vertex blends its K geodesically nearest nodes.
struct DeformationGraph {
    std::vector<int> node_vertex_indices;
    std::vector<Vec3> node_positions;
    std::vector<Vec3> omega;        ///< per-node axis-angle rotation
    std::vector<Vec3> translation;  ///< per-node translation
    double epsilon = 0.0;
    std::vector<std::vector<NodeLink>> vertex_links;

    std::size_t num_nodes() const { return node_vertex_indices.size(); }

    /// Flattened [omega_0, t_0, omega_1, t_1, ...].
    Eigen::VectorXd params() const;
    void set_params(const Eigen::VectorXd& x);
};

/// Geodesic falloff max(0, (1 - d^2 / eps^2)^3).
double node_weight(double geodesic, double epsilon);

/// Greedy epsilon-net over edge-graph geodesic distance: visit vertices in a
/// seeded random order, make each surviving vertex a node and remove every
/// vertex closer than epsilon to it. Each vertex then links to its K nearest
/// nodes (within epsilon). All node transforms start at identity.
DeformationGraph build_deformation_graph(const TriangleMesh& mesh, double epsilon, int K, Rng& rng);

/// Blended node transforms applied to every source vertex.
std::vector<Vec3> deform_vertices(const TriangleMesh& mesh, const DeformationGraph& graph);

/// Pulls a gradient w.r.t. deformed vertices back onto the graph parameters
/// (layout of DeformationGraph::params()).
Eigen::VectorXd deform_vertices_pullback(const TriangleMesh& mesh, const DeformationGraph& graph,
                                         const std::vector<Vec3>& grad_vertices);

/// Mean over faces of the pairwise L2 differences of vertex offsets, divided
/// by 3; `grad` (optional) receives the derivative w.r.t. the deformed vertices.
double smooth_reg_mesh(const TriangleMesh& mesh, const std::vector<Vec3>& deformed,
                       std::vector<Vec3>* grad = nullptr);

struct NonrigidConfig {
    MetricConfig metric{1.0, DdfConfig{5, false}, Reduction::Mean};
    RefGenConfig refgen{};
    OptimConfig optim{};
    double lambda = 500.0;
    int node_neighbors = 5;
    double epsilon_factor = 5.0;  ///< epsilon = factor x mean source edge length
    std::uint64_t graph_seed = 0;
};

/// Non-rigid registration defaults: eps = 5x mean edge, M = 4e4, sigma = 0.1,
/// K = 5 node neighbours, lambda = 500, SGD lr 2.0 for 1000 iterations.
NonrigidConfig default_nonrigid_config();

struct NonrigidResult {
    DeformationGraph graph;
    TriangleMesh deformed;
    OptimTrace trace;
};

class NonrigidObjective {
public:
    NonrigidObjective(const TriangleMesh& src, const TriangleMesh& tgt, DeformationGraph graph,
                      ReferencePointSet refs, MetricConfig metric, double lambda);

    double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
    double value(const Eigen::VectorXd& x) const;
    const DeformationGraph& graph() const { return graph_; }

private:
    TriangleMesh src_;
    mutable DeformationGraph graph_;
    ReferencePointSet refs_;
    MetricConfig metric_;
    double lambda_;
    std::vector<DdfSample> target_values_;
};

NonrigidResult register_nonrigid(const TriangleMesh& src, const TriangleMesh& tgt, const NonrigidConfig& cfg);

/// Diffusion reparameterization u = (I + alpha L) V with L the combinatorial
/// graph Laplacian of the mesh. The factorization is computed once.
class DiffusionSystem {
public:
    DiffusionSystem(const TriangleMesh& mesh, double alpha);
    ~DiffusionSystem();
    DiffusionSystem(DiffusionSystem&&) noexcept;
    DiffusionSystem& operator=(DiffusionSystem&&) noexcept;

    double alpha() const { return alpha_; }
    const Eigen::SparseMatrix<double>& laplacian() const { return laplacian_; }

    Eigen::MatrixXd to_latent(const Eigen::MatrixXd& V) const;
    Eigen::MatrixXd to_vertices(const Eigen::MatrixXd& u) const;
    /// dLoss/du from dLoss/dV' (the system matrix is symmetric).
    Eigen::MatrixXd pullback(const Eigen::MatrixXd& grad_vertices) const;

private:
    struct Solver;
    double alpha_;
    Eigen::SparseMatrix<double> laplacian_;
    Eigen::SparseMatrix<double> system_;
    std::unique_ptr<Solver> solver_;
};

Eigen::MatrixXd to_matrix(const std::vector<Vec3>& pts);
std::vector<Vec3> to_points(const Eigen::MatrixXd& M);

/// Mean incident-edge length per vertex.
std::vector<double> vertex_mean_edge_length(const TriangleMesh& mesh);

/// Expected edge lengths for the density-adaptation term: the global mean
/// edge length, and per vertex the mean length of edges touching its closed
/// one-ring (which spans its two-ring).
struct ExpectedLengths {
    double global = 0.0;
    std::vector<double> local;
};
ExpectedLengths expected_edge_lengths(const TriangleMesh& mesh);

/// lambda1 * mean_v (l(v) - global)^2 + lambda2 * mean_v (l(v) - local_v)^2,
/// targets held constant. `grad` (optional) receives d/dV'.
double density_adaptation_reg(const TriangleMesh& mesh, const ExpectedLengths& targets, double lambda1,
                              double lambda2, std::vector<Vec3>* grad = nullptr);

struct TemplateFitConfig {
    MetricConfig metric{1.0, DdfConfig{5, false}, Reduction::Mean};
    RefGenConfig refgen{};
    OptimConfig optim{};
    double alpha = 1.0;
    double lambda1 = 1.5;
    double lambda2 = 4.5;
};

/// Template fitting defaults: alpha = 1, lambda1 = 1.5, lambda2 = 4.5, Adam lr 0.05.
TemplateFitConfig default_template_config();

class TemplateObjective {
public:
    TemplateObjective(const TriangleMesh& init, const TriangleMesh& tgt, ReferencePointSet refs,
                      const TemplateFitConfig& cfg);

    double operator()(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const;
    const DiffusionSystem& system() const { return system_; }
    Eigen::VectorXd initial_latent() const;
    TriangleMesh mesh_from_latent(const Eigen::VectorXd& u) const;

private:
    TriangleMesh init_;
    ReferencePointSet refs_;
    TemplateFitConfig cfg_;
    DiffusionSystem system_;
    std::vector<DdfSample> target_values_;
};

std::pair<TriangleMesh, OptimTrace> fit_template(const TriangleMesh& init, const TriangleMesh& tgt,
                                                 const TemplateFitConfig& cfg);

}  // namespace ddm
