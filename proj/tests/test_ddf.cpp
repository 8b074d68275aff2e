#include <doctest.h>

#include <cmath>

#include "ddm/ddf.hpp"
#include "ddm/shapes.hpp"
#include "oracles.hpp"

using namespace ddm;

namespace {

// q_hat with the neighbour set fixed to `idx`.
Vec3 pinned_blend(const std::vector<Vec3>& pts, const std::vector<int>& idx, const Vec3& q)
{
    Vec3 acc = Vec3::Zero();
    double wsum = 0.0;
    for (int i : idx) {
        const double w = 1.0 / (pts[i] - q).squaredNorm();
        acc += w * pts[i];
        wsum += w;
    }
    return acc / wsum;
}

void check_sample(const DdfSample& s)
{
    CHECK(std::isfinite(s.f));
    CHECK(s.f >= 0.0);
    CHECK(std::abs(s.h.norm() - s.f) <= 1e-9 * std::max(1.0, s.f));
}

}  // namespace

TEST_CASE("reference points: zero noise reproduces the cloud")
{
    Rng rng(1);
    const PointCloud cloud = shapes::random_cloud(37, 1.0, rng);
    RefGenConfig cfg;
    cfg.M = cloud.size();
    cfg.sigma = 0.0;
    const auto refs = generate_reference_points(cloud, cfg);
    CHECK(refs.points == cloud.points);
    CHECK(refs.size() == cfg.M);
}

TEST_CASE("reference points: cycling and remainder")
{
    Rng rng(2);
    const PointCloud cloud = shapes::random_cloud(10, 1.0, rng);
    RefGenConfig cfg;
    cfg.M = 25;
    cfg.sigma = 0.0;
    cfg.seed = 4;
    const auto refs = generate_reference_points(cloud, cfg);
    REQUIRE(refs.size() == 25);
    for (int i = 0; i < 20; ++i) CHECK(refs.points[i] == cloud.points[i % 10]);
    // The remainder draws distinct points from the cloud.
    std::vector<Vec3> tail(refs.points.begin() + 20, refs.points.end());
    for (std::size_t a = 0; a < tail.size(); ++a) {
        CHECK(std::find(cloud.points.begin(), cloud.points.end(), tail[a]) != cloud.points.end());
        for (std::size_t b = a + 1; b < tail.size(); ++b) CHECK(tail[a] != tail[b]);
    }
}

TEST_CASE("reference points: both-surfaces union and determinism")
{
    Rng rng(3);
    const PointCloud a = shapes::random_cloud(20, 1.0, rng), b = shapes::random_cloud(30, 1.0, rng);
    RefGenConfig cfg;
    cfg.sigma = 0.0;
    cfg.sources = RefSources::BothSurfaces;
    const Surface sb = b;
    const auto refs = generate_reference_points(a, cfg, &sb);
    REQUIRE(refs.size() == 50);
    for (int i = 0; i < 20; ++i) CHECK(refs.points[i] == a.points[i]);
    for (int i = 0; i < 30; ++i) CHECK(refs.points[20 + i] == b.points[i]);

    CHECK_THROWS_AS(generate_reference_points(a, cfg), InvalidInput);

    RefGenConfig noisy;
    noisy.M = 300;
    noisy.seed = 99;
    CHECK(generate_reference_points(a, noisy).points == generate_reference_points(a, noisy).points);
    noisy.seed = 100;
    const auto other = generate_reference_points(a, noisy);
    noisy.seed = 99;
    CHECK(other.points != generate_reference_points(a, noisy).points);
}

TEST_CASE("reference points: mesh samples lie on the surface at zero noise")
{
    const TriangleMesh mesh = shapes::box(Vec3(1, 1, 1), 3);
    RefGenConfig cfg;
    cfg.M = 500;
    cfg.sigma = 0.0;
    const auto refs = generate_reference_points(mesh, cfg);
    REQUIRE(refs.size() == 500);
    for (const auto& p : refs.points) CHECK(p.cwiseAbs().maxCoeff() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("reference points: mean offset norm follows the chi-3 expectation")
{
    Rng rng(5);
    const PointCloud cloud = shapes::random_cloud(5000, 1.0, rng);
    RefGenConfig cfg;
    cfg.M = 50000;
    cfg.sigma = 0.05;
    cfg.seed = 8;
    const auto refs = generate_reference_points(cloud, cfg);
    double mean = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) mean += (refs.points[i] - cloud.points[i % cloud.size()]).norm();
    mean /= refs.size();
    // E|N(0, I)| in three dimensions: 2 sqrt(2 / pi).
    const double chi3 = 2.0 * std::sqrt(2.0 / M_PI);
    CHECK(std::abs(mean - chi3 * cfg.sigma) < 0.02 * chi3 * cfg.sigma);
}

TEST_CASE("reference points: adaptive sigma scales with local spacing")
{
    PointCloud cloud{{Vec3(0, 0, 0), Vec3(0.01, 0, 0), Vec3(10, 0, 0), Vec3(11, 0, 0)}};
    RefGenConfig cfg;
    cfg.M = 4000;
    cfg.adaptive_sigma_scale = 3.0;
    const auto refs = generate_reference_points(cloud, cfg);
    double near = 0.0, far = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const double off = (refs.points[i] - cloud.points[i % 4]).norm();
        (i % 4 < 2 ? near : far) += off;
    }
    // Expected ratio of spacings is 0.01 : 1.
    CHECK(near / far == doctest::Approx(0.01).epsilon(0.1));
}

TEST_CASE("reference points: errors")
{
    RefGenConfig cfg;
    CHECK_THROWS_AS(generate_reference_points(PointCloud{}, cfg), InvalidInput);
    cfg.M = 0;
    CHECK_THROWS_AS(generate_reference_points(PointCloud{{Vec3::Zero()}}, cfg), InvalidInput);
    cfg.M = 1;
    cfg.sigma = std::nan("");
    CHECK_THROWS_AS(generate_reference_points(PointCloud{{Vec3::Zero()}}, cfg), InvalidInput);
}

TEST_CASE("ddf_point_cloud worked examples")
{
    {
        const KdTree tree({Vec3(0, 0, 0), Vec3(2, 0, 0)});
        const auto [s, qhat] = ddf_point_cloud(tree, Vec3(1, 0, 0), {2, false});
        CHECK(qhat == Vec3(1, 0, 0));
        CHECK(s.f == 0.0);
        CHECK(s.h == Vec3::Zero());
    }
    {
        const KdTree tree({Vec3(1, 0, 0), Vec3(0, 2, 0)});
        const auto [s, qhat] = ddf_point_cloud(tree, Vec3(0, 0, 0), {2, false});
        CHECK((qhat - Vec3(0.8, 0.4, 0)).norm() < 1e-15);
        CHECK(s.f == doctest::Approx(std::sqrt(0.8)));
        CHECK((s.h - Vec3(0.8, 0.4, 0)).norm() < 1e-15);
    }
    {
        // Coincident query: singular weights collapse onto the point.
        const KdTree tree({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)});
        const auto [s, qhat] = ddf_point_cloud(tree, Vec3(1, 0, 0), {3, false});
        CHECK(qhat == Vec3(1, 0, 0));
        CHECK(s.f == 0.0);
    }
}

TEST_CASE("ddf_point_cloud with K=1 is the nearest-neighbour UDF")
{
    Rng rng(6);
    const PointCloud cloud = shapes::random_cloud(200, 1.0, rng);
    const KdTree tree(cloud.points);
    for (const auto& q : shapes::random_cloud(100, 1.2, rng).points) {
        const auto [s, qhat] = ddf_point_cloud(tree, q, {1, false});
        const auto nn = oracle::brute_knn(cloud.points, q, 1);
        CHECK(qhat == cloud.points[nn[0].second]);
        CHECK(s.f == std::sqrt(nn[0].first));
        check_sample(s);
    }
}

TEST_CASE("ddf_point_cloud blend matches direct evaluation")
{
    Rng rng(7);
    const PointCloud cloud = shapes::random_cloud(150, 1.0, rng);
    const KdTree tree(cloud.points);
    for (const auto& q : shapes::random_cloud(100, 1.2, rng).points) {
        const auto nn = oracle::brute_knn(cloud.points, q, 5);
        std::vector<int> idx;
        for (const auto& [d, i] : nn) idx.push_back(i);
        const auto [s, qhat] = ddf_point_cloud(tree, q, {5, false});
        CHECK((qhat - pinned_blend(cloud.points, idx, q)).norm() < 1e-14);
        check_sample(s);
    }
}

TEST_CASE("ddf_mesh worked examples")
{
    const TriangleMesh tri{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}}};
    const MeshBvh bvh(tri);
    auto [s, foot] = ddf_mesh(bvh, tri, Vec3(0.25, 0.25, 1));
    CHECK(s.f == doctest::Approx(1.0));
    CHECK((s.h - Vec3(0, 0, -1)).norm() < 1e-15);

    std::tie(s, foot) = ddf_mesh(bvh, tri, Vec3(0.2, 0.3, 0));
    CHECK(s.f < 1e-15);
    CHECK(s.h.norm() < 1e-15);

    TriangleMesh faceless{{Vec3::Zero()}, {}};
    CHECK_THROWS_AS(ddf_mesh(bvh, faceless, Vec3::Zero()), InvalidInput);
    CHECK_THROWS_AS(DdfField(faceless, {}), InvalidInput);
}

TEST_CASE("ddf_mesh is never farther than a dense sampling of the mesh")
{
    Rng rng(8);
    const TriangleMesh mesh = shapes::icosphere(1);
    const MeshBvh bvh(mesh);
    const auto dense = sample_points_on_mesh(mesh, 20000, rng);
    const KdTree dense_tree(dense.points);
    for (const auto& q : shapes::random_cloud(100, 1.5, rng).points) {
        const double mesh_f = ddf_mesh(bvh, mesh, q).first.f;
        CHECK(mesh_f <= ddf_point_cloud(dense_tree, q, {1, false}).first.f + 1e-12);
    }
}

TEST_CASE("DdfField on-surface queries give zero distance")
{
    Rng rng(9);
    const TriangleMesh mesh = shapes::icosphere(2);
    const DdfField mesh_field(mesh, {});
    for (const auto& p : sample_points_on_mesh(mesh, 200, rng).points) CHECK(mesh_field.evaluate(p).f < 1e-12);

    const PointCloud cloud = shapes::random_cloud(100, 1.0, rng);
    const DdfField cloud_field(cloud, {5, false});
    for (const auto& p : cloud.points) CHECK(cloud_field.evaluate(p).f == 0.0);

    CHECK_THROWS_AS(DdfField(PointCloud{{Vec3::Zero()}}, {2, false}), InvalidInput);
}

TEST_CASE("ddf_grad_point_cloud structure")
{
    const KdTree tree({Vec3(3, 0, 0), Vec3(0, 5, 0), Vec3(0, 0, 9)});
    const Vec3 q(0.5, 0.5, 0.5);
    const auto [s1, g1] = ddf_grad_point_cloud(tree, q, {1, false});
    REQUIRE(g1.support.size() == 1);
    CHECK(g1.support[0] == 0);
    CHECK(g1.dh[0] == Mat3::Identity());
    CHECK((g1.df[0].transpose() - (Vec3(3, 0, 0) - q).normalized()).norm() < 1e-15);

    const auto [s3, g3] = ddf_grad_point_cloud(tree, q, {3, false});
    std::vector<int> sup = g3.support;
    std::sort(sup.begin(), sup.end());
    CHECK(sup == std::vector<int>{0, 1, 2});
}

TEST_CASE("ddf_grad_point_cloud matches finite differences")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(100 + seed);
        const PointCloud cloud = shapes::random_cloud(40, 1.0, rng);
        const Vec3 q = shapes::random_cloud(1, 1.1, rng).points[0];
        const KdTree tree(cloud.points);
        const auto [s, g] = ddf_grad_point_cloud(tree, q, {5, false});
        // Neighbour set pinned to the one used by the analytic gradient.
        for (std::size_t k = 0; k < g.support.size(); ++k) {
            const int j = g.support[k];
            auto eval = [&](const Eigen::VectorXd& x) {
                std::vector<Vec3> pts = cloud.points;
                pts[j] = x.head<3>();
                return pinned_blend(pts, g.support, q);
            };
            Eigen::Matrix3d fd_dh;
            Eigen::RowVector3d fd_df;
            const double h = 1e-6;
            for (int c = 0; c < 3; ++c) {
                Eigen::VectorXd xp = cloud.points[j], xm = cloud.points[j];
                xp[c] += h;
                xm[c] -= h;
                const Vec3 qp = eval(xp), qm = eval(xm);
                fd_dh.col(c) = (qp - qm) / (2 * h);
                fd_df[c] = ((qp - q).norm() - (qm - q).norm()) / (2 * h);
            }
            CHECK((fd_dh - g.dh[k]).norm() / std::max(1e-12, g.dh[k].norm()) < 1e-4);
            CHECK((fd_df - g.df[k]).norm() / std::max(1e-12, g.df[k].norm()) < 1e-4);
        }
    }
}

TEST_CASE("ddf_grad_point_cloud symmetric two-point case")
{
    const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(2, 0, 0)};
    const Vec3 q(1, 0.3, 0);
    const KdTree tree(pts);
    const auto [s, g] = ddf_grad_point_cloud(tree, q, {2, false});
    for (std::size_t k = 0; k < 2; ++k) {
        const int j = g.support[k];
        for (int c = 0; c < 3; ++c) {
            auto moved = pts;
            moved[j][c] += 1e-6;
            const Vec3 qp = pinned_blend(moved, {0, 1}, q);
            moved[j][c] -= 2e-6;
            const Vec3 qm = pinned_blend(moved, {0, 1}, q);
            const Vec3 fd = (qp - qm) / 2e-6;
            CHECK((fd - g.dh[k].col(c)).norm() <= 1e-6 * std::max(1.0, g.dh[k].col(c).norm()));
        }
    }
}

TEST_CASE("ddf_grad_mesh structure and finite differences on f")
{
    SUBCASE("foot at a vertex")
    {
        const TriangleMesh tri{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}}};
        const MeshBvh bvh(tri);
        const auto [s, g] = ddf_grad_mesh(bvh, tri, Vec3(-1, -1, 0.5));
        REQUIRE(g.support.size() == 3);
        for (int k = 0; k < 3; ++k) CHECK(g.dh[k] == (g.support[k] == 0 ? Mat3(Mat3::Identity()) : Mat3(Mat3::Zero())));
    }
    SUBCASE("interior feet")
    {
        int checked = 0;
        for (std::uint64_t seed = 0; checked < 20; ++seed) {
            Rng rng(200 + seed);
            const TriangleMesh mesh = oracle::bumpy_grid(5, 1.0, 0.1, rng);
            const Vec3 q = Vec3(0.5, 0.5, 0.0) + shapes::random_cloud(1, 0.4, rng).points[0];
            const MeshBvh bvh(mesh);
            const auto [s, g] = ddf_grad_mesh(bvh, mesh, q);
            const auto foot = bvh.closest_point(mesh, q);
            if (*std::min_element(foot.weights.begin(), foot.weights.end()) < 1e-3) continue;
            ++checked;
            const Face face = mesh.faces[foot.face_index];
            for (int k = 0; k < 3; ++k) {
                for (int c = 0; c < 3; ++c) {
                    // Face pinned: distance to the (perturbed) closest face itself.
                    auto f_of = [&](double delta) {
                        std::array<Vec3, 3> v{mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]};
                        v[k][c] += delta;
                        return (closest_point_on_triangle(q, v[0], v[1], v[2]).point - q).norm();
                    };
                    const double fd = (f_of(1e-6) - f_of(-1e-6)) / 2e-6;
                    CHECK(std::abs(fd - g.df[k][c]) <= 1e-5 * std::max(1e-3, g.df[k].norm()));
                }
            }
        }
    }
}

TEST_CASE("projected mesh Jacobian follows rigid translation of the closest feature")
{
    // Moving all three vertices of the foot face by delta moves the foot by
    // n n^T delta inside the face, (I - e e^T) delta on an edge, delta at a vertex.
    int counts[4] = {0, 0, 0, 0};
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        Rng rng(900 + seed);
        const Vec3 a = shapes::random_cloud(1, 1.0, rng).points[0];
        const Vec3 b = shapes::random_cloud(1, 1.0, rng).points[0];
        const Vec3 c = shapes::random_cloud(1, 1.0, rng).points[0];
        const Vec3 q = shapes::random_cloud(1, 1.5, rng).points[0];
        const TriangleMesh tri{{a, b, c}, {{0, 1, 2}}};
        const MeshBvh bvh(tri);
        const auto [s, g] = ddf_grad_mesh(bvh, tri, q, true);
        const auto [s0, g0] = ddf_grad_mesh(bvh, tri, q, false);
        const auto foot = bvh.closest_point(tri, q);
        const int nonzero = (foot.weights[0] > 1e-6) + (foot.weights[1] > 1e-6) + (foot.weights[2] > 1e-6);
        Mat3 sum = Mat3::Zero();
        for (int k = 0; k < 3; ++k) {
            sum += g.dh[k];
            CHECK((g.df[k] - g0.df[k]).norm() < 1e-12);
        }
        for (int col = 0; col < 3; ++col) {
            const Vec3 delta = 1e-6 * Vec3::Unit(col);
            const Vec3 hp = closest_point_on_triangle(q, a + delta, b + delta, c + delta).point - q;
            const Vec3 hm = closest_point_on_triangle(q, a - delta, b - delta, c - delta).point - q;
            CHECK(((hp - hm) / 2e-6 - sum.col(col)).norm() < 1e-6);
        }
        ++counts[nonzero];
    }
    CHECK(counts[1] >= 20);
    CHECK(counts[2] >= 20);
    CHECK(counts[3] >= 20);
}
