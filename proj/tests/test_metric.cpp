#include <doctest.h>

#include <cmath>

#include "ddm/metric.hpp"
#include "ddm/shapes.hpp"
#include "oracles.hpp"

using namespace ddm;

namespace {

PointCloud jittered(const PointCloud& c, double amount, Rng& rng)
{
    std::normal_distribution<double> g(0.0, amount);
    PointCloud out = c;
    for (auto& p : out.points) {
        const double x = g(rng), y = g(rng), z = g(rng);
        p += Vec3(x, y, z);
    }
    return out;
}

ReferencePointSet union_refs(const Surface& a, const Surface& b, std::size_t m = 1)
{
    RefGenConfig cfg;
    cfg.M = m;
    cfg.sigma = 0.0;
    cfg.sources = RefSources::BothSurfaces;
    return generate_reference_points(a, cfg, &b);
}

MetricConfig theorem_config(int K)
{
    MetricConfig cfg;
    cfg.beta = 0.0;
    cfg.ddf = {K, true};
    cfg.reduction = Reduction::Sum;
    return cfg;
}

}  // namespace

TEST_CASE("ddf_l1")
{
    const DdfSample a{1.0, Vec3(1, 0, 0)}, b{2.0, Vec3(0, -1, 0.5)};
    CHECK(ddf_l1(a, b, false) == doctest::Approx(1.0 + 1.0 + 1.0 + 0.5));
    CHECK(ddf_l1(a, b, true) == 1.0);
    CHECK(ddf_l1(a, a, false) == 0.0);
}

TEST_CASE("ddm of a surface with itself is zero")
{
    Rng rng(1);
    const PointCloud cloud = shapes::random_cloud(80, 1.0, rng);
    RefGenConfig rc;
    rc.M = 400;
    const auto refs = generate_reference_points(cloud, rc);
    for (double beta : {0.0, 1.0, 20.0}) {
        MetricConfig cfg;
        cfg.beta = beta;
        CHECK(ddm::ddm(cloud, cloud, refs, cfg).value == 0.0);
        const auto [v, g] = ddm_grad(cloud, cloud, refs, cfg);
        for (const auto& x : g) CHECK(x == Vec3::Zero());
    }
    const TriangleMesh mesh = shapes::icosphere(1);
    CHECK(ddm::ddm(mesh, mesh, generate_reference_points(mesh, rc), {}).value == 0.0);
}

TEST_CASE("ddm properties on random pairs")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const PointCloud a = shapes::random_cloud(60, 1.0, rng);
        const PointCloud b = jittered(a, 0.05, rng);
        RefGenConfig rc;
        rc.M = 300;
        rc.seed = seed;
        const auto refs = generate_reference_points(a, rc);
        MetricConfig cfg;
        const auto ab = ddm::ddm(a, b, refs, cfg, true);
        const auto ba = ddm::ddm(b, a, refs, cfg, true);
        CHECK(ab.value == ba.value);
        CHECK(ab.value >= 0.0);
        double sum = 0.0;
        for (const auto& t : ab.per_point) {
            CHECK(t.s > 0.0);
            CHECK(t.s <= 1.0);
            CHECK((t.s == 1.0) == (t.d == 0.0));
            sum += t.s * t.d;
        }
        CHECK(ab.value == doctest::Approx(sum / ab.per_point.size()).epsilon(1e-12));

        cfg.reduction = Reduction::Sum;
        CHECK(ddm::ddm(a, b, refs, cfg).value == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("chamfer")
{
    CHECK(chamfer(PointCloud{{Vec3(0, 0, 0)}}, PointCloud{{Vec3(1, 0, 0)}}) == 2.0);
    Rng rng(2);
    const PointCloud a = shapes::random_cloud(90, 1.0, rng), b = shapes::random_cloud(70, 1.0, rng);
    CHECK(chamfer(a, a) == 0.0);
    CHECK(chamfer(a, b) == doctest::Approx(oracle::brute_chamfer(a.points, b.points)).epsilon(1e-12));
    CHECK_THROWS_AS(chamfer(a, PointCloud{}), InvalidInput);
}

TEST_CASE("p2f")
{
    const TriangleMesh plane = shapes::grid(5, 1.0);
    PointCloud above;
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double x = u(rng), y = u(rng);
        above.points.emplace_back(x, y, 0.1);
    }
    CHECK(p2f(above, plane) == doctest::Approx(0.1 * 50).epsilon(1e-12));
    CHECK(p2f(sample_points_on_mesh(plane, 100, rng), plane) < 1e-12);

    const TriangleMesh bumpy = oracle::bumpy_grid(6, 1.0, 0.1, rng);
    const PointCloud samples = shapes::random_cloud(80, 1.0, rng);
    CHECK(p2f(samples, bumpy) == doctest::Approx(oracle::brute_p2f(samples.points, bumpy)).epsilon(1e-12));
}

TEST_CASE("ddm reduces to chamfer under the distance-only nearest-point setting")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::uniform_int_distribution<int> n(32, 128);
        const PointCloud a = shapes::random_cloud(n(rng), 1.0, rng), b = shapes::random_cloud(n(rng), 1.0, rng);
        const double cd = oracle::brute_chamfer(a.points, b.points);
        const double v = ddm::ddm(a, b, union_refs(a, b), theorem_config(1)).value;
        CHECK(std::abs(v - cd) <= 1e-9 * cd);
    }
}

TEST_CASE("ddm reduces to point-to-face distance for meshes")
{
    SUBCASE("parallel planes")
    {
        const TriangleMesh p0 = shapes::grid(4, 1.0);
        TriangleMesh p1 = p0;
        for (auto& v : p1.vertices) v.z() += 0.1;
        RefGenConfig rc;
        rc.M = 200;
        rc.sigma = 0.0;
        const auto refs = generate_reference_points(p0, rc);
        const double v = ddm::ddm(p0, p1, refs, theorem_config(5)).value;
        CHECK(v == doctest::Approx(0.1 * 200).epsilon(1e-12));
        CHECK(v == doctest::Approx(p2f(PointCloud{refs.points}, p1)).epsilon(1e-12));
    }
    SUBCASE("random mesh pairs")
    {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(seed);
            const TriangleMesh a = oracle::bumpy_grid(6, 1.0, 0.1, rng);
            const TriangleMesh b = shapes::scaled(shapes::icosphere(1), Vec3(0.6, 0.5, 0.4));
            const std::size_t m = 150;
            const auto refs = union_refs(a, b, m);
            REQUIRE(refs.size() == 2 * m);
            const std::vector<Vec3> sa(refs.points.begin(), refs.points.begin() + m);
            const std::vector<Vec3> sb(refs.points.begin() + m, refs.points.end());
            const double want = oracle::brute_p2f(sa, b) + oracle::brute_p2f(sb, a);
            const double v = ddm::ddm(a, b, refs, theorem_config(5)).value;
            CHECK(std::abs(v - want) <= 1e-9 * want);
            CHECK(p2f_symmetric(PointCloud{sa}, a, PointCloud{sb}, b) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("weighted triangle inequality holds when every d is below 1/beta")
{
    int tested = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const PointCloud base = shapes::random_cloud(50, 1.0, rng);
        const PointCloud s1 = jittered(base, 0.0005, rng), s2 = jittered(base, 0.0005, rng),
                         s3 = jittered(base, 0.0005, rng);
        RefGenConfig rc;
        rc.M = 200;
        rc.seed = seed;
        const auto refs = generate_reference_points(s1, rc);
        MetricConfig cfg;
        const auto d12 = ddm::ddm(s1, s2, refs, cfg, true), d23 = ddm::ddm(s2, s3, refs, cfg, true),
                   d13 = ddm::ddm(s1, s3, refs, cfg, true);
        bool admissible = true;
        for (const auto* v : {&d12, &d23, &d13})
            for (const auto& t : v->per_point) admissible = admissible && t.d < 1.0 / cfg.beta;
        if (!admissible) continue;
        ++tested;
        CHECK(d12.value + d23.value >= d13.value - 1e-12);
    }
    CHECK(tested >= 50);
}

TEST_CASE("ddm_grad matches finite differences on point clouds")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(300 + seed);
        const PointCloud fixed = shapes::random_cloud(40, 1.0, rng);
        const PointCloud moving = jittered(fixed, 0.03, rng);
        RefGenConfig rc;
        rc.M = 120;
        rc.seed = seed;
        const auto refs = generate_reference_points(fixed, rc);
        MetricConfig cfg;
        cfg.beta = seed % 2 == 0 ? 20.0 : 1.0;
        const auto [v, g] = ddm_grad(fixed, moving, refs, cfg);
        const DdfField ff(fixed, cfg.ddf);
        const auto fixed_values = ff.evaluate_all(refs.points);
        const auto sets = oracle::knn_sets(moving.points, refs.points, cfg.ddf.K);
        CHECK(oracle::pinned_ddm(fixed_values, moving.points, sets, refs.points, cfg.beta, false, true) ==
              doctest::Approx(v.value).epsilon(1e-12));
        const auto signs = oracle::l1_signs(fixed_values, moving.points, sets, refs.points);
        const auto fd = oracle::fd_gradient(
            [&](const Eigen::VectorXd& x) {
                return oracle::pinned_ddm(fixed_values, oracle::unflatten(x), sets, refs.points, cfg.beta, false, true,
                                          &signs);
            },
            oracle::flatten(moving.points));
        CHECK(oracle::rel_error(oracle::flatten(g), fd) < 1e-4);
    }
}

TEST_CASE("detached confidence weights the plain L1 gradient by s")
{
    Rng rng(11);
    const PointCloud fixed = shapes::random_cloud(30, 1.0, rng), moving = jittered(fixed, 0.05, rng);
    RefGenConfig rc;
    rc.M = 60;
    const auto refs = generate_reference_points(fixed, rc);
    MetricConfig full;
    MetricConfig detached = full;
    detached.detach_confidence = true;
    const auto [vf, gf] = ddm_grad(fixed, moving, refs, full);
    const auto [vd, gd] = ddm_grad(fixed, moving, refs, detached);
    CHECK(vf.value == vd.value);
    // One reference point at a time: the two gradients differ by the factor (1 - beta d).
    for (std::size_t i = 0; i < 5; ++i) {
        ReferencePointSet one;
        one.points = {refs.points[i]};
        const auto [a, ga] = ddm_grad(fixed, moving, one, full);
        const auto [b, gb] = ddm_grad(fixed, moving, one, detached);
        const double d = a.value == 0.0 ? 0.0 : ddm::ddm(fixed, moving, one, full, true).per_point[0].d;
        for (std::size_t j = 0; j < ga.size(); ++j) CHECK((ga[j] - (1.0 - full.beta * d) * gb[j]).norm() < 1e-12);
    }
}

TEST_CASE("distance-only ddm_grad on meshes matches finite differences")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(400 + seed);
        const TriangleMesh fixed = oracle::bumpy_grid(5, 1.0, 0.05, rng);
        TriangleMesh moving = fixed;
        for (auto& v : moving.vertices) v.z() += 0.02;
        RefGenConfig rc;
        rc.M = 100;
        rc.seed = seed;
        rc.sigma = 0.05;
        const auto refs = generate_reference_points(fixed, rc);
        MetricConfig cfg;
        cfg.beta = 1.0;
        cfg.ddf.distance_only = true;
        const auto [v, g] = ddm_grad(fixed, moving, refs, cfg);
        const auto fd = oracle::fd_gradient(
            [&](const Eigen::VectorXd& x) {
                return ddm::ddm(fixed, with_positions(moving, oracle::unflatten(x)), refs, cfg).value;
            },
            oracle::flatten(moving.vertices));
        CHECK(oracle::rel_error(oracle::flatten(g), fd) < 1e-4);
    }
}

TEST_CASE("ddm_grad confidence factor on a single reference point")
{
    const PointCloud fixed{{Vec3(0, 0, 0)}};
    const PointCloud moving{{Vec3(0.03, 0.01, 0.0)}};
    ReferencePointSet refs;
    refs.points = {Vec3(0, 0, 1)};
    MetricConfig c0;
    c0.beta = 0.0;
    c0.ddf.K = 1;
    MetricConfig cb = c0;
    cb.beta = 20.0;
    const auto [v0, g0] = ddm_grad(fixed, moving, refs, c0);
    const auto [vb, gb] = ddm_grad(fixed, moving, refs, cb);
    const double d = v0.value;
    CHECK(vb.value == doctest::Approx(d * std::exp(-20.0 * d)));
    CHECK((gb[0] - std::exp(-20.0 * d) * (1.0 - 20.0 * d) * g0[0]).norm() < 1e-14);
}

TEST_CASE("ddm_against matches ddm")
{
    Rng rng(5);
    const PointCloud a = shapes::random_cloud(60, 1.0, rng), b = jittered(a, 0.02, rng);
    RefGenConfig rc;
    rc.M = 200;
    const auto refs = generate_reference_points(a, rc);
    const MetricConfig cfg;
    const DdfField fa(a, cfg.ddf);
    CHECK(ddm_against(fa.evaluate_all(refs.points), b, refs, cfg).value == ddm::ddm(a, b, refs, cfg).value);
    CHECK_THROWS_AS(ddm_against({}, b, refs, cfg), InvalidInput);
    CHECK_THROWS_AS(ddm::ddm(a, b, ReferencePointSet{}, cfg), InvalidInput);
}
