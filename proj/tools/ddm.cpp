// Command-line front end: surface comparison, registration, template fitting,
// scene flow, and evaluation of their outputs.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ddm/config.hpp"
#include "ddm/eval.hpp"
#include "ddm/io.hpp"
#include "ddm/parallel.hpp"
#include "ddm/records.hpp"

using namespace ddm;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInternal = 1;

std::string number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string one_line(std::string s)
{
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

struct Globals {
    std::uint64_t seed = 0;
    int threads = 0;
};

TaskConfig task_config(const std::string& path, TaskKind kind, std::uint64_t seed)
{
    TaskConfig cfg = path.empty() ? default_task_config(kind) : load_task_config(path, kind);
    apply_seed(cfg, seed);
    return cfg;
}

TriangleMesh require_mesh(const Surface& s, const std::string& path)
{
    if (!is_mesh(s)) throw InvalidInput("'" + path + "' holds a point cloud; this command needs a triangle mesh");
    return std::get<TriangleMesh>(s);
}

Provenance provenance(const std::string& command, const TaskConfig& cfg, std::uint64_t seed, int iterations)
{
    return {command, seed, config_hash(cfg), iterations};
}

std::vector<std::string> provenance_comments(const Provenance& p)
{
    return {"ddm " + p.command, "seed " + std::to_string(p.seed), "config_hash " + p.config_hash,
            "iterations " + std::to_string(p.iterations)};
}

// ---------------------------------------------------------------- commands

struct EvalArgs {
    std::string a, b, config;
    bool verbose = false;
};

void run_eval(const EvalArgs& args, const Globals& g)
{
    const Surface a = load_surface(args.a);
    const Surface b = load_surface(args.b);
    TaskConfig cfg = task_config(args.config, TaskKind::Eval, g.seed);
    RefGenConfig rg = cfg.eval.refgen;
    if (rg.M == 0) rg.M = 10 * element_count(a);
    const ReferencePointSet refs = generate_reference_points(a, rg, &b);
    const MetricValue v = ddm::ddm(a, b, refs, cfg.eval.metric, args.verbose);
    if (!std::isfinite(v.value)) throw NumericalError("metric value is not finite");
    std::cout << number(v.value) << "\n";
    if (!args.verbose) return;
    double d_sum = 0.0, d_max = 0.0, s_sum = 0.0, s_min = 1.0;
    for (const auto& t : v.per_point) {
        d_sum += t.d;
        d_max = std::max(d_max, t.d);
        s_sum += t.s;
        s_min = std::min(s_min, t.s);
    }
    const double n = static_cast<double>(v.per_point.size());
    std::cout << "reference_points = " << v.per_point.size() << "\n"
              << "d_mean = " << number(d_sum / n) << "\n"
              << "d_max = " << number(d_max) << "\n"
              << "s_mean = " << number(s_sum / n) << "\n"
              << "s_min = " << number(s_min) << "\n";
}

struct PairArgs {
    std::string src, tgt, config, out;
};

void run_rigid(const PairArgs& args, const Globals& g)
{
    const PointCloud src = as_point_cloud(load_surface(args.src));
    const PointCloud tgt = as_point_cloud(load_surface(args.tgt));
    const TaskConfig cfg = task_config(args.config, TaskKind::Rigid, g.seed);
    const auto [T, trace] = register_rigid(src, tgt, cfg.rigid);
    save_record(TransformRecord{T, provenance("register-rigid", cfg, g.seed, cfg.rigid.optim.iterations)}, args.out);
}

void run_nonrigid(const PairArgs& args, const Globals& g)
{
    const TriangleMesh src = require_mesh(load_surface(args.src), args.src);
    const TriangleMesh tgt = require_mesh(load_surface(args.tgt), args.tgt);
    const TaskConfig cfg = task_config(args.config, TaskKind::Nonrigid, g.seed);
    const NonrigidResult res = register_nonrigid(src, tgt, cfg.nonrigid);
    const Provenance p = provenance("register-nonrigid", cfg, g.seed, cfg.nonrigid.optim.iterations);
    save_surface(res.deformed, args.out, SaveOptions{PlyEncoding::BinaryLittleEndian, provenance_comments(p)});
}

void run_template(const PairArgs& args, const Globals& g)
{
    const TriangleMesh init = require_mesh(load_surface(args.src), args.src);
    const TriangleMesh tgt = require_mesh(load_surface(args.tgt), args.tgt);
    const TaskConfig cfg = task_config(args.config, TaskKind::Template, g.seed);
    const auto [fitted, trace] = fit_template(init, tgt, cfg.templ);
    const Provenance p = provenance("fit-template", cfg, g.seed, cfg.templ.optim.iterations);
    save_surface(fitted, args.out, SaveOptions{PlyEncoding::BinaryLittleEndian, provenance_comments(p)});
}

void run_flow(const PairArgs& args, const Globals& g)
{
    const PointCloud src = as_point_cloud(load_surface(args.src));
    const PointCloud tgt = as_point_cloud(load_surface(args.tgt));
    const TaskConfig cfg = task_config(args.config, TaskKind::Flow, g.seed);
    const auto [flow, trace] = estimate_scene_flow(src, tgt, cfg.flow);
    save_record(FlowRecord{args.src, flow.delta, provenance("scene-flow", cfg, g.seed, cfg.flow.optim.iterations)},
                args.out);
}

struct MetricsArgs {
    std::string kind, pred, gt;
    bool json = false;
    double re_threshold = 15.0;
    double te_threshold = 0.3;
    std::size_t samples = 50000;
    std::vector<double> thresholds{0.005, 0.01};
};

std::vector<Vec3> surface_samples(const Surface& s, std::size_t n, Rng& rng)
{
    if (const auto* mesh = std::get_if<TriangleMesh>(&s)) return sample_mesh_surface(*mesh, n, rng).points;
    return std::get<PointCloud>(s).points;
}

void run_metrics(const MetricsArgs& args, const Globals& g)
{
    EvalReport report;
    report.kind = args.kind;
    if (args.kind == "rigid") {
        const auto pred = load_transform_record(args.pred);
        const auto gt = load_transform_record(args.gt);
        const double re = rotation_error(pred.transform.R, gt.transform.R);
        const double te = translation_error(pred.transform.t, gt.transform.t);
        report.scalars["re_deg"] = re;
        report.scalars["te"] = te;
        report.scalars["success"] = success_rate({{re, te}}, args.re_threshold, args.te_threshold).success_rate;
        report.notes.push_back("success: RE < " + number(args.re_threshold) + " deg and TE < " +
                               number(args.te_threshold));
    } else if (args.kind == "mesh") {
        const Surface pred = load_surface(args.pred);
        const Surface gt = load_surface(args.gt);
        report.scalars["rmse"] = vertex_rmse(element_positions(pred), element_positions(gt));
        report.scalars["v2v"] = v2v(element_positions(pred), element_positions(gt));
    } else if (args.kind == "flow") {
        const auto pred = load_flow_record(args.pred);
        const auto gt = load_flow_record(args.gt);
        const FlowMetrics m = flow_metrics(pred.flow, gt.flow);
        report.scalars["epe"] = m.epe;
        report.scalars["acc_0.05"] = m.acc_strict;
        report.scalars["acc_0.1"] = m.acc_relax;
        report.scalars["outliers"] = m.outliers;
        report.notes.push_back("acc_0.05: EPE < 0.05 or relative error < 5%");
        report.notes.push_back("acc_0.1: EPE < 0.1 or relative error < 10%");
        report.notes.push_back("outliers: EPE > 0.3 or relative error > 10%");
    } else {
        const Surface pred = load_surface(args.pred);
        const Surface gt = load_surface(args.gt);
        Rng rng(g.seed);
        const auto ps = surface_samples(pred, args.samples, rng);
        const auto gs = surface_samples(gt, args.samples, rng);
        for (double t : args.thresholds) {
            const FScore f = fscore(ps, gs, t);
            report.scalars["fscore@" + number(t)] = f.f;
            report.scalars["precision@" + number(t)] = f.precision;
            report.scalars["recall@" + number(t)] = f.recall;
        }
        report.scalars["chamfer_mean"] =
            chamfer(PointCloud{ps}, PointCloud{gs}) / static_cast<double>(ps.size() + gs.size());
        if (is_mesh(pred) && is_mesh(gt))
            report.scalars["normal_consistency"] =
                normal_consistency(std::get<TriangleMesh>(pred), std::get<TriangleMesh>(gt), args.samples, rng);
        report.notes.push_back("mesh surfaces sampled with " + std::to_string(args.samples) + " points; clouds used as given");
    }
    std::cout << (args.json ? to_json(report) + "\n" : to_text(report));
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Compare, register and fit 3D surfaces with the directional distance metric.", "ddm"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random stage")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0: DDM_THREADS, else 1)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    std::function<void()> action;

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Print the metric between two surfaces");
    eval->add_option("--a", ev.a, "First surface; reference points are drawn near it")->required()->check(CLI::ExistingFile);
    eval->add_option("--b", ev.b, "Second surface")->required()->check(CLI::ExistingFile);
    eval->add_option("--config", ev.config, "Config file")->check(CLI::ExistingFile);
    eval->add_flag("--verbose", ev.verbose, "Also print per-point statistics");
    eval->callback([&] { action = [&] { run_eval(ev, g); }; });

    PairArgs rigid, nonrigid, templ, flow;
    const auto add_pair = [&](const char* name, const char* help, PairArgs& a, const char* src_flag, const char* out_help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option(src_flag, a.src, "Source surface")->required()->check(CLI::ExistingFile);
        sub->add_option("--tgt", a.tgt, "Target surface")->required()->check(CLI::ExistingFile);
        sub->add_option("--config", a.config, "Config file")->check(CLI::ExistingFile);
        sub->add_option("--out", a.out, out_help)->required();
        return sub;
    };
    add_pair("register-rigid", "Estimate the rigid transform taking the source onto the target", rigid, "--src",
             "Output transform (.json)")
        ->callback([&] { action = [&] { run_rigid(rigid, g); }; });
    add_pair("register-nonrigid", "Deform a source mesh onto a target mesh", nonrigid, "--src",
             "Output mesh (.obj, .ply)")
        ->callback([&] { action = [&] { run_nonrigid(nonrigid, g); }; });
    add_pair("fit-template", "Fit a template mesh to a target mesh", templ, "--init", "Output mesh (.obj, .ply)")
        ->callback([&] { action = [&] { run_template(templ, g); }; });
    add_pair("scene-flow", "Estimate per-point flow from the source to the target cloud", flow, "--src",
             "Output flow (.json)")
        ->callback([&] { action = [&] { run_flow(flow, g); }; });

    MetricsArgs ma;
    auto* metrics = app.add_subcommand("metrics", "Score a result against ground truth");
    metrics->add_option("--kind", ma.kind, "rigid: transform records; mesh: same-size surfaces; flow: flow records; "
                                           "surface: any two surfaces")
        ->required()
        ->check(CLI::IsMember({"rigid", "mesh", "flow", "surface"}));
    metrics->add_option("--pred", ma.pred, "Prediction")->required()->check(CLI::ExistingFile);
    metrics->add_option("--gt", ma.gt, "Ground truth")->required()->check(CLI::ExistingFile);
    metrics->add_flag("--json", ma.json, "Print JSON instead of key = value lines");
    metrics->add_option("--re-threshold", ma.re_threshold, "Success threshold on RE, degrees")->capture_default_str();
    metrics->add_option("--te-threshold", ma.te_threshold, "Success threshold on TE")->capture_default_str();
    metrics->add_option("--samples", ma.samples, "Samples per mesh surface")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    metrics->add_option("--thresholds", ma.thresholds, "F-score distance thresholds")
        ->delimiter(',')
        ->capture_default_str();
    metrics->callback([&] { action = [&] { run_metrics(ma, g); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "ddm: error: " << one_line(e.what()) << "\n";
        return kExitInput;
    }

    try {
        set_num_threads(g.threads);
        action();
        return 0;
    } catch (const InvalidInput& e) {
        std::cerr << "ddm: error: " << one_line(e.what()) << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "ddm: numerical abort: " << one_line(e.what()) << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "ddm: internal error: " << one_line(e.what()) << "\n";
        return kExitInternal;
    }
}
