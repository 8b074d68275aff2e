#include <doctest.h>

#include <functional>

#include "ddm/config.hpp"
#include "ddm/records.hpp"

using namespace ddm;

namespace {

std::string error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

bool rejects_at(const std::string& text, TaskKind kind, int line)
{
    const std::string msg = error_of([&] { parse_task_config(text, kind, "c.toml"); });
    return msg.find("c.toml:" + std::to_string(line) + ":") == 0;
}

constexpr TaskKind kAllTasks[] = {TaskKind::Eval, TaskKind::Rigid, TaskKind::Nonrigid, TaskKind::Template,
                                  TaskKind::Flow};

}  // namespace

TEST_CASE("TOML subset values")
{
    const TomlDocument doc = parse_toml(
        "# leading comment\n"
        "top = \"a \\\"quoted\\\" #1\"  # trailing comment\n"
        "\n"
        "[table.sub]\n"
        "i = -1_000\n"
        "f = 2.5e-3\n"
        "g = +7.\n"
        "b = false\n"
        "arr = [1, 2.5, -3e2, ]\n"
        "empty = []\n");
    CHECK(std::get<std::string>(doc.at("").entries.at("top").value) == "a \"quoted\" #1");
    const auto& t = doc.at("table.sub").entries;
    CHECK(std::get<std::int64_t>(t.at("i").value) == -1000);
    CHECK(std::get<double>(t.at("f").value) == 2.5e-3);
    CHECK(std::get<double>(t.at("g").value) == 7.0);
    CHECK(std::get<bool>(t.at("b").value) == false);
    CHECK(std::get<std::vector<double>>(t.at("arr").value) == std::vector<double>{1, 2.5, -300});
    CHECK(std::get<std::vector<double>>(t.at("empty").value).empty());
    CHECK(t.at("arr").line == 9);
    CHECK(doc.at("table.sub").line == 4);
}

TEST_CASE("TOML subset errors carry the line")
{
    const auto line_of = [](const std::string& text) {
        const std::string msg = error_of([&] { parse_toml(text, "t.toml"); });
        const auto colon = msg.find(':', 7);
        return msg.rfind("t.toml:", 0) == 0 ? std::stoi(msg.substr(7, colon - 7)) : -1;
    };
    CHECK(line_of("a = 1\nb = \n") == 2);
    CHECK(line_of("a = 1\na = 2\n") == 2);
    CHECK(line_of("[x]\n[x]\n") == 2);
    CHECK(line_of("\n\ns = \"open\n") == 3);
    CHECK(line_of("arr = [1, 2\n") == 1);
    CHECK(line_of("x = 1 2\n") == 1);
    CHECK(line_of("x = nan\n") == 1);
    CHECK(line_of("x = inf\n") == 1);
    CHECK(line_of("x = 1__0\n") == 1);
    CHECK(line_of("a.b = 1\n") == 1);
    CHECK(line_of("[[arr]]\n") == 1);
    CHECK(line_of("ok = true\njust words\n") == 2);
    CHECK(line_of("x = 99999999999999999999\n") == 1);
    CHECK(line_of("x = 'single'\n") == 1);
}

TEST_CASE("empty config reproduces each task's defaults")
{
    const TaskConfig rigid = parse_task_config("", TaskKind::Rigid);
    CHECK(rigid.rigid.metric.ddf.K == 5);
    CHECK(rigid.rigid.metric.beta == 20.0);
    CHECK(rigid.rigid.refgen.sigma == 0.05);
    CHECK(rigid.rigid.refgen.M == 0);  // resolved to 10x the target size
    CHECK(rigid.rigid.optim.algorithm == Algorithm::Adam);
    CHECK(rigid.rigid.optim.learning_rate == 0.02);
    CHECK(rigid.rigid.optim.iterations == 200);

    const TaskConfig nonrigid = parse_task_config("", TaskKind::Nonrigid);
    CHECK(nonrigid.nonrigid.epsilon_factor == 5.0);
    CHECK(nonrigid.nonrigid.refgen.M == 40000);
    CHECK(nonrigid.nonrigid.refgen.sigma == 0.1);
    CHECK(nonrigid.nonrigid.node_neighbors == 5);
    CHECK(nonrigid.nonrigid.metric.ddf.K == 5);
    CHECK(nonrigid.nonrigid.lambda == 500.0);
    CHECK(nonrigid.nonrigid.optim.algorithm == Algorithm::GD);
    CHECK(nonrigid.nonrigid.optim.learning_rate == 2.0);
    CHECK(nonrigid.nonrigid.optim.iterations == 1000);

    const TaskConfig flow = parse_task_config("", TaskKind::Flow);
    CHECK(flow.flow.metric.ddf.K == 5);
    CHECK(flow.flow.refgen.M == 81920);
    CHECK(flow.flow.adaptive_sigma_scale == 3.0);
    CHECK(flow.flow.optim.algorithm == Algorithm::Adam);
    CHECK(flow.flow.optim.learning_rate == 0.01);
    CHECK(flow.flow.optim.iterations == 500);

    const TaskConfig templ = parse_task_config("", TaskKind::Template);
    CHECK(templ.templ.alpha == 1.0);
    CHECK(templ.templ.lambda1 == 1.5);
    CHECK(templ.templ.lambda2 == 4.5);
    CHECK(templ.templ.optim.algorithm == Algorithm::Adam);
    CHECK(templ.templ.optim.learning_rate == 0.05);

    for (TaskKind kind : kAllTasks)
        CHECK(canonical_config(parse_task_config("", kind)) == canonical_config(default_task_config(kind)));
}

TEST_CASE("config overrides")
{
    const TaskConfig c = parse_task_config(
        "task = \"rigid\"\n"
        "[metric]\nbeta = 5\nK = 3\nreduction = \"sum\"\ndetach_confidence = true\n"
        "[refgen]\nM = 1_000\nsigma = 0.02\nsources = \"both\"\nadaptive_sigma_scale = 2\n"
        "[optim]\nalgorithm = \"momentum\"\nlearning_rate = 1e-3\niterations = 7\ngrad_clip = 0.5\n"
        "schedule = \"constant\"\n"
        "[rigid]\ninit_rotation = [0, -1, 0, 1, 0, 0, 0, 0, 1]\ninit_translation = [0.1, 0, -0.2]\n",
        TaskKind::Rigid);
    const RigidRegConfig& r = c.rigid;
    CHECK(r.metric.beta == 5.0);
    CHECK(r.metric.ddf.K == 3);
    CHECK(r.metric.reduction == Reduction::Sum);
    CHECK(r.metric.detach_confidence);
    CHECK(r.refgen.M == 1000);
    CHECK(r.refgen.sigma == 0.02);
    CHECK(r.refgen.sources == RefSources::BothSurfaces);
    CHECK(r.refgen.adaptive_sigma_scale == 2.0);
    CHECK(r.optim.algorithm == Algorithm::Momentum);
    CHECK(r.optim.learning_rate == 1e-3);
    CHECK(r.optim.iterations == 7);
    CHECK(r.optim.grad_clip == 0.5);
    CHECK(r.optim.schedule == Schedule::Constant);
    CHECK(r.init.R(0, 1) == -1.0);
    CHECK(r.init.R(1, 0) == 1.0);
    CHECK(r.init.t == Vec3(0.1, 0, -0.2));

    const TaskConfig f = parse_task_config("[flow]\nadaptive_sigma_scale = 1.5\nsmooth_neighbors = 4\n", TaskKind::Flow);
    CHECK(f.flow.adaptive_sigma_scale == 1.5);
    CHECK(f.flow.smooth_neighbors == 4);
    const TaskConfig n = parse_task_config("[nonrigid]\nlambda = 0.2\n[metric]\nproject_mesh_jacobian = false\n",
                                           TaskKind::Nonrigid);
    CHECK(n.nonrigid.lambda == 0.2);
    CHECK_FALSE(n.nonrigid.metric.ddf.project_mesh_jacobian);
}

TEST_CASE("config rejections name the offending line")
{
    CHECK(rejects_at("[metric]\nbeta = 1\ngamma = 2\n", TaskKind::Rigid, 3));
    CHECK(rejects_at("\n[metrics]\n", TaskKind::Rigid, 2));
    CHECK(rejects_at("[flow]\n", TaskKind::Rigid, 1));
    CHECK(rejects_at("[metric]\n[optim]\n", TaskKind::Eval, 2));
    CHECK(rejects_at("[refgen]\nadaptive_sigma_scale = 2.0\n", TaskKind::Flow, 2));
    CHECK(rejects_at("[metric]\nK = 5.0\n", TaskKind::Rigid, 2));
    CHECK(rejects_at("[metric]\nK = 0\n", TaskKind::Rigid, 2));
    CHECK(rejects_at("[metric]\nbeta = -1\n", TaskKind::Rigid, 2));
    CHECK(rejects_at("[metric]\nbeta = true\n", TaskKind::Rigid, 2));
    CHECK(rejects_at("[metric]\nreduction = \"median\"\n", TaskKind::Rigid, 2));
    CHECK(rejects_at("[refgen]\nsigma = -0.1\n", TaskKind::Nonrigid, 2));
    CHECK(rejects_at("[optim]\nlearning_rate = 0\n", TaskKind::Flow, 2));
    CHECK(rejects_at("[optim]\niterations = -1\n", TaskKind::Template, 2));
    CHECK(rejects_at("[rigid]\ninit_translation = [1, 2]\n", TaskKind::Rigid, 2));
    CHECK(rejects_at("task = \"flow\"\n", TaskKind::Rigid, 1));
    CHECK(rejects_at("task = 3\n", TaskKind::Rigid, 1));
    CHECK(rejects_at("seed = 3\n", TaskKind::Rigid, 1));
    CHECK_THROWS_AS(parse_task_config("[rigid]\ninit_rotation = [2, 0, 0, 0, 1, 0, 0, 0, 1]\n", TaskKind::Rigid),
                    ParseError);
    CHECK_THROWS_AS(parse_task_config("[rigid]\ninit_rotation = [-1, 0, 0, 0, 1, 0, 0, 0, 1]\n", TaskKind::Rigid),
                    ParseError);
    CHECK_THROWS_AS(parse_task_config("[optim]\nbeta2 = 1.5\n", TaskKind::Rigid), ParseError);
}

TEST_CASE("canonical config round-trips and drives the hash")
{
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    std::uniform_int_distribution<int> k(1, 9);
    for (TaskKind kind : kAllTasks) {
        for (int trial = 0; trial < 5; ++trial) {
            std::string text = "[metric]\nbeta = " + std::to_string(u(rng)) + "\nK = " + std::to_string(k(rng)) +
                               "\n[refgen]\nsigma = " + std::to_string(u(rng) / 100) + "\n";
            if (kind != TaskKind::Eval) text += "[optim]\nlearning_rate = " + std::to_string(u(rng) / 1000) + "\n";
            const TaskConfig c = parse_task_config(text, kind);
            const std::string canon = canonical_config(c);
            const TaskConfig back = parse_task_config(canon, kind);
            CHECK(canonical_config(back) == canon);
            CHECK(config_hash(back) == config_hash(c));
            CHECK(config_hash(c).size() == 16);
        }
        TaskConfig a = default_task_config(kind);
        TaskConfig b = a;
        apply_seed(b, 99);
        CHECK(config_hash(a) == config_hash(b));
        b.kind = kind;
        switch (kind) {
        case TaskKind::Eval: b.eval.metric.beta += 1e-12; break;
        case TaskKind::Rigid: b.rigid.optim.iterations += 1; break;
        case TaskKind::Nonrigid: b.nonrigid.lambda *= 2; break;
        case TaskKind::Template: b.templ.alpha = 0.5; break;
        case TaskKind::Flow: b.flow.smooth_neighbors = 3; break;
        }
        CHECK(config_hash(a) != config_hash(b));
    }
    TaskConfig rigid = default_task_config(TaskKind::Rigid);
    CHECK(config_hash(rigid) != config_hash(default_task_config(TaskKind::Flow)));
    apply_seed(rigid, 5);
    CHECK(rigid.rigid.refgen.seed == 5);
    TaskConfig nonrigid = default_task_config(TaskKind::Nonrigid);
    apply_seed(nonrigid, 6);
    CHECK(nonrigid.nonrigid.refgen.seed == 6);
    CHECK(nonrigid.nonrigid.graph_seed == 6);
}

TEST_CASE("transform records")
{
    Rng rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        TransformRecord rec;
        rec.transform.R = so3_exp(Vec3(g(rng), g(rng), g(rng)));
        rec.transform.t = Vec3(g(rng), g(rng), g(rng)) * 1e3;
        rec.provenance = {"register-rigid", static_cast<std::uint64_t>(trial), "00ff00ff00ff00ff", 200};
        const TransformRecord back = parse_transform_record(to_json(rec));
        CHECK(back.transform.R == rec.transform.R);
        CHECK(back.transform.t == rec.transform.t);
        CHECK(back.provenance.seed == rec.provenance.seed);
        CHECK(back.provenance.config_hash == rec.provenance.config_hash);
        CHECK(back.provenance.iterations == 200);
        CHECK(back.provenance.command == "register-rigid");
        CHECK(to_json(back) == to_json(rec));
    }

    const std::string minimal = R"({"type": "rigid_transform", "rotation": [0,-1,0, 1,0,0, 0,0,1], "translation": [1,2,3]})";
    CHECK(parse_transform_record(minimal).transform.R(1, 0) == 1.0);
    CHECK_THROWS_AS(parse_transform_record(R"({"type": "rigid_transform", "rotation": [1,0,0, 0,1,0, 0,0,1.01], "translation": [0,0,0]})"),
                    InvalidInput);
    CHECK_THROWS_AS(parse_transform_record(R"({"type": "rigid_transform", "rotation": [1,0,0, 0,1,0, 0,0,-1], "translation": [0,0,0]})"),
                    InvalidInput);
    CHECK_THROWS_AS(parse_transform_record(R"({"type": "rigid_transform", "rotation": [1,0,0, 0,1,0, 0,0,1]})"), InvalidInput);
    CHECK_THROWS_AS(parse_transform_record(R"({"type": "rigid_transform", "rotation": [1,0,0, 0,1,0], "translation": [0,0,0]})"),
                    InvalidInput);
    CHECK_THROWS_AS(parse_transform_record(R"({"type": "scene_flow", "rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [0,0,0]})"),
                    InvalidInput);
    const std::string msg = error_of([] { parse_transform_record("{\"type\": ", "t.json"); });
    CHECK(msg.find("t.json: byte offset") == 0);
}

TEST_CASE("flow records")
{
    Rng rng(13);
    std::normal_distribution<double> g(0.0, 0.1);
    FlowRecord rec;
    rec.source = "frames/000.ply";
    for (int i = 0; i < 100; ++i) rec.flow.emplace_back(g(rng), g(rng), g(rng));
    rec.provenance = {"scene-flow", 3, "0123456789abcdef", 500};
    const FlowRecord back = parse_flow_record(to_json(rec));
    CHECK(back.source == rec.source);
    CHECK(back.flow == rec.flow);
    CHECK(back.provenance.iterations == 500);
    CHECK(to_json(back) == to_json(rec));

    CHECK_THROWS_AS(parse_flow_record(R"({"type": "scene_flow", "source": "a", "flow": [[1,2]]})"), InvalidInput);
    CHECK_THROWS_AS(parse_flow_record(R"({"type": "scene_flow", "source": "a", "num_points": 2, "flow": [[1,2,3]]})"),
                    InvalidInput);
    CHECK_THROWS_AS(parse_flow_record(R"({"type": "scene_flow", "flow": []})"), InvalidInput);
    CHECK(parse_flow_record(R"({"type": "scene_flow", "source": "a", "flow": []})").flow.empty());
}
