#include "ddm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>

namespace ddm {

namespace {

// ---------------------------------------------------------------- TOML subset

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool bare_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

class LineParser {
public:
    LineParser(std::string_view text, const std::string& name, std::size_t line) : s_(text), name_(name), line_(line) {}

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw ParseError(name_ + ":" + std::to_string(line_) + ": " + msg);
    }

    TomlValue value()
    {
        skip();
        if (at_end()) fail("missing value");
        TomlValue v;
        if (s_[i_] == '"') {
            v = string();
        } else if (s_[i_] == '[') {
            v = array();
        } else {
            const std::string_view tok = token();
            if (tok == "true")
                v = true;
            else if (tok == "false")
                v = false;
            else
                v = number(tok);
        }
        skip();
        if (!at_end() && s_[i_] != '#') fail("unexpected text after value");
        return v;
    }

private:
    bool at_end() const { return i_ >= s_.size(); }
    void skip()
    {
        while (!at_end() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
    }

    std::string_view token()
    {
        const std::size_t b = i_;
        while (!at_end() && s_[i_] != ' ' && s_[i_] != '\t' && s_[i_] != ',' && s_[i_] != ']' && s_[i_] != '#') ++i_;
        return s_.substr(b, i_ - b);
    }

    std::string string()
    {
        std::string out;
        ++i_;
        while (true) {
            if (at_end()) fail("unterminated string");
            const char c = s_[i_++];
            if (c == '"') return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (at_end()) fail("unterminated string");
            const char e = s_[i_++];
            switch (e) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: fail(std::string("unsupported escape \\") + e);
            }
        }
    }

    std::vector<double> array()
    {
        std::vector<double> out;
        ++i_;
        while (true) {
            skip();
            if (at_end()) fail("unterminated array (arrays must fit on one line)");
            if (s_[i_] == ']') {
                ++i_;
                return out;
            }
            const TomlValue v = number(token());
            out.push_back(std::holds_alternative<double>(v) ? std::get<double>(v)
                                                            : static_cast<double>(std::get<std::int64_t>(v)));
            skip();
            if (at_end()) fail("unterminated array (arrays must fit on one line)");
            if (s_[i_] == ',')
                ++i_;
            else if (s_[i_] != ']')
                fail("expected ',' or ']' in array");
        }
    }

    TomlValue number(std::string_view tok) const
    {
        std::string clean;
        for (std::size_t k = 0; k < tok.size(); ++k) {
            if (tok[k] == '_') {
                if (k == 0 || k + 1 == tok.size() || !std::isdigit(static_cast<unsigned char>(tok[k - 1])) ||
                    !std::isdigit(static_cast<unsigned char>(tok[k + 1])))
                    fail("misplaced '_' in number");
                continue;
            }
            clean += tok[k];
        }
        std::string_view body = clean;
        if (!body.empty() && body.front() == '+') body.remove_prefix(1);
        if (body.empty()) fail("invalid value '" + std::string(tok) + "'");
        const bool integral = body.find_first_not_of("-0123456789") == std::string_view::npos;
        if (integral) {
            std::int64_t v = 0;
            const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
            if (ec == std::errc::result_out_of_range) fail("integer out of range");
            if (ec != std::errc() || ptr != body.data() + body.size()) fail("invalid value '" + std::string(tok) + "'");
            return v;
        }
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
        if (ec != std::errc() || ptr != body.data() + body.size()) fail("invalid value '" + std::string(tok) + "'");
        if (!std::isfinite(v)) fail("non-finite number");
        return v;
    }

    std::string_view s_;
    const std::string& name_;
    std::size_t line_;
    std::size_t i_ = 0;
};

// ---------------------------------------------------------------- field descriptors

std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    // Keep the token a TOML float so integral values read back as floats too.
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

struct Field {
    std::string key;
    std::function<void(const TomlValue&, const LineParser&)> set;
    std::function<std::optional<std::string>()> show;  ///< nullopt: unset, omitted
};

struct Section {
    std::string table;
    std::vector<Field> fields;
};

double as_real(const TomlValue& v, const std::string& key, const LineParser& p)
{
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    p.fail("'" + key + "' expects a number");
}

std::int64_t as_integer(const TomlValue& v, const std::string& key, const LineParser& p)
{
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    p.fail("'" + key + "' expects an integer");
}

Field real(const std::string& key, double& ref, double min, bool strict)
{
    return {key,
            [&ref, key, min, strict](const TomlValue& v, const LineParser& p) {
                const double x = as_real(v, key, p);
                if (strict ? !(x > min) : !(x >= min))
                    p.fail("'" + key + "' must be " + (strict ? "> " : ">= ") + format_number(min));
                ref = x;
            },
            [&ref] { return std::optional<std::string>(format_number(ref)); }};
}

Field optional_real(const std::string& key, std::optional<double>& ref)
{
    return {key,
            [&ref, key](const TomlValue& v, const LineParser& p) {
                const double x = as_real(v, key, p);
                if (!(x > 0.0)) p.fail("'" + key + "' must be > 0");
                ref = x;
            },
            [&ref] { return ref ? std::optional<std::string>(format_number(*ref)) : std::nullopt; }};
}

template <typename Int>
Field integer(const std::string& key, Int& ref, std::int64_t min)
{
    return {key,
            [&ref, key, min](const TomlValue& v, const LineParser& p) {
                const std::int64_t x = as_integer(v, key, p);
                if (x < min) p.fail("'" + key + "' must be >= " + std::to_string(min));
                if (x > static_cast<std::int64_t>(std::numeric_limits<int>::max())) p.fail("'" + key + "' is too large");
                ref = static_cast<Int>(x);
            },
            [&ref] { return std::optional<std::string>(std::to_string(ref)); }};
}

Field boolean(const std::string& key, bool& ref)
{
    return {key,
            [&ref, key](const TomlValue& v, const LineParser& p) {
                const auto* b = std::get_if<bool>(&v);
                if (!b) p.fail("'" + key + "' expects true or false");
                ref = *b;
            },
            [&ref] { return std::optional<std::string>(ref ? "true" : "false"); }};
}

template <typename E>
Field choice(const std::string& key, E& ref, std::vector<std::pair<std::string, E>> options)
{
    return {key,
            [&ref, key, options](const TomlValue& v, const LineParser& p) {
                const auto* s = std::get_if<std::string>(&v);
                std::string allowed;
                for (const auto& [name, value] : options) {
                    if (s && *s == name) {
                        ref = value;
                        return;
                    }
                    allowed += (allowed.empty() ? "" : ", ") + ("\"" + name + "\"");
                }
                p.fail("'" + key + "' expects one of " + allowed);
            },
            [&ref, options] {
                for (const auto& [name, value] : options)
                    if (value == ref) return std::optional<std::string>("\"" + name + "\"");
                return std::optional<std::string>();
            }};
}

Field array(const std::string& key, std::size_t n, std::function<void(const std::vector<double>&)> set,
            std::function<std::vector<double>()> get)
{
    return {key,
            [key, n, set](const TomlValue& v, const LineParser& p) {
                const auto* a = std::get_if<std::vector<double>>(&v);
                if (!a || a->size() != n) p.fail("'" + key + "' expects an array of " + std::to_string(n) + " numbers");
                set(*a);
            },
            [get] {
                std::string s = "[";
                for (double x : get()) s += (s.size() > 1 ? ", " : "") + format_number(x);
                return std::optional<std::string>(s + "]");
            }};
}

Section metric_section(MetricConfig& m)
{
    return {"metric",
            {real("beta", m.beta, 0.0, false), integer("K", m.ddf.K, 1), boolean("distance_only", m.ddf.distance_only),
             choice("reduction", m.reduction, {{"mean", Reduction::Mean}, {"sum", Reduction::Sum}}),
             boolean("detach_confidence", m.detach_confidence),
             boolean("project_mesh_jacobian", m.ddf.project_mesh_jacobian)}};
}

Section refgen_section(RefGenConfig& r, bool with_adaptive)
{
    Section s{"refgen",
              {integer("M", r.M, 0), real("sigma", r.sigma, 0.0, false),
               choice("sources", r.sources, {{"fixed", RefSources::FixedOnly}, {"both", RefSources::BothSurfaces}})}};
    if (with_adaptive) s.fields.push_back(optional_real("adaptive_sigma_scale", r.adaptive_sigma_scale));
    return s;
}

Section optim_section(OptimConfig& o)
{
    return {"optim",
            {choice("algorithm", o.algorithm,
                    {{"gd", Algorithm::GD}, {"momentum", Algorithm::Momentum}, {"adam", Algorithm::Adam}}),
             real("learning_rate", o.learning_rate, 0.0, true), integer("iterations", o.iterations, 0),
             real("beta1", o.beta1, 0.0, false), real("beta2", o.beta2, 0.0, false), real("eps", o.eps, 0.0, true),
             optional_real("grad_clip", o.grad_clip),
             choice("schedule", o.schedule, {{"constant", Schedule::Constant}, {"cosine", Schedule::Cosine}}),
             real("final_lr_fraction", o.final_lr_fraction, 0.0, false), integer("log_every", o.log_every, 1)}};
}

std::vector<Section> sections(TaskConfig& cfg)
{
    switch (cfg.kind) {
    case TaskKind::Eval: return {metric_section(cfg.eval.metric), refgen_section(cfg.eval.refgen, true)};
    case TaskKind::Rigid: {
        RigidTransform& init = cfg.rigid.init;
        Section task{"rigid",
                     {array(
                          "init_rotation", 9,
                          [&init](const std::vector<double>& a) {
                              for (int r = 0; r < 3; ++r)
                                  for (int c = 0; c < 3; ++c) init.R(r, c) = a[3 * r + c];
                          },
                          [&init] {
                              std::vector<double> a;
                              for (int r = 0; r < 3; ++r)
                                  for (int c = 0; c < 3; ++c) a.push_back(init.R(r, c));
                              return a;
                          }),
                      array(
                          "init_translation", 3, [&init](const std::vector<double>& a) { init.t = Vec3(a[0], a[1], a[2]); },
                          [&init] { return std::vector<double>{init.t.x(), init.t.y(), init.t.z()}; })}};
        return {metric_section(cfg.rigid.metric), refgen_section(cfg.rigid.refgen, true), optim_section(cfg.rigid.optim),
                task};
    }
    case TaskKind::Nonrigid: {
        NonrigidConfig& n = cfg.nonrigid;
        return {metric_section(n.metric), refgen_section(n.refgen, true), optim_section(n.optim),
                {"nonrigid",
                 {real("lambda", n.lambda, 0.0, false), integer("node_neighbors", n.node_neighbors, 1),
                  real("epsilon_factor", n.epsilon_factor, 0.0, true)}}};
    }
    case TaskKind::Template: {
        TemplateFitConfig& t = cfg.templ;
        return {metric_section(t.metric), refgen_section(t.refgen, true), optim_section(t.optim),
                {"template",
                 {real("alpha", t.alpha, 0.0, false), real("lambda1", t.lambda1, 0.0, false),
                  real("lambda2", t.lambda2, 0.0, false)}}};
    }
    case TaskKind::Flow: {
        FlowConfig& f = cfg.flow;
        // The flow table owns the adaptive noise scale.
        return {metric_section(f.metric), refgen_section(f.refgen, false), optim_section(f.optim),
                {"flow",
                 {real("lambda_smooth", f.lambda_smooth, 0.0, false), integer("smooth_neighbors", f.smooth_neighbors, 1),
                  real("adaptive_sigma_scale", f.adaptive_sigma_scale, 0.0, true)}}};
    }
    }
    return {};
}

const std::vector<std::string>& all_task_tables()
{
    static const std::vector<std::string> names{"rigid", "nonrigid", "template", "flow", "optim"};
    return names;
}

}  // namespace

TomlDocument parse_toml(const std::string& text, const std::string& name)
{
    TomlDocument doc;
    doc[""].line = 0;
    std::string current;
    std::size_t line = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view raw = std::string_view(text).substr(pos, end - pos);
        pos = end + 1;
        ++line;
        const std::string_view l = trim(raw);
        if (l.empty() || l.front() == '#') continue;
        const LineParser lp(l, name, line);
        if (l.front() == '[') {
            if (l.size() > 1 && l[1] == '[') lp.fail("arrays of tables are not supported");
            const std::size_t close = l.find(']');
            if (close == std::string_view::npos) lp.fail("unterminated table header");
            const std::string_view rest = trim(l.substr(close + 1));
            if (!rest.empty() && rest.front() != '#') lp.fail("unexpected text after table header");
            const std::string_view table = trim(l.substr(1, close - 1));
            if (table.empty()) lp.fail("empty table name");
            for (char c : table)
                if (!bare_char(c) && c != '.') lp.fail("invalid table name '" + std::string(table) + "'");
            current = std::string(table);
            if (doc.count(current)) lp.fail("duplicate table [" + current + "]");
            doc[current].line = line;
            continue;
        }
        const std::size_t eq = l.find('=');
        if (eq == std::string_view::npos) lp.fail("expected 'key = value'");
        const std::string_view key = trim(l.substr(0, eq));
        if (key.empty()) lp.fail("missing key");
        for (char c : key)
            if (!bare_char(c)) lp.fail("invalid key '" + std::string(key) + "' (quoted and dotted keys are not supported)");
        LineParser vp(l.substr(eq + 1), name, line);
        TomlTable& t = doc[current];
        if (t.entries.count(std::string(key))) lp.fail("duplicate key '" + std::string(key) + "'");
        t.entries[std::string(key)] = {vp.value(), line};
    }
    return doc;
}

std::string task_name(TaskKind kind)
{
    switch (kind) {
    case TaskKind::Eval: return "eval";
    case TaskKind::Rigid: return "rigid";
    case TaskKind::Nonrigid: return "nonrigid";
    case TaskKind::Template: return "template";
    case TaskKind::Flow: return "flow";
    }
    return "";
}

EvalConfig default_eval_config()
{
    EvalConfig cfg;
    cfg.metric.beta = 20.0;
    cfg.metric.ddf.K = 5;
    cfg.refgen.sigma = 0.05;
    cfg.refgen.M = 0;  // 10x the element count of the first surface
    return cfg;
}

TaskConfig default_task_config(TaskKind kind)
{
    TaskConfig cfg;
    cfg.kind = kind;
    return cfg;
}

TaskConfig parse_task_config(const std::string& text, TaskKind kind, const std::string& name)
{
    const TomlDocument doc = parse_toml(text, name);
    TaskConfig cfg = default_task_config(kind);
    auto secs = sections(cfg);
    for (const auto& [table, content] : doc) {
        const LineParser at_table("", name, content.line);
        if (table.empty()) {
            for (const auto& [key, entry] : content.entries) {
                const LineParser at(std::string_view(), name, entry.line);
                if (key != "task") at.fail("unknown top-level key '" + key + "'");
                const auto* s = std::get_if<std::string>(&entry.value);
                if (!s) at.fail("'task' expects a string");
                if (*s != task_name(kind)) at.fail("config is for task '" + *s + "', not '" + task_name(kind) + "'");
            }
            continue;
        }
        auto sec = std::find_if(secs.begin(), secs.end(), [&](const Section& s) { return s.table == table; });
        if (sec == secs.end()) {
            const auto& known = all_task_tables();
            if (std::find(known.begin(), known.end(), table) != known.end())
                at_table.fail("table [" + table + "] does not apply to task '" + task_name(kind) + "'");
            at_table.fail("unknown table [" + table + "]");
        }
        for (const auto& [key, entry] : content.entries) {
            const LineParser at(std::string_view(), name, entry.line);
            auto f = std::find_if(sec->fields.begin(), sec->fields.end(), [&](const Field& fd) { return fd.key == key; });
            if (f == sec->fields.end()) at.fail("unknown key '" + key + "' in [" + table + "]");
            f->set(entry.value, at);
        }
    }
    const auto check_optim = [&](const OptimConfig& o) {
        try {
            validate(o);
        } catch (const InvalidInput& e) {
            throw ParseError(name + ": " + e.what());
        }
    };
    switch (kind) {
    case TaskKind::Eval: break;
    case TaskKind::Rigid:
        check_optim(cfg.rigid.optim);
        try {
            validate(cfg.rigid.init, 1e-6);
        } catch (const InvalidInput& e) {
            throw ParseError(name + ": init_rotation: " + e.what());
        }
        break;
    case TaskKind::Nonrigid: check_optim(cfg.nonrigid.optim); break;
    case TaskKind::Template: check_optim(cfg.templ.optim); break;
    case TaskKind::Flow: check_optim(cfg.flow.optim); break;
    }
    return cfg;
}

TaskConfig load_task_config(const std::filesystem::path& path, TaskKind kind)
{
    return parse_task_config(read_file(path), kind, path.string());
}

void apply_seed(TaskConfig& cfg, std::uint64_t seed)
{
    cfg.eval.refgen.seed = seed;
    cfg.rigid.refgen.seed = seed;
    cfg.nonrigid.refgen.seed = seed;
    cfg.nonrigid.graph_seed = seed;
    cfg.templ.refgen.seed = seed;
    cfg.flow.refgen.seed = seed;
}

std::string canonical_config(const TaskConfig& cfg)
{
    TaskConfig copy = cfg;  // descriptors bind mutable references
    std::string out = "task = \"" + task_name(cfg.kind) + "\"\n";
    for (const auto& sec : sections(copy)) {
        out += "\n[" + sec.table + "]\n";
        for (const auto& f : sec.fields)
            if (const auto v = f.show()) out += f.key + " = " + *v + "\n";
    }
    return out;
}

std::string config_hash(const TaskConfig& cfg)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canonical_config(cfg)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ddm
