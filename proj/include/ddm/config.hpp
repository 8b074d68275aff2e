#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ddm/deform.hpp"
#include "ddm/flow.hpp"
#include "ddm/io.hpp"
#include "ddm/metric.hpp"
#include "ddm/rigid.hpp"

namespace ddm {

// ---------------------------------------------------------------- TOML subset

/// Values of the supported TOML subset: booleans, integers, floats, basic
/// strings, and single-line arrays of numbers.
using TomlValue = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

struct TomlEntry {
    TomlValue value;
    std::size_t line = 0;
};

struct TomlTable {
    std::map<std::string, TomlEntry> entries;
    std::size_t line = 0;
};

/// Tables by name; top-level keys live in the table named "".
using TomlDocument = std::map<std::string, TomlTable>;

/// Throws ParseError (with the line number) on malformed input, duplicate
/// keys, or duplicate tables.
TomlDocument parse_toml(const std::string& text, const std::string& name = "<config>");

// ---------------------------------------------------------------- task configs

enum class TaskKind { Eval, Rigid, Nonrigid, Template, Flow };

std::string task_name(TaskKind kind);

/// Settings for comparing two surfaces with the metric.
struct EvalConfig {
    MetricConfig metric{20.0, DdfConfig{5, false}, Reduction::Mean};
    RefGenConfig refgen{};  ///< M == 0 means 10x the element count of the first surface
};

EvalConfig default_eval_config();

/// Every module setting for one command. Only the member matching `kind` is used.
struct TaskConfig {
    TaskKind kind = TaskKind::Eval;
    EvalConfig eval = default_eval_config();
    RigidRegConfig rigid = default_rigid_config();
    NonrigidConfig nonrigid = default_nonrigid_config();
    TemplateFitConfig templ = default_template_config();
    FlowConfig flow = default_flow_config();
};

TaskConfig default_task_config(TaskKind kind);

/// Overrides the defaults of `kind` with the keys in `text`.
///
/// Recognised tables: [metric], [refgen], and (except for eval) [optim], plus
/// one task table: [rigid], [nonrigid], [template] or [flow]. A top-level
/// `task = "<name>"` is optional but must match. Unknown tables or keys, tables
/// of another task, and wrongly typed values are rejected. Lengths are in the
/// units of the input surfaces.
TaskConfig parse_task_config(const std::string& text, TaskKind kind, const std::string& name = "<config>");
TaskConfig load_task_config(const std::filesystem::path& path, TaskKind kind);

/// Applies the command-line seed to every seeded stage (reference points,
/// deformation-graph construction).
void apply_seed(TaskConfig& cfg, std::uint64_t seed);

/// Effective settings of the active task as a config file in a fixed key
/// order. Seeds are excluded. Parsing it back reproduces the same settings.
std::string canonical_config(const TaskConfig& cfg);

/// 16 hex digits of the 64-bit FNV-1a hash of canonical_config().
std::string config_hash(const TaskConfig& cfg);

}  // namespace ddm
