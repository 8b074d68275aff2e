#include "ddm/records.hpp"

#include <cmath>

#include <json.hpp>

#include "ddm/io.hpp"

namespace ddm {

namespace {

using nlohmann::ordered_json;

ordered_json provenance_json(const Provenance& p)
{
    ordered_json j;
    j["command"] = p.command;
    j["seed"] = p.seed;
    j["config_hash"] = p.config_hash;
    j["iterations"] = p.iterations;
    return j;
}

ordered_json parse_json(const std::string& text, const std::string& name)
{
    try {
        return ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        throw ParseError(name + ": byte offset " + std::to_string(e.byte) + ": malformed JSON");
    }
}

const ordered_json& field(const ordered_json& j, const char* key, const std::string& name)
{
    if (!j.is_object() || !j.contains(key)) throw InvalidInput(name + ": missing field '" + key + "'");
    return j.at(key);
}

std::vector<double> numbers(const ordered_json& j, std::size_t n, const char* key, const std::string& name)
{
    if (!j.is_array() || j.size() != n)
        throw InvalidInput(name + ": '" + key + "' must be an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw InvalidInput(name + ": '" + key + "' must hold numbers");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw InvalidInput(name + ": '" + key + "' holds a non-finite number");
        out.push_back(x);
    }
    return out;
}

void check_type(const ordered_json& j, const char* expected, const std::string& name)
{
    const auto& t = field(j, "type", name);
    if (!t.is_string() || t.get<std::string>() != expected)
        throw InvalidInput(name + ": expected a record of type '" + std::string(expected) + "'");
}

Provenance read_provenance(const ordered_json& j, const std::string& name)
{
    Provenance p;
    if (!j.contains("provenance")) return p;
    const auto& pj = j.at("provenance");
    try {
        if (pj.contains("command")) p.command = pj.at("command").get<std::string>();
        if (pj.contains("seed")) p.seed = pj.at("seed").get<std::uint64_t>();
        if (pj.contains("config_hash")) p.config_hash = pj.at("config_hash").get<std::string>();
        if (pj.contains("iterations")) p.iterations = pj.at("iterations").get<int>();
    } catch (const ordered_json::exception&) {
        throw InvalidInput(name + ": malformed provenance");
    }
    return p;
}

}  // namespace

std::string to_json(const TransformRecord& record)
{
    ordered_json j;
    j["type"] = "rigid_transform";
    ordered_json r = ordered_json::array();
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) r.push_back(record.transform.R(row, col));
    j["rotation"] = r;
    j["translation"] = {record.transform.t.x(), record.transform.t.y(), record.transform.t.z()};
    j["provenance"] = provenance_json(record.provenance);
    return j.dump(2) + "\n";
}

std::string to_json(const FlowRecord& record)
{
    ordered_json j;
    j["type"] = "scene_flow";
    j["source"] = record.source;
    j["num_points"] = record.flow.size();
    ordered_json f = ordered_json::array();
    for (const auto& d : record.flow) f.push_back({d.x(), d.y(), d.z()});
    j["flow"] = f;
    j["provenance"] = provenance_json(record.provenance);
    return j.dump(1) + "\n";
}

TransformRecord parse_transform_record(const std::string& text, const std::string& name, double tol)
{
    const ordered_json j = parse_json(text, name);
    check_type(j, "rigid_transform", name);
    const auto r = numbers(field(j, "rotation", name), 9, "rotation", name);
    const auto t = numbers(field(j, "translation", name), 3, "translation", name);
    TransformRecord rec;
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) rec.transform.R(row, col) = r[3 * row + col];
    rec.transform.t = Vec3(t[0], t[1], t[2]);
    try {
        validate(rec.transform, tol);
    } catch (const InvalidInput& e) {
        throw InvalidInput(name + ": rotation: " + e.what());
    }
    rec.provenance = read_provenance(j, name);
    return rec;
}

FlowRecord parse_flow_record(const std::string& text, const std::string& name)
{
    const ordered_json j = parse_json(text, name);
    check_type(j, "scene_flow", name);
    FlowRecord rec;
    const auto& src = field(j, "source", name);
    if (!src.is_string()) throw InvalidInput(name + ": 'source' must be a string");
    rec.source = src.get<std::string>();
    const auto& f = field(j, "flow", name);
    if (!f.is_array()) throw InvalidInput(name + ": 'flow' must be an N x 3 array");
    for (const auto& row : f) {
        const auto v = numbers(row, 3, "flow", name);
        rec.flow.emplace_back(v[0], v[1], v[2]);
    }
    if (j.contains("num_points") && j.at("num_points") != rec.flow.size())
        throw InvalidInput(name + ": 'num_points' disagrees with the flow array");
    rec.provenance = read_provenance(j, name);
    return rec;
}

void save_record(const TransformRecord& record, const std::filesystem::path& path)
{
    write_file(path, to_json(record));
}

void save_record(const FlowRecord& record, const std::filesystem::path& path) { write_file(path, to_json(record)); }

TransformRecord load_transform_record(const std::filesystem::path& path)
{
    return parse_transform_record(read_file(path), path.string());
}

FlowRecord load_flow_record(const std::filesystem::path& path)
{
    return parse_flow_record(read_file(path), path.string());
}

}  // namespace ddm
