#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddm/rigid.hpp"

namespace ddm {

/// Where a result came from.
struct Provenance {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_hash;
    int iterations = 0;
};

/// Rotation stored as 9 row-major numbers, translation as 3.
struct TransformRecord {
    RigidTransform transform;
    Provenance provenance;
};

/// One displacement per point of the source file.
struct FlowRecord {
    std::string source;
    std::vector<Vec3> flow;
    Provenance provenance;
};

std::string to_json(const TransformRecord& record);
std::string to_json(const FlowRecord& record);

/// Throws InvalidInput on malformed JSON, missing fields, or a rotation that
/// is not in SO(3) within `tol`.
TransformRecord parse_transform_record(const std::string& text, const std::string& name = "<transform>",
                                       double tol = 1e-6);
FlowRecord parse_flow_record(const std::string& text, const std::string& name = "<flow>");

void save_record(const TransformRecord& record, const std::filesystem::path& path);
void save_record(const FlowRecord& record, const std::filesystem::path& path);
TransformRecord load_transform_record(const std::filesystem::path& path);
FlowRecord load_flow_record(const std::filesystem::path& path);

}  // namespace ddm
