#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ddm/core.hpp"

namespace ddm {

/// Malformed file contents. The message carries the file name and the line
/// (text formats) or byte offset (binary data) of the problem.
class ParseError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Well-formed input this reader does not handle, or an unknown extension.
class UnsupportedFormat : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

enum class PlyEncoding { Ascii, BinaryLittleEndian };

struct SaveOptions {
    PlyEncoding ply = PlyEncoding::BinaryLittleEndian;
    /// Written as comment lines at the top of the file.
    std::vector<std::string> comments;
};

/// Loads .obj, .ply or .xyz by extension (case-insensitive). OBJ files without
/// faces and PLY files without a face element load as point clouds. Polygons
/// with more than three corners are fan-triangulated.
Surface load_surface(const std::filesystem::path& path);

/// Coordinates are written with full double precision (ASCII) or as doubles
/// (binary PLY). A .xyz file cannot hold a mesh.
void save_surface(const Surface& surface, const std::filesystem::path& path, const SaveOptions& opts = {});

/// In-memory variants; `name` only labels error messages.
Surface parse_obj(const std::string& text, const std::string& name = "<obj>");
Surface parse_ply(const std::string& bytes, const std::string& name = "<ply>");
Surface parse_xyz(const std::string& text, const std::string& name = "<xyz>");
std::string format_obj(const Surface& surface, const std::vector<std::string>& comments = {});
std::string format_ply(const Surface& surface, PlyEncoding encoding, const std::vector<std::string>& comments = {});
std::string format_xyz(const PointCloud& cloud, const std::vector<std::string>& comments = {});

/// Whole file as bytes; throws InvalidInput if it cannot be read.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Points of a cloud, or the vertices of a mesh.
PointCloud as_point_cloud(const Surface& surface);

}  // namespace ddm
