#include "ddm/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string_view>

namespace ddm {

namespace {

std::string at_line(const std::string& name, std::size_t line, const std::string& msg)
{
    return name + ":" + std::to_string(line) + ": " + msg;
}

std::string at_offset(const std::string& name, std::size_t offset, const std::string& msg)
{
    return name + ": byte offset " + std::to_string(offset) + ": " + msg;
}

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t b = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > b) out.push_back(s.substr(b, i - b));
    }
    return out;
}

std::optional<double> to_double(std::string_view tok)
{
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long long> to_integer(std::string_view tok)
{
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
    return v;
}

void append_number(std::string& out, double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

/// Visits each line with its 1-based number; strips a trailing '\r'.
template <typename F>
void for_each_line(std::string_view text, F&& fn)
{
    std::size_t line = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view l = text.substr(pos, end - pos);
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        ++line;
        if (!(end == text.size() && l.empty())) fn(l, line);
        pos = end + 1;
    }
}

std::string lower_extension(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

std::string single_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

Surface finish(std::vector<Vec3> vertices, std::vector<Face> faces)
{
    if (faces.empty()) return PointCloud{std::move(vertices)};
    return TriangleMesh{std::move(vertices), std::move(faces)};
}

// ---------------------------------------------------------------- PLY

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<PlyType> ply_type(std::string_view s)
{
    if (s == "char" || s == "int8") return PlyType::I8;
    if (s == "uchar" || s == "uint8") return PlyType::U8;
    if (s == "short" || s == "int16") return PlyType::I16;
    if (s == "ushort" || s == "uint16") return PlyType::U16;
    if (s == "int" || s == "int32") return PlyType::I32;
    if (s == "uint" || s == "uint32") return PlyType::U32;
    if (s == "float" || s == "float32") return PlyType::F32;
    if (s == "double" || s == "float64") return PlyType::F64;
    return std::nullopt;
}

std::size_t ply_size(PlyType t)
{
    switch (t) {
    case PlyType::I8:
    case PlyType::U8: return 1;
    case PlyType::I16:
    case PlyType::U16: return 2;
    case PlyType::I32:
    case PlyType::U32:
    case PlyType::F32: return 4;
    case PlyType::F64: return 8;
    }
    return 0;
}

bool ply_is_integer(PlyType t) { return t != PlyType::F32 && t != PlyType::F64; }

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::F64;
    bool is_list = false;
    PlyType count_type = PlyType::U8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
    std::size_t line = 0;
};

template <typename T>
T load_le(const char* p)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(T));
    }
    return v;
}

template <typename T>
void store_le(std::string& out, T v)
{
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(b, sizeof(T));
}

double decode(PlyType t, const char* p)
{
    switch (t) {
    case PlyType::I8: return load_le<std::int8_t>(p);
    case PlyType::U8: return load_le<std::uint8_t>(p);
    case PlyType::I16: return load_le<std::int16_t>(p);
    case PlyType::U16: return load_le<std::uint16_t>(p);
    case PlyType::I32: return load_le<std::int32_t>(p);
    case PlyType::U32: return load_le<std::uint32_t>(p);
    case PlyType::F32: return load_le<float>(p);
    case PlyType::F64: return load_le<double>(p);
    }
    return 0.0;
}

/// Sequential reader over the data section, in either encoding.
class PlyReader {
public:
    PlyReader(const std::string& bytes, std::size_t start, bool binary, std::size_t first_line,
              const std::string& name)
        : bytes_(bytes), pos_(start), binary_(binary), line_(first_line), name_(name)
    {
    }

    /// Position label for the value about to be read.
    std::string where(const std::string& msg) const
    {
        return binary_ ? at_offset(name_, pos_, msg) : at_line(name_, line_, msg);
    }

    double read(PlyType t)
    {
        if (binary_) {
            const std::size_t n = ply_size(t);
            if (pos_ + n > bytes_.size()) throw ParseError(where("unexpected end of data"));
            const double v = decode(t, bytes_.data() + pos_);
            pos_ += n;
            return v;
        }
        const std::string_view tok = next_token();
        if (ply_is_integer(t)) {
            const auto v = to_integer(tok);
            if (!v) throw ParseError(at_line(name_, token_line_, "expected an integer, got '" + std::string(tok) + "'"));
            return static_cast<double>(*v);
        }
        const auto v = to_double(tok);
        if (!v) throw ParseError(at_line(name_, token_line_, "expected a finite number, got '" + std::string(tok) + "'"));
        return *v;
    }

    /// Byte offset (binary) or line (ASCII) of the next value.
    std::size_t mark()
    {
        if (binary_) return pos_;
        skip_space();
        return line_;
    }

private:
    void skip_space()
    {
        while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            if (bytes_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string_view next_token()
    {
        skip_space();
        if (pos_ >= bytes_.size()) throw ParseError(at_line(name_, line_, "unexpected end of data"));
        const std::size_t b = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        token_line_ = line_;
        return std::string_view(bytes_).substr(b, pos_ - b);
    }

    const std::string& bytes_;
    std::size_t pos_;
    bool binary_;
    std::size_t line_;
    std::size_t token_line_ = 0;
    const std::string& name_;
};

}  // namespace

// ---------------------------------------------------------------- OBJ

Surface parse_obj(const std::string& text, const std::string& name)
{
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<std::size_t> face_lines;
    for_each_line(text, [&](std::string_view l, std::size_t line) {
        const auto tok = split_ws(l);
        if (tok.empty() || tok[0].front() == '#') return;
        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError(at_line(name, line, "vertex needs three coordinates"));
            Vec3 p;
            for (int k = 0; k < 3; ++k) {
                const auto v = to_double(tok[k + 1]);
                if (!v) throw ParseError(at_line(name, line, "bad coordinate '" + std::string(tok[k + 1]) + "'"));
                p[k] = *v;
            }
            vertices.push_back(p);
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw ParseError(at_line(name, line, "face needs at least three vertices"));
            std::vector<int> idx;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                const std::string_view first = tok[k].substr(0, tok[k].find('/'));
                const auto v = to_integer(first);
                if (!v || *v == 0) throw ParseError(at_line(name, line, "bad vertex index '" + std::string(tok[k]) + "'"));
                const long long i = *v > 0 ? *v - 1 : static_cast<long long>(vertices.size()) + *v;
                if (i < 0 || i >= static_cast<long long>(vertices.size()))
                    throw ParseError(at_line(name, line, "vertex index " + std::to_string(*v) + " out of range"));
                idx.push_back(static_cast<int>(i));
            }
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
                const Face f{idx[0], idx[k], idx[k + 1]};
                if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
                    throw ParseError(at_line(name, line, "face repeats a vertex"));
                faces.push_back(f);
            }
        }
        // Texture coordinates, normals, groups and materials carry no geometry here.
    });
    return finish(std::move(vertices), std::move(faces));
}

std::string format_obj(const Surface& surface, const std::vector<std::string>& comments)
{
    std::string out;
    for (const auto& c : comments) out += "# " + single_line(c) + "\n";
    for (const auto& p : element_positions(surface)) {
        out += "v ";
        append_number(out, p.x());
        out += ' ';
        append_number(out, p.y());
        out += ' ';
        append_number(out, p.z());
        out += '\n';
    }
    if (const auto* mesh = std::get_if<TriangleMesh>(&surface))
        for (const auto& f : mesh->faces)
            out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
    return out;
}

// ---------------------------------------------------------------- XYZ

Surface parse_xyz(const std::string& text, const std::string& name)
{
    std::vector<Vec3> points;
    for_each_line(text, [&](std::string_view l, std::size_t line) {
        const auto tok = split_ws(l);
        if (tok.empty() || tok[0].front() == '#') return;
        if (tok.size() < 3) throw ParseError(at_line(name, line, "expected three coordinates"));
        Vec3 p;
        for (int k = 0; k < 3; ++k) {
            const auto v = to_double(tok[k]);
            if (!v) throw ParseError(at_line(name, line, "bad coordinate '" + std::string(tok[k]) + "'"));
            p[k] = *v;
        }
        points.push_back(p);
    });
    return PointCloud{std::move(points)};
}

std::string format_xyz(const PointCloud& cloud, const std::vector<std::string>& comments)
{
    std::string out;
    for (const auto& c : comments) out += "# " + single_line(c) + "\n";
    for (const auto& p : cloud.points) {
        append_number(out, p.x());
        out += ' ';
        append_number(out, p.y());
        out += ' ';
        append_number(out, p.z());
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------- PLY

Surface parse_ply(const std::string& bytes, const std::string& name)
{
    std::vector<PlyElement> elements;
    bool binary = false, have_format = false;
    std::size_t pos = 0, line = 0;
    bool done = false;
    while (!done) {
        if (pos >= bytes.size()) throw ParseError(at_line(name, line + 1, "missing end_header"));
        const std::size_t end = std::min(bytes.find('\n', pos), bytes.size());
        std::string_view l = std::string_view(bytes).substr(pos, end - pos);
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        pos = std::min(end + 1, bytes.size());
        ++line;
        const auto tok = split_ws(l);
        if (line == 1) {
            if (tok.size() != 1 || tok[0] != "ply") throw ParseError(at_line(name, line, "not a PLY file"));
            continue;
        }
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "end_header") {
            done = true;
        } else if (tok[0] == "format") {
            if (tok.size() != 3) throw ParseError(at_line(name, line, "malformed format line"));
            if (tok[2] != "1.0") throw UnsupportedFormat(at_line(name, line, "PLY version " + std::string(tok[2])));
            if (tok[1] == "ascii")
                binary = false;
            else if (tok[1] == "binary_little_endian")
                binary = true;
            else if (tok[1] == "binary_big_endian")
                throw UnsupportedFormat(at_line(name, line, "big-endian PLY"));
            else
                throw ParseError(at_line(name, line, "unknown PLY format '" + std::string(tok[1]) + "'"));
            have_format = true;
        } else if (tok[0] == "element") {
            const auto n = tok.size() == 3 ? to_integer(tok[2]) : std::nullopt;
            if (!n || *n < 0) throw ParseError(at_line(name, line, "malformed element line"));
            elements.push_back({std::string(tok[1]), static_cast<std::size_t>(*n), {}, line});
        } else if (tok[0] == "property") {
            if (elements.empty()) throw ParseError(at_line(name, line, "property before any element"));
            PlyProperty p;
            if (tok.size() == 5 && tok[1] == "list") {
                const auto ct = ply_type(tok[2]), vt = ply_type(tok[3]);
                if (!ct || !vt) throw UnsupportedFormat(at_line(name, line, "unknown property type"));
                if (!ply_is_integer(*ct)) throw UnsupportedFormat(at_line(name, line, "non-integer list count type"));
                p = {std::string(tok[4]), *vt, true, *ct};
            } else if (tok.size() == 3) {
                const auto t = ply_type(tok[1]);
                if (!t) throw UnsupportedFormat(at_line(name, line, "unknown property type '" + std::string(tok[1]) + "'"));
                p = {std::string(tok[2]), *t, false, PlyType::U8};
            } else {
                throw ParseError(at_line(name, line, "malformed property line"));
            }
            elements.back().props.push_back(p);
        } else {
            throw ParseError(at_line(name, line, "unexpected header keyword '" + std::string(tok[0]) + "'"));
        }
    }
    if (!have_format) throw ParseError(at_line(name, line, "missing format line"));

    // Locate the coordinate and index properties and reject layouts we do not read.
    int vertex_el = -1, face_el = -1;
    std::array<int, 3> xyz{-1, -1, -1};
    int index_prop = -1;
    for (std::size_t e = 0; e < elements.size(); ++e) {
        const PlyElement& el = elements[e];
        if (el.name == "vertex") {
            vertex_el = static_cast<int>(e);
            for (std::size_t k = 0; k < el.props.size(); ++k) {
                const auto& p = el.props[k];
                if (p.is_list) throw UnsupportedFormat(at_line(name, el.line, "list property '" + p.name + "' on vertices"));
                if (p.name == "x") xyz[0] = static_cast<int>(k);
                if (p.name == "y") xyz[1] = static_cast<int>(k);
                if (p.name == "z") xyz[2] = static_cast<int>(k);
            }
            if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0)
                throw ParseError(at_line(name, el.line, "vertex element lacks x, y and z"));
            const PlyType t = el.props[xyz[0]].type;
            if (el.props[xyz[1]].type != t || el.props[xyz[2]].type != t)
                throw UnsupportedFormat(at_line(name, el.line, "mixed coordinate property types"));
        } else if (el.name == "face") {
            face_el = static_cast<int>(e);
            for (std::size_t k = 0; k < el.props.size(); ++k) {
                const auto& p = el.props[k];
                if (!p.is_list) continue;
                if (index_prop >= 0 || (p.name != "vertex_indices" && p.name != "vertex_index"))
                    throw UnsupportedFormat(at_line(name, el.line, "unexpected face list property '" + p.name + "'"));
                if (!ply_is_integer(p.type))
                    throw UnsupportedFormat(at_line(name, el.line, "non-integer vertex indices"));
                index_prop = static_cast<int>(k);
            }
            if (index_prop < 0 && el.count > 0)
                throw ParseError(at_line(name, el.line, "face element lacks vertex_indices"));
        }
    }
    if (vertex_el < 0) throw ParseError(name + ": no vertex element");

    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    PlyReader reader(bytes, pos, binary, line + 1, name);
    for (std::size_t e = 0; e < elements.size(); ++e) {
        const PlyElement& el = elements[e];
        for (std::size_t i = 0; i < el.count; ++i) {
            Vec3 p = Vec3::Zero();
            std::vector<long long> idx;
            std::size_t mark = reader.mark();
            for (std::size_t k = 0; k < el.props.size(); ++k) {
                const PlyProperty& prop = el.props[k];
                if (!prop.is_list) {
                    const double v = reader.read(prop.type);
                    if (static_cast<int>(e) == vertex_el)
                        for (int c = 0; c < 3; ++c)
                            if (xyz[c] == static_cast<int>(k)) p[c] = v;
                    continue;
                }
                const double n = reader.read(prop.count_type);
                if (n < 0) throw ParseError(reader.where("negative list length"));
                const bool keep = static_cast<int>(e) == face_el && static_cast<int>(k) == index_prop;
                if (keep) mark = reader.mark();
                for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
                    const double v = reader.read(prop.type);
                    if (keep) idx.push_back(static_cast<long long>(v));
                }
                if (keep && idx.size() < 3) throw ParseError(reader.where("face needs at least three vertices"));
            }
            if (static_cast<int>(e) == vertex_el) {
                if (!p.allFinite()) throw ParseError(reader.where("non-finite coordinate"));
                vertices.push_back(p);
            } else if (static_cast<int>(e) == face_el) {
                for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
                    faces.push_back({static_cast<int>(idx[0]), static_cast<int>(idx[k]), static_cast<int>(idx[k + 1])});
                    for (long long v : {idx[0], idx[k], idx[k + 1]})
                        if (v < 0 || v >= static_cast<long long>(elements[vertex_el].count))
                            throw ParseError((binary ? at_offset(name, mark, "") : at_line(name, mark, "")) +
                                             "vertex index " + std::to_string(v) + " out of range");
                    const Face& f = faces.back();
                    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
                        throw ParseError((binary ? at_offset(name, mark, "") : at_line(name, mark, "")) +
                                         "face repeats a vertex");
                }
            }
        }
    }
    return finish(std::move(vertices), std::move(faces));
}

std::string format_ply(const Surface& surface, PlyEncoding encoding, const std::vector<std::string>& comments)
{
    const auto& pts = element_positions(surface);
    const auto* mesh = std::get_if<TriangleMesh>(&surface);
    const bool binary = encoding == PlyEncoding::BinaryLittleEndian;
    std::string out = "ply\nformat ";
    out += binary ? "binary_little_endian 1.0\n" : "ascii 1.0\n";
    for (const auto& c : comments) out += "comment " + single_line(c) + "\n";
    out += "element vertex " + std::to_string(pts.size()) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    if (mesh) {
        out += "element face " + std::to_string(mesh->faces.size()) + "\n";
        out += "property list uchar int vertex_indices\n";
    }
    out += "end_header\n";
    for (const auto& p : pts) {
        for (int c = 0; c < 3; ++c) {
            if (binary) {
                store_le<double>(out, p[c]);
            } else {
                append_number(out, p[c]);
                out += c < 2 ? ' ' : '\n';
            }
        }
    }
    if (mesh) {
        for (const auto& f : mesh->faces) {
            if (binary) {
                store_le<std::uint8_t>(out, 3);
                for (int v : f) store_le<std::int32_t>(out, v);
            } else {
                out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- files

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw InvalidInput("cannot read '" + path.string() + "'");
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
}

Surface load_surface(const std::filesystem::path& path)
{
    const std::string ext = lower_extension(path);
    if (ext != ".obj" && ext != ".ply" && ext != ".xyz")
        throw UnsupportedFormat("'" + path.string() + "': unsupported extension (expected .obj, .ply or .xyz)");
    const std::string bytes = read_file(path);
    const std::string name = path.string();
    Surface s = ext == ".obj" ? parse_obj(bytes, name) : ext == ".ply" ? parse_ply(bytes, name) : parse_xyz(bytes, name);
    if (element_count(s) == 0) throw InvalidInput("'" + name + "' contains no points");
    return s;
}

void save_surface(const Surface& surface, const std::filesystem::path& path, const SaveOptions& opts)
{
    validate(surface);
    const std::string ext = lower_extension(path);
    if (ext == ".obj") {
        write_file(path, format_obj(surface, opts.comments));
    } else if (ext == ".ply") {
        write_file(path, format_ply(surface, opts.ply, opts.comments));
    } else if (ext == ".xyz") {
        if (is_mesh(surface)) throw UnsupportedFormat("'" + path.string() + "': .xyz cannot store faces");
        write_file(path, format_xyz(std::get<PointCloud>(surface), opts.comments));
    } else {
        throw UnsupportedFormat("'" + path.string() + "': unsupported extension (expected .obj, .ply or .xyz)");
    }
}

PointCloud as_point_cloud(const Surface& surface) { return PointCloud{element_positions(surface)}; }

}  // namespace ddm
