#include "scene2prompt/ingest.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

using nlohmann::json;

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

struct PlyProperty {
    std::string name;
    PlyType type;
};

std::size_t ply_type_size(PlyType t) {
    switch (t) {
        case PlyType::i8:
        case PlyType::u8:
            return 1;
        case PlyType::i16:
        case PlyType::u16:
            return 2;
        case PlyType::i32:
        case PlyType::u32:
        case PlyType::f32:
            return 4;
        case PlyType::f64:
            return 8;
    }
    return 0;
}

PlyType ply_type_from_name(const std::string& name, const std::filesystem::path& path) {
    if (name == "char" || name == "int8") return PlyType::i8;
    if (name == "uchar" || name == "uint8") return PlyType::u8;
    if (name == "short" || name == "int16") return PlyType::i16;
    if (name == "ushort" || name == "uint16") return PlyType::u16;
    if (name == "int" || name == "int32") return PlyType::i32;
    if (name == "uint" || name == "uint32") return PlyType::u32;
    if (name == "float" || name == "float32") return PlyType::f32;
    if (name == "double" || name == "float64") return PlyType::f64;
    throw ParseError(path.string() + ": unsupported property type '" + name + "'");
}

double decode_scalar(const std::uint8_t* p, PlyType t) {
    auto le = [&](int n) {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= std::uint64_t(p[i]) << (8 * i);
        }
        return v;
    };
    switch (t) {
        case PlyType::i8:
            return double(std::int8_t(p[0]));
        case PlyType::u8:
            return double(p[0]);
        case PlyType::i16:
            return double(std::int16_t(le(2)));
        case PlyType::u16:
            return double(std::uint16_t(le(2)));
        case PlyType::i32:
            return double(std::int32_t(le(4)));
        case PlyType::u32:
            return double(std::uint32_t(le(4)));
        case PlyType::f32:
            return double(std::bit_cast<float>(std::uint32_t(le(4))));
        case PlyType::f64:
            return std::bit_cast<double>(le(8));
    }
    return 0.0;
}

void encode_f32_le(std::string& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    out.push_back(char(bits & 0xff));
    out.push_back(char((bits >> 8) & 0xff));
    out.push_back(char((bits >> 16) & 0xff));
    out.push_back(char((bits >> 24) & 0xff));
}

void encode_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

}  // namespace

std::vector<ColoredPoint> load_point_cloud(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    const auto fail = [&](std::size_t offset, const std::string& what) -> void {
        throw ParseError(path.string() + ": " + what + " (byte offset " +
                         std::to_string(offset) + ")");
    };

    // Header: line-oriented up to "end_header".
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        if (pos >= data.size()) {
            fail(pos, "unexpected end of header");
        }
        const std::size_t eol = data.find('\n', pos);
        const std::size_t end = (eol == std::string::npos) ? data.size() : eol;
        std::string line = data.substr(pos, end - pos);
        pos = (eol == std::string::npos) ? data.size() : eol + 1;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        return line;
    };

    if (next_line() != "ply") {
        fail(0, "malformed header: missing 'ply' magic");
    }
    bool binary = false;
    bool format_seen = false;
    std::size_t vertex_count = 0;
    bool in_vertex_element = false;
    bool vertex_seen = false;
    std::vector<PlyProperty> props;

    while (true) {
        const std::size_t line_offset = pos;
        const std::string line = next_line();
        const auto toks = split_ws(line);
        if (toks.empty()) {
            continue;
        }
        if (toks[0] == "comment" || toks[0] == "obj_info") {
            continue;
        }
        if (toks[0] == "format") {
            if (toks.size() != 3) {
                fail(line_offset, "malformed format line");
            }
            if (toks[1] == "ascii") {
                binary = false;
            } else if (toks[1] == "binary_little_endian") {
                binary = true;
            } else {
                fail(line_offset, "unsupported format '" + toks[1] + "'");
            }
            format_seen = true;
        } else if (toks[0] == "element") {
            if (toks.size() != 3) {
                fail(line_offset, "malformed element line");
            }
            if (toks[1] == "vertex") {
                vertex_count = std::stoull(toks[2]);
                in_vertex_element = true;
                vertex_seen = true;
            } else {
                if (!vertex_seen && std::stoull(toks[2]) > 0) {
                    fail(line_offset,
                         "unsupported property layout: element '" + toks[1] +
                             "' precedes vertex data");
                }
                in_vertex_element = false;
            }
        } else if (toks[0] == "property") {
            if (!in_vertex_element) {
                continue;  // properties of trailing elements we never read
            }
            if (toks.size() == 3) {
                props.push_back({toks[2], ply_type_from_name(toks[1], path)});
            } else if (toks.size() >= 2 && toks[1] == "list") {
                fail(line_offset, "unsupported property layout: list property on vertex");
            } else {
                fail(line_offset, "malformed property line");
            }
        } else if (toks[0] == "end_header") {
            break;
        } else {
            fail(line_offset, "malformed header: unknown keyword '" + toks[0] + "'");
        }
    }
    if (!format_seen) {
        fail(pos, "malformed header: missing format line");
    }
    if (!vertex_seen) {
        fail(pos, "malformed header: no vertex element");
    }

    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
    for (std::size_t i = 0; i < props.size(); ++i) {
        const auto& p = props[i];
        const int idx = int(i);
        if (p.name == "x") ix = idx;
        else if (p.name == "y") iy = idx;
        else if (p.name == "z") iz = idx;
        else if (p.name == "red") ir = idx;
        else if (p.name == "green") ig = idx;
        else if (p.name == "blue") ib = idx;
    }
    if (ix < 0 || iy < 0 || iz < 0) {
        fail(pos, "unsupported property layout: vertex needs x, y, z");
    }
    for (int idx : {ix, iy, iz}) {
        if (props[idx].type != PlyType::f32 && props[idx].type != PlyType::f64) {
            fail(pos, "unsupported property layout: coordinates must be float");
        }
    }
    const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;
    if (has_rgb) {
        for (int idx : {ir, ig, ib}) {
            if (props[idx].type != PlyType::u8) {
                fail(pos, "unsupported property layout: colors must be uchar");
            }
        }
    }

    std::vector<ColoredPoint> points;
    points.reserve(vertex_count);

    if (binary) {
        std::size_t stride = 0;
        std::vector<std::size_t> offsets(props.size());
        for (std::size_t i = 0; i < props.size(); ++i) {
            offsets[i] = stride;
            stride += ply_type_size(props[i].type);
        }
        const std::size_t need = vertex_count * stride;
        if (data.size() - pos < need) {
            fail(data.size(), "truncated body: expected " + std::to_string(need) +
                                  " bytes of vertex data, have " +
                                  std::to_string(data.size() - pos));
        }
        const auto* base = reinterpret_cast<const std::uint8_t*>(data.data()) + pos;
        for (std::size_t v = 0; v < vertex_count; ++v) {
            const auto* rec = base + v * stride;
            ColoredPoint cp;
            cp.position.x = decode_scalar(rec + offsets[ix], props[ix].type);
            cp.position.y = decode_scalar(rec + offsets[iy], props[iy].type);
            cp.position.z = decode_scalar(rec + offsets[iz], props[iz].type);
            if (has_rgb) {
                cp.rgb = {std::uint8_t(decode_scalar(rec + offsets[ir], props[ir].type)),
                          std::uint8_t(decode_scalar(rec + offsets[ig], props[ig].type)),
                          std::uint8_t(decode_scalar(rec + offsets[ib], props[ib].type))};
            }
            points.push_back(cp);
        }
    } else {
        for (std::size_t v = 0; v < vertex_count; ++v) {
            const std::size_t line_offset = pos;
            if (pos >= data.size()) {
                fail(data.size(), "truncated body: expected " +
                                      std::to_string(vertex_count) + " vertices, got " +
                                      std::to_string(v));
            }
            const std::string line = next_line();
            const auto toks = split_ws(line);
            if (toks.size() != props.size()) {
                fail(line_offset, "vertex " + std::to_string(v) + " has " +
                                      std::to_string(toks.size()) + " values, expected " +
                                      std::to_string(props.size()));
            }
            ColoredPoint cp;
            cp.position.x = std::stod(toks[ix]);
            cp.position.y = std::stod(toks[iy]);
            cp.position.z = std::stod(toks[iz]);
            if (has_rgb) {
                cp.rgb = {std::uint8_t(std::stoul(toks[ir])),
                          std::uint8_t(std::stoul(toks[ig])),
                          std::uint8_t(std::stoul(toks[ib]))};
            }
            points.push_back(cp);
        }
    }
    return points;
}

void save_point_cloud_ply(const std::filesystem::path& path,
                          const std::vector<ColoredPoint>& points, bool binary) {
    std::string out;
    out += "ply\n";
    out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
    out += "element vertex " + std::to_string(points.size()) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out += "end_header\n";
    if (binary) {
        for (const auto& cp : points) {
            encode_f32_le(out, float(cp.position.x));
            encode_f32_le(out, float(cp.position.y));
            encode_f32_le(out, float(cp.position.z));
            out.push_back(char(cp.rgb[0]));
            out.push_back(char(cp.rgb[1]));
            out.push_back(char(cp.rgb[2]));
        }
    } else {
        for (const auto& cp : points) {
            std::ostringstream line;
            line << float(cp.position.x) << ' ' << float(cp.position.y) << ' '
                 << float(cp.position.z) << ' ' << int(cp.rgb[0]) << ' ' << int(cp.rgb[1])
                 << ' ' << int(cp.rgb[2]) << '\n';
            out += line.str();
        }
    }
    write_file(path, out);
}

ProposalFile load_proposals(const std::filesystem::path& path,
                            const ProposalFileOptions& opts) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    const auto fail = [&](const std::string& what) -> void {
        throw ParseError(path.string() + ": " + what);
    };
    if (!doc.is_object() || !doc.contains("scene_id") || !doc.contains("proposals")) {
        fail("expected object with 'scene_id' and 'proposals'");
    }
    ProposalFile file;
    file.scene_id = doc["scene_id"].get<std::string>();
    const auto& arr = doc["proposals"];
    if (!arr.is_array()) {
        fail("'proposals' must be an array");
    }
    static const char* axes = "xyz";
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& p = arr[i];
        const std::string at = "proposal " + std::to_string(i);
        if (!p.contains("label") || !p.contains("box_min") || !p.contains("box_max")) {
            fail(at + ": needs 'label', 'box_min', 'box_max'");
        }
        ObjectProposal op;
        op.class_label = to_lower(trim(p["label"].get<std::string>()));
        if (op.class_label.empty()) {
            fail(at + ": empty label");
        }
        const auto& bmin = p["box_min"];
        const auto& bmax = p["box_max"];
        if (!bmin.is_array() || bmin.size() != 3 || !bmax.is_array() || bmax.size() != 3) {
            fail(at + ": box_min/box_max must be arrays of 3 numbers");
        }
        double mn[3], mx[3];
        for (int a = 0; a < 3; ++a) {
            mn[a] = bmin[a].get<double>();
            mx[a] = bmax[a].get<double>();
            if (!std::isfinite(mn[a]) || !std::isfinite(mx[a])) {
                fail(at + ": non-finite box coordinate on axis " + axes[a]);
            }
            if (mn[a] > mx[a]) {
                fail(at + ": box_min." + axes[a] + " > box_max." + std::string(1, axes[a]));
            }
        }
        op.box = {{mn[0], mn[1], mn[2]}, {mx[0], mx[1], mx[2]}};
        if (p.contains("confidence")) {
            op.confidence = p["confidence"].get<double>();
            if (!(op.confidence >= 0.0 && op.confidence <= 1.0)) {
                fail(at + ": confidence " + std::to_string(op.confidence) +
                     " outside [0,1]");
            }
        } else {
            op.confidence = 1.0;
        }
        if (op.confidence >= opts.min_confidence) {
            file.proposals.push_back(std::move(op));
        }
    }
    return file;
}

void save_proposals(const std::filesystem::path& path, const ProposalFile& file) {
    json doc;
    doc["scene_id"] = file.scene_id;
    doc["proposals"] = json::array();
    for (const auto& p : file.proposals) {
        json jp;
        jp["label"] = p.class_label;
        jp["box_min"] = {p.box.min.x, p.box.min.y, p.box.min.z};
        jp["box_max"] = {p.box.max.x, p.box.max.y, p.box.max.z};
        jp["confidence"] = p.confidence;
        doc["proposals"].push_back(std::move(jp));
    }
    write_if_changed(path, doc.dump(2) + "\n");
}

AgentSituation load_situation(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.contains("position") || !doc["position"].is_array() ||
        doc["position"].size() != 3) {
        throw ParseError(path.string() + ": 'position' must be [x,y,z]");
    }
    AgentSituation s;
    s.position = {doc["position"][0].get<double>(), doc["position"][1].get<double>(),
                  doc["position"][2].get<double>()};
    const bool has_yaw = doc.contains("yaw");
    const bool has_quat = doc.contains("rotation_wxyz");
    if (has_yaw == has_quat) {
        throw ParseError(path.string() + ": need exactly one of 'yaw' or 'rotation_wxyz'");
    }
    if (has_yaw) {
        s.yaw = normalize_angle(doc["yaw"].get<double>());
    } else {
        const auto& q = doc["rotation_wxyz"];
        if (!q.is_array() || q.size() != 4) {
            throw ParseError(path.string() + ": 'rotation_wxyz' must be [w,x,y,z]");
        }
        s.yaw = yaw_from_quaternion({q[0].get<double>(), q[1].get<double>(),
                                     q[2].get<double>(), q[3].get<double>()});
    }
    if (doc.contains("description")) {
        s.description = doc["description"].get<std::string>();
    }
    return s;
}

PatchFeatures load_patch_features(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    if (data.size() < 16) {
        throw ParseError(path.string() + ": file too small for header (" +
                         std::to_string(data.size()) + " bytes)");
    }
    if (data.compare(0, 4, "HVF1") != 0) {
        throw ParseError(path.string() + ": bad magic, expected 'HVF1'");
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
    auto u32 = [&](std::size_t off) {
        return std::uint32_t(p[off]) | (std::uint32_t(p[off + 1]) << 8) |
               (std::uint32_t(p[off + 2]) << 16) | (std::uint32_t(p[off + 3]) << 24);
    };
    PatchFeatures f;
    f.view_count = u32(4);
    f.patches_per_view = u32(8);
    f.dim = u32(12);
    const std::size_t count =
        std::size_t(f.view_count) * f.patches_per_view * f.dim;
    const std::size_t expected = 16 + count * 4;
    if (data.size() != expected) {
        throw ParseError(path.string() + ": size mismatch, expected " +
                         std::to_string(expected) + " bytes, actual " +
                         std::to_string(data.size()));
    }
    f.views.reserve(f.view_count);
    std::size_t off = 16;
    for (std::uint32_t v = 0; v < f.view_count; ++v) {
        Eigen::MatrixXd m(f.patches_per_view, f.dim);
        for (std::uint32_t r = 0; r < f.patches_per_view; ++r) {
            for (std::uint32_t c = 0; c < f.dim; ++c) {
                const float val = std::bit_cast<float>(u32(off));
                off += 4;
                if (!std::isfinite(val)) {
                    throw ParseError(path.string() + ": non-finite value at view " +
                                     std::to_string(v) + ", patch " + std::to_string(r) +
                                     ", dim " + std::to_string(c));
                }
                m(r, c) = double(val);
            }
        }
        f.views.push_back(std::move(m));
    }
    return f;
}

void save_patch_features(const std::filesystem::path& path, const PatchFeatures& features) {
    if (features.views.size() != features.view_count) {
        throw std::invalid_argument("view count does not match header");
    }
    std::string out = "HVF1";
    encode_u32_le(out, features.view_count);
    encode_u32_le(out, features.patches_per_view);
    encode_u32_le(out, features.dim);
    for (const auto& m : features.views) {
        if (m.rows() != features.patches_per_view || m.cols() != features.dim) {
            throw std::invalid_argument("view matrix shape does not match header");
        }
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                encode_f32_le(out, float(m(r, c)));
            }
        }
    }
    write_file(path, out);
}

}  // namespace s2p
