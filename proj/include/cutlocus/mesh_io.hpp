#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cutlocus/error.hpp"
#include "cutlocus/mesh.hpp"

namespace cutlocus {

enum class MeshFormat { Off, Obj, Ply };

inline MeshFormat format_from_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".off") return MeshFormat::Off;
    if (ext == ".obj") return MeshFormat::Obj;
    if (ext == ".ply") return MeshFormat::Ply;
    throw Error(ErrorKind::Validation, "cannot infer mesh format from extension '" + ext + "'");
}

namespace detail {

/// Strips `#` comments and splits the remainder into whitespace tokens.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::optional<std::string> next() {
        while (true) {
            std::string tok;
            if (line_ >> tok) return tok;
            std::string raw;
            if (!std::getline(in_, raw)) return std::nullopt;
            ++line_no_;
            if (auto pos = raw.find('#'); pos != std::string::npos) raw.erase(pos);
            line_.clear();
            line_.str(raw);
        }
    }

    std::string expect(const char* what) {
        auto tok = next();
        if (!tok) throw Error(ErrorKind::Parse, std::string("unexpected end of file while reading ") + what);
        return *tok;
    }

    double number(const char* what) {
        const auto tok = expect(what);
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no_) + ": expected " + what + ", got '" + tok + "'");
        }
    }

    long integer(const char* what) {
        const auto tok = expect(what);
        try {
            std::size_t used = 0;
            const long v = std::stol(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no_) + ": expected " + what + ", got '" + tok + "'");
        }
    }

    int line() const { return line_no_; }

private:
    std::istream& in_;
    std::istringstream line_;
    int line_no_ = 0;
};

inline RawMesh parse_off(std::istream& in) {
    TokenReader rd(in);
    const auto magic = rd.expect("OFF header");
    if (magic != "OFF") throw Error(ErrorKind::Parse, "missing OFF header");
    const long nv = rd.integer("vertex count");
    const long nf = rd.integer("face count");
    rd.integer("edge count");
    if (nv < 0 || nf < 0) throw Error(ErrorKind::Parse, "negative element count");
    RawMesh m;
    m.vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        const double x = rd.number("x"), y = rd.number("y"), z = rd.number("z");
        m.vertices.emplace_back(x, y, z);
    }
    for (long f = 0; f < nf; ++f) {
        const long n = rd.integer("face arity");
        if (n != 3) throw Error(ErrorKind::Parse, "face " + std::to_string(f) + " has " + std::to_string(n) + " vertices; only triangles are supported");
        Tri t{};
        for (auto& v : t) v = static_cast<int>(rd.integer("vertex index"));
        m.triangles.push_back(t);
    }
    return m;
}

inline RawMesh parse_obj(std::istream& in) {
    RawMesh m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed vertex");
            m.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                // v, v/vt, v//vn, v/vt/vn: only the position index matters.
                const std::string head = tok.substr(0, tok.find('/'));
                long v = 0;
                try {
                    std::size_t used = 0;
                    v = std::stol(head, &used);
                    if (used != head.size()) throw std::invalid_argument(head);
                } catch (const std::exception&) {
                    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed face index '" + tok + "'");
                }
                if (v == 0) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": OBJ indices are 1-based");
                idx.push_back(static_cast<int>(v > 0 ? v - 1 : static_cast<long>(m.vertices.size()) + v));
            }
            if (idx.size() != 3) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": only triangular faces are supported");
            m.triangles.push_back({idx[0], idx[1], idx[2]});
        }
        // Other records (vn, vt, o, g, s, usemtl, ...) carry nothing we need.
    }
    return m;
}

inline RawMesh parse_ply(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw Error(ErrorKind::Parse, "missing ply magic");

    struct Element {
        std::string name;
        long count = 0;
        std::vector<std::string> props;  // list properties stored as "list:<name>"
    };
    std::vector<Element> elements;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = (fmt == "ascii");
        } else if (kw == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (kw == "property") {
            if (elements.empty()) throw Error(ErrorKind::Parse, "property before element");
            std::string type, a, b, name;
            ls >> type;
            if (type == "list") {
                ls >> a >> b >> name;
                elements.back().props.push_back("list:" + name);
            } else {
                ls >> name;
                elements.back().props.push_back(name);
            }
        } else if (kw == "end_header") {
            break;
        }
    }
    if (!ascii) throw Error(ErrorKind::Parse, "only ASCII PLY is supported");

    RawMesh m;
    TokenReader rd(in);
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            const auto find = [&](const char* n) {
                const auto it = std::find(e.props.begin(), e.props.end(), n);
                if (it == e.props.end()) throw Error(ErrorKind::Parse, std::string("vertex element lacks property ") + n);
                return static_cast<std::size_t>(it - e.props.begin());
            };
            const std::size_t ix = find("x"), iy = find("y"), iz = find("z");
            for (long i = 0; i < e.count; ++i) {
                Vec3 p;
                for (std::size_t k = 0; k < e.props.size(); ++k) {
                    if (e.props[k].rfind("list:", 0) == 0) {
                        const long n = rd.integer("list length");
                        for (long j = 0; j < n; ++j) rd.number("list entry");
                        continue;
                    }
                    const double v = rd.number("vertex property");
                    if (k == ix) p.x() = v;
                    if (k == iy) p.y() = v;
                    if (k == iz) p.z() = v;
                }
                m.vertices.push_back(p);
            }
        } else if (e.name == "face") {
            for (long f = 0; f < e.count; ++f) {
                bool got = false;
                for (const auto& prop : e.props) {
                    if (prop.rfind("list:", 0) == 0) {
                        const long n = rd.integer("face arity");
                        std::vector<long> idx;
                        for (long j = 0; j < n; ++j) idx.push_back(rd.integer("vertex index"));
                        const bool is_vertex_list = prop == "list:vertex_indices" || prop == "list:vertex_index";
                        if (is_vertex_list && !got) {
                            if (n != 3) throw Error(ErrorKind::Parse, "face " + std::to_string(f) + " is not a triangle");
                            m.triangles.push_back({static_cast<int>(idx[0]), static_cast<int>(idx[1]), static_cast<int>(idx[2])});
                            got = true;
                        }
                    } else {
                        rd.number("face property");
                    }
                }
                if (!got) throw Error(ErrorKind::Parse, "face element lacks vertex_indices");
            }
        } else {
            for (long i = 0; i < e.count; ++i) {
                for (const auto& prop : e.props) {
                    if (prop.rfind("list:", 0) == 0) {
                        const long n = rd.integer("list length");
                        for (long j = 0; j < n; ++j) rd.number("list entry");
                    } else {
                        rd.number("property");
                    }
                }
            }
        }
    }
    return m;
}

}  // namespace detail

inline RawMesh parse_mesh(std::istream& in, MeshFormat format) {
    switch (format) {
        case MeshFormat::Off: return detail::parse_off(in);
        case MeshFormat::Obj: return detail::parse_obj(in);
        case MeshFormat::Ply: return detail::parse_ply(in);
    }
    throw Error(ErrorKind::Validation, "unknown mesh format");
}

inline RawMesh read_raw_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    return parse_mesh(in, format.value_or(format_from_path(path)));
}

/// Reads and validates a mesh; throws on any parse, topology or geometry violation.
inline SurfaceMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = std::nullopt) {
    return SurfaceMesh(read_raw_mesh(path, format));
}

inline void write_mesh(std::ostream& os, const RawMesh& m, MeshFormat format) {
    os.precision(17);
    switch (format) {
        case MeshFormat::Off:
            os << "OFF\n" << m.vertices.size() << ' ' << m.triangles.size() << " 0\n";
            for (const auto& p : m.vertices) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
            for (const auto& t : m.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
            break;
        case MeshFormat::Obj:
            for (const auto& p : m.vertices) os << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
            for (const auto& t : m.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
            break;
        case MeshFormat::Ply:
            os << "ply\nformat ascii 1.0\nelement vertex " << m.vertices.size()
               << "\nproperty double x\nproperty double y\nproperty double z\nelement face " << m.triangles.size()
               << "\nproperty list uchar int vertex_indices\nend_header\n";
            for (const auto& p : m.vertices) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
            for (const auto& t : m.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
            break;
    }
}

inline void save_mesh(const std::filesystem::path& path, const RawMesh& m, std::optional<MeshFormat> format = std::nullopt) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    write_mesh(out, m, format.value_or(format_from_path(path)));
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace cutlocus
