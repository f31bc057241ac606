#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cutlocus {

/// Category of a failure. The CLI maps these onto process exit codes.
enum class ErrorKind {
    Validation,   ///< bad configuration or precondition
    Parse,        ///< malformed input file
    Topology,     ///< boundary / non-manifold / inconsistently oriented mesh
    Geometry,     ///< degenerate triangles, duplicate vertices
    Projection,   ///< point outside the tubular neighborhood of a surface
    Dimension,    ///< vector length does not match the space
    Io,           ///< file could not be read or written
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "validation error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Topology: return "topology error";
        case ErrorKind::Geometry: return "geometry error";
        case ErrorKind::Projection: return "projection error";
        case ErrorKind::Dimension: return "dimension mismatch";
        case ErrorKind::Io: return "I/O error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, std::vector<std::string> details = {})
        : std::runtime_error(compose(kind, what, details)), kind_(kind), details_(std::move(details)) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Individual violations, one entry each (e.g. every boundary edge of a mesh).
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    static std::string compose(ErrorKind kind, const std::string& what,
                               const std::vector<std::string>& details) {
        std::string msg = std::string(to_string(kind)) + ": " + what;
        for (const auto& d : details) msg += "\n  " + d;
        return msg;
    }

    ErrorKind kind_;
    std::vector<std::string> details_;
};

inline void require(bool cond, const std::string& what, ErrorKind kind = ErrorKind::Validation) {
    if (!cond) throw Error(kind, what);
}

}  // namespace cutlocus
