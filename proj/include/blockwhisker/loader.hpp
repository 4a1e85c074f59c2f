#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "blockwhisker/project.hpp"

namespace bw {

struct LoadError : std::runtime_error {
    explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

struct LoadResult {
    Project project;
    std::vector<std::string> warnings; // dangling broadcast/clone/backdrop refs etc.
};

// Parses a project document (JSON text). Throws LoadError on malformed
// documents, duplicate block ids, unknown opcodes or bad arity; soft
// issues (dangling references, dead scripts) land in warnings.
LoadResult loadProject(const std::string& jsonText);
LoadResult loadProjectFile(const std::string& path);

// Canonical serialization; loadProject(serializeProject(p)) round-trips.
std::string serializeProject(const Project& project);

} // namespace bw
