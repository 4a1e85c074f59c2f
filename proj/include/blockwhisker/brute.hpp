#pragma once

#include <set>
#include <string>
#include <vector>

#include "blockwhisker/events.hpp"
#include "blockwhisker/project.hpp"

namespace bw {

struct BruteForceResult {
    bool refused = false;
    double estimatedExecutions = 0;
    long long bound = 0;
    long long executions = 0;
    std::set<std::string> covered;  // block ids reachable within the grid
    int totalBlocks = 0;
};

// Ground-truth coverage oracle for tiny projects: executes every event
// sequence up to maxLen, instantiating open parameters from the {1, 10}
// duration grid (TypeText enumerates the project's text pool). Refuses when
// the sequence count would exceed `bound`.
BruteForceResult bruteForce(const Project& project, const EventContext& ctx, int maxLen,
                            int acceleration = 1, long long bound = 200000);

}  // namespace bw
