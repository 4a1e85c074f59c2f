#pragma once

#include <map>
#include <vector>

#include "blockwhisker/graphs.hpp"
#include "blockwhisker/vm.hpp"

namespace bw {

// Normalization into [0,1).
double alpha(double x);

// Unit-weight shortest path from the nearest covered node to the target over
// CFG edges (BFS over predecessors). kUnreachable when no covered node can
// reach the target.
int controlFlowDistance(const Cfg& cfg, const std::vector<bool>& covered, int target);

// Per-project fitness: CFG and CDG are built once, distance maps per target
// are cached. Goals are all hat and statement blocks of the project.
class FitnessEngine {
public:
    explicit FitnessEngine(const Project& project);

    const Cfg& cfg() const { return cfg_; }
    const Cdg& cdg() const { return cdg_; }

    // Goal ordinals index goals(); each entry is a CFG node index.
    const std::vector<int>& goals() const { return goals_; }
    const std::string& goalId(int goal) const {
        return cfg_.nodes[static_cast<std::size_t>(goals_[static_cast<std::size_t>(goal)])].id;
    }
    int goalCount() const { return static_cast<int>(goals_.size()); }

    // Node-indexed coverage: entry, executed blocks, occurred events.
    std::vector<bool> coveredVector(const ExecutionTrace& trace) const;

    double fitness(const ExecutionTrace& trace, int goalNode) const;
    double fitness(const std::vector<bool>& covered, const ExecutionTrace& trace,
                   int goalNode) const;
    // One value per entry of goals(), sharing a single covered vector.
    std::vector<double> evaluateAll(const ExecutionTrace& trace) const;

    bool coveredBy(const ExecutionTrace& trace, int goalNode) const;

    // Large finite value used when no covered node governs the target.
    double infeasibleSentinel() const;

    const TargetDistanceMap& distances(int goalNode) const;

private:
    double recordedDistance(const ExecutionTrace& trace, int node,
                            const std::string& label) const;

    Cfg cfg_;
    Cdg cdg_;
    std::vector<int> goals_;
    mutable std::map<int, TargetDistanceMap> distanceCache_;
};

}  // namespace bw
