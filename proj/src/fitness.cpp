#include "blockwhisker/fitness.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace bw {

double alpha(double x) {
    if (x <= 0) return 0.0;
    return x / (1.0 + x);
}

int controlFlowDistance(const Cfg& cfg, const std::vector<bool>& covered, int target) {
    if (target < 0 || target >= static_cast<int>(cfg.nodes.size())) return kUnreachable;
    if (covered[target]) return 0;
    std::vector<int> depth(cfg.nodes.size(), -1);
    depth[target] = 0;
    std::deque<int> queue{target};
    while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        for (int p : cfg.predecessors(node)) {
            if (depth[p] != -1) continue;
            depth[p] = depth[node] + 1;
            if (covered[p]) return depth[p];
            queue.push_back(p);
        }
    }
    return kUnreachable;
}

FitnessEngine::FitnessEngine(const Project& project)
    : cfg_(buildCfg(project)), cdg_(buildCdg(cfg_)) {
    for (size_t i = 0; i < cfg_.nodes.size(); ++i) {
        if (cfg_.nodes[i].kind == CfgNodeKind::Block) goals_.push_back(static_cast<int>(i));
    }
}

const TargetDistanceMap& FitnessEngine::distances(int goalNode) const {
    auto it = distanceCache_.find(goalNode);
    if (it == distanceCache_.end()) {
        it = distanceCache_.emplace(goalNode, targetDistances(cdg_, goalNode)).first;
    }
    return it->second;
}

std::vector<bool> FitnessEngine::coveredVector(const ExecutionTrace& trace) const {
    std::vector<bool> covered(cfg_.nodes.size(), false);
    if (cfg_.entry >= 0) covered[cfg_.entry] = true;
    for (size_t i = 0; i < cfg_.nodes.size(); ++i) {
        const CfgNode& n = cfg_.nodes[i];
        if (n.kind == CfgNodeKind::Block) {
            covered[i] = trace.covered.count(n.id) > 0;
        } else if (n.kind == CfgNodeKind::Event) {
            auto it = trace.eventOccurred.find(n.id.substr(4));  // strip "@ev:"
            covered[i] = it != trace.eventOccurred.end() && it->second;
        }
    }
    return covered;
}

bool FitnessEngine::coveredBy(const ExecutionTrace& trace, int goalNode) const {
    return trace.covered.count(cfg_.nodes[goalNode].id) > 0;
}

double FitnessEngine::infeasibleSentinel() const {
    return 2.0 * static_cast<double>(cfg_.nodes.size()) + 2.0;
}

double FitnessEngine::recordedDistance(const ExecutionTrace& trace, int node,
                                       const std::string& label) const {
    const CfgNode& n = cfg_.nodes[node];
    if (n.kind == CfgNodeKind::Event) {
        auto it = trace.eventOccurred.find(n.id.substr(4));
        const bool occurred = it != trace.eventOccurred.end() && it->second;
        if (label == "false") return occurred ? 1.0 : 0.0;
        return occurred ? 0.0 : 1.0;
    }
    auto it = trace.branches.find(n.id);
    if (it == trace.branches.end()) return 1.0;
    double d;
    if (label == "true") d = it->second.minTrue;
    else if (label == "false") d = it->second.minFalse;
    else d = std::min(it->second.minTrue, it->second.minFalse);
    if (d == kInf) return 1.0;
    return d;
}

double FitnessEngine::fitness(const ExecutionTrace& trace, int goalNode) const {
    return fitness(coveredVector(trace), trace, goalNode);
}

double FitnessEngine::fitness(const std::vector<bool>& covered, const ExecutionTrace& trace,
                              int goalNode) const {
    if (covered[goalNode]) return 0.0;
    const TargetDistanceMap& dist = distances(goalNode);
    const int hops = minCoveredHops(dist, covered);
    if (hops == kUnreachable) return infeasibleSentinel();
    const int level = std::max(0, hops - 1);

    // Branch distance at the closest executed control dependencies, taken
    // along edges that step one hop closer to the goal.
    double branch = kInf;
    std::set<int> nextDeps;
    for (size_t d = 0; d < covered.size(); ++d) {
        if (!covered[d] || dist.hops[d] != hops) continue;
        for (int ei : cdg_.edgesOutOf(static_cast<int>(d))) {
            const CdgEdge& edge = cdg_.edges[ei];
            if (dist.hops[edge.to] != hops - 1) continue;
            nextDeps.insert(edge.to);
            for (const std::string& label : edge.labels) {
                branch = std::min(branch, recordedDistance(trace, edge.from, label));
            }
        }
    }
    if (branch == kInf) branch = 1.0;

    double flow;
    if (branch > 0) {
        flow = 1.0;
    } else {
        int cfd = kUnreachable;
        for (int dep : nextDeps) {
            const int d = controlFlowDistance(cfg_, covered, dep);
            if (d == kUnreachable) continue;
            if (cfd == kUnreachable || d < cfd) cfd = d;
        }
        flow = cfd == kUnreachable ? 1.0 : alpha(static_cast<double>(cfd));
    }
    return 2.0 * level + alpha(branch) + flow;
}

std::vector<double> FitnessEngine::evaluateAll(const ExecutionTrace& trace) const {
    const std::vector<bool> covered = coveredVector(trace);
    std::vector<double> out;
    out.reserve(goals_.size());
    for (int g : goals_) out.push_back(fitness(covered, trace, g));
    return out;
}

}  // namespace bw
