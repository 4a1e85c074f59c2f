#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "blockwhisker/project.hpp"

namespace bw {

// Interprocedural control flow graph over one project. Nodes are statement
// blocks plus a few artificial nodes: a shared entry/exit pair and one event
// node per hat script. Edges carry an optional branch label ("true"/"false",
// empty for unconditional flow).
enum class CfgNodeKind { Entry, Exit, Event, Block };

struct CfgNode {
    std::string id;   // "@entry", "@exit", "@ev:<hatId>", or the block id
    CfgNodeKind kind = CfgNodeKind::Block;
    std::string label;          // human-readable, for dumps
    const Block* block = nullptr;  // null for artificial nodes
};

struct CfgEdge {
    int from = -1;
    int to = -1;
    std::string label;  // "", "true", "false"
};

class Cfg {
public:
    std::vector<CfgNode> nodes;
    std::vector<CfgEdge> edges;

    int entry = -1;
    int exit = -1;

    int addNode(std::string id, CfgNodeKind kind, std::string label,
                const Block* block = nullptr);
    void addEdge(int from, int to, std::string label = "");
    // Builds successor/predecessor adjacency. Call after the last addEdge.
    void finalize();

    int indexOf(const std::string& id) const;
    const std::vector<int>& successors(int node) const { return succ_[node]; }
    const std::vector<int>& predecessors(int node) const { return pred_[node]; }
    // Labels of all edges from -> to (parallel edges with distinct labels are
    // kept separate).
    std::vector<std::string> edgeLabels(int from, int to) const;

    std::string toDot() const;

private:
    std::map<std::string, int> byId_;
    std::vector<std::vector<int>> succ_;
    std::vector<std::vector<int>> pred_;
};

Cfg buildCfg(const Project& project);

// Control dependence graph derived from a CFG via postdominance. An edge
// n -> m with label set L means m is control dependent on n, and taking any
// branch in L from n makes execution reach m.
struct CdgEdge {
    int from = -1;
    int to = -1;
    std::set<std::string> labels;
};

class Cdg {
public:
    const Cfg* cfg = nullptr;
    std::vector<CdgEdge> edges;

    void finalize(int nodeCount);
    // Edges n -> m for fixed m (dependencies governing m).
    const std::vector<int>& edgesInto(int node) const { return into_[node]; }
    const std::vector<int>& edgesOutOf(int node) const { return outOf_[node]; }

    std::string toDot() const;

private:
    std::vector<std::vector<int>> into_;
    std::vector<std::vector<int>> outOf_;
};

// Postdominator sets, one bitset (as vector<bool>) per node. Exposed so the
// acceptance tests can compare against an independent oracle.
std::vector<std::vector<bool>> postdominators(const Cfg& cfg);

Cdg buildCdg(const Cfg& cfg);

// Hop counts toward one target over reversed CDG edges: hops[target] == 0,
// hops[n] == k when the shortest dependency chain from n down to the target
// has k edges, -1 when the target does not depend on n at all.
struct TargetDistanceMap {
    int target = -1;
    std::vector<int> hops;
};

TargetDistanceMap targetDistances(const Cdg& cdg, int target);

constexpr int kUnreachable = -1;

// Raw minimum hop count from any covered node to the target (0 when the
// target itself is covered, kUnreachable when no covered node governs it).
int minCoveredHops(const TargetDistanceMap& dist, const std::vector<bool>& covered);

// Approach level as used by the fitness function: one less than the raw hop
// count, floored at zero.
int approachLevel(const TargetDistanceMap& dist, const std::vector<bool>& covered);

}  // namespace bw
