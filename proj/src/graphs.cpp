#include "blockwhisker/graphs.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace bw {

int Cfg::addNode(std::string id, CfgNodeKind kind, std::string label, const Block* block) {
    if (byId_.count(id)) throw std::runtime_error("duplicate CFG node id: " + id);
    const int idx = static_cast<int>(nodes.size());
    byId_[id] = idx;
    nodes.push_back(CfgNode{std::move(id), kind, std::move(label), block});
    return idx;
}

void Cfg::addEdge(int from, int to, std::string label) {
    for (const CfgEdge& e : edges) {
        if (e.from == from && e.to == to && e.label == label) return;
    }
    edges.push_back(CfgEdge{from, to, std::move(label)});
}

void Cfg::finalize() {
    succ_.assign(nodes.size(), {});
    pred_.assign(nodes.size(), {});
    for (const CfgEdge& e : edges) {
        auto& s = succ_[e.from];
        if (std::find(s.begin(), s.end(), e.to) == s.end()) s.push_back(e.to);
        auto& p = pred_[e.to];
        if (std::find(p.begin(), p.end(), e.from) == p.end()) p.push_back(e.from);
    }
}

int Cfg::indexOf(const std::string& id) const {
    auto it = byId_.find(id);
    return it == byId_.end() ? -1 : it->second;
}

std::vector<std::string> Cfg::edgeLabels(int from, int to) const {
    std::vector<std::string> out;
    for (const CfgEdge& e : edges) {
        if (e.from == from && e.to == to) out.push_back(e.label);
    }
    return out;
}

namespace {

std::string dotEscape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

const Value* literalArg(const Block& b, size_t idx) {
    if (idx >= b.args.size()) return nullptr;
    return std::get_if<Value>(&b.args[idx]);
}

std::string literalText(const Block& b, size_t idx) {
    const Value* v = literalArg(b, idx);
    return v ? v->asText() : std::string{};
}

bool isUserInputHat(Opcode op) {
    switch (op) {
    case Opcode::Greenflag:
    case Opcode::KeyPressedHat:
    case Opcode::SpriteClicked:
    case Opcode::StageClicked:
    case Opcode::LoudnessGreaterThan:
        return true;
    default:
        return false;
    }
}

std::string eventNodeLabel(const Actor& actor, const Block& hat) {
    switch (hat.opcode) {
    case Opcode::Greenflag: return "green flag?";
    case Opcode::KeyPressedHat: return "key " + literalText(hat, 0) + "?";
    case Opcode::SpriteClicked: return "clicked " + actor.name + "?";
    case Opcode::StageClicked: return "clicked stage?";
    case Opcode::BroadcastReceived: return "broadcast " + literalText(hat, 0) + "?";
    case Opcode::StartAsClone: return "clone " + actor.name + "?";
    case Opcode::BackdropSwitched: return "backdrop " + literalText(hat, 0) + "?";
    case Opcode::LoudnessGreaterThan: return "loudness > " + literalText(hat, 0) + "?";
    default: return "event?";
    }
}

// A dangling control flow exit of a partially built sequence. Concrete outs
// name the node the edge will leave from; symbolic outs stand for "wherever
// procedure <procKey> ends" and are wired once every body has been built.
struct Out {
    int node = -1;
    std::string label;
    std::string procKey;  // non-empty marks a symbolic out
};

struct Builder {
    const Project& project;
    Cfg cfg;

    std::map<std::string, int> procHead;  // "actor\nproc" -> def head node
    std::map<std::string, std::vector<Out>> procOuts;
    struct DeferredWire {
        std::string procKey;
        int target;
        std::string label;
    };
    std::vector<DeferredWire> deferred;

    std::map<std::string, std::vector<int>> broadcastEvs;  // message -> event nodes
    std::vector<int> allBroadcastEvs;
    std::map<std::string, std::vector<int>> cloneEvs;  // actor name -> event nodes
    std::vector<int> allCloneEvs;
    std::map<std::string, std::vector<int>> backdropEvs;  // backdrop name -> event nodes
    std::vector<int> allBackdropEvs;

    explicit Builder(const Project& p) : project(p) {}

    static std::string procKeyFor(const Actor& actor, const std::string& proc) {
        return actor.name + "\n" + proc;
    }

    void connect(const Out& out, int target) {
        if (out.procKey.empty()) {
            cfg.addEdge(out.node, target, out.label);
        } else {
            deferred.push_back(DeferredWire{out.procKey, target, out.label});
        }
    }

    void connectAll(const std::vector<Out>& outs, int target) {
        for (const Out& o : outs) connect(o, target);
    }

    int blockNode(const Block& b) {
        return cfg.addNode(b.id, CfgNodeKind::Block, opcodeName(b.opcode), &b);
    }

    // Creates event, hat and procedure head nodes plus the event scaffolding
    // edges. Statement bodies are laid down in a second pass so broadcast and
    // call statements can point at nodes from any actor.
    void declarationPass() {
        cfg.entry = cfg.addNode("@entry", CfgNodeKind::Entry, "entry");
        cfg.exit = cfg.addNode("@exit", CfgNodeKind::Exit, "exit");
        for (const Actor& actor : project.actors) {
            for (const Script& script : actor.scripts) {
                if (!script.hat) continue;
                const Block& hat = *script.hat;
                const int ev = cfg.addNode("@ev:" + hat.id, CfgNodeKind::Event,
                                           eventNodeLabel(actor, hat));
                const int hatNode = blockNode(hat);
                if (isUserInputHat(hat.opcode)) cfg.addEdge(cfg.entry, ev);
                cfg.addEdge(ev, hatNode, "true");
                cfg.addEdge(ev, cfg.exit, "false");
                switch (hat.opcode) {
                case Opcode::BroadcastReceived:
                    broadcastEvs[literalText(hat, 0)].push_back(ev);
                    allBroadcastEvs.push_back(ev);
                    break;
                case Opcode::StartAsClone:
                    cloneEvs[actor.name].push_back(ev);
                    allCloneEvs.push_back(ev);
                    break;
                case Opcode::BackdropSwitched:
                    backdropEvs[literalText(hat, 0)].push_back(ev);
                    allBackdropEvs.push_back(ev);
                    break;
                default:
                    break;
                }
            }
            for (const Script& def : actor.customBlocks) {
                if (!def.hat) continue;
                const int head = blockNode(*def.hat);
                procHead[procKeyFor(actor, literalText(*def.hat, 0))] = head;
            }
        }
    }

    void bodyPass() {
        for (const Actor& actor : project.actors) {
            for (const Script& def : actor.customBlocks) {
                if (!def.hat) continue;
                const std::string key = procKeyFor(actor, literalText(*def.hat, 0));
                std::vector<Out> outs =
                    buildSeq(actor, def.body, {Out{procHead[key], "", ""}});
                procOuts[key] = std::move(outs);
            }
            for (const Script& script : actor.scripts) {
                std::vector<Out> incoming;
                if (script.hat) incoming.push_back(Out{cfg.indexOf(script.hat->id), "", ""});
                std::vector<Out> outs = buildSeq(actor, script.body, std::move(incoming));
                connectAll(outs, cfg.exit);
            }
        }
    }

    std::vector<Out> buildSeq(const Actor& actor, const std::vector<Block>& seq,
                              std::vector<Out> incoming) {
        for (const Block& b : seq) {
            const int n = blockNode(b);
            connectAll(incoming, n);
            incoming.clear();
            switch (b.opcode) {
            case Opcode::If: {
                std::vector<Out> arm =
                    buildSeq(actor, b.children.at(0), {Out{n, "true", ""}});
                incoming = std::move(arm);
                incoming.push_back(Out{n, "false", ""});
                break;
            }
            case Opcode::IfElse: {
                std::vector<Out> armT =
                    buildSeq(actor, b.children.at(0), {Out{n, "true", ""}});
                std::vector<Out> armF =
                    buildSeq(actor, b.children.at(1), {Out{n, "false", ""}});
                incoming = std::move(armT);
                incoming.insert(incoming.end(), armF.begin(), armF.end());
                break;
            }
            case Opcode::RepeatTimes: {
                std::vector<Out> body =
                    buildSeq(actor, b.children.at(0), {Out{n, "false", ""}});
                connectAll(body, n);
                // A run can end inside the loop, so the header may be the
                // last executed node.
                cfg.addEdge(n, cfg.exit);
                incoming.push_back(Out{n, "true", ""});
                break;
            }
            case Opcode::RepeatUntil: {
                std::vector<Out> body =
                    buildSeq(actor, b.children.at(0), {Out{n, "false", ""}});
                connectAll(body, n);
                incoming.push_back(Out{n, "true", ""});
                break;
            }
            case Opcode::Forever: {
                std::vector<Out> body = buildSeq(actor, b.children.at(0), {Out{n, "", ""}});
                connectAll(body, n);
                return {};  // nothing after a forever ever runs
            }
            case Opcode::WaitUntil:
                cfg.addEdge(n, cfg.exit, "false");
                incoming.push_back(Out{n, "true", ""});
                break;
            case Opcode::StopAll:
            case Opcode::StopScript:
            case Opcode::DeleteClone:
                cfg.addEdge(n, cfg.exit);
                return {};
            case Opcode::Broadcast:
            case Opcode::BroadcastAndWait: {
                wireMessageEdges(n, b, broadcastEvs, allBroadcastEvs);
                incoming.push_back(Out{n, "", ""});
                break;
            }
            case Opcode::CreateClone: {
                std::string target = literalText(b, 0);
                if (target == "myself") target = actor.name;
                if (const Value* v = literalArg(b, 0)) {
                    (void)v;
                    auto it = cloneEvs.find(target);
                    if (it != cloneEvs.end())
                        for (int ev : it->second) cfg.addEdge(n, ev);
                } else {
                    for (int ev : allCloneEvs) cfg.addEdge(n, ev);
                }
                incoming.push_back(Out{n, "", ""});
                break;
            }
            case Opcode::SwitchBackdrop:
                wireMessageEdges(n, b, backdropEvs, allBackdropEvs);
                incoming.push_back(Out{n, "", ""});
                break;
            case Opcode::NextBackdrop:
                for (int ev : allBackdropEvs) cfg.addEdge(n, ev);
                incoming.push_back(Out{n, "", ""});
                break;
            case Opcode::Call: {
                const std::string key = procKeyFor(actor, literalText(b, 0));
                auto it = procHead.find(key);
                if (it != procHead.end()) {
                    cfg.addEdge(n, it->second);
                    incoming.push_back(Out{-1, "", key});
                } else {
                    incoming.push_back(Out{n, "", ""});  // unknown procedure: fall through
                }
                break;
            }
            default:
                if (isTimeDependent(b.opcode)) {
                    // Budget exhaustion can cut a run while it waits here.
                    cfg.addEdge(n, cfg.exit, "false");
                    incoming.push_back(Out{n, "true", ""});
                } else {
                    incoming.push_back(Out{n, "", ""});
                }
                break;
            }
        }
        return incoming;
    }

    void wireMessageEdges(int from, const Block& b, const std::map<std::string, std::vector<int>>& byName,
                          const std::vector<int>& all) {
        if (literalArg(b, 0)) {
            auto it = byName.find(literalText(b, 0));
            if (it != byName.end())
                for (int ev : it->second) cfg.addEdge(from, ev);
        } else {
            for (int ev : all) cfg.addEdge(from, ev);
        }
    }

    // Concrete end nodes of a procedure, following calls in tail position.
    std::vector<Out> concreteOuts(const std::string& key, std::set<std::string>& visiting) {
        std::vector<Out> result;
        if (!visiting.insert(key).second) return result;  // recursion: no extra ends
        auto it = procOuts.find(key);
        if (it == procOuts.end()) {
            visiting.erase(key);
            return result;
        }
        for (const Out& o : it->second) {
            if (o.procKey.empty()) {
                result.push_back(o);
            } else {
                std::vector<Out> nested = concreteOuts(o.procKey, visiting);
                result.insert(result.end(), nested.begin(), nested.end());
            }
        }
        visiting.erase(key);
        return result;
    }

    void resolveDeferred() {
        for (const DeferredWire& w : deferred) {
            std::set<std::string> visiting;
            for (const Out& o : concreteOuts(w.procKey, visiting)) {
                cfg.addEdge(o.node, w.target, o.label);
            }
        }
    }
};

}  // namespace

Cfg buildCfg(const Project& project) {
    Builder builder(project);
    builder.declarationPass();
    builder.bodyPass();
    builder.resolveDeferred();
    builder.cfg.finalize();
    return std::move(builder.cfg);
}

std::string Cfg::toDot() const {
    std::ostringstream os;
    os << "digraph cfg {\n";
    for (size_t i = 0; i < nodes.size(); ++i) {
        const CfgNode& n = nodes[i];
        const char* shape = n.kind == CfgNodeKind::Event ? "diamond"
                            : n.kind == CfgNodeKind::Block ? "box"
                                                           : "ellipse";
        os << "  n" << i << " [label=\"" << dotEscape(n.label) << "\\n"
           << dotEscape(n.id) << "\" shape=" << shape << "];\n";
    }
    for (const CfgEdge& e : edges) {
        os << "  n" << e.from << " -> n" << e.to;
        if (!e.label.empty()) os << " [label=\"" << dotEscape(e.label) << "\"]";
        os << ";\n";
    }
    os << "}\n";
    return os.str();
}

std::vector<std::vector<bool>> postdominators(const Cfg& cfg) {
    const size_t n = cfg.nodes.size();
    std::vector<std::vector<bool>> pdom(n, std::vector<bool>(n, true));
    if (cfg.exit >= 0) {
        pdom[cfg.exit].assign(n, false);
        pdom[cfg.exit][cfg.exit] = true;
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < n; ++i) {
            if (static_cast<int>(i) == cfg.exit) continue;
            const auto& succs = cfg.successors(static_cast<int>(i));
            std::vector<bool> next(n, !succs.empty());
            for (int s : succs) {
                for (size_t j = 0; j < n; ++j) next[j] = next[j] && pdom[s][j];
            }
            next[i] = true;
            if (next != pdom[i]) {
                pdom[i] = std::move(next);
                changed = true;
            }
        }
    }
    return pdom;
}

void Cdg::finalize(int nodeCount) {
    into_.assign(nodeCount, {});
    outOf_.assign(nodeCount, {});
    for (size_t i = 0; i < edges.size(); ++i) {
        into_[edges[i].to].push_back(static_cast<int>(i));
        outOf_[edges[i].from].push_back(static_cast<int>(i));
    }
}

Cdg buildCdg(const Cfg& cfg) {
    const int n = static_cast<int>(cfg.nodes.size());
    const auto pdom = postdominators(cfg);
    Cdg cdg;
    cdg.cfg = &cfg;
    for (int src = 0; src < n; ++src) {
        const auto& succs = cfg.successors(src);
        if (succs.size() < 2) continue;
        for (int m = 0; m < n; ++m) {
            bool inSome = false, outSome = false;
            for (int s : succs) {
                if (pdom[s][m]) inSome = true;
                else outSome = true;
            }
            if (!inSome || !outSome) continue;
            CdgEdge edge;
            edge.from = src;
            edge.to = m;
            for (int s : succs) {
                if (!pdom[s][m]) continue;
                for (const std::string& label : cfg.edgeLabels(src, s))
                    edge.labels.insert(label);
            }
            cdg.edges.push_back(std::move(edge));
        }
    }
    cdg.finalize(n);
    return cdg;
}

std::string Cdg::toDot() const {
    std::ostringstream os;
    os << "digraph cdg {\n";
    if (cfg) {
        for (size_t i = 0; i < cfg->nodes.size(); ++i) {
            os << "  n" << i << " [label=\"" << dotEscape(cfg->nodes[i].label) << "\\n"
               << dotEscape(cfg->nodes[i].id) << "\"];\n";
        }
    }
    for (const CdgEdge& e : edges) {
        os << "  n" << e.from << " -> n" << e.to;
        std::string joined;
        for (const std::string& l : e.labels) {
            if (!l.empty()) {
                if (!joined.empty()) joined += ",";
                joined += l;
            }
        }
        if (!joined.empty()) os << " [label=\"" << dotEscape(joined) << "\"]";
        os << ";\n";
    }
    os << "}\n";
    return os.str();
}

TargetDistanceMap targetDistances(const Cdg& cdg, int target) {
    TargetDistanceMap result;
    result.target = target;
    const int n = cdg.cfg ? static_cast<int>(cdg.cfg->nodes.size()) : 0;
    result.hops.assign(n, kUnreachable);
    if (target < 0 || target >= n) return result;
    result.hops[target] = 0;
    std::deque<int> queue{target};
    while (!queue.empty()) {
        const int m = queue.front();
        queue.pop_front();
        for (int ei : cdg.edgesInto(m)) {
            const int governor = cdg.edges[ei].from;
            if (result.hops[governor] != kUnreachable) continue;
            result.hops[governor] = result.hops[m] + 1;
            queue.push_back(governor);
        }
    }
    return result;
}

int minCoveredHops(const TargetDistanceMap& dist, const std::vector<bool>& covered) {
    int best = kUnreachable;
    for (size_t i = 0; i < dist.hops.size() && i < covered.size(); ++i) {
        if (!covered[i] || dist.hops[i] == kUnreachable) continue;
        if (best == kUnreachable || dist.hops[i] < best) best = dist.hops[i];
    }
    return best;
}

int approachLevel(const TargetDistanceMap& dist, const std::vector<bool>& covered) {
    const int hops = minCoveredHops(dist, covered);
    if (hops == kUnreachable) return kUnreachable;
    return std::max(0, hops - 1);
}

}  // namespace bw
