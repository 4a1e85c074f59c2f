#include "blockwhisker/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bw {

namespace {

constexpr const char* kKindNames[] = {
    "backdrop", "cloneCount", "costume",  "direction",    "layer",
    "listLength", "position", "say",      "size",         "touching",
    "touchingEdge", "variable", "visibility", "volume",
};

const char* bubbleKindName(BubbleState::Kind kind) {
    switch (kind) {
    case BubbleState::Say: return "say";
    case BubbleState::Think: return "think";
    default: return "";
    }
}

std::pair<std::string, std::string> orderedPair(const std::string& a, const std::string& b) {
    return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
}

double circularDiff(double a, double b) {
    double d = std::fabs(std::fmod(a - b, 360.0));
    if (d > 180.0) d = 360.0 - d;
    return d;
}

const RuntimeSnapshot* findRuntime(const VmSnapshot& snap, const std::string& key) {
    for (const RuntimeSnapshot& r : snap.runtimes) {
        if (r.key == key) return &r;
    }
    return nullptr;
}

Assertion scalar(AssertionKind kind, const std::string& target, const std::string& name,
                 double value) {
    Assertion a;
    a.kind = kind;
    a.target = target;
    a.name = name;
    a.expectX = value;
    return a;
}

void diffRuntime(std::vector<Assertion>& out, const RuntimeSnapshot& prev,
                 const RuntimeSnapshot& cur) {
    if (cur.isStage) {
        for (const auto& [name, value] : cur.variables) {
            auto it = prev.variables.find(name);
            if (it == prev.variables.end() || it->second != value) {
                Assertion a;
                a.kind = AssertionKind::Variable;
                a.target = cur.key;
                a.name = name;
                a.expectText = value;
                out.push_back(std::move(a));
            }
        }
        for (const auto& [name, len] : cur.listLengths) {
            auto it = prev.listLengths.find(name);
            if (it == prev.listLengths.end() || it->second != len) {
                out.push_back(scalar(AssertionKind::ListLength, cur.key, name,
                                     static_cast<double>(len)));
            }
        }
        if (prev.volume != cur.volume)
            out.push_back(scalar(AssertionKind::Volume, cur.key, "", cur.volume));
        return;
    }
    if (prev.costume != cur.costume)
        out.push_back(scalar(AssertionKind::Costume, cur.key, "", cur.costume));
    if (prev.direction != cur.direction)
        out.push_back(scalar(AssertionKind::Direction, cur.key, "", cur.direction));
    if (prev.layer != cur.layer)
        out.push_back(scalar(AssertionKind::Layer, cur.key, "", cur.layer));
    for (const auto& [name, len] : cur.listLengths) {
        auto it = prev.listLengths.find(name);
        if (it == prev.listLengths.end() || it->second != len) {
            out.push_back(scalar(AssertionKind::ListLength, cur.key, name,
                                 static_cast<double>(len)));
        }
    }
    if (prev.x != cur.x || prev.y != cur.y) {
        Assertion a;
        a.kind = AssertionKind::Position;
        a.target = cur.key;
        a.expectX = cur.x;
        a.expectY = cur.y;
        out.push_back(std::move(a));
    }
    if (!(prev.bubble == cur.bubble)) {
        Assertion a;
        a.kind = AssertionKind::Say;
        a.target = cur.key;
        a.name = bubbleKindName(cur.bubble.kind);
        a.expectText = cur.bubble.text;
        out.push_back(std::move(a));
    }
    if (prev.size != cur.size)
        out.push_back(scalar(AssertionKind::Size, cur.key, "", cur.size));
    for (const auto& [name, value] : cur.variables) {
        auto it = prev.variables.find(name);
        if (it == prev.variables.end() || it->second != value) {
            Assertion a;
            a.kind = AssertionKind::Variable;
            a.target = cur.key;
            a.name = name;
            a.expectText = value;
            out.push_back(std::move(a));
        }
    }
    if (prev.visible != cur.visible) {
        Assertion a;
        a.kind = AssertionKind::Visibility;
        a.target = cur.key;
        a.expectBool = cur.visible;
        out.push_back(std::move(a));
    }
    if (prev.volume != cur.volume)
        out.push_back(scalar(AssertionKind::Volume, cur.key, "", cur.volume));
}

std::vector<Assertion> diffSnapshots(const VmSnapshot& prev, const VmSnapshot& cur) {
    std::vector<Assertion> out;
    if (prev.backdrop != cur.backdrop) {
        Assertion a;
        a.kind = AssertionKind::Backdrop;
        a.expectText = cur.backdrop;
        out.push_back(std::move(a));
    }
    std::set<std::string> cloneKeys;
    for (const auto& [sprite, count] : prev.cloneCounts) cloneKeys.insert(sprite);
    for (const auto& [sprite, count] : cur.cloneCounts) cloneKeys.insert(sprite);
    for (const std::string& sprite : cloneKeys) {
        auto pit = prev.cloneCounts.find(sprite);
        auto cit = cur.cloneCounts.find(sprite);
        const int pc = pit == prev.cloneCounts.end() ? 0 : pit->second;
        const int cc = cit == cur.cloneCounts.end() ? 0 : cit->second;
        if (pc != cc)
            out.push_back(scalar(AssertionKind::CloneCount, sprite, "", cc));
    }
    for (const RuntimeSnapshot& r : cur.runtimes) {
        const RuntimeSnapshot* p = findRuntime(prev, r.key);
        if (p) diffRuntime(out, *p, r);
    }
    for (const auto& pair : cur.touching) {
        if (!prev.touching.count(pair)) {
            Assertion a;
            a.kind = AssertionKind::Touching;
            a.target = pair.first;
            a.name = pair.second;
            a.expectBool = true;
            out.push_back(std::move(a));
        }
    }
    for (const auto& pair : prev.touching) {
        if (!cur.touching.count(pair)) {
            Assertion a;
            a.kind = AssertionKind::Touching;
            a.target = pair.first;
            a.name = pair.second;
            a.expectBool = false;
            out.push_back(std::move(a));
        }
    }
    for (const std::string& key : cur.touchingEdge) {
        if (!prev.touchingEdge.count(key)) {
            Assertion a;
            a.kind = AssertionKind::TouchingEdge;
            a.target = key;
            a.expectBool = true;
            out.push_back(std::move(a));
        }
    }
    for (const std::string& key : prev.touchingEdge) {
        if (!cur.touchingEdge.count(key)) {
            Assertion a;
            a.kind = AssertionKind::TouchingEdge;
            a.target = key;
            a.expectBool = false;
            out.push_back(std::move(a));
        }
    }
    return out;
}

std::string describeAssertion(const Assertion& a) {
    std::ostringstream os;
    os << assertionKindName(a.kind);
    if (!a.target.empty()) os << " " << a.target;
    if (!a.name.empty()) os << "." << a.name;
    switch (a.kind) {
    case AssertionKind::Position:
        os << " == (" << a.expectX << ", " << a.expectY << ")";
        break;
    case AssertionKind::Visibility:
    case AssertionKind::Touching:
    case AssertionKind::TouchingEdge:
        os << " == " << (a.expectBool ? "true" : "false");
        break;
    case AssertionKind::Backdrop:
    case AssertionKind::Say:
    case AssertionKind::Variable:
        os << " == \"" << a.expectText << "\"";
        break;
    default:
        os << " == " << a.expectX;
        break;
    }
    return os.str();
}

}  // namespace

const char* assertionKindName(AssertionKind kind) {
    return kKindNames[static_cast<int>(kind)];
}

std::optional<AssertionKind> assertionKindFromName(const std::string& name) {
    for (int i = 0; i < static_cast<int>(std::size(kKindNames)); ++i) {
        if (name == kKindNames[i]) return static_cast<AssertionKind>(i);
    }
    return std::nullopt;
}

TestCase runEvents(const Project& project, const FitnessEngine& engine,
                   const VmConfig& vmCfg, const std::vector<ResolvedEvent>& events) {
    Vm vm(project, vmCfg);
    runEventSequence(vm, events, nullptr);
    TestCase t;
    t.events = events;
    t.trace = vm.trace();
    t.fitness = engine.evaluateAll(t.trace);
    t.vmSteps = t.trace.steps;
    t.groupsExecuted = static_cast<int>(events.size());
    t.activeAtEnd = !vm.stopped() && vm.anyScriptActive();
    return t;
}

std::vector<ResolvedEvent> minimizeEvents(const Project& project, const FitnessEngine& engine,
                                          const VmConfig& vmCfg,
                                          const std::vector<ResolvedEvent>& events,
                                          const std::vector<int>& retainedGoals) {
    const auto evaluate = [&](const std::vector<ResolvedEvent>& evs) {
        const TestCase t = runEvents(project, engine, vmCfg, evs);
        std::vector<double> f;
        f.reserve(retainedGoals.size());
        for (int g : retainedGoals) f.push_back(t.fitness[static_cast<size_t>(g)]);
        return f;
    };

    std::vector<ResolvedEvent> current = events;
    std::vector<double> base = evaluate(current);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = static_cast<int>(current.size()) - 1; i >= 0; --i) {
            std::vector<ResolvedEvent> candidate = current;
            candidate.erase(candidate.begin() + i);
            std::vector<double> f = evaluate(candidate);
            bool notWorse = true;
            for (size_t j = 0; j < f.size(); ++j) {
                if (f[j] > base[j]) {
                    notWorse = false;
                    break;
                }
            }
            if (notWorse) {
                current = std::move(candidate);
                base = std::move(f);
                changed = true;
            }
        }
    }
    return current;
}

std::vector<std::vector<Assertion>> generateAssertions(const Project& project,
                                                       const VmConfig& vmCfg,
                                                       const std::vector<ResolvedEvent>& events) {
    Vm vm(project, vmCfg);
    StepInput flag;
    flag.greenflag = true;
    vm.step(flag);
    VmSnapshot prev = vm.snapshot();
    std::vector<std::vector<Assertion>> out;
    out.reserve(events.size());
    for (const ResolvedEvent& ev : events) {
        if (vm.stopped()) {
            out.emplace_back();
            continue;
        }
        applyEvent(vm, ev);
        VmSnapshot cur = vm.snapshot();
        out.push_back(diffSnapshots(prev, cur));
        prev = std::move(cur);
    }
    return out;
}

bool assertionHolds(const Assertion& a, const VmSnapshot& snap) {
    switch (a.kind) {
    case AssertionKind::Backdrop:
        return snap.backdrop == a.expectText;
    case AssertionKind::CloneCount: {
        auto it = snap.cloneCounts.find(a.target);
        const int count = it == snap.cloneCounts.end() ? 0 : it->second;
        return count == static_cast<int>(a.expectX);
    }
    case AssertionKind::Touching:
        return (snap.touching.count(orderedPair(a.target, a.name)) > 0) == a.expectBool;
    case AssertionKind::TouchingEdge:
        return (snap.touchingEdge.count(a.target) > 0) == a.expectBool;
    default:
        break;
    }
    const RuntimeSnapshot* r = findRuntime(snap, a.target);
    if (!r) return false;
    switch (a.kind) {
    case AssertionKind::Costume:
        return r->costume == static_cast<int>(a.expectX);
    case AssertionKind::Direction:
        return circularDiff(r->direction, a.expectX) <= 1.0;
    case AssertionKind::Layer:
        return r->layer == static_cast<int>(a.expectX);
    case AssertionKind::ListLength: {
        auto it = r->listLengths.find(a.name);
        const std::size_t len = it == r->listLengths.end() ? 0 : it->second;
        return len == static_cast<std::size_t>(a.expectX);
    }
    case AssertionKind::Position:
        return std::fabs(r->x - a.expectX) <= 5.0 && std::fabs(r->y - a.expectY) <= 5.0;
    case AssertionKind::Say:
        return bubbleKindName(r->bubble.kind) == a.name && r->bubble.text == a.expectText;
    case AssertionKind::Size:
        return r->size == a.expectX;
    case AssertionKind::Variable: {
        auto it = r->variables.find(a.name);
        return it != r->variables.end() && it->second == a.expectText;
    }
    case AssertionKind::Visibility:
        return r->visible == a.expectBool;
    case AssertionKind::Volume:
        return r->volume == a.expectX;
    default:
        return false;
    }
}

ReplayResult replayTest(const Project& project, const VmConfig& vmCfg,
                        const AnnotatedTest& test, long long maxSteps) {
    ReplayResult res;
    try {
        Vm vm(project, vmCfg);
        StepInput flag;
        flag.greenflag = true;
        vm.step(flag);
        for (std::size_t i = 0; i < test.events.size(); ++i) {
            if (maxSteps > 0 && vm.trace().steps > maxSteps) {
                res.capExceeded = true;
                break;
            }
            if (!vm.stopped()) applyEvent(vm, test.events[i]);
            if (i < test.assertions.size() && !test.assertions[i].empty()) {
                const VmSnapshot snap = vm.snapshot();
                for (const Assertion& a : test.assertions[i]) {
                    ++res.totalAssertions;
                    if (!assertionHolds(a, snap)) {
                        ++res.failedAssertions;
                        res.failures.push_back("event " + std::to_string(i + 1) + ": " +
                                               describeAssertion(a));
                    }
                }
            }
        }
        vm.finalizeTrace();
        res.covered = vm.trace().covered;
        res.vmSteps = vm.trace().steps;
    } catch (const std::exception& e) {
        res.crashed = true;
        res.failures.push_back(std::string("crash: ") + e.what());
    }
    return res;
}

}  // namespace bw
