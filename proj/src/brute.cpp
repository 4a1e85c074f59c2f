#include "blockwhisker/brute.hpp"

#include <cmath>
#include <functional>

#include "blockwhisker/vm.hpp"

namespace bw {

namespace {

std::vector<ResolvedEvent> instantiations(const EventSpec& spec, const EventContext& ctx) {
    static const long long kGrid[] = {1, 10};
    std::vector<ResolvedEvent> out;
    const auto base = [&] {
        ResolvedEvent ev;
        ev.spec = spec;
        return ev;
    };
    switch (spec.kind) {
    case EventKind::Wait:
    case EventKind::KeyPress:
        for (long long d : kGrid) {
            ResolvedEvent ev = base();
            ev.duration = d;
            out.push_back(ev);
        }
        break;
    case EventKind::TypeNumber:
        for (long long n : kGrid) {
            ResolvedEvent ev = base();
            ev.number = static_cast<double>(n);
            out.push_back(ev);
        }
        break;
    case EventKind::TypeText:
        if (ctx.textPool.empty()) {
            out.push_back(base());
        } else {
            for (const std::string& text : ctx.textPool) {
                ResolvedEvent ev = base();
                ev.text = text;
                out.push_back(ev);
            }
        }
        break;
    case EventKind::MouseMove:
        for (long long x : kGrid) {
            for (long long y : kGrid) {
                ResolvedEvent ev = base();
                ev.x = static_cast<double>(x);
                ev.y = static_cast<double>(y);
                out.push_back(ev);
            }
        }
        break;
    case EventKind::DragSprite:
        for (long long a : kGrid) {
            ResolvedEvent ev = base();
            ev.angle = a;
            out.push_back(ev);
        }
        break;
    case EventKind::Sound:
        for (long long v : kGrid) {
            ResolvedEvent ev = base();
            ev.spec.volume = static_cast<double>(v);
            out.push_back(ev);
        }
        break;
    default:
        out.push_back(base());
        break;
    }
    return out;
}

}  // namespace

BruteForceResult bruteForce(const Project& project, const EventContext& ctx, int maxLen,
                            int acceleration, long long bound) {
    BruteForceResult result;
    result.bound = bound;
    const auto countBlock = [&](const Block&) { ++result.totalBlocks; };
    for (const Actor& actor : project.actors) {
        for (const Script& script : actor.scripts) {
            if (script.hat) visitBlock(*script.hat, countBlock);
            forEachBlock(script.body, countBlock);
        }
        for (const Script& def : actor.customBlocks) {
            if (def.hat) visitBlock(*def.hat, countBlock);
            forEachBlock(def.body, countBlock);
        }
    }

    std::vector<ResolvedEvent> alphabet;
    for (const EventSpec& spec : staticExtract(ctx)) {
        for (ResolvedEvent& ev : instantiations(spec, ctx)) alphabet.push_back(std::move(ev));
    }

    double sequences = 1;  // the empty sequence
    double layer = 1;
    for (int len = 1; len <= maxLen; ++len) {
        layer *= static_cast<double>(alphabet.size());
        sequences += layer;
    }
    result.estimatedExecutions = sequences;
    if (sequences > static_cast<double>(bound)) {
        result.refused = true;
        return result;
    }

    VmConfig vmCfg;
    vmCfg.acceleration = acceleration;

    std::vector<ResolvedEvent> current;
    const std::function<void()> run = [&] {
        Vm vm(project, vmCfg);
        runEventSequence(vm, current);
        ++result.executions;
        for (const std::string& id : vm.trace().covered) result.covered.insert(id);
    };
    const std::function<void(int)> enumerate = [&](int remaining) {
        run();
        if (remaining == 0) return;
        for (const ResolvedEvent& ev : alphabet) {
            current.push_back(ev);
            enumerate(remaining - 1);
            current.pop_back();
        }
    };
    enumerate(maxLen);
    return result;
}

}  // namespace bw
