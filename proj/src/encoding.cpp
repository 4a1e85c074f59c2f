#include "blockwhisker/encoding.hpp"

#include <algorithm>
#include <cmath>

namespace bw {

int groupSizeFor(const EventContext& ctx) {
    int params = 1;
    for (const EventSpec& e : staticExtract(ctx)) {
        params = std::max(params, openParamCount(e.kind));
    }
    return params + 1;
}

int groupCount(const Genotype& g, const EncodingConfig& cfg) {
    return static_cast<int>(g.codons.size()) / cfg.groupSize;
}

std::vector<std::uint32_t> groupAt(const Genotype& g, const EncodingConfig& cfg, int index) {
    const auto begin = g.codons.begin() + static_cast<std::ptrdiff_t>(index) * cfg.groupSize;
    return {begin, begin + cfg.groupSize};
}

std::vector<std::uint32_t> randomGroup(Rng& rng, const EncodingConfig& cfg) {
    std::vector<std::uint32_t> group(cfg.groupSize);
    for (auto& c : group)
        c = static_cast<std::uint32_t>(
            rng.uniformInt(0, static_cast<std::int64_t>(cfg.codonMax) - 1));
    return group;
}

Genotype randomGenotype(Rng& rng, const EncodingConfig& cfg) {
    const int groups = static_cast<int>(rng.uniformInt(cfg.minGroups, cfg.maxGroups));
    Genotype g;
    g.codons.reserve(static_cast<size_t>(groups) * cfg.groupSize);
    for (int i = 0; i < groups; ++i) {
        for (std::uint32_t c : randomGroup(rng, cfg)) g.codons.push_back(c);
    }
    return g;
}

Genotype mutate(const Genotype& g, Rng& rng, const EncodingConfig& cfg) {
    const int groups = groupCount(g, cfg);
    if (groups == 0) return g;
    const double rate = 1.0 / groups;
    Genotype out;
    out.codons.reserve(g.codons.size());
    for (int i = 0; i < groups; ++i) {
        std::vector<std::uint32_t> group = groupAt(g, cfg, i);
        if (rng.chance(rate)) {
            switch (rng.uniformInt(0, 2)) {
            case 0: {  // insert a fresh group before this one
                for (std::uint32_t c : randomGroup(rng, cfg)) out.codons.push_back(c);
                break;
            }
            case 1: {  // nudge every codon in the group
                for (auto& c : group) {
                    const double delta = rng.gaussian(0.0, cfg.gaussianSigma);
                    std::int64_t v = static_cast<std::int64_t>(c) +
                                     static_cast<std::int64_t>(std::llround(delta));
                    const std::int64_t m = static_cast<std::int64_t>(cfg.codonMax);
                    v %= m;
                    if (v < 0) v += m;
                    c = static_cast<std::uint32_t>(v);
                }
                break;
            }
            default: {  // delete, unless that would undershoot minGroups
                const int emitted = static_cast<int>(out.codons.size()) / cfg.groupSize;
                const int remaining = groups - i - 1;
                if (emitted + remaining >= cfg.minGroups) continue;
                break;
            }
            }
        }
        out.codons.insert(out.codons.end(), group.begin(), group.end());
    }
    return out;
}

std::pair<Genotype, Genotype> crossoverAt(const Genotype& a, const Genotype& b, double psi,
                                          const EncodingConfig& cfg) {
    const int na = groupCount(a, cfg);
    const int nb = groupCount(b, cfg);
    const int cutA = static_cast<int>(psi * na);
    const int cutB = static_cast<int>(psi * nb);
    Genotype c1, c2;
    const auto stride = [&](int groupsIdx) {
        return static_cast<std::ptrdiff_t>(groupsIdx) * cfg.groupSize;
    };
    c1.codons.assign(a.codons.begin(), a.codons.begin() + stride(cutA));
    c1.codons.insert(c1.codons.end(), b.codons.begin() + stride(cutB), b.codons.end());
    c2.codons.assign(b.codons.begin(), b.codons.begin() + stride(cutB));
    c2.codons.insert(c2.codons.end(), a.codons.begin() + stride(cutA), a.codons.end());
    return {std::move(c1), std::move(c2)};
}

std::pair<Genotype, Genotype> crossover(const Genotype& a, const Genotype& b, Rng& rng,
                                        const EncodingConfig& cfg) {
    const int na = groupCount(a, cfg);
    const int nb = groupCount(b, cfg);
    if (na == 0 || nb == 0) return {a, b};
    for (int attempt = 0; attempt < 3; ++attempt) {
        auto [c1, c2] = crossoverAt(a, b, rng.uniformReal(), cfg);
        if (!c1.codons.empty() && !c2.codons.empty()) return {std::move(c1), std::move(c2)};
    }
    return {a, b};
}

DecodedTest decodeAndExecute(const Project& project, const EventContext& ctx,
                             const Genotype& g, const EncodingConfig& ecfg,
                             const VmConfig& vmCfg) {
    DecodedTest result;
    Vm vm(project, vmCfg);
    StepInput flag;
    flag.greenflag = true;
    vm.step(flag);
    std::uint64_t lastRevision = vm.trace().revision;
    const int groups = groupCount(g, ecfg);
    for (int i = 0; i < groups; ++i) {
        if (vm.stopped()) break;
        const std::vector<EventSpec> available = dynamicExtract(ctx, vm);
        ResolvedEvent ev = resolveEvent(ctx, available, groupAt(g, ecfg, i));
        applyEvent(vm, ev);
        result.events.push_back(std::move(ev));
        ++result.groupsExecuted;
        if (vm.trace().revision != lastRevision) {
            lastRevision = vm.trace().revision;
            result.lastImprovingGroup = i + 1;
        }
    }
    result.activeAtEnd = !vm.stopped() && vm.anyScriptActive();
    vm.finalizeTrace();
    result.trace = vm.trace();
    result.vmSteps = result.trace.steps;
    return result;
}

}  // namespace bw
