#include "blockwhisker/search.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>

namespace bw {

std::set<int> GeneratedSuite::coveredGoals() const {
    std::set<int> out;
    for (const auto& [goal, test] : goalToTest) out.insert(goal);
    return out;
}

double GeneratedSuite::coverage(int totalGoals) const {
    if (totalGoals <= 0) return 1.0;
    return static_cast<double>(goalToTest.size()) / totalGoals;
}

double dynamicParameter(double x0, double xf, double budgetFraction, double focus) {
    if (focus <= 0.0 || budgetFraction >= focus) return xf;
    return x0 + (xf - x0) * (budgetFraction / focus);
}

namespace {

struct Budget {
    BudgetMode mode = BudgetMode::Steps;
    long long limit = 0;
    long long steps = 0;
    long long executions = 0;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    double elapsedSeconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }

    bool exhausted() const {
        switch (mode) {
        case BudgetMode::Steps: return steps >= limit;
        case BudgetMode::Executions: return executions >= limit;
        case BudgetMode::Seconds: return elapsedSeconds() >= static_cast<double>(limit);
        }
        return true;
    }

    double fraction() const {
        double used = 0.0;
        switch (mode) {
        case BudgetMode::Steps: used = static_cast<double>(steps); break;
        case BudgetMode::Executions: used = static_cast<double>(executions); break;
        case BudgetMode::Seconds: used = elapsedSeconds(); break;
        }
        if (limit <= 0) return 1.0;
        return std::min(1.0, used / static_cast<double>(limit));
    }

    void note(long long stepsUsed) {
        steps += stepsUsed;
        executions += 1;
    }
};

struct SortResult {
    std::vector<std::vector<int>> fronts;
    std::vector<int> rank;
    std::vector<double> crowd;
};

bool dominates(const TestCase& a, const TestCase& b, const std::vector<int>& objectives) {
    bool strictly = false;
    for (int k : objectives) {
        if (a.fitness[k] > b.fitness[k]) return false;
        if (a.fitness[k] < b.fitness[k]) strictly = true;
    }
    return strictly;
}

void crowdingDistances(const std::vector<TestCase>& tests, const std::vector<int>& front,
                       const std::vector<int>& objectives, std::vector<double>& crowd) {
    for (int i : front) crowd[i] = 0.0;
    if (front.size() <= 2) {
        for (int i : front) crowd[i] = std::numeric_limits<double>::infinity();
        return;
    }
    for (int k : objectives) {
        std::vector<int> order = front;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return tests[a].fitness[k] < tests[b].fitness[k];
        });
        const double lo = tests[order.front()].fitness[k];
        const double hi = tests[order.back()].fitness[k];
        crowd[order.front()] = std::numeric_limits<double>::infinity();
        crowd[order.back()] = std::numeric_limits<double>::infinity();
        if (hi <= lo) continue;
        for (size_t i = 1; i + 1 < order.size(); ++i) {
            crowd[order[i]] += (tests[order[i + 1]].fitness[k] -
                                tests[order[i - 1]].fitness[k]) /
                               (hi - lo);
        }
    }
}

// MOSA preference sorting: the best test per uncovered goal forms front 0,
// the rest fall back to fast non-dominated sorting over uncovered objectives.
SortResult preferenceSort(const std::vector<TestCase>& tests,
                          const std::vector<int>& uncovered) {
    SortResult result;
    const int n = static_cast<int>(tests.size());
    result.rank.assign(n, 0);
    result.crowd.assign(n, 0.0);
    if (n == 0) return result;

    std::set<int> preferred;
    for (int k : uncovered) {
        int best = -1;
        for (int i = 0; i < n; ++i) {
            if (best == -1 || tests[i].fitness[k] < tests[best].fitness[k]) best = i;
        }
        if (best != -1) preferred.insert(best);
    }

    std::vector<int> front0(preferred.begin(), preferred.end());
    std::vector<int> rest;
    for (int i = 0; i < n; ++i) {
        if (!preferred.count(i)) rest.push_back(i);
    }
    if (front0.empty()) {
        front0 = std::move(rest);
        rest.clear();
    }
    result.fronts.push_back(front0);

    // Fast non-dominated sort over the remainder.
    std::vector<int> dominationCount(n, 0);
    std::vector<std::vector<int>> dominated(n);
    std::vector<int> current;
    for (int i : rest) {
        for (int j : rest) {
            if (i == j) continue;
            if (dominates(tests[i], tests[j], uncovered)) dominated[i].push_back(j);
            else if (dominates(tests[j], tests[i], uncovered)) ++dominationCount[i];
        }
        if (dominationCount[i] == 0) current.push_back(i);
    }
    while (!current.empty()) {
        result.fronts.push_back(current);
        std::vector<int> next;
        for (int i : current) {
            for (int j : dominated[i]) {
                if (--dominationCount[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }

    for (size_t f = 0; f < result.fronts.size(); ++f) {
        for (int i : result.fronts[f]) result.rank[i] = static_cast<int>(f);
        crowdingDistances(tests, result.fronts[f], uncovered, result.crowd);
    }
    return result;
}

struct Runner {
    const Project& project;
    const EventContext& ctx;
    const FitnessEngine& engine;
    const SearchConfig& cfg;
    Rng rng;
    Budget budget;
    std::vector<CoveragePoint> timeline;
    std::map<int, TestCase> covering;  // goal index -> shortest covering test

    Runner(const Project& p, const EventContext& c, const FitnessEngine& e,
           const SearchConfig& s)
        : project(p), ctx(c), engine(e), cfg(s), rng(s.seed) {
        budget.mode = s.budgetMode;
        budget.limit = s.budget;
    }

    TestCase makeTest(const Genotype& g) const {
        DecodedTest d = decodeAndExecute(project, ctx, g, cfg.encoding, cfg.vm);
        TestCase t;
        t.genotype = g;
        t.events = std::move(d.events);
        t.trace = std::move(d.trace);
        t.fitness = engine.evaluateAll(t.trace);
        t.lastImprovingGroup = d.lastImprovingGroup;
        t.groupsExecuted = d.groupsExecuted;
        t.activeAtEnd = d.activeAtEnd;
        t.vmSteps = d.vmSteps;
        return t;
    }

    // True when at least one previously uncovered goal got covered.
    bool updateCovering(const TestCase& t) {
        bool coveredNew = false;
        for (size_t k = 0; k < t.fitness.size(); ++k) {
            if (t.fitness[k] != 0.0) continue;
            auto it = covering.find(static_cast<int>(k));
            if (it == covering.end()) {
                covering.emplace(static_cast<int>(k), t);
                coveredNew = true;
            } else if (t.groups(cfg.encoding) < it->second.groups(cfg.encoding)) {
                it->second = t;
            }
        }
        return coveredNew;
    }

    void recordPoint() {
        timeline.push_back(CoveragePoint{budget.executions, budget.steps,
                                         static_cast<int>(covering.size()),
                                         engine.goalCount()});
    }

    std::optional<TestCase> guardedExecute(const Genotype& g) {
        if (budget.exhausted()) return std::nullopt;
        TestCase t = makeTest(g);
        budget.note(t.vmSteps);
        updateCovering(t);
        recordPoint();
        return t;
    }

    std::vector<int> uncoveredGoals() const {
        std::vector<int> out;
        for (int k = 0; k < engine.goalCount(); ++k) {
            if (!covering.count(k)) out.push_back(k);
        }
        return out;
    }

    // Applies extension or reduction to one test with probability
    // localSearchProb. Returns the (possibly) improved test.
    TestCase maybeLocalSearch(const TestCase& t) {
        if (!rng.chance(cfg.localSearchProb)) return t;
        if (t.activeAtEnd && t.groups(cfg.encoding) < cfg.encoding.maxGroups &&
            !budget.exhausted()) {
            ExtensionResult res =
                extensionLocalSearch(t, project, ctx, engine, cfg, rng);
            if (res.vmSteps > 0) {
                budget.note(res.vmSteps);
                updateCovering(res.test);
                recordPoint();
                if (res.replaced) return res.test;
            }
            return t;
        }
        if (t.lastImprovingGroup < t.groups(cfg.encoding)) {
            TestCase reduced = reductionLocalSearch(t, cfg.encoding);
            updateCovering(reduced);
            return reduced;
        }
        return t;
    }

    GeneratedSuite finishFromCovering() {
        GeneratedSuite suite;
        std::map<std::vector<std::uint32_t>, int> seen;
        for (const auto& [goal, test] : covering) {
            auto it = seen.find(test.genotype.codons);
            int idx;
            if (it == seen.end()) {
                idx = static_cast<int>(suite.tests.size());
                suite.tests.push_back(test);
                seen.emplace(test.genotype.codons, idx);
            } else {
                idx = it->second;
            }
            suite.goalToTest[goal] = idx;
        }
        suite.timeline = std::move(timeline);
        suite.executions = budget.executions;
        suite.vmSteps = budget.steps;
        return suite;
    }
};

GeneratedSuite randomSearch(Runner& run) {
    GeneratedSuite suite;
    while (!run.budget.exhausted()) {
        Genotype g = randomGenotype(run.rng, run.cfg.encoding);
        TestCase t = run.makeTest(g);
        run.budget.note(t.vmSteps);
        std::set<int> before;
        for (const auto& [goal, unused] : run.covering) before.insert(goal);
        const bool coveredNew = run.updateCovering(t);
        run.recordPoint();
        if (!coveredNew) continue;
        const int idx = static_cast<int>(suite.tests.size());
        for (size_t k = 0; k < t.fitness.size(); ++k) {
            if (t.fitness[k] == 0.0 && !before.count(static_cast<int>(k)))
                suite.goalToTest[static_cast<int>(k)] = idx;
        }
        suite.tests.push_back(std::move(t));
    }
    suite.timeline = std::move(run.timeline);
    suite.executions = run.budget.executions;
    suite.vmSteps = run.budget.steps;
    return suite;
}

struct Member {
    TestCase test;
    int rank = 0;
    double crowd = 0.0;
};

GeneratedSuite mosa(Runner& run) {
    const int N = std::max(2, run.cfg.populationSize);
    std::vector<Member> population;

    for (int i = 0; i < N; ++i) {
        auto t = run.guardedExecute(randomGenotype(run.rng, run.cfg.encoding));
        if (!t) break;
        population.push_back(Member{std::move(*t), 0, 0.0});
    }
    if (population.empty()) return run.finishFromCovering();

    auto assignSort = [&](std::vector<TestCase>& tests) {
        const SortResult sorted = preferenceSort(tests, run.uncoveredGoals());
        // Fill the next population front by front; the straggler front is
        // admitted by descending crowding distance.
        std::vector<Member> next;
        for (const auto& front : sorted.fronts) {
            if (static_cast<int>(next.size() + front.size()) <= N) {
                for (int i : front)
                    next.push_back(Member{std::move(tests[i]), sorted.rank[i], sorted.crowd[i]});
                if (static_cast<int>(next.size()) == N) break;
                continue;
            }
            std::vector<int> order = front;
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return sorted.crowd[a] > sorted.crowd[b];
            });
            for (int i : order) {
                if (static_cast<int>(next.size()) >= N) break;
                next.push_back(Member{std::move(tests[i]), sorted.rank[i], sorted.crowd[i]});
            }
            break;
        }
        population = std::move(next);
    };

    {
        std::vector<TestCase> initial;
        initial.reserve(population.size());
        for (Member& m : population) initial.push_back(std::move(m.test));
        assignSort(initial);
    }

    auto tournament = [&]() -> const Member& {
        const int i = static_cast<int>(
            run.rng.uniformInt(0, static_cast<std::int64_t>(population.size()) - 1));
        const int j = static_cast<int>(
            run.rng.uniformInt(0, static_cast<std::int64_t>(population.size()) - 1));
        const Member& a = population[i];
        const Member& b = population[j];
        if (b.rank < a.rank || (b.rank == a.rank && b.crowd > a.crowd)) return b;
        return a;
    };

    while (!run.budget.exhausted()) {
        std::vector<TestCase> offspring;
        bool cut = false;
        while (static_cast<int>(offspring.size()) < N) {
            Genotype g1 = tournament().test.genotype;
            Genotype g2 = tournament().test.genotype;
            if (run.rng.chance(run.cfg.crossoverProb)) {
                auto [c1, c2] = crossover(g1, g2, run.rng, run.cfg.encoding);
                g1 = std::move(c1);
                g2 = std::move(c2);
            }
            g1 = mutate(g1, run.rng, run.cfg.encoding);
            g2 = mutate(g2, run.rng, run.cfg.encoding);
            for (Genotype* g : {&g1, &g2}) {
                if (static_cast<int>(offspring.size()) >= N) break;
                auto t = run.guardedExecute(*g);
                if (!t) {
                    cut = true;
                    break;
                }
                offspring.push_back(std::move(*t));
            }
            if (cut) break;
        }
        if (offspring.empty()) break;

        std::vector<TestCase> combined;
        combined.reserve(population.size() + offspring.size());
        for (Member& m : population) combined.push_back(std::move(m.test));
        for (TestCase& t : offspring) combined.push_back(std::move(t));
        assignSort(combined);

        for (Member& m : population) {
            if (run.budget.exhausted()) break;
            m.test = run.maybeLocalSearch(m.test);
        }
        if (cut) break;
    }
    return run.finishFromCovering();
}

GeneratedSuite mio(Runner& run) {
    std::map<int, std::vector<TestCase>> populations;  // uncovered goal -> candidates

    const auto popSorter = [](int goal) {
        return [goal](const TestCase& a, const TestCase& b) {
            return a.fitness[goal] < b.fitness[goal];
        };
    };

    auto mioUpdate = [&](const TestCase& t, int capacity) {
        const double sentinel = run.engine.infeasibleSentinel();
        for (size_t k = 0; k < t.fitness.size(); ++k) {
            const int goal = static_cast<int>(k);
            if (run.covering.count(goal)) {
                populations.erase(goal);  // frozen: single covering test kept aside
                continue;
            }
            if (t.fitness[k] >= sentinel) continue;  // no guidance for this goal
            auto& pop = populations[goal];
            pop.push_back(t);
            std::stable_sort(pop.begin(), pop.end(), popSorter(goal));
            if (static_cast<int>(pop.size()) > capacity)
                pop.resize(static_cast<size_t>(capacity));
        }
    };

    while (!run.budget.exhausted()) {
        const double b = run.budget.fraction();
        const int capacity = std::max(
            1, static_cast<int>(std::llround(dynamicParameter(
                   run.cfg.mioN0, run.cfg.mioNf, b, run.cfg.mioF))));
        const double randomProb = std::clamp(
            dynamicParameter(run.cfg.mioR0, run.cfg.mioRf, b, run.cfg.mioF), 0.0, 1.0);
        const int mutations = std::max(
            1, static_cast<int>(std::llround(dynamicParameter(
                   run.cfg.mioM0, run.cfg.mioMf, b, run.cfg.mioF))));

        bool samplesExist = !run.covering.empty();
        if (!samplesExist) {
            for (const auto& [goal, pop] : populations) {
                if (!pop.empty()) {
                    samplesExist = true;
                    break;
                }
            }
        }

        if (!samplesExist || run.rng.chance(randomProb)) {
            auto t = run.guardedExecute(randomGenotype(run.rng, run.cfg.encoding));
            if (!t) break;
            mioUpdate(*t, capacity);
            TestCase improved = run.maybeLocalSearch(*t);
            if (improved.genotype.codons != t->genotype.codons) mioUpdate(improved, capacity);
        } else {
            // Prefer uncovered goals that already hold candidates.
            std::vector<int> candidates;
            for (const auto& [goal, pop] : populations) {
                if (!pop.empty()) candidates.push_back(goal);
            }
            if (candidates.empty()) candidates = run.uncoveredGoals();
            if (candidates.empty()) {  // everything covered: keep honoring the budget
                auto t = run.guardedExecute(randomGenotype(run.rng, run.cfg.encoding));
                if (!t) break;
                continue;
            }
            const int goal = candidates[static_cast<size_t>(run.rng.uniformInt(
                0, static_cast<std::int64_t>(candidates.size()) - 1))];
            auto& pop = populations[goal];
            TestCase current = pop[static_cast<size_t>(
                run.rng.uniformInt(0, static_cast<std::int64_t>(pop.size()) - 1))];
            for (int i = 0; i < mutations; ++i) {
                auto t = run.guardedExecute(
                    mutate(current.genotype, run.rng, run.cfg.encoding));
                if (!t) break;
                mioUpdate(*t, capacity);
                if (t->fitness[goal] < current.fitness[goal]) current = std::move(*t);
            }
            TestCase improved = run.maybeLocalSearch(current);
            if (improved.genotype.codons != current.genotype.codons)
                mioUpdate(improved, capacity);
        }
    }
    return run.finishFromCovering();
}

}  // namespace

TestCase executeGenotype(const Project& project, const EventContext& ctx,
                         const FitnessEngine& engine, const SearchConfig& config,
                         const Genotype& g) {
    Runner run(project, ctx, engine, config);
    return run.makeTest(g);
}

TestCase reductionLocalSearch(const TestCase& test, const EncodingConfig& cfg) {
    const int groups = groupCount(test.genotype, cfg);
    const int keep = std::max(test.lastImprovingGroup, cfg.minGroups);
    if (test.lastImprovingGroup >= groups || keep >= groups) return test;
    TestCase out = test;
    out.genotype.codons.resize(static_cast<size_t>(keep) * cfg.groupSize);
    if (static_cast<int>(out.events.size()) > keep) out.events.resize(static_cast<size_t>(keep));
    out.groupsExecuted = std::min(out.groupsExecuted, keep);
    // Dropped groups never improved fitness, so trace and fitness carry over.
    return out;
}

ExtensionResult extensionLocalSearch(const TestCase& original, const Project& project,
                                     const EventContext& ctx, const FitnessEngine& engine,
                                     const SearchConfig& config, Rng& rng) {
    ExtensionResult result;
    result.test = original;
    const EncodingConfig& enc = config.encoding;
    int groups = groupCount(original.genotype, enc);
    if (!original.activeAtEnd || groups >= enc.maxGroups) return result;

    Vm vm(project, config.vm);
    StepInput flag;
    flag.greenflag = true;
    vm.step(flag);

    TestCase ext;
    ext.genotype = original.genotype;
    std::uint64_t lastRevision = vm.trace().revision;
    int lastImproving = 0;
    int executed = 0;

    for (int i = 0; i < groups && !vm.stopped(); ++i) {
        const std::vector<EventSpec> available = dynamicExtract(ctx, vm);
        ResolvedEvent ev = resolveEvent(ctx, available, groupAt(ext.genotype, enc, i));
        applyEvent(vm, ev);
        ext.events.push_back(std::move(ev));
        ++executed;
        if (vm.trace().revision != lastRevision) {
            lastRevision = vm.trace().revision;
            lastImproving = i + 1;
        }
    }

    std::vector<EventSpec> previous = dynamicExtract(ctx, vm);
    bool done = false;
    while (!vm.stopped() && vm.anyScriptActive() && groups < enc.maxGroups && !done) {
        const std::vector<EventSpec> available = dynamicExtract(ctx, vm);
        std::vector<int> typing;
        std::vector<int> novel;
        int waitIdx = 0;
        for (size_t j = 0; j < available.size(); ++j) {
            const EventSpec& e = available[j];
            if (e.kind == EventKind::TypeText || e.kind == EventKind::TypeNumber)
                typing.push_back(static_cast<int>(j));
            if (e.kind == EventKind::Wait) waitIdx = static_cast<int>(j);
            if (std::find(previous.begin(), previous.end(), e) == previous.end())
                novel.push_back(static_cast<int>(j));
        }
        int pick;
        if (!typing.empty()) {
            pick = typing[static_cast<size_t>(
                rng.uniformInt(0, static_cast<std::int64_t>(typing.size()) - 1))];
        } else if (available != previous && !novel.empty() &&
                   rng.uniformReal() <= config.newEventProbability) {
            pick = novel[static_cast<size_t>(
                rng.uniformInt(0, static_cast<std::int64_t>(novel.size()) - 1))];
        } else {
            pick = waitIdx;
        }

        std::vector<std::uint32_t> group;
        group.reserve(static_cast<size_t>(enc.groupSize));
        group.push_back(static_cast<std::uint32_t>(pick));
        for (int pc = 1; pc < enc.groupSize; ++pc) {
            group.push_back(static_cast<std::uint32_t>(
                rng.uniformInt(0, static_cast<std::int64_t>(enc.codonMax) - 1)));
        }
        ResolvedEvent ev = resolveEvent(ctx, available, group);
        applyEvent(vm, ev);
        ext.genotype.codons.insert(ext.genotype.codons.end(), group.begin(), group.end());
        ++groups;
        ++executed;
        ext.events.push_back(std::move(ev));
        if (vm.trace().revision != lastRevision) {
            lastRevision = vm.trace().revision;
            lastImproving = groups;
        } else {
            done = true;
        }
        previous = available;
    }

    ext.activeAtEnd = !vm.stopped() && vm.anyScriptActive();
    vm.finalizeTrace();
    ext.trace = vm.trace();
    ext.fitness = engine.evaluateAll(ext.trace);
    ext.lastImprovingGroup = lastImproving;
    ext.groupsExecuted = executed;
    ext.vmSteps = ext.trace.steps;
    result.vmSteps = ext.vmSteps;

    bool newBlocks = false;
    for (const std::string& id : ext.trace.covered) {
        if (!original.trace.covered.count(id)) {
            newBlocks = true;
            break;
        }
    }
    result.replaced = newBlocks;
    result.test = std::move(ext);
    return result;
}

GeneratedSuite runSearch(const Project& project, const EventContext& ctx,
                         const FitnessEngine& engine, const SearchConfig& config) {
    Runner run(project, ctx, engine, config);
    switch (config.algorithm) {
    case Algorithm::Random: return randomSearch(run);
    case Algorithm::Mosa: return mosa(run);
    case Algorithm::Mio: return mio(run);
    }
    return randomSearch(run);
}

}  // namespace bw
