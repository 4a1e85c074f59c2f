#include "blockwhisker/mutation.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "blockwhisker/rng.hpp"

namespace bw {

namespace {

enum class Change {
    ReplaceKeyArg,   // KRM: args[0] <- new key literal
    DeleteBlock,     // SBD: erase from owning sequence
    DeleteHat,       // SDM: script loses its hat
    SwapOpcode,      // AOR / LOR / ROR
    WrapNot,         // NCM: parent arg gets negated
    ReplaceVarRead,  // VRM: variable reference arg renamed
    ReplaceVarWrite, // VRM: SetVariable/ChangeVariable name literal renamed
};

struct Plan {
    std::string op;
    std::string locus;
    std::string description;
    Change change = Change::DeleteBlock;
    std::string text;        // new key / new variable name
    Opcode newOpcode = Opcode::Add;
    int argIdx = 0;          // for WrapNot / ReplaceVarRead
};

const Value* literalArg(const Block& b, size_t idx) {
    if (idx >= b.args.size()) return nullptr;
    return std::get_if<Value>(&b.args[idx]);
}

std::vector<std::string> keyVocabulary(const Project& project) {
    std::set<std::string> keys{"space", "up", "down", "left", "right"};
    for (const Actor& actor : project.actors) {
        const auto scan = [&](const Script& script) {
            if (script.hat && script.hat->opcode == Opcode::KeyPressedHat) {
                if (const Value* k = literalArg(*script.hat, 0)) keys.insert(k->asText());
            }
            forEachBlock(script.body, [&](const Block& b) {
                if (b.opcode == Opcode::KeyPressedQ) {
                    if (const Value* k = literalArg(b, 0)) keys.insert(k->asText());
                }
            });
        };
        for (const Script& s : actor.scripts) scan(s);
        for (const Script& s : actor.customBlocks) scan(s);
    }
    return {keys.begin(), keys.end()};
}

std::vector<std::string> scopeVariables(const Project& project, const Actor& actor) {
    std::set<std::string> names;
    for (const VarDef& v : actor.variables) names.insert(v.name);
    if (const Actor* stage = project.stageActor()) {
        for (const VarDef& v : stage->variables) names.insert(v.name);
    }
    return {names.begin(), names.end()};
}

std::string pickOther(const std::vector<std::string>& pool, const std::string& current,
                      Rng& rng) {
    std::vector<std::string> options;
    for (const std::string& s : pool) {
        if (s != current) options.push_back(s);
    }
    if (options.empty()) return {};
    return options[static_cast<size_t>(
        rng.uniformInt(0, static_cast<std::int64_t>(options.size()) - 1))];
}

struct Collector {
    const Project& project;
    Rng rng;
    std::vector<std::string> keys;
    std::vector<Plan> plans;

    Collector(const Project& p, std::uint64_t seed)
        : project(p), rng(seed), keys(keyVocabulary(p)) {}

    void addOpcodeSwaps(const Block& b, const char* op,
                        std::initializer_list<Opcode> family) {
        for (Opcode alt : family) {
            if (alt == b.opcode) continue;
            Plan plan;
            plan.op = op;
            plan.locus = b.id;
            plan.change = Change::SwapOpcode;
            plan.newOpcode = alt;
            plan.description = std::string(opcodeName(b.opcode)) + " -> " + opcodeName(alt);
            plans.push_back(std::move(plan));
        }
    }

    void visitBlockPlans(const Actor& actor, const Block& b, bool isHatBlock) {
        switch (b.opcode) {
        case Opcode::KeyPressedHat:
        case Opcode::KeyPressedQ: {
            if (const Value* k = literalArg(b, 0)) {
                const std::string replacement = pickOther(keys, k->asText(), rng);
                if (!replacement.empty()) {
                    Plan plan;
                    plan.op = "KRM";
                    plan.locus = b.id;
                    plan.change = Change::ReplaceKeyArg;
                    plan.text = replacement;
                    plan.description = "key " + k->asText() + " -> " + replacement;
                    plans.push_back(std::move(plan));
                }
            }
            break;
        }
        case Opcode::Add:
        case Opcode::Subtract:
        case Opcode::Multiply:
        case Opcode::Divide:
            addOpcodeSwaps(b, "AOR",
                           {Opcode::Add, Opcode::Subtract, Opcode::Multiply, Opcode::Divide});
            break;
        case Opcode::And:
        case Opcode::Or:
            addOpcodeSwaps(b, "LOR", {Opcode::And, Opcode::Or});
            break;
        case Opcode::LessThan:
        case Opcode::GreaterThan:
        case Opcode::Equals:
            addOpcodeSwaps(b, "ROR",
                           {Opcode::LessThan, Opcode::GreaterThan, Opcode::Equals});
            break;
        case Opcode::SetVariable:
        case Opcode::ChangeVariable: {
            if (const Value* name = literalArg(b, 0)) {
                const std::string replacement =
                    pickOther(scopeVariables(project, actor), name->asText(), rng);
                if (!replacement.empty()) {
                    Plan plan;
                    plan.op = "VRM";
                    plan.locus = b.id;
                    plan.change = Change::ReplaceVarWrite;
                    plan.text = replacement;
                    plan.description = "variable " + name->asText() + " -> " + replacement;
                    plans.push_back(std::move(plan));
                }
            }
            break;
        }
        default:
            break;
        }

        if (!isHatBlock && !isHat(b.opcode) && !isBranching(b.opcode) && !isCap(b.opcode) &&
            !isReporter(b.opcode)) {
            Plan plan;
            plan.op = "SBD";
            plan.locus = b.id;
            plan.change = Change::DeleteBlock;
            plan.description = std::string("delete ") + opcodeName(b.opcode);
            plans.push_back(std::move(plan));
        }

        for (size_t i = 0; i < b.args.size(); ++i) {
            if (const auto* ref = std::get_if<std::string>(&b.args[i])) {
                const std::string replacement =
                    pickOther(scopeVariables(project, actor), *ref, rng);
                if (!replacement.empty()) {
                    Plan plan;
                    plan.op = "VRM";
                    plan.locus = b.id;
                    plan.change = Change::ReplaceVarRead;
                    plan.argIdx = static_cast<int>(i);
                    plan.text = replacement;
                    plan.description = "read " + *ref + " -> " + replacement;
                    plans.push_back(std::move(plan));
                }
                continue;
            }
            const auto* sub = std::get_if<std::unique_ptr<Block>>(&b.args[i]);
            if (!sub || !*sub) continue;
            if (isBooleanReporter((*sub)->opcode)) {
                Plan plan;
                plan.op = "NCM";
                plan.locus = b.id;
                plan.change = Change::WrapNot;
                plan.argIdx = static_cast<int>(i);
                plan.description = std::string("negate ") + opcodeName((*sub)->opcode);
                plans.push_back(std::move(plan));
            }
            visitBlockPlans(actor, **sub, false);
        }
        for (const auto& child : b.children) {
            for (const Block& cb : child) visitBlockPlans(actor, cb, false);
        }
    }

    void run() {
        for (const Actor& actor : project.actors) {
            for (const Script& script : actor.scripts) {
                if (script.hat) {
                    Plan plan;
                    plan.op = "SDM";
                    plan.locus = script.hat->id;
                    plan.change = Change::DeleteHat;
                    plan.description =
                        std::string("delete script ") + opcodeName(script.hat->opcode);
                    plans.push_back(std::move(plan));
                    visitBlockPlans(actor, *script.hat, true);
                }
                for (const Block& b : script.body) visitBlockPlans(actor, b, false);
            }
            for (const Script& def : actor.customBlocks) {
                for (const Block& b : def.body) visitBlockPlans(actor, b, false);
            }
        }
    }
};

// Mutable lookup helpers over a project copy.

Block* findInBlock(Block& b, const std::string& id) {
    if (b.id == id) return &b;
    for (auto& arg : b.args) {
        if (auto* sub = std::get_if<std::unique_ptr<Block>>(&arg)) {
            if (*sub) {
                if (Block* found = findInBlock(**sub, id)) return found;
            }
        }
    }
    for (auto& child : b.children) {
        for (Block& cb : child) {
            if (Block* found = findInBlock(cb, id)) return found;
        }
    }
    return nullptr;
}

Block* findBlock(Project& p, const std::string& id) {
    for (Actor& actor : p.actors) {
        for (Script& script : actor.scripts) {
            if (script.hat) {
                if (Block* found = findInBlock(*script.hat, id)) return found;
            }
            for (Block& b : script.body) {
                if (Block* found = findInBlock(b, id)) return found;
            }
        }
        for (Script& def : actor.customBlocks) {
            if (def.hat) {
                if (Block* found = findInBlock(*def.hat, id)) return found;
            }
            for (Block& b : def.body) {
                if (Block* found = findInBlock(b, id)) return found;
            }
        }
    }
    return nullptr;
}

bool eraseFromSequence(std::vector<Block>& seq, const std::string& id) {
    for (size_t i = 0; i < seq.size(); ++i) {
        if (seq[i].id == id) {
            seq.erase(seq.begin() + static_cast<std::ptrdiff_t>(i));
            return true;
        }
        for (auto& child : seq[i].children) {
            if (eraseFromSequence(child, id)) return true;
        }
    }
    return false;
}

bool eraseBlock(Project& p, const std::string& id) {
    for (Actor& actor : p.actors) {
        for (Script& script : actor.scripts) {
            if (eraseFromSequence(script.body, id)) return true;
        }
        for (Script& def : actor.customBlocks) {
            if (eraseFromSequence(def.body, id)) return true;
        }
    }
    return false;
}

bool applyPlan(Project& p, const Plan& plan) {
    switch (plan.change) {
    case Change::ReplaceKeyArg: {
        Block* b = findBlock(p, plan.locus);
        if (!b || b->args.empty()) return false;
        b->args[0] = Value(plan.text);
        return true;
    }
    case Change::DeleteBlock:
        return eraseBlock(p, plan.locus);
    case Change::DeleteHat: {
        for (Actor& actor : p.actors) {
            for (Script& script : actor.scripts) {
                if (script.hat && script.hat->id == plan.locus) {
                    script.hat.reset();
                    return true;
                }
            }
        }
        return false;
    }
    case Change::SwapOpcode: {
        Block* b = findBlock(p, plan.locus);
        if (!b) return false;
        b->opcode = plan.newOpcode;
        return true;
    }
    case Change::WrapNot: {
        Block* b = findBlock(p, plan.locus);
        if (!b || plan.argIdx >= static_cast<int>(b->args.size())) return false;
        auto* sub = std::get_if<std::unique_ptr<Block>>(&b->args[plan.argIdx]);
        if (!sub || !*sub) return false;
        auto wrapper = std::make_unique<Block>();
        wrapper->id = "ncm:" + (*sub)->id;
        wrapper->opcode = Opcode::Not;
        wrapper->args.push_back(std::move(*sub));
        b->args[plan.argIdx] = std::move(wrapper);
        return true;
    }
    case Change::ReplaceVarRead: {
        Block* b = findBlock(p, plan.locus);
        if (!b || plan.argIdx >= static_cast<int>(b->args.size())) return false;
        b->args[plan.argIdx] = std::string(plan.text);
        return true;
    }
    case Change::ReplaceVarWrite: {
        Block* b = findBlock(p, plan.locus);
        if (!b || b->args.empty()) return false;
        b->args[0] = Value(plan.text);
        return true;
    }
    }
    return false;
}

}  // namespace

std::vector<Mutant> generateMutants(const Project& project, std::uint64_t seed) {
    Collector collector(project, seed);
    collector.run();
    std::vector<Mutant> mutants;
    mutants.reserve(collector.plans.size());
    for (const Plan& plan : collector.plans) {
        Mutant m;
        m.op = plan.op;
        m.locus = plan.locus;
        m.description = plan.description;
        m.project = project;
        if (!applyPlan(m.project, plan)) continue;
        mutants.push_back(std::move(m));
    }
    return mutants;
}

int MutationReport::generated() const {
    int total = 0;
    for (const auto& [op, st] : perOperator) total += st.generated;
    return total;
}

int MutationReport::killed() const {
    int total = 0;
    for (const auto& [op, st] : perOperator) total += st.killed;
    return total;
}

double MutationReport::score() const {
    const int g = generated();
    return g == 0 ? 0.0 : static_cast<double>(killed()) / g;
}

MutationReport analyzeMutants(const Project& original, const std::vector<AnnotatedTest>& suite,
                              const std::vector<Mutant>& mutants, const VmConfig& vmCfg,
                              int workers) {
    MutationReport report;
    report.totalTests = static_cast<int>(suite.size());
    std::vector<bool> included(suite.size(), true);
    std::vector<long long> originalSteps(suite.size(), 0);
    for (size_t i = 0; i < suite.size(); ++i) {
        const ReplayResult r = replayTest(original, vmCfg, suite[i]);
        if (r.crashed || r.failedAssertions > 0) {
            included[i] = false;
            ++report.excludedTests;
            report.log.push_back("test " + std::to_string(i) + " excluded: fails on original");
        }
        originalSteps[i] = r.vmSteps;
    }

    struct MutantOutcome {
        bool killed = false;
        std::vector<std::string> log;
    };
    std::vector<MutantOutcome> outcomes(mutants.size());
    const auto analyzeOne = [&](size_t mi) {
        const Mutant& m = mutants[mi];
        MutantOutcome& out = outcomes[mi];
        for (size_t i = 0; i < suite.size() && !out.killed; ++i) {
            if (!included[i]) continue;
            const long long cap = 10 * std::max<long long>(1, originalSteps[i]);
            const ReplayResult r = replayTest(m.project, vmCfg, suite[i], cap);
            if (r.crashed || r.failedAssertions > 0) out.killed = true;
            if (r.capExceeded) {
                out.log.push_back(m.op + " " + m.locus + ": step cap exceeded, not killed");
            }
        }
    };

    const int threadCount = std::max(1, std::min<int>(workers, static_cast<int>(mutants.size())));
    if (threadCount <= 1) {
        for (size_t mi = 0; mi < mutants.size(); ++mi) analyzeOne(mi);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threadCount));
        for (int t = 0; t < threadCount; ++t) {
            pool.emplace_back([&] {
                for (size_t mi = next.fetch_add(1); mi < mutants.size();
                     mi = next.fetch_add(1)) {
                    analyzeOne(mi);
                }
            });
        }
        for (std::thread& th : pool) th.join();
    }

    for (size_t mi = 0; mi < mutants.size(); ++mi) {
        OperatorStats& stats = report.perOperator[mutants[mi].op];
        ++stats.generated;
        if (outcomes[mi].killed) ++stats.killed;
        else ++stats.survived;
        for (std::string& line : outcomes[mi].log) report.log.push_back(std::move(line));
    }
    return report;
}

std::string mutationCsv(const MutationReport& report) {
    std::ostringstream os;
    os << "operator,generated,killed,excluded,score\n";
    for (const auto& [op, st] : report.perOperator) {
        const double score = st.generated == 0
                                 ? 0.0
                                 : static_cast<double>(st.killed) / st.generated;
        os << op << "," << st.generated << "," << st.killed << "," << report.excludedTests
           << "," << score << "\n";
    }
    os << "total," << report.generated() << "," << report.killed() << ","
       << report.excludedTests << "," << report.score() << "\n";
    return os.str();
}

}  // namespace bw
