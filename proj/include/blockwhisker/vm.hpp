#pragma once

#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "blockwhisker/project.hpp"
#include "blockwhisker/rng.hpp"
#include "blockwhisker/value.hpp"

namespace bw {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct VmConfig {
    int stepTimeMs = 30;    // base step time at acceleration 1
    int acceleration = 1;   // divides step time; time arguments are divided too
    std::uint64_t seed = 0; // drives pick-random and drag edge selection
    int cloneLimit = 50;
};

// ceil(seconds * 1000 / stepTimeMs); 0 for 0 s, at least 1 otherwise.
long long secondsToSteps(double seconds, int stepTimeMs);
int effectiveStepTimeMs(const VmConfig& cfg);

// One step's worth of external input. Defaults mean "no input".
struct StepInput {
    bool greenflag = false;
    std::optional<std::string> keyDown;
    std::optional<std::string> keyUpAfter; // released at the start of the next step
    std::optional<std::pair<double, double>> mouseMove;
    std::optional<bool> mouseDown;
    std::optional<std::string> clickSprite;
    bool clickStage = false;
    std::optional<std::string> answer;
    std::optional<std::pair<double, long long>> sound; // volume, duration in steps
};

// Minimum true/false branch distances observed for one branching,
// time-dependent or artificial event node.
struct BranchRecord {
    double minTrue = kInf;
    double minFalse = kInf;
};

struct ExecutionTrace {
    std::set<std::string> covered;                  // executed blocks (ids), hats included
    std::map<std::string, BranchRecord> branches;   // per branching/time-dependent block
    std::map<std::string, bool> eventOccurred;      // per hat block id
    long long steps = 0;
    // Bumped whenever coverage grows or a minimum distance strictly drops;
    // decode-time improvement tracking compares revisions.
    std::uint64_t revision = 0;

    void cover(const std::string& id);
    void recordBranch(const std::string& id, double trueDist, double falseDist);
    void markEvent(const std::string& hatId);
};

struct BubbleState {
    enum Kind { None = 0, Say = 1, Think = 2 };
    Kind kind = None;
    std::string text;
    bool operator==(const BubbleState&) const = default;
};

struct RuntimeSnapshot {
    std::string key; // actor name, clones suffixed "#<ordinal>"
    std::string actorName;
    bool isStage = false;
    bool isClone = false;
    double x = 0, y = 0, direction = 90, size = 100, volume = 100;
    bool visible = true;
    int costume = 0;
    int layer = 0;
    BubbleState bubble;
    std::map<std::string, std::string> variables; // canonical text values
    std::map<std::string, std::size_t> listLengths;
};

struct VmSnapshot {
    std::vector<RuntimeSnapshot> runtimes; // alive runtimes in stable order
    std::string backdrop;
    std::map<std::string, int> cloneCounts; // per sprite name
    std::set<std::pair<std::string, std::string>> touching; // visible pairs, key-ordered
    std::set<std::string> touchingEdge;
    std::string answer;
};

enum class HaltKind {
    Running,
    WaitSteps,
    WaitUntilCond,
    Glide,
    SayUntil,
    SoundUntil,
    BroadcastWait,
    AskWait,
    Done,
};

class Vm {
public:
    Vm(const Project& project, VmConfig config);

    // apply input -> activate hats -> run one process batch -> sc += 1.
    void step(const StepInput& input = {});

    long long stepCounter() const { return sc_; }
    bool stopped() const { return stopped_; }
    const ExecutionTrace& trace() const { return trace_; }
    // Records remaining-step distances of still-halted time-dependent
    // blocks; call once when a test's event sequence ends.
    void finalizeTrace();

    double timerValue() const;

    // Virtualised sound: level -1 means no simulated sound.
    void setVirtualSound(double volume, long long durationSteps);
    double internalSoundLevel() const;
    double loudnessReporter() const;

    bool askFocus() const { return !askQueue_.empty(); }
    bool mouseDownState() const { return mouseDown_; }
    std::optional<bool> visibleOf(const std::string& spriteName) const;
    bool anyScriptActive() const;
    // True when some runtime of actors[actorIndex] has a live process for
    // scripts[scriptIndex] (pending ones count as active).
    bool scriptActive(int actorIndex, int scriptIndex) const;

    std::optional<std::pair<double, double>> positionOf(const std::string& spriteName) const;
    std::optional<std::pair<double, double>> boxSizeOf(const std::string& spriteName) const;
    void teleport(const std::string& spriteName, double x, double y);

    VmSnapshot snapshot() const;

    const Project& project() const { return *project_; }
    const VmConfig& config() const { return config_; }
    Rng& rng() { return rng_; }

    // Total goal blocks (statements + hats) of a project.
    static std::vector<std::string> goalBlocks(const Project& project);

private:
    struct Runtime {
        int actorIndex = 0;
        int cloneOrdinal = 0; // 0 = original
        bool alive = true;
        double x = 0, y = 0, direction = 90, size = 100, volume = 100;
        bool visible = true;
        int currentCostume = 0;
        int layer = 0;
        BubbleState bubble;
        std::map<std::string, Value> variables;
        std::map<std::string, std::vector<Value>> lists;
    };

    struct Frame {
        enum class Kind { Body, IfArm, LoopBody, ProcBody };
        Kind kind = Kind::Body;
        const std::vector<Block>* seq = nullptr;
        std::size_t idx = 0;
        const Block* owner = nullptr;
        long long remaining = 0;
        bool needsHeaderCheck = false;
    };

    struct Halt {
        HaltKind kind = HaltKind::Running;
        long long resumeAfterSc = -1;     // WaitSteps/Glide/SayUntil/SoundUntil
        long long enteredSc = 0;
        long long totalSteps = 0;
        const Block* condBlock = nullptr; // WaitUntilCond
        std::string haltBlockId;          // time-dependent block to credit on completion
        // glide
        double fromX = 0, fromY = 0, toX = 0, toY = 0;
        // broadcastAndWait
        std::vector<int> waitedProcs;
        bool askAnswered = false;
    };

    struct Process {
        int id = 0;
        int runtimeIndex = 0;
        int scriptIndex = 0;
        long long readyAtStep = 0;
        std::vector<Frame> frames;
        Halt halt;
        bool done() const { return halt.kind == HaltKind::Done; }
    };

    struct CondResult {
        bool value = false;
        double trueDist = 1;
        double falseDist = 0;
    };

    // step phases
    void applyInput(const StepInput& input);
    void activationPhase(const StepInput& input);
    void runBatch();
    void sweepDead();

    void activateScript(int runtimeIndex, int scriptIndex, bool nextBatch);
    void activateHats(Opcode hat, const std::string& argMatch, bool nextBatch,
                      int onlyActorIndex = -1);
    void checkLoudnessHats();

    void runProcess(Process& proc);
    // Returns false when the process yielded (halt set or batch over).
    bool execStatement(Process& proc, const Block& block);
    bool tryResume(Process& proc);
    void finishHalt(Process& proc); // credits completed time-dependent block

    Value evalExpr(const Block& b, Runtime& self);
    Value evalArg(const BlockArg& arg, Runtime& self);
    CondResult evalCondition(const BlockArg& arg, Runtime& self);
    CondResult evalConditionBlock(const Block& b, Runtime& self);

    Value* findVariable(Runtime& self, const std::string& name);
    std::vector<Value>* findList(Runtime& self, const std::string& name);

    bool runtimesTouch(const Runtime& a, const Runtime& b) const;
    bool touchesEdge(const Runtime& r) const;
    double edgeDistance(const Runtime& r) const;
    std::pair<double, double> boxOf(const Runtime& r) const;
    const Runtime* firstAliveRuntime(const std::string& actorName) const;
    // Distance helpers for sensing branch distances.
    double distanceToActor(const Runtime& self, const std::string& name) const;

    void yieldProcess(Process& proc); // halt until next batch
    void haltForSteps(Process& proc, long long steps, HaltKind kind, const std::string& blockId);
    long long stepsForSeconds(double seconds) const;

    std::string runtimeKey(const Runtime& r) const;

    const Project* project_;
    VmConfig config_;
    Rng rng_;

    // Deques: scripts spawn clones and processes mid-batch (broadcast,
    // createClone) while the runner holds references into both containers,
    // so growth must not relocate existing elements.
    std::deque<Runtime> runtimes_;
    std::deque<Process> processes_;
    int nextProcId_ = 0;
    int nextLayer_ = 0;
    std::vector<int> cloneCounters_; // per actor index
    int totalClones_ = 0;

    long long sc_ = 0;
    bool stopped_ = false;
    long long timerResetSc_ = 0;

    std::set<std::string> keysDown_;
    std::vector<std::string> pendingKeyReleases_;
    bool keyEdge_ = false;
    double mouseX_ = 0, mouseY_ = 0;
    bool mouseDown_ = false;
    Value answer_{std::string()};
    std::deque<int> askQueue_; // process ids waiting for an answer

    double soundLevel_ = -1;
    long long soundUntilSc_ = -1;
    double prevLoudness_ = 0;

    ExecutionTrace trace_;
};

} // namespace bw
