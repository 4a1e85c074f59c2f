#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blockwhisker/value.hpp"

namespace bw {

enum class Opcode {
    // hats
    Greenflag,
    KeyPressedHat,
    SpriteClicked,
    StageClicked,
    BroadcastReceived,
    StartAsClone,
    BackdropSwitched,
    LoudnessGreaterThan,
    ProcedureDefinition,
    // control
    If,
    IfElse,
    RepeatTimes,
    RepeatUntil,
    Forever,
    WaitSeconds,
    WaitUntil,
    StopAll,
    StopScript,
    CreateClone,
    DeleteClone,
    Broadcast,
    BroadcastAndWait,
    Call,
    // motion
    GotoXY,
    ChangeXY,
    MoveSteps,
    PointTowards,
    GlideSecsTo,
    // looks
    Say,
    SayForSecs,
    Think,
    ThinkForSecs,
    SwitchCostume,
    NextCostume,
    SwitchBackdrop,
    NextBackdrop,
    Show,
    Hide,
    SetSize,
    // sound
    PlaySoundUntilDone,
    // sensing
    TouchingSprite,
    TouchingEdge,
    TouchingMousePointer,
    KeyPressedQ,
    MouseDown,
    MouseX,
    MouseY,
    DistanceTo,
    AskAndWait,
    Answer,
    Timer,
    ResetTimer,
    Loudness,
    // data
    SetVariable,
    ChangeVariable,
    AddToList,
    LengthOfList,
    ItemOfList,
    // operators
    Add,
    Subtract,
    Multiply,
    Divide,
    LessThan,
    GreaterThan,
    Equals,
    And,
    Or,
    Not,
    Random,
    Join,
    Mod,
    Round,
};

const char* opcodeName(Opcode op);
std::optional<Opcode> opcodeFromName(const std::string& name);

bool isHat(Opcode op);
bool isReporter(Opcode op);          // evaluates to a value, not a statement
bool isBooleanReporter(Opcode op);
bool isBranching(Opcode op);         // if / ifElse / repeatUntil / repeatTimes / waitUntil
bool isTimeDependent(Opcode op);     // waitSeconds, sayForSecs, thinkForSecs, glideSecsTo, playSoundUntilDone
bool isCap(Opcode op);               // stopAll, stopScript, deleteClone, forever
// Number of child branches a control block owns (if:1, ifElse:2, loops:1).
int branchCount(Opcode op);

struct Block;
using BlockArg = std::variant<Value, std::string /*variable ref*/, std::unique_ptr<Block>>;

struct Block {
    std::string id;
    Opcode opcode = Opcode::Say;
    std::vector<BlockArg> args;
    std::vector<std::vector<Block>> children;

    Block() = default;
    Block(Block&&) = default;
    Block& operator=(Block&&) = default;
    Block(const Block& other) { *this = other.clone(); }
    Block& operator=(const Block& other) {
        if (this != &other) *this = other.clone();
        return *this;
    }
    Block clone() const; // deep copy (args may own nested blocks)
};

struct Script {
    std::optional<Block> hat;        // scripts without a hat are never scheduled
    std::vector<Block> body;
};

struct Costume {
    std::string name;
    double width = 32;
    double height = 32;
};

struct Sound {
    std::string name;
    double durationSeconds = 0.5;
};

struct VarDef {
    std::string name;
    Value initial;
};

struct ListDef {
    std::string name;
    std::vector<Value> initial;
};

struct Actor {
    std::string name;
    bool isStage = false;
    std::vector<Costume> costumes;
    std::vector<Sound> sounds;
    std::vector<VarDef> variables;
    std::vector<ListDef> lists;
    std::vector<Script> scripts;
    std::vector<Script> customBlocks; // hat = ProcedureDefinition(name)
    // initial attributes
    double x = 0, y = 0;
    double direction = 90;
    double size = 100;
    bool visible = true;
    int currentCostume = 0;
    double volume = 100;
};

struct StageInfo {
    double width = 480;
    double height = 360;
};

struct Project {
    std::string name;
    StageInfo stage;
    std::vector<Actor> actors; // exactly one isStage

    const Actor* stageActor() const;
    const Actor* findActor(const std::string& name) const;
    int actorIndex(const std::string& name) const; // -1 when absent
};

// Pre-order walk over a block, its reporter arguments and its branches.
template <typename Fn>
void visitBlock(const Block& b, Fn&& fn) {
    fn(b);
    for (const auto& arg : b.args) {
        if (const auto* sub = std::get_if<std::unique_ptr<Block>>(&arg)) {
            if (*sub) visitBlock(**sub, fn);
        }
    }
    for (const auto& child : b.children) {
        for (const Block& cb : child) visitBlock(cb, fn);
    }
}

template <typename Fn>
void forEachBlock(const std::vector<Block>& seq, Fn&& fn) {
    for (const Block& b : seq) visitBlock(b, fn);
}

} // namespace bw
