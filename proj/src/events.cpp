#include "blockwhisker/events.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "blockwhisker/rng.hpp"

namespace bw {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kKindNames[] = {
    "Wait",      "KeyPress",  "ClickSprite", "ClickStage", "TypeText", "TypeNumber",
    "MouseDown", "MouseMove", "MouseMoveTo", "DragSprite", "Sound",
};

const Value* literalArg(const Block& b, std::size_t idx) {
    if (idx >= b.args.size()) return nullptr;
    return std::get_if<Value>(&b.args[idx]);
}

std::string num(double n) { return Value::numberToText(n); }

bool numericYielding(const BlockArg& arg) {
    if (const auto* v = std::get_if<Value>(&arg)) {
        double out = 0.0;
        return strictlyNumeric(v->asText(), out);
    }
    if (const auto* sub = std::get_if<std::unique_ptr<Block>>(&arg)) {
        if (!*sub) return false;
        switch ((*sub)->opcode) {
        case Opcode::Add:
        case Opcode::Subtract:
        case Opcode::Multiply:
        case Opcode::Divide:
        case Opcode::Mod:
        case Opcode::Round:
        case Opcode::Random:
        case Opcode::Timer:
        case Opcode::Loudness:
        case Opcode::MouseX:
        case Opcode::MouseY:
        case Opcode::DistanceTo:
        case Opcode::LengthOfList:
            return true;
        default:
            return false;
        }
    }
    return false; // variable reference: unknown, treated as text
}

bool isAnswerBlock(const BlockArg& arg) {
    if (const auto* sub = std::get_if<std::unique_ptr<Block>>(&arg)) {
        return *sub && (*sub)->opcode == Opcode::Answer;
    }
    return false;
}

// True when an answer reporter at argument position i of b sits in a numeric
// context.
bool numericContext(const Block& b, std::size_t i) {
    switch (b.opcode) {
    case Opcode::Add:
    case Opcode::Subtract:
    case Opcode::Multiply:
    case Opcode::Divide:
    case Opcode::Mod:
    case Opcode::Round:
    case Opcode::Random:
    case Opcode::LessThan:
    case Opcode::GreaterThan:
    case Opcode::WaitSeconds:
    case Opcode::RepeatTimes:
    case Opcode::GotoXY:
    case Opcode::ChangeXY:
    case Opcode::MoveSteps:
    case Opcode::GlideSecsTo:
    case Opcode::SetSize:
    case Opcode::ChangeVariable:
        return true;
    case Opcode::Equals:
        return numericYielding(b.args[i == 0 ? 1 : 0]);
    default:
        return false;
    }
}

// Walks statements in execution order, attributing answer usages to the
// latest preceding ask of the same script.
void classifyScript(const std::vector<Block>& seq, std::string& currentAsk,
                    std::map<std::string, bool>& numericAsk) {
    for (const Block& b : seq) {
        const std::function<void(const Block&)> scanExpr = [&](const Block& e) {
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (isAnswerBlock(e.args[i]) && !currentAsk.empty() && numericContext(e, i)) {
                    numericAsk[currentAsk] = true;
                }
                if (const auto* sub = std::get_if<std::unique_ptr<Block>>(&e.args[i])) {
                    if (*sub) scanExpr(**sub);
                }
            }
        };
        scanExpr(b);
        if (b.opcode == Opcode::AskAndWait) currentAsk = b.id;
        for (const auto& branch : b.children) classifyScript(branch, currentAsk, numericAsk);
        // A repeat-until condition re-executes after each body pass, so answer
        // reads in it also see asks from inside the loop.
        if (b.opcode == Opcode::RepeatUntil) scanExpr(b);
    }
}

std::string randomPoolString(std::uint64_t seed) {
    Rng rng(seed ^ 0x7065a11bull);
    std::string s;
    for (int i = 0; i < 6; ++i) {
        s += static_cast<char>('a' + rng.uniformInt(0, 25));
    }
    return s;
}

struct Collector {
    const EventContext* ctx;
    std::vector<EventSpec> out;
    std::set<std::string> seen;

    void add(EventSpec spec) {
        if (seen.insert(spec.identity()).second) out.push_back(std::move(spec));
    }
};

double inferredSoundVolume(const Block& b) {
    if (b.opcode == Opcode::LoudnessGreaterThan) {
        const Value* t = literalArg(b, 0);
        return std::min(100.0, (t ? t->asNumber() : 10.0) + 1.0);
    }
    return 50.0;
}

void eventFromHat(Collector& c, const Actor& actor, const Block& hat) {
    switch (hat.opcode) {
    case Opcode::KeyPressedHat: {
        EventSpec e;
        e.kind = EventKind::KeyPress;
        e.key = literalArg(hat, 0) ? literalArg(hat, 0)->asText() : "space";
        c.add(std::move(e));
        break;
    }
    case Opcode::SpriteClicked: {
        EventSpec e;
        e.kind = EventKind::ClickSprite;
        e.sprite = actor.name;
        c.add(std::move(e));
        break;
    }
    case Opcode::StageClicked: {
        EventSpec e;
        e.kind = EventKind::ClickStage;
        c.add(std::move(e));
        break;
    }
    case Opcode::LoudnessGreaterThan: {
        EventSpec e;
        e.kind = EventKind::Sound;
        e.volume = inferredSoundVolume(hat);
        c.add(std::move(e));
        break;
    }
    default:
        break; // greenflag, broadcast, clone, backdrop: not user inputs
    }
}

void eventFromBlock(Collector& c, const Actor& actor, const Block& b, bool dynamicMouseDown,
                    bool mouseDownNow) {
    switch (b.opcode) {
    case Opcode::KeyPressedQ: {
        if (const Value* k = literalArg(b, 0)) {
            EventSpec e;
            e.kind = EventKind::KeyPress;
            e.key = k->asText();
            c.add(std::move(e));
        }
        break;
    }
    case Opcode::AskAndWait: {
        EventSpec e;
        auto it = c.ctx->askKinds.find(b.id);
        e.kind = (it != c.ctx->askKinds.end()) ? it->second : EventKind::TypeText;
        c.add(std::move(e));
        break;
    }
    case Opcode::MouseDown: {
        EventSpec e;
        e.kind = EventKind::MouseDown;
        e.press = dynamicMouseDown ? !mouseDownNow : true;
        c.add(std::move(e));
        break;
    }
    case Opcode::MouseX:
    case Opcode::MouseY: {
        EventSpec e;
        e.kind = EventKind::MouseMove;
        c.add(std::move(e));
        break;
    }
    case Opcode::DistanceTo:
    case Opcode::PointTowards: {
        const Value* t = literalArg(b, 0);
        if (t && t->asText() == "mouse") {
            EventSpec e;
            e.kind = EventKind::MouseMove;
            c.add(std::move(e));
        }
        break;
    }
    case Opcode::TouchingMousePointer: {
        if (!actor.isStage) {
            EventSpec to;
            to.kind = EventKind::MouseMoveTo;
            to.sprite = actor.name;
            c.add(std::move(to));
        }
        EventSpec mv;
        mv.kind = EventKind::MouseMove;
        c.add(std::move(mv));
        break;
    }
    case Opcode::TouchingSprite: {
        if (!actor.isStage) {
            if (const Value* t = literalArg(b, 0)) {
                EventSpec e;
                e.kind = EventKind::DragSprite;
                e.sprite = actor.name;
                e.dragTarget = t->asText();
                c.add(std::move(e));
            }
        }
        break;
    }
    case Opcode::TouchingEdge: {
        if (!actor.isStage) {
            EventSpec e;
            e.kind = EventKind::DragSprite;
            e.sprite = actor.name;
            e.dragTarget = "edge";
            c.add(std::move(e));
        }
        break;
    }
    case Opcode::Loudness: {
        EventSpec e;
        e.kind = EventKind::Sound;
        e.volume = 50.0;
        c.add(std::move(e));
        break;
    }
    default:
        break;
    }
}

// Pre-order blocks of a script body plus the bodies of custom blocks it
// calls (transitively), used for sensing extraction.
void collectScriptBlocks(const Actor& actor, const std::vector<Block>& seq,
                         std::set<std::string>& visitedProcs, std::vector<const Block*>& out) {
    forEachBlock(seq, [&](const Block& b) {
        out.push_back(&b);
        if (b.opcode == Opcode::Call) {
            const Value* name = literalArg(b, 0);
            if (!name || !visitedProcs.insert(name->asText()).second) return;
            for (const Script& def : actor.customBlocks) {
                if (def.hat && literalArg(*def.hat, 0) &&
                    literalArg(*def.hat, 0)->asText() == name->asText()) {
                    collectScriptBlocks(actor, def.body, visitedProcs, out);
                }
            }
        }
    });
}

} // namespace

const char* eventKindName(EventKind k) { return kKindNames[static_cast<int>(k)]; }

int openParamCount(EventKind k) {
    switch (k) {
    case EventKind::Wait:
    case EventKind::KeyPress:
    case EventKind::TypeNumber:
    case EventKind::DragSprite:
        return 1;
    case EventKind::MouseMove:
        return 2;
    default:
        return 0;
    }
}

std::string EventSpec::identity() const {
    switch (kind) {
    case EventKind::KeyPress:
        return std::string("KeyPress(") + key + ")";
    case EventKind::ClickSprite:
        return std::string("ClickSprite(") + sprite + ")";
    case EventKind::MouseMoveTo:
        return std::string("MouseMoveTo(") + sprite + ")";
    case EventKind::DragSprite:
        return std::string("DragSprite(") + sprite + "->" + dragTarget + ")";
    case EventKind::MouseDown:
        return std::string("MouseDown(") + (press ? "press" : "release") + ")";
    case EventKind::Sound:
        return std::string("Sound(") + num(volume) + ")";
    default:
        return eventKindName(kind);
    }
}

EventContext EventContext::build(const Project& project, std::uint64_t seed) {
    EventContext ctx;
    ctx.project = &project;

    std::map<std::string, bool> numericAsk;
    std::vector<std::string> askOrder;
    std::set<std::string> comparedTexts;
    for (const Actor& a : project.actors) {
        std::vector<const Script*> all;
        for (const Script& s : a.scripts) all.push_back(&s);
        for (const Script& s : a.customBlocks) all.push_back(&s);
        for (const Script* s : all) {
            std::string currentAsk;
            classifyScript(s->body, currentAsk, numericAsk);
            forEachBlock(s->body, [&](const Block& b) {
                if (b.opcode == Opcode::AskAndWait) askOrder.push_back(b.id);
                if (b.opcode == Opcode::Equals || b.opcode == Opcode::LessThan ||
                    b.opcode == Opcode::GreaterThan) {
                    for (std::size_t i = 0; i < b.args.size(); ++i) {
                        if (!isAnswerBlock(b.args[i])) continue;
                        const BlockArg& other = b.args[i == 0 ? 1 : 0];
                        if (const auto* v = std::get_if<Value>(&other)) {
                            double out = 0.0;
                            if (!strictlyNumeric(v->asText(), out)) {
                                comparedTexts.insert(v->asText());
                            }
                        }
                    }
                }
            });
        }
    }
    for (const std::string& id : askOrder) {
        auto it = numericAsk.find(id);
        ctx.askKinds[id] =
            (it != numericAsk.end() && it->second) ? EventKind::TypeNumber : EventKind::TypeText;
    }

    ctx.textPool.assign(comparedTexts.begin(), comparedTexts.end());
    ctx.textPool.push_back(randomPoolString(seed));
    ctx.textPool.push_back("0");
    ctx.textPool.push_back("10");
    ctx.textPool.push_back("Hello");

    int np = 1; // Wait is always extractable
    for (const EventSpec& e : staticExtract(ctx)) {
        np = std::max(np, openParamCount(e.kind));
    }
    ctx.numParameterCodons = np;
    return ctx;
}

std::vector<EventSpec> staticExtract(const EventContext& ctx) {
    Collector c{&ctx, {}, {}};
    c.add(EventSpec{});
    for (const Actor& a : ctx.project->actors) {
        for (const Script& s : a.scripts) {
            if (s.hat) eventFromHat(c, a, *s.hat);
            forEachBlock(s.body, [&](const Block& b) { eventFromBlock(c, a, b, false, false); });
        }
        for (const Script& s : a.customBlocks) {
            forEachBlock(s.body, [&](const Block& b) { eventFromBlock(c, a, b, false, false); });
        }
    }
    return std::move(c.out);
}

std::vector<EventSpec> dynamicExtract(const EventContext& ctx, const Vm& vm) {
    Collector c{&ctx, {}, {}};
    c.add(EventSpec{});
    const Project& project = *ctx.project;
    for (std::size_t ai = 0; ai < project.actors.size(); ++ai) {
        const Actor& a = project.actors[ai];
        for (std::size_t si = 0; si < a.scripts.size(); ++si) {
            const Script& s = a.scripts[si];
            if (vm.scriptActive(static_cast<int>(ai), static_cast<int>(si))) {
                std::set<std::string> visited;
                std::vector<const Block*> blocks;
                collectScriptBlocks(a, s.body, visited, blocks);
                for (const Block* b : blocks) {
                    eventFromBlock(c, a, *b, true, vm.mouseDownState());
                }
            } else if (s.hat) {
                eventFromHat(c, a, *s.hat);
            }
        }
    }
    for (const EventSpec& e : c.out) {
        if (e.kind == EventKind::TypeText) return {e, EventSpec{}};
    }
    for (const EventSpec& e : c.out) {
        if (e.kind == EventKind::TypeNumber) return {e, EventSpec{}};
    }
    return std::move(c.out);
}

std::string ResolvedEvent::describe() const {
    switch (spec.kind) {
    case EventKind::Wait:
        return "Wait(" + std::to_string(duration) + ")";
    case EventKind::KeyPress:
        return "KeyPress(" + spec.key + "," + std::to_string(duration) + ")";
    case EventKind::TypeText:
        return "TypeText(" + text + ")";
    case EventKind::TypeNumber:
        return "TypeNumber(" + num(number) + ")";
    case EventKind::MouseMove:
        return "MouseMove(" + num(x) + "," + num(y) + ")";
    case EventKind::DragSprite:
        return "DragSprite(" + spec.sprite + "->" + spec.dragTarget +
               ",angle=" + std::to_string(angle) + ")";
    default:
        return spec.identity();
    }
}

ResolvedEvent resolveEvent(const EventContext& ctx, const std::vector<EventSpec>& events,
                           const std::vector<std::uint32_t>& group) {
    ResolvedEvent ev;
    if (events.empty() || group.empty()) return ev;
    ev.spec = events[static_cast<std::size_t>(group[0]) % events.size()];
    const auto param = [&](std::size_t i) -> long long {
        return i < group.size() ? group[i] : 0;
    };
    switch (ev.spec.kind) {
    case EventKind::Wait:
        ev.duration = std::max<long long>(1, param(1) % ctx.waitDurationBound);
        break;
    case EventKind::KeyPress:
        ev.duration = std::max<long long>(1, param(1) % ctx.keyPressDurationBound);
        break;
    case EventKind::TypeNumber:
        ev.number = static_cast<double>(param(1) % 201 - 100);
        break;
    case EventKind::TypeText:
        ev.text = ctx.textPool[static_cast<std::size_t>(param(1)) % ctx.textPool.size()];
        break;
    case EventKind::MouseMove: {
        const int w = ctx.project->stage.width;
        const int h = ctx.project->stage.height;
        ev.x = static_cast<double>(param(1) % w - w / 2);
        ev.y = static_cast<double>(param(2) % h - h / 2);
        break;
    }
    case EventKind::DragSprite:
        ev.angle = param(1);
        break;
    case EventKind::Sound:
        ev.duration = ctx.soundDurationSteps;
        break;
    default:
        break;
    }
    return ev;
}

void applyEvent(Vm& vm, const ResolvedEvent& ev) {
    switch (ev.spec.kind) {
    case EventKind::Wait:
        for (long long i = 0; i < ev.duration; ++i) vm.step({});
        break;
    case EventKind::KeyPress:
        for (long long i = 0; i < ev.duration; ++i) {
            StepInput in;
            in.keyDown = ev.spec.key;
            if (i == ev.duration - 1) in.keyUpAfter = ev.spec.key;
            vm.step(in);
        }
        break;
    case EventKind::ClickSprite: {
        StepInput in;
        in.clickSprite = ev.spec.sprite;
        vm.step(in);
        break;
    }
    case EventKind::ClickStage: {
        StepInput in;
        in.clickStage = true;
        vm.step(in);
        break;
    }
    case EventKind::TypeText: {
        StepInput in;
        in.answer = ev.text;
        vm.step(in);
        break;
    }
    case EventKind::TypeNumber: {
        StepInput in;
        in.answer = Value::numberToText(ev.number);
        vm.step(in);
        break;
    }
    case EventKind::MouseDown: {
        StepInput in;
        in.mouseDown = ev.spec.press;
        vm.step(in);
        break;
    }
    case EventKind::MouseMove: {
        StepInput in;
        in.mouseMove = {ev.x, ev.y};
        vm.step(in);
        break;
    }
    case EventKind::MouseMoveTo: {
        StepInput in;
        if (auto pos = vm.positionOf(ev.spec.sprite)) in.mouseMove = *pos;
        vm.step(in);
        break;
    }
    case EventKind::DragSprite: {
        const auto visible = vm.visibleOf(ev.spec.sprite);
        if (visible && *visible) {
            std::optional<std::pair<double, double>> target;
            if (ev.spec.dragTarget == "edge") {
                const double hw = vm.project().stage.width / 2.0;
                const double hh = vm.project().stage.height / 2.0;
                switch (vm.rng().uniformInt(0, 3)) {
                case 0:
                    target = {{-hw, vm.rng().uniformReal(-hh, hh)}};
                    break;
                case 1:
                    target = {{hw, vm.rng().uniformReal(-hh, hh)}};
                    break;
                case 2:
                    target = {{vm.rng().uniformReal(-hw, hw), -hh}};
                    break;
                default:
                    target = {{vm.rng().uniformReal(-hw, hw), hh}};
                    break;
                }
            } else {
                target = vm.positionOf(ev.spec.dragTarget);
            }
            if (target) {
                double tx = target->first;
                double ty = target->second;
                if (ev.angle < 360) {
                    const auto box = vm.boxSizeOf(ev.spec.sprite);
                    const double rad = static_cast<double>(ev.angle) * kPi / 180.0;
                    if (box) {
                        tx += box->first * std::cos(rad);
                        ty += box->second * std::sin(rad);
                    }
                }
                vm.teleport(ev.spec.sprite, tx, ty);
            }
        }
        vm.step({});
        break;
    }
    case EventKind::Sound: {
        StepInput in;
        in.sound = {{ev.spec.volume, ev.duration}};
        vm.step(in);
        break;
    }
    }
}

void runEventSequence(Vm& vm, const std::vector<ResolvedEvent>& events,
                      const std::function<void(std::size_t)>& afterEach) {
    StepInput flag;
    flag.greenflag = true;
    vm.step(flag);
    if (afterEach) afterEach(0);
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (vm.stopped()) break;
        applyEvent(vm, events[i]);
        if (afterEach) afterEach(i + 1);
    }
    vm.finalizeTrace();
}

} // namespace bw
