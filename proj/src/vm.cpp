#include "blockwhisker/vm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <tuple>

namespace bw {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxCallDepth = 32;

double degToRad(double deg) { return deg * kPi / 180.0; }

const Value* literalArg(const Block& b, std::size_t idx) {
    if (idx >= b.args.size()) return nullptr;
    return std::get_if<Value>(&b.args[idx]);
}

std::string literalText(const Block& b, std::size_t idx) {
    const Value* v = literalArg(b, idx);
    return v ? v->asText() : std::string();
}

} // namespace

long long secondsToSteps(double seconds, int stepTimeMs) {
    if (seconds <= 0) return 0;
    const double steps = std::ceil(seconds * 1000.0 / static_cast<double>(stepTimeMs));
    return std::max<long long>(1, static_cast<long long>(steps));
}

int effectiveStepTimeMs(const VmConfig& cfg) {
    const int accel = std::max(1, cfg.acceleration);
    return std::max(1, cfg.stepTimeMs / accel);
}

void ExecutionTrace::cover(const std::string& id) {
    if (covered.insert(id).second) ++revision;
}

void ExecutionTrace::recordBranch(const std::string& id, double trueDist, double falseDist) {
    BranchRecord& rec = branches[id];
    if (trueDist < rec.minTrue) {
        rec.minTrue = trueDist;
        ++revision;
    }
    if (falseDist < rec.minFalse) {
        rec.minFalse = falseDist;
        ++revision;
    }
}

void ExecutionTrace::markEvent(const std::string& hatId) {
    auto it = eventOccurred.find(hatId);
    if (it == eventOccurred.end()) {
        eventOccurred[hatId] = true;
        ++revision;
    } else if (!it->second) {
        it->second = true;
        ++revision;
    }
}

Vm::Vm(const Project& project, VmConfig config)
    : project_(&project), config_(config), rng_(config.seed) {
    cloneCounters_.assign(project.actors.size(), 0);
    for (std::size_t i = 0; i < project.actors.size(); ++i) {
        const Actor& a = project.actors[i];
        Runtime r;
        r.actorIndex = static_cast<int>(i);
        r.cloneOrdinal = 0;
        r.x = a.x;
        r.y = a.y;
        r.direction = a.direction;
        r.size = a.size;
        r.volume = a.volume;
        r.visible = a.visible;
        r.currentCostume = a.currentCostume;
        r.layer = nextLayer_++;
        for (const auto& v : a.variables) r.variables[v.name] = v.initial;
        for (const auto& l : a.lists) r.lists[l.name] = l.initial;
        runtimes_.push_back(std::move(r));
    }
    for (const Actor& a : project.actors) {
        for (const Script& s : a.scripts) {
            if (s.hat && s.hat->opcode != Opcode::ProcedureDefinition) {
                trace_.eventOccurred[s.hat->id] = false;
            }
        }
    }
}

double Vm::timerValue() const { return 0.075 * static_cast<double>(sc_ - timerResetSc_); }

void Vm::setVirtualSound(double volume, long long durationSteps) {
    soundLevel_ = std::clamp(volume, 0.0, 100.0);
    soundUntilSc_ = sc_ + std::max<long long>(0, durationSteps);
}

double Vm::internalSoundLevel() const {
    return (soundUntilSc_ > sc_) ? soundLevel_ : -1.0;
}

double Vm::loudnessReporter() const { return std::max(0.0, internalSoundLevel()); }

bool Vm::anyScriptActive() const {
    for (const auto& p : processes_) {
        if (!p.done()) return true;
    }
    return false;
}

bool Vm::scriptActive(int actorIndex, int scriptIndex) const {
    for (const auto& p : processes_) {
        if (p.done()) continue;
        if (runtimes_[p.runtimeIndex].actorIndex == actorIndex && p.scriptIndex == scriptIndex) {
            return true;
        }
    }
    return false;
}

const Vm::Runtime* Vm::firstAliveRuntime(const std::string& actorName) const {
    const Runtime* best = nullptr;
    for (const auto& r : runtimes_) {
        if (!r.alive) continue;
        if (project_->actors[r.actorIndex].name != actorName) continue;
        if (!best || r.cloneOrdinal < best->cloneOrdinal) best = &r;
    }
    return best;
}

std::optional<std::pair<double, double>> Vm::positionOf(const std::string& spriteName) const {
    const Runtime* r = firstAliveRuntime(spriteName);
    if (!r) return std::nullopt;
    return std::make_pair(r->x, r->y);
}

std::optional<bool> Vm::visibleOf(const std::string& spriteName) const {
    const Runtime* r = firstAliveRuntime(spriteName);
    if (!r) return std::nullopt;
    return r->visible;
}

std::optional<std::pair<double, double>> Vm::boxSizeOf(const std::string& spriteName) const {
    const Runtime* r = firstAliveRuntime(spriteName);
    if (!r) return std::nullopt;
    return boxOf(*r);
}

void Vm::teleport(const std::string& spriteName, double x, double y) {
    for (auto& r : runtimes_) {
        if (r.alive && r.cloneOrdinal == 0 && project_->actors[r.actorIndex].name == spriteName) {
            r.x = x;
            r.y = y;
            return;
        }
    }
}

std::pair<double, double> Vm::boxOf(const Runtime& r) const {
    const Actor& a = project_->actors[r.actorIndex];
    const Costume& c = a.costumes[static_cast<std::size_t>(
        std::clamp<int>(r.currentCostume, 0, static_cast<int>(a.costumes.size()) - 1))];
    const double scale = r.size / 100.0;
    return {c.width * scale, c.height * scale};
}

bool Vm::runtimesTouch(const Runtime& a, const Runtime& b) const {
    if (!a.visible || !b.visible || !a.alive || !b.alive) return false;
    const auto [aw, ah] = boxOf(a);
    const auto [bw, bh] = boxOf(b);
    return std::fabs(a.x - b.x) <= (aw + bw) / 2.0 && std::fabs(a.y - b.y) <= (ah + bh) / 2.0;
}

bool Vm::touchesEdge(const Runtime& r) const {
    const auto [w, h] = boxOf(r);
    const double hw = project_->stage.width / 2.0;
    const double hh = project_->stage.height / 2.0;
    return r.x - w / 2 <= -hw || r.x + w / 2 >= hw || r.y - h / 2 <= -hh || r.y + h / 2 >= hh;
}

double Vm::edgeDistance(const Runtime& r) const {
    const auto [w, h] = boxOf(r);
    const double hw = project_->stage.width / 2.0;
    const double hh = project_->stage.height / 2.0;
    const double gaps[4] = {
        (r.x - w / 2) - (-hw),
        hw - (r.x + w / 2),
        (r.y - h / 2) - (-hh),
        hh - (r.y + h / 2),
    };
    double best = kInf;
    for (double g : gaps) best = std::min(best, std::max(0.0, g));
    return best;
}

double Vm::distanceToActor(const Runtime& self, const std::string& name) const {
    double best = kInf;
    for (const auto& r : runtimes_) {
        if (!r.alive || &r == &self) continue;
        if (project_->actors[r.actorIndex].name != name) continue;
        best = std::min(best, std::hypot(r.x - self.x, r.y - self.y));
    }
    if (best == kInf) best = std::hypot(project_->stage.width, project_->stage.height);
    return best;
}

std::string Vm::runtimeKey(const Runtime& r) const {
    const std::string& name = project_->actors[r.actorIndex].name;
    if (r.cloneOrdinal == 0) return name;
    return name + "#" + std::to_string(r.cloneOrdinal);
}

long long Vm::stepsForSeconds(double seconds) const {
    const int accel = std::max(1, config_.acceleration);
    return secondsToSteps(seconds / accel, effectiveStepTimeMs(config_));
}

// ---------------------------------------------------------------------------
// step phases

void Vm::step(const StepInput& input) {
    if (stopped_) {
        ++sc_;
        ++trace_.steps;
        return;
    }
    applyInput(input);
    activationPhase(input);
    runBatch();
    ++sc_;
    ++trace_.steps;
    sweepDead();
}

void Vm::applyInput(const StepInput& input) {
    for (const auto& key : pendingKeyReleases_) keysDown_.erase(key);
    pendingKeyReleases_.clear();

    keyEdge_ = input.keyDown && keysDown_.count(*input.keyDown) == 0;
    if (input.keyDown) keysDown_.insert(*input.keyDown);
    if (input.keyUpAfter) pendingKeyReleases_.push_back(*input.keyUpAfter);
    if (input.mouseMove) {
        mouseX_ = input.mouseMove->first;
        mouseY_ = input.mouseMove->second;
    }
    if (input.mouseDown) mouseDown_ = *input.mouseDown;
    if (input.answer) {
        answer_ = Value(*input.answer);
        if (!askQueue_.empty()) {
            const int procId = askQueue_.front();
            askQueue_.pop_front();
            for (auto& p : processes_) {
                if (p.id == procId && p.halt.kind == HaltKind::AskWait) p.halt.askAnswered = true;
            }
        }
    }
    if (input.sound) setVirtualSound(input.sound->first, input.sound->second);
}

void Vm::activateHats(Opcode hat, const std::string& argMatch, bool nextBatch, int onlyActorIndex) {
    for (std::size_t ri = 0; ri < runtimes_.size(); ++ri) {
        const Runtime& r = runtimes_[ri];
        if (!r.alive) continue;
        if (onlyActorIndex >= 0 && r.actorIndex != onlyActorIndex) continue;
        const Actor& actor = project_->actors[r.actorIndex];
        for (std::size_t si = 0; si < actor.scripts.size(); ++si) {
            const Script& s = actor.scripts[si];
            if (!s.hat || s.hat->opcode != hat) continue;
            if (hat == Opcode::KeyPressedHat) {
                const std::string key = literalText(*s.hat, 0);
                if (key != argMatch && key != "any") continue;
            } else if (hat == Opcode::BroadcastReceived || hat == Opcode::BackdropSwitched) {
                if (literalText(*s.hat, 0) != argMatch) continue;
            }
            activateScript(static_cast<int>(ri), static_cast<int>(si), nextBatch);
        }
    }
}

void Vm::activateScript(int runtimeIndex, int scriptIndex, bool nextBatch) {
    const Actor& actor = project_->actors[runtimes_[runtimeIndex].actorIndex];
    const Script& script = actor.scripts[scriptIndex];
    if (script.hat) {
        trace_.cover(script.hat->id);
        trace_.markEvent(script.hat->id);
    }

    Process* proc = nullptr;
    for (auto& p : processes_) {
        if (p.runtimeIndex == runtimeIndex && p.scriptIndex == scriptIndex) {
            proc = &p;
            break;
        }
    }
    if (!proc) {
        processes_.push_back({});
        proc = &processes_.back();
        proc->id = nextProcId_++;
        proc->runtimeIndex = runtimeIndex;
        proc->scriptIndex = scriptIndex;
    } else {
        // Restart: a hat firing for an active script resets it.
        for (auto it = askQueue_.begin(); it != askQueue_.end();) {
            it = (*it == proc->id) ? askQueue_.erase(it) : std::next(it);
        }
    }
    proc->frames.clear();
    proc->frames.push_back({Frame::Kind::Body, &script.body, 0, nullptr, 0, false});
    proc->halt = Halt{};
    proc->halt.kind = HaltKind::Running;
    proc->readyAtStep = nextBatch ? sc_ + 1 : sc_;
}

void Vm::checkLoudnessHats() {
    const double cur = loudnessReporter();
    for (std::size_t ri = 0; ri < runtimes_.size(); ++ri) {
        const Runtime& r = runtimes_[ri];
        if (!r.alive) continue;
        const Actor& actor = project_->actors[r.actorIndex];
        for (std::size_t si = 0; si < actor.scripts.size(); ++si) {
            const Script& s = actor.scripts[si];
            if (!s.hat || s.hat->opcode != Opcode::LoudnessGreaterThan) continue;
            const Value* t = literalArg(*s.hat, 0);
            const double threshold = t ? t->asNumber() : 10.0;
            if (prevLoudness_ <= threshold && cur > threshold) {
                activateScript(static_cast<int>(ri), static_cast<int>(si), false);
            }
        }
    }
    prevLoudness_ = cur;
}

void Vm::activationPhase(const StepInput& input) {
    if (input.greenflag) activateHats(Opcode::Greenflag, "", false);
    if (input.keyDown && keyEdge_) activateHats(Opcode::KeyPressedHat, *input.keyDown, false);
    if (input.clickSprite) {
        const int idx = project_->actorIndex(*input.clickSprite);
        if (idx >= 0) activateHats(Opcode::SpriteClicked, "", false, idx);
    }
    if (input.clickStage) {
        for (std::size_t i = 0; i < project_->actors.size(); ++i) {
            if (project_->actors[i].isStage) {
                activateHats(Opcode::StageClicked, "", false, static_cast<int>(i));
            }
        }
    }
    checkLoudnessHats();
}

void Vm::runBatch() {
    std::vector<std::size_t> order(processes_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
        const Process& pa = processes_[a];
        const Process& pb = processes_[b];
        const Runtime& ra = runtimes_[pa.runtimeIndex];
        const Runtime& rb = runtimes_[pb.runtimeIndex];
        return std::tuple(ra.actorIndex, ra.cloneOrdinal, pa.scriptIndex, pa.id) <
               std::tuple(rb.actorIndex, rb.cloneOrdinal, pb.scriptIndex, pb.id);
    });
    for (std::size_t idx : order) {
        if (stopped_) break;
        Process& proc = processes_[idx];
        if (proc.done() || proc.readyAtStep > sc_) continue;
        if (!runtimes_[proc.runtimeIndex].alive) {
            proc.halt.kind = HaltKind::Done;
            continue;
        }
        if (proc.halt.kind != HaltKind::Running) {
            if (!tryResume(proc)) continue;
        }
        runProcess(proc);
    }
}

void Vm::sweepDead() {
    for (auto& p : processes_) {
        if (!runtimes_[p.runtimeIndex].alive) p.halt.kind = HaltKind::Done;
    }
}

// ---------------------------------------------------------------------------
// process execution

void Vm::yieldProcess(Process& proc) {
    proc.halt = Halt{};
    proc.halt.kind = HaltKind::WaitSteps;
    proc.halt.resumeAfterSc = sc_;
    proc.halt.enteredSc = sc_;
}

void Vm::haltForSteps(Process& proc, long long steps, HaltKind kind, const std::string& blockId) {
    proc.halt = Halt{};
    proc.halt.kind = kind;
    proc.halt.enteredSc = sc_;
    proc.halt.totalSteps = steps;
    proc.halt.resumeAfterSc = sc_ + steps;
    proc.halt.haltBlockId = blockId;
}

void Vm::finishHalt(Process& proc) {
    Halt& h = proc.halt;
    if (!h.haltBlockId.empty()) trace_.recordBranch(h.haltBlockId, 0.0, 1.0);
    if (h.kind == HaltKind::SayUntil) {
        runtimes_[proc.runtimeIndex].bubble = BubbleState{};
    }
    if (h.kind == HaltKind::Glide) {
        runtimes_[proc.runtimeIndex].x = h.toX;
        runtimes_[proc.runtimeIndex].y = h.toY;
    }
    proc.halt = Halt{};
    proc.halt.kind = HaltKind::Running;
}

bool Vm::tryResume(Process& proc) {
    Halt& h = proc.halt;
    Runtime& self = runtimes_[proc.runtimeIndex];
    switch (h.kind) {
    case HaltKind::WaitSteps:
    case HaltKind::SayUntil:
    case HaltKind::SoundUntil:
        if (sc_ > h.resumeAfterSc) {
            finishHalt(proc);
            return true;
        }
        if (!h.haltBlockId.empty()) {
            trace_.recordBranch(h.haltBlockId,
                                static_cast<double>(h.resumeAfterSc + 1 - sc_), 0.0);
        }
        return false;
    case HaltKind::Glide: {
        const long long k = std::min(sc_ - h.enteredSc, h.totalSteps);
        if (h.totalSteps > 0) {
            const double t = static_cast<double>(k) / static_cast<double>(h.totalSteps);
            self.x = h.fromX * (1.0 - t) + h.toX * t;
            self.y = h.fromY * (1.0 - t) + h.toY * t;
        }
        if (sc_ > h.resumeAfterSc) {
            finishHalt(proc);
            return true;
        }
        if (!h.haltBlockId.empty()) {
            trace_.recordBranch(h.haltBlockId,
                                static_cast<double>(h.resumeAfterSc + 1 - sc_), 0.0);
        }
        return false;
    }
    case HaltKind::WaitUntilCond: {
        const CondResult c = evalConditionBlock(*h.condBlock, self);
        trace_.recordBranch(h.haltBlockId, c.trueDist, c.falseDist);
        if (c.value) {
            proc.halt = Halt{};
            proc.halt.kind = HaltKind::Running;
            return true;
        }
        return false;
    }
    case HaltKind::BroadcastWait: {
        for (int id : h.waitedProcs) {
            for (const auto& p : processes_) {
                if (p.id == id && !p.done()) return false;
            }
        }
        proc.halt = Halt{};
        proc.halt.kind = HaltKind::Running;
        return true;
    }
    case HaltKind::AskWait:
        if (h.askAnswered) {
            proc.halt = Halt{};
            proc.halt.kind = HaltKind::Running;
            return true;
        }
        return false;
    case HaltKind::Running:
        return true;
    case HaltKind::Done:
        return false;
    }
    return false;
}

void Vm::runProcess(Process& proc) {
    while (true) {
        if (stopped_) return;
        if (proc.frames.empty()) {
            proc.halt = Halt{};
            proc.halt.kind = HaltKind::Done;
            return;
        }
        Frame& f = proc.frames.back();
        if (f.needsHeaderCheck) {
            f.needsHeaderCheck = false;
            Runtime& self = runtimes_[proc.runtimeIndex];
            const Block* owner = f.owner;
            if (owner->opcode == Opcode::Forever) {
                f.idx = 0;
            } else if (owner->opcode == Opcode::RepeatTimes) {
                f.remaining -= 1;
                trace_.recordBranch(owner->id, static_cast<double>(std::max<long long>(0, f.remaining)),
                                    f.remaining <= 0 ? 1.0 : 0.0);
                if (f.remaining <= 0) {
                    proc.frames.pop_back();
                    continue;
                }
                f.idx = 0;
            } else if (owner->opcode == Opcode::RepeatUntil) {
                const CondResult c = evalCondition(owner->args[0], self);
                trace_.recordBranch(owner->id, c.trueDist, c.falseDist);
                if (c.value) {
                    proc.frames.pop_back();
                    continue;
                }
                f.idx = 0;
            }
        }
        Frame& frame = proc.frames.back();
        if (frame.idx >= frame.seq->size()) {
            switch (frame.kind) {
            case Frame::Kind::LoopBody:
                frame.needsHeaderCheck = true;
                yieldProcess(proc);
                return;
            case Frame::Kind::IfArm:
            case Frame::Kind::ProcBody:
                proc.frames.pop_back();
                continue;
            case Frame::Kind::Body:
                proc.frames.pop_back();
                continue; // empty stack handled on next iteration
            }
        }
        const Block& block = (*frame.seq)[frame.idx];
        ++frame.idx;
        if (!execStatement(proc, block)) return;
    }
}

bool Vm::execStatement(Process& proc, const Block& b) {
    Runtime& self = runtimes_[proc.runtimeIndex];
    const Actor& actor = project_->actors[self.actorIndex];
    trace_.cover(b.id);

    switch (b.opcode) {
    case Opcode::If: {
        const CondResult c = evalCondition(b.args[0], self);
        trace_.recordBranch(b.id, c.trueDist, c.falseDist);
        if (c.value && !b.children[0].empty()) {
            proc.frames.push_back({Frame::Kind::IfArm, &b.children[0], 0, &b, 0, false});
        }
        return true;
    }
    case Opcode::IfElse: {
        const CondResult c = evalCondition(b.args[0], self);
        trace_.recordBranch(b.id, c.trueDist, c.falseDist);
        const auto& branch = c.value ? b.children[0] : b.children[1];
        if (!branch.empty()) {
            proc.frames.push_back({Frame::Kind::IfArm, &branch, 0, &b, 0, false});
        }
        return true;
    }
    case Opcode::RepeatTimes: {
        const long long n = std::llround(evalArg(b.args[0], self).asNumber());
        trace_.recordBranch(b.id, static_cast<double>(std::max<long long>(0, n)), n <= 0 ? 1.0 : 0.0);
        if (n > 0 && !b.children[0].empty()) {
            proc.frames.push_back({Frame::Kind::LoopBody, &b.children[0], 0, &b, n, false});
        }
        return true;
    }
    case Opcode::RepeatUntil: {
        const CondResult c = evalCondition(b.args[0], self);
        trace_.recordBranch(b.id, c.trueDist, c.falseDist);
        if (!c.value && !b.children[0].empty()) {
            proc.frames.push_back({Frame::Kind::LoopBody, &b.children[0], 0, &b, 0, false});
        }
        return true;
    }
    case Opcode::Forever: {
        if (!b.children[0].empty()) {
            proc.frames.push_back({Frame::Kind::LoopBody, &b.children[0], 0, &b, 0, false});
            return true;
        }
        // Empty forever busy-loops; treat as a plain yield each batch.
        yieldProcess(proc);
        return false;
    }
    case Opcode::WaitSeconds: {
        const double secs = evalArg(b.args[0], self).asNumber();
        haltForSteps(proc, stepsForSeconds(secs), HaltKind::WaitSteps, b.id);
        return false;
    }
    case Opcode::WaitUntil: {
        const CondResult c = evalCondition(b.args[0], self);
        trace_.recordBranch(b.id, c.trueDist, c.falseDist);
        if (c.value) return true;
        proc.halt = Halt{};
        proc.halt.kind = HaltKind::WaitUntilCond;
        proc.halt.enteredSc = sc_;
        proc.halt.haltBlockId = b.id;
        proc.halt.condBlock = &b;
        return false;
    }
    case Opcode::StopAll: {
        stopped_ = true;
        for (auto& p : processes_) p.halt.kind = HaltKind::Done;
        return false;
    }
    case Opcode::StopScript:
        proc.halt = Halt{};
        proc.halt.kind = HaltKind::Done;
        return false;
    case Opcode::CreateClone: {
        const std::string target = evalArg(b.args[0], self).asText();
        const Runtime* source = nullptr;
        if (target == "myself") {
            source = &self;
        } else {
            const int idx = project_->actorIndex(target);
            if (idx >= 0) source = &runtimes_[static_cast<std::size_t>(idx)];
        }
        if (source && !project_->actors[source->actorIndex].isStage &&
            totalClones_ < config_.cloneLimit) {
            Runtime clone = *source;
            clone.cloneOrdinal = ++cloneCounters_[static_cast<std::size_t>(source->actorIndex)];
            clone.layer = nextLayer_++;
            const int sourceActor = source->actorIndex;
            runtimes_.push_back(std::move(clone));
            ++totalClones_;
            const int newIndex = static_cast<int>(runtimes_.size()) - 1;
            const Actor& cloneActor = project_->actors[sourceActor];
            for (std::size_t si = 0; si < cloneActor.scripts.size(); ++si) {
                const Script& s = cloneActor.scripts[si];
                if (s.hat && s.hat->opcode == Opcode::StartAsClone) {
                    activateScript(newIndex, static_cast<int>(si), true);
                }
            }
        }
        return true;
    }
    case Opcode::DeleteClone: {
        if (self.cloneOrdinal > 0) {
            self.alive = false;
            for (auto& p : processes_) {
                if (p.runtimeIndex == proc.runtimeIndex) p.halt.kind = HaltKind::Done;
            }
            return false;
        }
        return true;
    }
    case Opcode::Broadcast: {
        activateHats(Opcode::BroadcastReceived, evalArg(b.args[0], self).asText(), true);
        return true;
    }
    case Opcode::BroadcastAndWait: {
        const std::string msg = evalArg(b.args[0], self).asText();
        // Collect ids of all receivers (restarted ones keep their id).
        std::vector<int> receivers;
        for (std::size_t ri = 0; ri < runtimes_.size(); ++ri) {
            const Runtime& r = runtimes_[ri];
            if (!r.alive) continue;
            const Actor& a = project_->actors[r.actorIndex];
            for (std::size_t si = 0; si < a.scripts.size(); ++si) {
                const Script& s = a.scripts[si];
                if (!s.hat || s.hat->opcode != Opcode::BroadcastReceived) continue;
                if (literalText(*s.hat, 0) != msg) continue;
                activateScript(static_cast<int>(ri), static_cast<int>(si), true);
                for (const auto& p : processes_) {
                    if (p.runtimeIndex == static_cast<int>(ri) &&
                        p.scriptIndex == static_cast<int>(si)) {
                        receivers.push_back(p.id);
                    }
                }
            }
        }
        if (receivers.empty()) return true;
        proc.halt = Halt{};
        proc.halt.kind = HaltKind::BroadcastWait;
        proc.halt.enteredSc = sc_;
        proc.halt.waitedProcs = std::move(receivers);
        return false;
    }
    case Opcode::Call: {
        int depth = 0;
        for (const auto& fr : proc.frames) depth += fr.kind == Frame::Kind::ProcBody ? 1 : 0;
        if (depth >= kMaxCallDepth) return true;
        const std::string name = evalArg(b.args[0], self).asText();
        for (const Script& def : actor.customBlocks) {
            if (def.hat && literalText(*def.hat, 0) == name) {
                trace_.cover(def.hat->id);
                if (!def.body.empty()) {
                    proc.frames.push_back({Frame::Kind::ProcBody, &def.body, 0, &b, 0, false});
                }
                return true;
            }
        }
        return true;
    }
    case Opcode::GotoXY:
        self.x = evalArg(b.args[0], self).asNumber();
        self.y = evalArg(b.args[1], self).asNumber();
        return true;
    case Opcode::ChangeXY:
        self.x += evalArg(b.args[0], self).asNumber();
        self.y += evalArg(b.args[1], self).asNumber();
        return true;
    case Opcode::MoveSteps: {
        const double n = evalArg(b.args[0], self).asNumber();
        self.x += n * std::sin(degToRad(self.direction));
        self.y += n * std::cos(degToRad(self.direction));
        return true;
    }
    case Opcode::PointTowards: {
        const std::string target = evalArg(b.args[0], self).asText();
        double tx = mouseX_;
        double ty = mouseY_;
        if (target != "mouse") {
            const Runtime* r = firstAliveRuntime(target);
            if (!r) return true;
            tx = r->x;
            ty = r->y;
        }
        self.direction = std::atan2(tx - self.x, ty - self.y) * 180.0 / kPi;
        return true;
    }
    case Opcode::GlideSecsTo: {
        const double secs = evalArg(b.args[0], self).asNumber();
        const double tx = evalArg(b.args[1], self).asNumber();
        const double ty = evalArg(b.args[2], self).asNumber();
        const long long steps = stepsForSeconds(secs);
        if (steps == 0) {
            self.x = tx;
            self.y = ty;
            trace_.recordBranch(b.id, 0.0, 1.0);
            return true;
        }
        haltForSteps(proc, steps, HaltKind::Glide, b.id);
        proc.halt.fromX = self.x;
        proc.halt.fromY = self.y;
        proc.halt.toX = tx;
        proc.halt.toY = ty;
        return false;
    }
    case Opcode::Say:
        self.bubble = {BubbleState::Say, evalArg(b.args[0], self).asText()};
        return true;
    case Opcode::Think:
        self.bubble = {BubbleState::Think, evalArg(b.args[0], self).asText()};
        return true;
    case Opcode::SayForSecs:
    case Opcode::ThinkForSecs: {
        const auto kind = b.opcode == Opcode::SayForSecs ? BubbleState::Say : BubbleState::Think;
        self.bubble = {kind, evalArg(b.args[0], self).asText()};
        haltForSteps(proc, stepsForSeconds(evalArg(b.args[1], self).asNumber()),
                     HaltKind::SayUntil, b.id);
        return false;
    }
    case Opcode::SwitchCostume: {
        const Value v = evalArg(b.args[0], self);
        const std::string name = v.asText();
        for (std::size_t i = 0; i < actor.costumes.size(); ++i) {
            if (actor.costumes[i].name == name) {
                self.currentCostume = static_cast<int>(i);
                return true;
            }
        }
        double num = 0.0;
        if (strictlyNumeric(name, num)) {
            const int count = static_cast<int>(actor.costumes.size());
            int idx = static_cast<int>(std::llround(num)) - 1;
            idx = ((idx % count) + count) % count;
            self.currentCostume = idx;
        }
        return true;
    }
    case Opcode::NextCostume:
        self.currentCostume =
            (self.currentCostume + 1) % static_cast<int>(actor.costumes.size());
        return true;
    case Opcode::SwitchBackdrop:
    case Opcode::NextBackdrop: {
        Runtime* stage = nullptr;
        for (auto& r : runtimes_) {
            if (project_->actors[r.actorIndex].isStage) {
                stage = &r;
                break;
            }
        }
        if (!stage) return true;
        const Actor& stageActor = project_->actors[stage->actorIndex];
        if (b.opcode == Opcode::NextBackdrop) {
            stage->currentCostume =
                (stage->currentCostume + 1) % static_cast<int>(stageActor.costumes.size());
        } else {
            const std::string name = evalArg(b.args[0], self).asText();
            bool found = false;
            for (std::size_t i = 0; i < stageActor.costumes.size(); ++i) {
                if (stageActor.costumes[i].name == name) {
                    stage->currentCostume = static_cast<int>(i);
                    found = true;
                    break;
                }
            }
            if (!found) return true;
        }
        activateHats(Opcode::BackdropSwitched,
                     stageActor.costumes[static_cast<std::size_t>(stage->currentCostume)].name,
                     true);
        return true;
    }
    case Opcode::Show:
        self.visible = true;
        return true;
    case Opcode::Hide:
        self.visible = false;
        return true;
    case Opcode::SetSize:
        self.size = std::max(0.0, evalArg(b.args[0], self).asNumber());
        return true;
    case Opcode::PlaySoundUntilDone: {
        const std::string name = evalArg(b.args[0], self).asText();
        for (const auto& snd : actor.sounds) {
            if (snd.name == name) {
                haltForSteps(proc, stepsForSeconds(snd.durationSeconds), HaltKind::SoundUntil,
                             b.id);
                return false;
            }
        }
        trace_.recordBranch(b.id, 0.0, 1.0);
        return true;
    }
    case Opcode::AskAndWait: {
        (void)evalArg(b.args[0], self); // question text, not displayed
        proc.halt = Halt{};
        proc.halt.kind = HaltKind::AskWait;
        proc.halt.enteredSc = sc_;
        askQueue_.push_back(proc.id);
        return false;
    }
    case Opcode::ResetTimer:
        timerResetSc_ = sc_;
        return true;
    case Opcode::SetVariable: {
        const std::string name = literalText(b, 0);
        const Value v = evalArg(b.args[1], self);
        if (Value* slot = findVariable(self, name)) {
            *slot = v;
        } else {
            self.variables[name] = v;
        }
        return true;
    }
    case Opcode::ChangeVariable: {
        const std::string name = literalText(b, 0);
        const double delta = evalArg(b.args[1], self).asNumber();
        if (Value* slot = findVariable(self, name)) {
            *slot = Value(slot->asNumber() + delta);
        } else {
            self.variables[name] = Value(delta);
        }
        return true;
    }
    case Opcode::AddToList: {
        const std::string name = literalText(b, 0);
        const Value v = evalArg(b.args[1], self);
        if (auto* list = findList(self, name)) {
            list->push_back(v);
        } else {
            self.lists[name] = {v};
        }
        return true;
    }
    default:
        // Reporters cannot appear as statements (loader enforces); hats are
        // handled by activation. Anything else is a structural no-op.
        return true;
    }
}

// ---------------------------------------------------------------------------
// expressions

Value* Vm::findVariable(Runtime& self, const std::string& name) {
    auto it = self.variables.find(name);
    if (it != self.variables.end()) return &it->second;
    for (auto& r : runtimes_) {
        if (project_->actors[r.actorIndex].isStage && r.cloneOrdinal == 0) {
            auto sit = r.variables.find(name);
            if (sit != r.variables.end()) return &sit->second;
        }
    }
    return nullptr;
}

std::vector<Value>* Vm::findList(Runtime& self, const std::string& name) {
    auto it = self.lists.find(name);
    if (it != self.lists.end()) return &it->second;
    for (auto& r : runtimes_) {
        if (project_->actors[r.actorIndex].isStage && r.cloneOrdinal == 0) {
            auto sit = r.lists.find(name);
            if (sit != r.lists.end()) return &sit->second;
        }
    }
    return nullptr;
}

Value Vm::evalArg(const BlockArg& arg, Runtime& self) {
    if (const auto* v = std::get_if<Value>(&arg)) return *v;
    if (const auto* ref = std::get_if<std::string>(&arg)) {
        if (const Value* slot = findVariable(self, *ref)) return *slot;
        return Value(0.0);
    }
    const auto& sub = std::get<std::unique_ptr<Block>>(arg);
    return sub ? evalExpr(*sub, self) : Value(0.0);
}

Value Vm::evalExpr(const Block& b, Runtime& self) {
    switch (b.opcode) {
    case Opcode::TouchingSprite:
    case Opcode::TouchingEdge:
    case Opcode::TouchingMousePointer:
    case Opcode::KeyPressedQ:
    case Opcode::MouseDown:
    case Opcode::LessThan:
    case Opcode::GreaterThan:
    case Opcode::Equals:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::Not:
        return Value(evalConditionBlock(b, self).value);
    case Opcode::MouseX:
        return Value(mouseX_);
    case Opcode::MouseY:
        return Value(mouseY_);
    case Opcode::DistanceTo: {
        const std::string target = evalArg(b.args[0], self).asText();
        if (target == "mouse") return Value(std::hypot(mouseX_ - self.x, mouseY_ - self.y));
        return Value(distanceToActor(self, target));
    }
    case Opcode::Answer:
        return answer_;
    case Opcode::Timer:
        return Value(timerValue());
    case Opcode::Loudness:
        return Value(loudnessReporter());
    case Opcode::LengthOfList: {
        const auto* list = findList(self, literalText(b, 0));
        return Value(list ? static_cast<double>(list->size()) : 0.0);
    }
    case Opcode::ItemOfList: {
        const auto* list = findList(self, literalText(b, 0));
        if (!list) return Value(std::string());
        const long long idx = std::llround(evalArg(b.args[1], self).asNumber());
        if (idx < 1 || idx > static_cast<long long>(list->size())) return Value(std::string());
        return (*list)[static_cast<std::size_t>(idx - 1)];
    }
    case Opcode::Add:
        return Value(evalArg(b.args[0], self).asNumber() + evalArg(b.args[1], self).asNumber());
    case Opcode::Subtract:
        return Value(evalArg(b.args[0], self).asNumber() - evalArg(b.args[1], self).asNumber());
    case Opcode::Multiply:
        return Value(evalArg(b.args[0], self).asNumber() * evalArg(b.args[1], self).asNumber());
    case Opcode::Divide:
        return Value(evalArg(b.args[0], self).asNumber() / evalArg(b.args[1], self).asNumber());
    case Opcode::Random: {
        double lo = evalArg(b.args[0], self).asNumber();
        double hi = evalArg(b.args[1], self).asNumber();
        if (lo > hi) std::swap(lo, hi);
        const bool integral = lo == std::floor(lo) && hi == std::floor(hi);
        if (integral) {
            return Value(static_cast<double>(
                rng_.uniformInt(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi))));
        }
        return Value(rng_.uniformReal(lo, hi));
    }
    case Opcode::Join:
        return Value(evalArg(b.args[0], self).asText() + evalArg(b.args[1], self).asText());
    case Opcode::Mod: {
        const double a = evalArg(b.args[0], self).asNumber();
        const double m = evalArg(b.args[1], self).asNumber();
        double r = std::fmod(a, m);
        if (r != 0.0 && ((r < 0) != (m < 0))) r += m;
        return Value(r);
    }
    case Opcode::Round:
        return Value(std::floor(evalArg(b.args[0], self).asNumber() + 0.5));
    default:
        return Value(0.0);
    }
}

Vm::CondResult Vm::evalCondition(const BlockArg& arg, Runtime& self) {
    if (const auto* sub = std::get_if<std::unique_ptr<Block>>(&arg)) {
        if (*sub) return evalConditionBlock(**sub, self);
    }
    const bool v = evalArg(arg, self).asBool();
    return {v, v ? 0.0 : 1.0, v ? 1.0 : 0.0};
}

Vm::CondResult Vm::evalConditionBlock(const Block& b, Runtime& self) {
    switch (b.opcode) {
    case Opcode::LessThan:
    case Opcode::GreaterThan:
    case Opcode::Equals: {
        const Value va = evalArg(b.args[0], self);
        const Value vb = evalArg(b.args[1], self);
        const int cmp = Value::compare(va, vb);
        double na = 0.0;
        double nb = 0.0;
        const bool numeric =
            strictlyNumeric(va.asText(), na) && strictlyNumeric(vb.asText(), nb);
        CondResult r;
        if (b.opcode == Opcode::Equals) {
            r.value = cmp == 0;
            if (numeric) {
                r.trueDist = std::fabs(na - nb);
                r.falseDist = (na == nb) ? 1.0 : 0.0;
            } else {
                r.trueDist = r.value ? 0.0 : 1.0;
                r.falseDist = r.value ? 1.0 : 0.0;
            }
        } else if (b.opcode == Opcode::GreaterThan) {
            r.value = cmp > 0;
            if (numeric) {
                r.trueDist = (na > nb) ? 0.0 : (nb - na) + 1.0;
                r.falseDist = (na > nb) ? (na - nb) : 0.0;
            } else {
                r.trueDist = r.value ? 0.0 : 1.0;
                r.falseDist = r.value ? 1.0 : 0.0;
            }
        } else {
            r.value = cmp < 0;
            if (numeric) {
                r.trueDist = (na < nb) ? 0.0 : (na - nb) + 1.0;
                r.falseDist = (na < nb) ? (nb - na) : 0.0;
            } else {
                r.trueDist = r.value ? 0.0 : 1.0;
                r.falseDist = r.value ? 1.0 : 0.0;
            }
        }
        return r;
    }
    case Opcode::And: {
        const CondResult a = evalCondition(b.args[0], self);
        const CondResult c = evalCondition(b.args[1], self);
        return {a.value && c.value, a.trueDist + c.trueDist, std::min(a.falseDist, c.falseDist)};
    }
    case Opcode::Or: {
        const CondResult a = evalCondition(b.args[0], self);
        const CondResult c = evalCondition(b.args[1], self);
        return {a.value || c.value, std::min(a.trueDist, c.trueDist), a.falseDist + c.falseDist};
    }
    case Opcode::Not: {
        const CondResult a = evalCondition(b.args[0], self);
        return {!a.value, a.falseDist, a.trueDist};
    }
    case Opcode::TouchingSprite: {
        const std::string target = evalArg(b.args[0], self).asText();
        bool touching = false;
        double best = kInf;
        for (const auto& r : runtimes_) {
            if (!r.alive || &r == &self) continue;
            if (project_->actors[r.actorIndex].name != target) continue;
            if (runtimesTouch(self, r)) touching = true;
            if (r.visible) best = std::min(best, std::hypot(r.x - self.x, r.y - self.y));
        }
        if (best == kInf) best = std::hypot(project_->stage.width, project_->stage.height);
        return {touching, touching ? 0.0 : best, touching ? 1.0 : 0.0};
    }
    case Opcode::TouchingEdge: {
        const bool touching = touchesEdge(self);
        return {touching, touching ? 0.0 : edgeDistance(self), touching ? 1.0 : 0.0};
    }
    case Opcode::TouchingMousePointer: {
        const auto [w, h] = boxOf(self);
        const bool touching = self.visible && std::fabs(mouseX_ - self.x) <= w / 2 &&
                              std::fabs(mouseY_ - self.y) <= h / 2;
        const double dist = std::hypot(mouseX_ - self.x, mouseY_ - self.y);
        return {touching, touching ? 0.0 : dist, touching ? 1.0 : 0.0};
    }
    case Opcode::KeyPressedQ: {
        const std::string key = evalArg(b.args[0], self).asText();
        const bool down = key == "any" ? !keysDown_.empty() : keysDown_.count(key) > 0;
        return {down, down ? 0.0 : 1.0, down ? 1.0 : 0.0};
    }
    case Opcode::MouseDown:
        return {mouseDown_, mouseDown_ ? 0.0 : 1.0, mouseDown_ ? 1.0 : 0.0};
    default: {
        const bool v = evalExpr(b, self).asBool();
        return {v, v ? 0.0 : 1.0, v ? 1.0 : 0.0};
    }
    }
}

// ---------------------------------------------------------------------------

void Vm::finalizeTrace() {
    for (const auto& p : processes_) {
        const Halt& h = p.halt;
        switch (h.kind) {
        case HaltKind::WaitSteps:
        case HaltKind::Glide:
        case HaltKind::SayUntil:
        case HaltKind::SoundUntil: {
            if (h.haltBlockId.empty()) break;
            const double remaining =
                static_cast<double>(std::max<long long>(0, h.resumeAfterSc + 1 - sc_));
            if (remaining > 0) trace_.recordBranch(h.haltBlockId, remaining, 0.0);
            break;
        }
        default:
            break;
        }
    }
}

VmSnapshot Vm::snapshot() const {
    VmSnapshot snap;
    for (const auto& a : project_->actors) {
        if (!a.isStage) snap.cloneCounts[a.name] = 0;
    }
    for (const auto& r : runtimes_) {
        if (!r.alive) continue;
        const Actor& actor = project_->actors[r.actorIndex];
        RuntimeSnapshot rs;
        rs.key = runtimeKey(r);
        rs.actorName = actor.name;
        rs.isStage = actor.isStage;
        rs.isClone = r.cloneOrdinal > 0;
        rs.x = r.x;
        rs.y = r.y;
        rs.direction = r.direction;
        rs.size = r.size;
        rs.volume = r.volume;
        rs.visible = r.visible;
        rs.costume = r.currentCostume;
        rs.layer = r.layer;
        rs.bubble = r.bubble;
        for (const auto& [name, value] : r.variables) rs.variables[name] = value.asText();
        for (const auto& [name, list] : r.lists) rs.listLengths[name] = list.size();
        if (actor.isStage) {
            snap.backdrop = actor.costumes[static_cast<std::size_t>(std::clamp<int>(
                                                r.currentCostume, 0,
                                                static_cast<int>(actor.costumes.size()) - 1))]
                                .name;
        } else if (r.cloneOrdinal > 0) {
            snap.cloneCounts[actor.name] += 1;
        }
        snap.runtimes.push_back(std::move(rs));
    }
    for (std::size_t i = 0; i < runtimes_.size(); ++i) {
        const Runtime& a = runtimes_[i];
        if (!a.alive || project_->actors[a.actorIndex].isStage) continue;
        for (std::size_t j = i + 1; j < runtimes_.size(); ++j) {
            const Runtime& b = runtimes_[j];
            if (!b.alive || project_->actors[b.actorIndex].isStage) continue;
            if (runtimesTouch(a, b)) {
                std::string ka = runtimeKey(a);
                std::string kb = runtimeKey(b);
                if (kb < ka) std::swap(ka, kb);
                snap.touching.insert({ka, kb});
            }
        }
        if (touchesEdge(a) && a.visible) snap.touchingEdge.insert(runtimeKey(a));
    }
    snap.answer = answer_.asText();
    return snap;
}

std::vector<std::string> Vm::goalBlocks(const Project& project) {
    std::vector<std::string> goals;
    const std::function<void(const std::vector<Block>&)> walk =
        [&](const std::vector<Block>& seq) {
            for (const Block& b : seq) {
                goals.push_back(b.id);
                for (const auto& branch : b.children) walk(branch);
            }
        };
    for (const Actor& a : project.actors) {
        for (const Script& s : a.scripts) {
            if (s.hat) goals.push_back(s.hat->id);
            walk(s.body);
        }
        for (const Script& s : a.customBlocks) {
            if (s.hat) goals.push_back(s.hat->id);
            walk(s.body);
        }
    }
    return goals;
}

} // namespace bw
