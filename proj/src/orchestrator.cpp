#include "droidretriever/orchestrator.hpp"

#include <array>
#include <chrono>

#include "droidretriever/errors.hpp"

namespace dr {

std::string_view to_string(RunMode m) {
    static constexpr std::array<std::string_view, 8> names{
        "auto", "paused_risk", "paused_error", "paused_user", "manual_takeover", "terminated", "reporting", "done"};
    return names[static_cast<std::size_t>(m)];
}

namespace {

bool is_paused(RunMode m) {
    return m == RunMode::paused_risk || m == RunMode::paused_error || m == RunMode::paused_user;
}

bool is_final(RunMode m) { return m == RunMode::terminated || m == RunMode::reporting || m == RunMode::done; }

std::string_view command_name(OperatorCommandKind k) {
    switch (k) {
        case OperatorCommandKind::intervene: return "intervene";
        case OperatorCommandKind::resume: return "resume";
        case OperatorCommandKind::screenshot: return "screenshot";
        case OperatorCommandKind::terminate: return "terminate";
        case OperatorCommandKind::gesture: return "gesture";
    }
    return "?";
}

// Unwinds the run loop once the user terminates.
struct Terminated {};

}  // namespace

// ---------------------------------------------------------------- channel

bool ControlChannel::allowed(OperatorCommandKind kind, RunMode mode) {
    switch (kind) {
        case OperatorCommandKind::intervene: return mode == RunMode::auto_ || is_paused(mode);
        case OperatorCommandKind::resume: return mode == RunMode::manual_takeover || is_paused(mode);
        case OperatorCommandKind::screenshot:
        case OperatorCommandKind::terminate: return !is_final(mode);
        case OperatorCommandKind::gesture: return mode == RunMode::manual_takeover;
    }
    return false;
}

ControlReply ControlChannel::submit(const ControlCommand& cmd) {
    {
        std::lock_guard lock(mu_);
        if (closed_) return {false, "run has finished"};
        if (!allowed(cmd.kind, mode_))
            return {false, std::string(command_name(cmd.kind)) + " not allowed in mode " + std::string(to_string(mode_))};
        queue_.push_back(cmd);
    }
    cv_.notify_all();
    return {true, "queued"};
}

std::optional<ControlCommand> ControlChannel::try_pop() {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    auto c = queue_.front();
    queue_.pop_front();
    return c;
}

std::optional<ControlCommand> ControlChannel::wait_pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    auto c = queue_.front();
    queue_.pop_front();
    return c;
}

void ControlChannel::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool ControlChannel::empty() const {
    std::lock_guard lock(mu_);
    return queue_.empty();
}

void ControlChannel::set_mode(RunMode m) {
    std::lock_guard lock(mu_);
    mode_ = m;
}

RunMode ControlChannel::mode() const {
    std::lock_guard lock(mu_);
    return mode_;
}

// ---------------------------------------------------------------- operator

ScriptedOperator::ScriptedOperator(std::vector<OperatorRule> rules)
    : rules_(std::move(rules)), fired_(rules_.size(), false) {}

std::vector<OperatorStep> ScriptedOperator::on_trigger(const std::string& trigger) {
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& r = rules_[i];
        const bool hit = r.trigger == trigger || (r.trigger == "pause:any" && trigger.starts_with("pause:"));
        if (!hit || (fired_[i] && !r.repeat)) continue;
        fired_[i] = true;
        return r.steps;
    }
    return {};
}

// ---------------------------------------------------------------- json

nlohmann::json to_json(const RunSnapshot& s) {
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& v : s.subtasks) {
        const auto& t = v.subtask;
        subs.push_back({{"subtask_id", t.subtask_id},
                        {"app_id", t.app_id},
                        {"app_name", t.app_name},
                        {"search_term", t.search_term ? nlohmann::json(*t.search_term) : nlohmann::json()},
                        {"mode", to_string(t.mode)},
                        {"query", t.query_text},
                        {"browse_limit", t.browse_limit},
                        {"status", to_string(t.status)},
                        {"pages_done", v.pages_done},
                        {"actions", v.actions}});
    }
    return {{"run_id", s.run_id},
            {"mode", to_string(s.mode)},
            {"pause_reason", s.pause_reason ? nlohmann::json(*s.pause_reason) : nlohmann::json()},
            {"cursor", s.cursor},
            {"subtasks", subs},
            {"steps", s.steps},
            {"clock_ms", s.clock_ms},
            {"evidence", s.evidence},
            {"terminated_by_user", s.terminated_by_user},
            {"error", s.error ? nlohmann::json(*s.error) : nlohmann::json()}};
}

nlohmann::json to_json(const RunMetrics& m) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [id, n] : m.steps_per_subtask) per[std::to_string(id)] = n;
    return {{"steps", m.steps},
            {"tokens", m.tokens},
            {"prompt_tokens", m.prompt_tokens},
            {"completion_tokens", m.completion_tokens},
            {"time_ms", m.time_ms},
            {"interventions", m.interventions},
            {"intervention_steps", m.intervention_steps},
            {"task_intervened", m.task_intervened},
            {"step_intervention_rate", m.step_intervention_rate},
            {"steps_per_subtask", per}};
}

RunMetrics metrics_from_trace(const std::vector<TraceEvent>& events) {
    RunMetrics m;
    for (const auto& e : events) {
        m.time_ms = std::max(m.time_ms, e.timestamp);
        switch (e.kind) {
            case TraceKind::action_executed:
                ++m.steps;
                if (e.subtask_id) ++m.steps_per_subtask[*e.subtask_id];
                break;
            case TraceKind::intervention_start: ++m.interventions; break;
            case TraceKind::intervention_end: m.intervention_steps += e.payload.value("manual_steps", 0); break;
            case TraceKind::report_ready:
                if (e.payload.contains("tokens")) {
                    m.prompt_tokens = e.payload["tokens"].value("prompt", 0LL);
                    m.completion_tokens = e.payload["tokens"].value("completion", 0LL);
                    m.tokens = m.prompt_tokens + m.completion_tokens;
                }
                break;
            default: break;
        }
    }
    m.task_intervened = m.interventions > 0;
    const long long denom = m.steps + m.intervention_steps;
    m.step_intervention_rate = denom == 0 ? 0.0 : static_cast<double>(m.intervention_steps) / static_cast<double>(denom);
    return m;
}

std::string make_run_id(const std::string& scenario_name, const std::string& task) {
    return "run-" + hex64(fnv1a64(scenario_name + "\n" + task)).substr(0, 8);
}

std::shared_ptr<LlmGateway> scripted_gateway(const Scenario& scenario, RetryPolicy retry) {
    auto gw = std::make_shared<LlmGateway>(std::move(retry));
    gw->set_all(std::make_shared<ScriptedBackend>(scenario.policies));
    return gw;
}

// ---------------------------------------------------------------- run loop

struct Orchestrator::Impl {
    Orchestrator& self;
    std::shared_ptr<const Scenario> scenario;
    std::shared_ptr<Device> device;
    SimDevice* sim = nullptr;
    std::shared_ptr<LlmGateway> gateway;
    RunConfig cfg;
    std::string label;

    mutable std::mutex mu;  // guards the fields read by other threads
    std::shared_ptr<TraceLog> trace = std::make_shared<TraceLog>();
    std::shared_ptr<EvidenceStore> store = std::make_shared<EvidenceStore>();
    RunSnapshot snap;
    std::optional<ReportBundle> bundle;

    bool started = false;
    std::string task;
    long long clock = 0;
    RunMode mode = RunMode::auto_;
    std::vector<SubTaskView> subtasks;
    int cursor = -1;
    long long total_actions = 0;
    int milestones = 0;
    int epoch = 0;  // bumps on every intervene/resume; stale previews are discarded
    std::optional<std::string> pause_reason;
    std::optional<std::string> paused_fp;
    std::set<std::string> acknowledged_risk;
    bool user_terminated = false;
    std::optional<std::string> error;
    std::deque<ControlCommand> operator_queue;
    ActionHistory* history = nullptr;

    Impl(Orchestrator& o, std::shared_ptr<const Scenario> sc, std::shared_ptr<Device> dev,
         std::shared_ptr<LlmGateway> gw, RunConfig c, std::string l)
        : self(o), scenario(std::move(sc)), device(std::move(dev)), gateway(std::move(gw)), cfg(std::move(c)),
          label(std::move(l)) {
        sim = dynamic_cast<SimDevice*>(device.get());
    }

    std::optional<int> current_subtask_id() const {
        if (cursor < 0 || cursor >= static_cast<int>(subtasks.size())) return std::nullopt;
        return subtasks[static_cast<std::size_t>(cursor)].subtask.subtask_id;
    }

    void publish() {
        std::lock_guard lock(mu);
        snap.mode = mode;
        snap.pause_reason = pause_reason;
        snap.cursor = cursor;
        snap.subtasks = subtasks;
        snap.steps = total_actions;
        snap.clock_ms = clock;
        snap.evidence = store->size();
        snap.terminated_by_user = user_terminated;
        snap.error = error;
    }

    void set_mode(RunMode m) {
        mode = m;
        self.channel_.set_mode(m);
        publish();
    }

    void emit(TraceKind kind, nlohmann::json payload) {
        trace->append(kind, clock, std::move(payload), current_subtask_id());
        publish();
    }

    void warn(const std::string& what, nlohmann::json extra = nlohmann::json::object()) {
        extra["message"] = what;
        emit(TraceKind::warning, std::move(extra));
    }

    // ------------------------------------------------------------ perception

    struct Look {
        Perception p;
        std::optional<ScreenTruth> truth;
        std::string fingerprint;
    };

    Look look(const std::set<std::string>& visited = {}) {
        Look l;
        l.truth = device->truth();
        const auto& vp = device->viewport();
        l.p = perceive(device->render(), l.truth, vp.width, vp.height, self.perceiver_);
        if (!visited.empty()) {
            l.p.grounding = mask_visited(l.p.grounding, visited);
            l.p.description = describe(l.p.grounding);
        }
        l.fingerprint = evaluator::fingerprint(l.truth, vp, l.p.description);
        return l;
    }

    nlohmann::json screen_json(const Look& l) const {
        const auto& vp = device->viewport();
        nlohmann::json j{{"scroll", vp.scroll_offset}, {"fingerprint", l.fingerprint}};
        j["app"] = vp.current_app ? nlohmann::json(*vp.current_app) : nlohmann::json();
        j["screen"] = vp.current_screen ? nlohmann::json(*vp.current_screen) : nlohmann::json();
        j["kind"] = l.truth ? nlohmann::json(to_string(l.truth->kind)) : nlohmann::json();
        return j;
    }

    nlohmann::json device_state_json() const {
        return sim ? to_json(sim->state()) : nlohmann::json();
    }

    // ------------------------------------------------------------ commands

    void fire(const std::string& trigger) {
        if (!self.operator_) return;
        for (const auto& s : self.operator_->on_trigger(trigger)) operator_queue.push_back(ControlCommand::from(s));
    }

    std::optional<ControlCommand> next_command() {
        if (!operator_queue.empty()) {
            auto c = operator_queue.front();
            operator_queue.pop_front();
            return c;
        }
        return self.channel_.try_pop();
    }

    void begin_takeover() {
        emit(TraceKind::intervention_start, {{"from", pause_reason.value_or("user")}});
        emit(TraceKind::intervention_marker, {{"marker", "[user intervention]"}});
        set_mode(RunMode::manual_takeover);
    }

    void end_takeover(int manual_steps, const std::string& how) {
        const auto l = look();
        emit(TraceKind::intervention_end, {{"manual_steps", manual_steps},
                                           {"via", how},
                                           {"device_state", device_state_json()},
                                           {"screen", screen_json(l)}});
        if (history) history->add_intervention(manual_steps, l.truth ? l.truth->screen_id : "");
    }

    void user_capture() {
        const CaptureRequest req{current_subtask_id().value_or(0), EvidenceOrigin::user, clock, self.perceiver_};
        const auto out = capture_scrolling(*device, *store, cfg.stitch, req);
        clock += cfg.capture_ms * (out.scrolls + 1);
        for (const auto& w : out.warnings) warn(w);
        emit(TraceKind::user_capture, {{"evidence_id", out.record->evidence_id},
                                       {"scrolls", out.scrolls},
                                       {"scroll_delta", out.scroll_delta},
                                       {"restore_delta", out.restore_delta},
                                       {"width", out.record->long_image.width()},
                                       {"height", out.record->long_image.height()}});
    }

    void run_gesture(const ControlCommand& c) {
        ActionCommand g = c.gesture;
        if (c.target_text) {
            const auto l = look();
            const auto want = normalize_text(*c.target_text);
            const UIElement* hit = nullptr;
            for (const auto& e : l.p.grounding.elements)
                if (normalize_text(e.text) == want) {
                    hit = &e;
                    break;
                }
            if (!hit) throw GroundingError("no element labelled \"" + *c.target_text + "\"");
            const auto& vp = device->viewport();
            Rect box = l.p.grounding.to_screen(hit->bbox).intersect({0, 0, vp.width, vp.height});
            if (!box.well_formed()) throw GroundingError("element \"" + *c.target_text + "\" is off screen");
            if (g.kind == ActionKind::input) g.element_bbox = box;
            else g.tap_point = box.center();
        }
        device->execute(g);  // manual actions are deliberately not traced
    }

    void terminate() {
        if (mode == RunMode::manual_takeover) end_takeover(0, "terminate");
        user_terminated = true;
        set_mode(RunMode::terminated);
        emit(TraceKind::terminated, {{"by", "user"}, {"evidence", store->size()}});
        throw Terminated{};
    }

    void process(const ControlCommand& c) {
        if (!ControlChannel::allowed(c.kind, mode)) {
            warn("command rejected", {{"command", command_name(c.kind)}, {"mode", to_string(mode)}});
            return;
        }
        switch (c.kind) {
            case OperatorCommandKind::intervene:
                ++epoch;
                if (mode == RunMode::auto_) {
                    pause_reason = "user";
                    set_mode(RunMode::paused_user);
                    emit(TraceKind::pause, {{"reason", "user"}, {"notify", false}});
                }
                begin_takeover();
                break;
            case OperatorCommandKind::resume: {
                ++epoch;
                if (is_paused(mode)) begin_takeover();
                end_takeover(c.manual_steps, "resume");
                if (pause_reason == "risk" && paused_fp) acknowledged_risk.insert(*paused_fp);
                pause_reason.reset();
                paused_fp.reset();
                set_mode(RunMode::auto_);
                break;
            }
            case OperatorCommandKind::screenshot:
                user_capture();
                break;
            case OperatorCommandKind::terminate:
                terminate();
                break;
            case OperatorCommandKind::gesture:
                try {
                    run_gesture(c);
                } catch (const Error& ex) {
                    warn(std::string("gesture failed: ") + ex.what());
                }
                break;
        }
    }

    // Handles everything queued; blocks while paused or under manual control.
    void checkpoint() {
        while (auto c = next_command()) process(*c);
        while (is_paused(mode) || mode == RunMode::manual_takeover) {
            if (auto c = next_command()) {
                process(*c);
                continue;
            }
            if (!cfg.interactive) {
                warn("paused with no operator command; terminating");
                terminate();
            }
            auto c = self.channel_.wait_pop();
            if (!c) terminate();
            process(*c);
        }
    }

    void pause(const std::string& reason, const Look& l, nlohmann::json detail = nlohmann::json::object()) {
        pause_reason = reason;
        paused_fp = l.fingerprint;
        set_mode(reason == "risk" ? RunMode::paused_risk : RunMode::paused_error);
        detail["reason"] = reason;
        detail["notify"] = true;
        detail["fingerprint"] = l.fingerprint;
        detail["screen"] = screen_json(l);
        emit(TraceKind::pause, std::move(detail));
        fire("pause:" + reason);
        checkpoint();
    }

    // ------------------------------------------------------------ llm

    template <class T, class Parse>
    std::optional<T> ask(LlmRequest req, Parse parse, std::string& failure) {
        for (int attempt = 0; attempt < 2; ++attempt) {
            LlmResponse resp;
            try {
                resp = gateway->complete(req);
            } catch (const GatewayError& ex) {
                failure = ex.what();
                return std::nullopt;
            }
            clock += cfg.llm_ms;
            try {
                return parse(resp.text);
            } catch (const ParseError& ex) {
                failure = ex.what();
                warn("unparseable response", {{"grammar", ex.grammar()}, {"reason", ex.reason()}});
                req = with_reformat_instruction(std::move(req));
            }
        }
        return std::nullopt;
    }

    // ------------------------------------------------------------ actions

    // Preview, checkpoint, execute. Returns false when the preview was dropped.
    bool act(const PreviewedAction& pa, const Look& l, const std::string& origin, SubTaskView& sv) {
        nlohmann::json payload{{"command", to_json(pa.command)},
                               {"preview", pa.preview},
                               {"origin", origin},
                               {"step", total_actions + 1},
                               {"screen", screen_json(l)}};
        payload["highlight"] = pa.highlight ? nlohmann::json{pa.highlight->left, pa.highlight->top,
                                                             pa.highlight->right, pa.highlight->bottom}
                                            : nlohmann::json();
        payload["element_index"] = pa.element_index ? nlohmann::json(*pa.element_index) : nlohmann::json();
        emit(TraceKind::action_preview, payload);

        const int before = epoch;
        fire("step:" + std::to_string(total_actions + 1));
        checkpoint();
        if (epoch != before) {
            warn("preview discarded after intervention", {{"preview", pa.preview}});
            return false;
        }
        try {
            device->execute(pa.command);
        } catch (const DeviceError& ex) {
            warn(std::string("device rejected action: ") + ex.what(), {{"preview", pa.preview}});
            pause("error", l, {{"detail", ex.what()}});
            return false;
        }
        clock += cfg.action_ms;
        ++total_actions;
        ++sv.actions;
        emit(TraceKind::action_executed, payload);
        if (history) history->add_action(pa.command, pa.preview, l.truth ? l.truth->screen_id : "");
        return true;
    }

    bool system_act(const ActionCommand& cmd, const std::string& origin, SubTaskView& sv) {
        const auto l = look();
        return act(navigator::resolve_and_preview(cmd, l.p.grounding), l, origin, sv);
    }

    void capture_milestone(SubTaskView& sv, const Look& l) {
        const CaptureRequest req{sv.subtask.subtask_id, EvidenceOrigin::system, clock, self.perceiver_};
        const auto out = capture_scrolling(*device, *store, cfg.stitch, req);
        clock += cfg.capture_ms * (out.scrolls + 1);
        for (const auto& w : out.warnings) warn(w);
        emit(TraceKind::screenshot, {{"evidence_id", out.record->evidence_id},
                                     {"scrolls", out.scrolls},
                                     {"scroll_delta", out.scroll_delta},
                                     {"restore_delta", out.restore_delta},
                                     {"width", out.record->long_image.width()},
                                     {"height", out.record->long_image.height()},
                                     {"stitch_fallback", out.record->stitch_fallback}});
        ++sv.pages_done;
        ++milestones;
        emit(TraceKind::milestone, {{"evidence_id", out.record->evidence_id},
                                    {"page", sv.pages_done},
                                    {"screen", screen_json(l)}});
        fire("milestone:" + std::to_string(milestones));
        checkpoint();
    }

    void finish_subtask(SubTaskView& sv, SubTaskStatus status) {
        sv.subtask.status = status;
        emit(TraceKind::subtask_done, {{"status", to_string(status)},
                                       {"pages", sv.pages_done},
                                       {"actions", sv.actions}});
    }

    void run_subtask(SubTaskView& sv, bool same_app_as_previous) {
        sv.subtask.status = SubTaskStatus::running;
        publish();
        ActionHistory hist;
        history = &hist;
        RevisitTracker tracker;
        std::set<std::string> visited;
        std::optional<std::string> last_fp;
        std::optional<std::string> opened;  // list item tapped to reach the current page
        bool budget_resumed = false;
        int failures = 0;
        const bool multi = sv.subtask.mode == SearchMode::multi_page;

        system_act(ActionCommand::open_app(sv.subtask.app_name), same_app_as_previous ? "reopen_app" : "open_app",
                   sv);

        while (true) {
            const auto l = look(visited);
            auto outcome = VisitOutcome::proceed;
            if (l.fingerprint != last_fp) {
                outcome = tracker.note_visit(l.fingerprint);
                last_fp = l.fingerprint;
            }
            const int before = epoch;
            checkpoint();
            if (epoch != before) continue;

            if (outcome == VisitOutcome::auto_scroll) {
                warn("auto_scroll", {{"fingerprint", l.fingerprint}, {"visits", tracker.count(l.fingerprint)}});
                const int h = device->viewport().height;
                act(navigator::resolve_and_preview(ActionCommand::scroll(Direction::down, (2 * h) / 3), l.p.grounding),
                    l, "auto_scroll", sv);
                continue;
            }

            std::string failure;
            const auto verdict = ask<EvaluatorVerdict>(evaluator::build_prompt(sv.subtask, hist, l.p.description),
                                                       evaluator::parse_verdict, failure);
            if (!verdict) {
                if (++failures > 3) {
                    finish_subtask(sv, SubTaskStatus::failed);
                    return;
                }
                pause("error", l, {{"detail", failure}});
                continue;
            }
            if (verdict->risky && !acknowledged_risk.count(l.fingerprint)) {
                nlohmann::json d{{"detail", verdict->risk_reason}};
                d["category"] = verdict->risk_category ? nlohmann::json(to_string(*verdict->risk_category))
                                                       : nlohmann::json();
                pause("risk", l, d);
                continue;
            }
            if (verdict->complete) {
                capture_milestone(sv, l);
                if (multi && opened) visited.insert(element_key(*opened));
                opened.reset();
                if (multi && sv.pages_done < sv.subtask.browse_limit) {
                    system_act(ActionCommand::back(), "next_page", sv);
                    budget_resumed = false;
                    continue;
                }
                finish_subtask(sv, SubTaskStatus::done);
                return;
            }
            if (budget_resumed) {
                warn("step budget exhausted", {{"actions", sv.actions}});
                finish_subtask(sv, SubTaskStatus::failed);
                return;
            }
            if (sv.actions >= cfg.step_budget) {
                budget_resumed = true;
                pause("budget", l, {{"actions", sv.actions}});
                continue;
            }

            const auto help = [&]() -> std::optional<std::string> {
                if (!scenario) return std::nullopt;
                const auto* app = scenario->find_app(sv.subtask.app_id);
                if (!app || app->help_doc.empty()) return std::nullopt;
                return app->help_doc;
            }();
            const auto parsed = ask<navigator::ParsedAction>(
                navigator::build_prompt(sv.subtask, hist, l.p.description, help), navigator::parse_action, failure);
            if (!parsed) {
                if (++failures > 3) {
                    finish_subtask(sv, SubTaskStatus::failed);
                    return;
                }
                pause("error", l, {{"detail", failure}});
                continue;
            }
            for (const auto& w : parsed->warnings) warn(w);
            PreviewedAction pa;
            try {
                pa = navigator::resolve_and_preview(parsed->command, l.p.grounding);
            } catch (const Error& ex) {
                warn(std::string("action not grounded: ") + ex.what());
                if (++failures > 3) {
                    finish_subtask(sv, SubTaskStatus::failed);
                    return;
                }
                pause("error", l, {{"detail", ex.what()}});
                continue;
            }
            const bool tapped_result = pa.command.kind == ActionKind::tap && l.truth &&
                                       l.truth->kind == ScreenKind::results_list && pa.element_index;
            if (act(pa, l, "agent", sv) && tapped_result) {
                const auto* e = l.p.grounding.find(*pa.element_index);
                if (e && e->element_kind == ElementKind::list_item) opened = e->text;
            }
        }
    }

    std::optional<decomposer::Expansion> decompose() {
        AppCatalog catalog;
        for (const auto& [id, name] : device->installed_apps()) {
            CatalogApp a{id, name, id};
            if (scenario)
                if (const auto* app = scenario->find_app(id); app && !app->package_name.empty())
                    a.package_name = app->package_name;
            catalog.apps.push_back(std::move(a));
        }
        const auto req = decomposer::build_prompt(task, catalog);
        for (int round = 0; round < 3; ++round) {
            std::string failure;
            const auto parsed = ask<decomposer::ParsedPlan>(req, decomposer::parse_plan, failure);
            if (!parsed) {
                Look l = look();
                pause("error", l, {{"detail", failure}, {"stage", "decompose"}});
                continue;
            }
            for (const auto& w : parsed->warnings) warn(w);
            decomposer::Expansion exp;
            try {
                exp = decomposer::expand(parsed->plan, catalog, task, cfg.browse_limit);
            } catch (const PreconditionError&) {
                throw;
            } catch (const Error& ex) {
                error = ex.what();
                warn(ex.what());
                return std::nullopt;
            }
            for (const auto& w : exp.warnings) warn(w);

            nlohmann::json subs = nlohmann::json::array();
            for (const auto& s : exp.subtasks)
                subs.push_back({{"subtask_id", s.subtask_id},
                                {"app_id", s.app_id},
                                {"app_name", s.app_name},
                                {"search_term", s.search_term ? nlohmann::json(*s.search_term) : nlohmann::json()},
                                {"mode", to_string(s.mode)},
                                {"query", s.query_text},
                                {"browse_limit", s.browse_limit}});
            const auto& p = parsed->plan;
            emit(TraceKind::decomposed,
                 {{"task", task},
                  {"scenario", scenario ? nlohmann::json(scenario->source.generic_string()) : nlohmann::json()},
                  {"plan",
                   {{"mentioned_apps", p.mentioned_apps},
                    {"installed_related_apps", p.installed_related_apps},
                    {"uninstalled_related_apps", p.uninstalled_related_apps},
                    {"search_terms", p.search_terms},
                    {"search_mode", to_string(p.search_mode)}}},
                  {"subtasks", subs}});
            return exp;
        }
        error = "decomposition failed";
        warn("decomposition failed after repeated errors");
        return std::nullopt;
    }

    void build_report(const std::filesystem::path& run_dir) {
        set_mode(RunMode::reporting);
        const auto records = store->all();
        std::optional<ReportBundle> b;
        if (records.empty()) {
            error = "nothing to report";
            warn("nothing to report");
        } else {
            try {
                const auto resp = gateway->complete(report::build_prompt(task, records));
                clock += cfg.llm_ms;
                b = report::assemble(task, records, resp.text, cfg.citation_threshold);
                if (!run_dir.empty()) report::write_bundle(*b, run_dir);
            } catch (const Error& ex) {
                error = ex.what();
                warn(std::string("report failed: ") + ex.what());
            }
        }
        const auto u = gateway->usage();
        nlohmann::json payload{{"evidence_ids", nlohmann::json::array()},
                               {"tokens", {{"prompt", u.prompt_tokens}, {"completion", u.completion_tokens}}},
                               {"device_state", device_state_json()},
                               {"terminated_by_user", user_terminated}};
        for (const auto& r : records) payload["evidence_ids"].push_back(r->evidence_id);
        if (b) {
            payload["format"] = to_string(b->format);
            payload["citations"] = b->citations.size();
            payload["unresolved"] = b->unresolved_count;
        }
        payload["error"] = error ? nlohmann::json(*error) : nlohmann::json();
        {
            std::lock_guard lock(mu);
            bundle = b;
        }
        emit(TraceKind::report_ready, std::move(payload));
        set_mode(RunMode::done);
    }

    RunResult run(const std::string& t) {
        if (started) throw PreconditionError("an orchestrator runs exactly once");
        started = true;
        task = t;
        const auto wall_start = std::chrono::steady_clock::now();
        RunResult result;
        result.run_id = make_run_id(label, task);
        if (!cfg.out_dir.empty()) {
            result.run_dir = cfg.out_dir / result.run_id;
            std::filesystem::remove_all(result.run_dir / "evidence");
            std::filesystem::remove(result.run_dir / "report.md");
            auto tr = std::make_shared<TraceLog>(result.run_dir / "trace.jsonl");
            auto st = std::make_shared<EvidenceStore>(result.run_dir / "evidence");
            std::lock_guard lock(mu);
            trace = tr;
            store = st;
        }
        {
            std::lock_guard lock(mu);
            snap.run_id = result.run_id;
        }
        set_mode(RunMode::auto_);

        try {
            if (auto exp = decompose()) {
                for (auto& s : exp->subtasks) subtasks.push_back({s, 0, 0});
                publish();
                std::string previous_app;
                for (std::size_t i = 0; i < subtasks.size(); ++i) {
                    cursor = static_cast<int>(i);
                    auto& sv = subtasks[i];
                    run_subtask(sv, sv.subtask.app_id == previous_app);
                    previous_app = sv.subtask.app_id;
                    history = nullptr;
                }
            }
        } catch (const Terminated&) {
            history = nullptr;
        }
        cursor = -1;
        self.channel_.close();
        build_report(result.run_dir);

        result.report = report_copy();
        result.trace = trace->all();
        result.metrics = metrics_from_trace(result.trace);
        result.final_mode = mode;
        result.terminated_by_user = user_terminated;
        result.error = error;
        result.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                               wall_start)
                             .count();
        return result;
    }

    std::optional<ReportBundle> report_copy() const {
        std::lock_guard lock(mu);
        return bundle;
    }
};

Orchestrator::Orchestrator(std::shared_ptr<const Scenario> scenario, std::shared_ptr<LlmGateway> gateway,
                           RunConfig config) {
    if (!scenario) throw PreconditionError("scenario required");
    auto dev = std::make_shared<SimDevice>(scenario);
    const auto name = scenario->name;
    impl_ = std::make_unique<Impl>(*this, scenario, std::move(dev), std::move(gateway), std::move(config), name);
    operator_ = std::make_shared<ScriptedOperator>(scenario->operator_script);
}

Orchestrator::Orchestrator(std::shared_ptr<Device> device, std::shared_ptr<LlmGateway> gateway, RunConfig config,
                           std::string label) {
    if (!device) throw PreconditionError("device required");
    impl_ = std::make_unique<Impl>(*this, nullptr, std::move(device), std::move(gateway), std::move(config),
                                   std::move(label));
}

Orchestrator::~Orchestrator() = default;

RunResult Orchestrator::run(const std::string& task) {
    if (trim(task).empty()) throw PreconditionError("task must not be empty");
    if (!impl_->gateway) throw PreconditionError("gateway required");
    return impl_->run(task);
}

RunSnapshot Orchestrator::snapshot() const {
    std::lock_guard lock(impl_->mu);
    return impl_->snap;
}

std::shared_ptr<const TraceLog> Orchestrator::trace() const {
    std::lock_guard lock(impl_->mu);
    return impl_->trace;
}

std::shared_ptr<const EvidenceStore> Orchestrator::evidence() const {
    std::lock_guard lock(impl_->mu);
    return impl_->store;
}

std::optional<ReportBundle> Orchestrator::report() const { return impl_->report_copy(); }

std::string Orchestrator::run_id_for(const std::string& task) const { return make_run_id(impl_->label, task); }

// ---------------------------------------------------------------- replay

ReplayResult replay(const std::vector<TraceEvent>& events, std::optional<std::filesystem::path> scenario) {
    if (!scenario) {
        for (const auto& e : events)
            if (e.kind == TraceKind::decomposed && e.payload.contains("scenario") && !e.payload["scenario"].is_null()) {
                scenario = e.payload["scenario"].get<std::string>();
                break;
            }
    }
    if (!scenario) throw PreconditionError("trace does not name a scenario");
    SimDevice device(std::make_shared<const Scenario>(load_scenario(*scenario)));
    ReplayResult out;
    for (const auto& e : events) {
        switch (e.kind) {
            case TraceKind::action_executed:
                device.execute(action_from_json(e.payload.at("command")));
                ++out.actions_replayed;
                break;
            case TraceKind::screenshot:
            case TraceKind::user_capture: {
                const int delta = e.payload.at("scroll_delta").get<int>();
                for (int i = 0; i < e.payload.at("scrolls").get<int>(); ++i)
                    device.execute(ActionCommand::scroll(Direction::down, delta));
                if (const int r = e.payload.at("restore_delta").get<int>(); r > 0)
                    device.execute(ActionCommand::scroll(Direction::up, r));
                break;
            }
            case TraceKind::intervention_end:
                if (e.payload.contains("device_state") && !e.payload["device_state"].is_null())
                    device.restore(device_state_from_json(e.payload["device_state"]));
                break;
            case TraceKind::report_ready:
                if (e.payload.contains("device_state") && !e.payload["device_state"].is_null())
                    out.recorded_state = device_state_from_json(e.payload["device_state"]);
                break;
            default: break;
        }
    }
    out.final_state = device.state();
    return out;
}

}  // namespace dr
