#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "droidretriever/harness.hpp"
#include "droidretriever/orchestrator.hpp"
#include "droidretriever/server.hpp"

namespace {

constexpr int kExitRunFailed = 1;
constexpr int kExitNoScenarios = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::shared_ptr<dr::LlmGateway> make_gateway(const std::string& llm, const dr::Scenario& scenario) {
    if (llm == "scripted") return dr::scripted_gateway(scenario);
    auto gw = std::make_shared<dr::LlmGateway>();
    for (auto role : {dr::LlmRole::decomposer, dr::LlmRole::navigator, dr::LlmRole::evaluator, dr::LlmRole::reporter})
        gw->set_backend(role, std::make_shared<dr::HttpBackend>(dr::http_config_from_env(role)));
    return gw;
}

std::pair<std::string, int> parse_listen(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) return {"127.0.0.1", std::stoi(s)};
    const auto host = s.substr(0, colon);
    return {host.empty() ? "127.0.0.1" : host, std::stoi(s.substr(colon + 1))};
}

int cmd_run(const std::string& scenario_path, const std::string& task, const std::string& llm,
            std::optional<int> browse_limit, const std::string& serve, const std::string& out, bool linger) {
    auto scenario = std::make_shared<const dr::Scenario>(dr::load_scenario(scenario_path));
    dr::RunConfig cfg;
    cfg.browse_limit = browse_limit;
    cfg.out_dir = out;
    cfg.interactive = !serve.empty();
    dr::Orchestrator orch(scenario, make_gateway(llm, *scenario), cfg);

    std::unique_ptr<dr::ControlServer> server;
    if (!serve.empty()) {
        const auto [host, port] = parse_listen(serve);
        server = std::make_unique<dr::ControlServer>(orch);
        const int bound = server->start(host, port);
        std::cerr << "control surface on http://" << host << ":" << bound << "/api/state\n";
    }

    const auto result = orch.run(task);
    if (result.report) std::cout << result.report->markdown;
    std::cerr << "run " << result.run_id << ": " << dr::to_string(result.final_mode);
    if (!result.run_dir.empty()) std::cerr << " (" << result.run_dir.string() << ")";
    std::cerr << "\n" << dr::to_json(result.metrics).dump() << "\n";
    if (result.error) std::cerr << "error: " << *result.error << "\n";

    if (server && linger) {
        std::cerr << "run finished; serving until interrupted\n";
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    return result.report ? 0 : kExitRunFailed;
}

int cmd_replay(const std::string& trace_path, const std::string& scenario) {
    const auto events = dr::read_trace(trace_path);
    const auto r = scenario.empty() ? dr::replay(events) : dr::replay(events, scenario);
    std::cout << nlohmann::json{{"actions_replayed", r.actions_replayed},
                                {"matches", r.matches()},
                                {"final_state", dr::to_json(r.final_state)}}
                     .dump(2)
              << "\n";
    return r.matches() ? 0 : kExitRunFailed;
}

int cmd_verify(const std::string& trace_path) {
    const auto violations = dr::verify_trace(dr::read_trace(trace_path));
    for (const auto& v : violations) std::cout << v << "\n";
    std::cerr << violations.size() << " violation(s)\n";
    return violations.empty() ? 0 : kExitRunFailed;
}

int cmd_metrics(const std::string& run_dir) {
    std::filesystem::path p(run_dir);
    if (std::filesystem::is_directory(p)) p /= "trace.jsonl";
    std::cout << dr::to_json(dr::metrics_from_trace(dr::read_trace(p))).dump(2) << "\n";
    return 0;
}

int cmd_batch(const std::string& glob, const std::string& tasks, const std::string& out, const std::string& csv) {
    dr::BatchOptions opts;
    opts.out_dir = out;
    const auto rows = dr::batch_run(glob, tasks, opts);
    const auto table = dr::to_csv(rows);
    if (csv.empty()) {
        std::cout << table;
    } else {
        std::ofstream(csv) << table;
    }
    if (rows.empty()) {
        std::cerr << "no scenarios matched " << glob << "\n";
        return kExitNoScenarios;
    }
    for (const auto& r : rows)
        if (r.status != "done") return kExitRunFailed;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DroidRetriever: GUI agent runs over simulated apps"};
    app.require_subcommand(1);

    std::string scenario, task, llm = "scripted", serve, out, trace, run_dir, glob, tasks, csv;
    std::optional<int> browse_limit;
    bool linger = false;

    auto* run = app.add_subcommand("run", "Run one task against a scenario");
    run->add_option("--scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
    run->add_option("--task", task, "Natural-language task")->required();
    run->add_option("--llm", llm, "LLM backend")->check(CLI::IsMember({"scripted", "http"}));
    run->add_option("--browse-limit", browse_limit, "Pages per multi-page sub-task")->check(CLI::PositiveNumber);
    run->add_option("--serve", serve, "Serve the control surface on [host:]port and run interactively");
    run->add_flag("--linger", linger, "Keep serving after the run ends");
    run->add_option("--out", out, "Run directory root");

    auto* rep = app.add_subcommand("replay", "Re-execute a trace and compare the final device state");
    rep->add_option("--trace", trace, "trace.jsonl")->required()->check(CLI::ExistingFile);
    rep->add_option("--scenario", scenario, "Scenario override")->check(CLI::ExistingFile);

    auto* ver = app.add_subcommand("verify", "Check trace invariants");
    ver->add_option("--trace", trace, "trace.jsonl")->required()->check(CLI::ExistingFile);

    auto* met = app.add_subcommand("metrics", "Recompute metrics from a run directory or trace");
    met->add_option("--run", run_dir, "Run directory or trace file")->required()->check(CLI::ExistingPath);

    auto* bat = app.add_subcommand("batch", "Run and score every task whose scenario matches a glob");
    bat->add_option("--scenarios", glob, "Scenario glob")->required();
    bat->add_option("--tasks", tasks, "Tasks file")->required()->check(CLI::ExistingFile);
    bat->add_option("--out", out, "Run directory root");
    bat->add_option("--csv", csv, "Write the table here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(scenario, task, llm, browse_limit, serve, out, linger);
        if (*rep) return cmd_replay(trace, scenario);
        if (*ver) return cmd_verify(trace);
        if (*met) return cmd_metrics(run_dir);
        if (*bat) return cmd_batch(glob, tasks, out, csv);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitRunFailed;
    }
    return 0;
}
