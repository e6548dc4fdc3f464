#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "droidretriever/harness.hpp"
#include "droidretriever/orchestrator.hpp"

namespace py = pybind11;
using namespace dr;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict run_scenario(const std::filesystem::path& scenario_path, const std::string& task,
                      std::optional<int> browse_limit, std::optional<std::filesystem::path> out_dir) {
    auto sc = std::make_shared<const Scenario>(load_scenario(scenario_path));
    RunConfig cfg;
    cfg.browse_limit = browse_limit;
    if (out_dir) cfg.out_dir = *out_dir;
    RunResult r;
    {
        py::gil_scoped_release release;
        Orchestrator orch(sc, scripted_gateway(*sc), cfg);
        r = orch.run(task);
    }
    py::list trace;
    for (const auto& e : r.trace) trace.append(to_py(to_json(e)));
    py::dict out;
    out["run_id"] = r.run_id;
    out["mode"] = std::string(to_string(r.final_mode));
    out["terminated_by_user"] = r.terminated_by_user;
    out["error"] = r.error ? py::object(py::str(*r.error)) : py::none();
    out["report"] = r.report ? to_py(to_json(*r.report)) : py::none();
    out["metrics"] = to_py(to_json(r.metrics));
    out["trace"] = trace;
    out["run_dir"] = r.run_dir.empty() ? py::none() : py::object(py::str(r.run_dir.string()));
    return out;
}

std::vector<TraceEvent> load_trace(const std::filesystem::path& p) {
    return read_trace(std::filesystem::is_directory(p) ? p / "trace.jsonl" : p);
}

py::list parse_citations_py(const std::string& markdown) {
    py::list out;
    for (const auto& c : report::parse_citations(markdown).citations) out.append(py::make_tuple(c.evidence_id, c.quoted_text));
    return out;
}

py::list batch_py(const std::string& glob, const std::filesystem::path& tasks) {
    std::vector<BatchRow> rows;
    {
        py::gil_scoped_release release;
        rows = batch_run(glob, tasks);
    }
    py::list out;
    for (const auto& r : rows) {
        py::dict d;
        d["task"] = r.task;
        d["scenario"] = r.scenario;
        d["status"] = r.status;
        d["steps"] = r.steps;
        d["tokens"] = r.tokens;
        d["time_ms"] = r.time_ms;
        d["coverage"] = r.score.coverage;
        d["accuracy"] = r.score.accuracy;
        d["redundancy"] = r.score.redundancy;
        d["interventions"] = r.interventions;
        d["error"] = r.error;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "DroidRetriever core";
    py::register_exception<Error>(m, "DroidRetrieverError");

    m.def("run", &run_scenario, py::arg("scenario"), py::arg("task"), py::arg("browse_limit") = py::none(),
          py::arg("out_dir") = py::none(), "Run a task against a scenario with scripted policies.");
    m.def("verify_trace", [](const std::filesystem::path& p) { return verify_trace(load_trace(p)); }, py::arg("trace"));
    m.def("metrics", [](const std::filesystem::path& p) { return to_py(to_json(metrics_from_trace(load_trace(p)))); },
          py::arg("run"));
    m.def("replay_matches", [](const std::filesystem::path& p) { return replay(load_trace(p)).matches(); },
          py::arg("trace"));
    m.def("similarity", &report::similarity, py::arg("a"), py::arg("b"));
    m.def("parse_citations", &parse_citations_py, py::arg("markdown"));
    m.def("report_statements", &report_statements, py::arg("markdown"));
    m.def("batch", &batch_py, py::arg("scenarios"), py::arg("tasks"));
    m.def("run_id", &make_run_id, py::arg("scenario_name"), py::arg("task"));
    m.attr("CITATION_THRESHOLD") = kCitationThreshold;
}
