#include "droidretriever/server.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"

#include "droidretriever/errors.hpp"

namespace dr {

namespace {

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

void send_reply(httplib::Response& res, const ControlReply& r) {
    send_json(res, {{"accepted", r.accepted}, {"message", r.message}}, r.accepted ? 202 : 409);
}

std::optional<int> parse_int(const std::string& s) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (trim(s.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

}  // namespace

ControlServer::ControlServer(Orchestrator& orchestrator)
    : orch_(orchestrator), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;

    s.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, to_json(orch_.snapshot()));
    });

    s.Get("/api/subtasks", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, to_json(orch_.snapshot())["subtasks"]);
    });

    s.Get("/api/trace", [this](const httplib::Request& req, httplib::Response& res) {
        long long since = 0;
        if (req.has_param("since")) {
            const auto v = parse_int(req.get_param_value("since"));
            if (!v || *v < 0) return send_json(res, {{"error", "since must be a non-negative integer"}}, 400);
            since = *v;
        }
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : orch_.trace()->since(since)) events.push_back(to_json(e));
        send_json(res, {{"events", events}});
    });

    s.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
        const auto b = orch_.report();
        if (!b) return send_json(res, {{"ready", false}, {"error", orch_.snapshot().error.value_or("")}}, 404);
        auto j = to_json(*b);
        j["ready"] = true;
        send_json(res, j);
    });

    s.Get(R"(/api/evidence/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto rec = orch_.evidence()->get(std::stoi(req.matches[1]));
        if (!rec) return send_json(res, {{"error", "no such evidence"}}, 404);
        const auto png = encode_png(rec->long_image);
        res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    });

    s.Get(R"(/api/evidence/(\d+)/highlights)", [this](const httplib::Request& req, httplib::Response& res) {
        const int id = std::stoi(req.matches[1]);
        if (!orch_.evidence()->get(id)) return send_json(res, {{"error", "no such evidence"}}, 404);
        const auto b = orch_.report();
        if (!b) return send_json(res, {{"evidence_id", id}, {"rects", nlohmann::json::array()}});
        send_json(res, highlights_json(*b, id));
    });

    auto command = [this](OperatorCommandKind kind) {
        return [this, kind](const httplib::Request&, httplib::Response& res) {
            ControlCommand c;
            c.kind = kind;
            send_reply(res, orch_.control().submit(c));
        };
    };
    s.Post("/api/intervene", command(OperatorCommandKind::intervene));
    s.Post("/api/screenshot", command(OperatorCommandKind::screenshot));
    s.Post("/api/terminate", command(OperatorCommandKind::terminate));

    s.Post("/api/resume", [this](const httplib::Request& req, httplib::Response& res) {
        ControlCommand c;
        c.kind = OperatorCommandKind::resume;
        const auto body = trim(req.body);
        if (!body.empty()) {
            std::optional<int> n = parse_int(body);
            if (!n) {
                const auto j = nlohmann::json::parse(body, nullptr, false);
                if (j.is_object() && j.contains("manual_steps") && j["manual_steps"].is_number_integer())
                    n = j["manual_steps"].get<int>();
            }
            if (!n || *n < 0) return send_json(res, {{"accepted", false}, {"message", "bad manual step count"}}, 400);
            c.manual_steps = *n;
        }
        send_reply(res, orch_.control().submit(c));
    });

    s.Post("/api/manual", [this](const httplib::Request& req, httplib::Response& res) {
        const auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (!j.is_object() || !j.contains("action"))
            return send_json(res, {{"accepted", false}, {"message", "expected a JSON action"}}, 400);
        ControlCommand c;
        c.kind = OperatorCommandKind::gesture;
        try {
            c.gesture = action_from_json(j);
        } catch (const std::exception& ex) {
            return send_json(res, {{"accepted", false}, {"message", ex.what()}}, 400);
        }
        if (j.contains("text") && j["text"].is_string()) c.target_text = j["text"].get<std::string>();
        send_reply(res, orch_.control().submit(c));
    });
}

ControlServer::~ControlServer() { stop(); }

int ControlServer::start(const std::string& host, int port) {
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    return port_;
}

void ControlServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace dr
