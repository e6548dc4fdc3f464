#pragma once

#include <memory>
#include <string>
#include <thread>

#include "droidretriever/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace dr {

// HTTP control surface over one orchestrator:
//   GET  /api/state  /api/trace?since=N  /api/subtasks  /api/report
//   GET  /api/evidence/<id>  (PNG)   /api/evidence/<id>/highlights
//   POST /api/intervene  /api/resume (body: manual step count)  /api/screenshot  /api/terminate
//   POST /api/manual  (simulated manual gesture, JSON action)
// Rejected commands answer 409 with {"accepted": false, "message": ...}.
class ControlServer {
public:
    explicit ControlServer(Orchestrator& orchestrator);
    ~ControlServer();

    // Binds and serves on a background thread. Port 0 picks a free port.
    int start(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

private:
    Orchestrator& orch_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace dr
