#include "support.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace drt {

std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(DR_SOURCE_DIR) / rel; }

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::shared_ptr<const dr::Scenario> scenario(const std::string& stem) {
    return std::make_shared<const dr::Scenario>(dr::load_scenario(source_path("scenarios/" + stem + ".yaml")));
}

std::string golden_diff(const std::string& name, const std::string& actual) {
    const auto path = source_path("tests/golden/" + name);
    const char* update = std::getenv("DR_UPDATE_GOLDEN");
    if (update && std::string(update) == "1") {
        std::filesystem::create_directories(path.parent_path());
        std::ofstream(path, std::ios::binary) << actual;
        return "";
    }
    if (!std::filesystem::exists(path)) return "missing golden file " + path.string();
    const auto expected = read_file(path);
    if (expected == actual) return "";
    std::size_t i = 0;
    while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) ++i;
    return name + " differs at byte " + std::to_string(i) + ": expected \"" + expected.substr(i, 60) +
           "\" got \"" + actual.substr(i, 60) + "\"";
}

std::string minimal_yaml(int canvas_height, int lines) {
    std::ostringstream y;
    y << "name: minimal\n"
         "apps:\n"
         "  - app_id: demo\n"
         "    display_name: Demo\n"
         "    home_screen: home\n"
         "    screens:\n"
         "      - screen_id: home\n"
         "        kind: home\n"
         "        elements:\n"
         "          - {id: open, text: \"Open page\", kind: button, bbox: [60, 200, 600, 320], on_tap: page}\n"
         "      - screen_id: page\n"
         "        kind: result_detail\n";
    if (canvas_height > 0) y << "        canvas_height: " << canvas_height << "\n";
    y << "        elements:\n";
    const int h = canvas_height > 0 ? canvas_height : 2244;
    const int step = std::max(150, (h - 200) / std::max(1, lines));
    for (int i = 0; i < lines; ++i) {
        const int top = 100 + i * step;
        if (top + 100 > h) break;
        y << "          - {id: l" << i << ", text: \"Line " << i << " value " << (i * 37 % 101) << "\", kind: text, bbox: [60, "
          << top << ", 900, " << top + 100 << "]}\n";
    }
    y << "policies:\n"
         "  decomposer:\n"
         "    default: |\n"
         "      {\"mentioned_apps\": ['Demo'], \"installed_related_apps\": [none], \"uninstalled_related_apps\": [none],\n"
         "       \"search_terms\": [none], \"search_mode\": ['focused']}\n"
         "  navigator:\n"
         "    rules:\n"
         "      - contains: [\"[screen] home\"]\n"
         "        response: '${tap:\"Open page\"}'\n"
         "    default: '{\"action\": \"back\"}'\n"
         "  evaluator:\n"
         "    rules:\n"
         "      - contains: [\"[screen] result_detail\"]\n"
         "        response: \"Completion<start>True<end> Reason<start>open<end> Risk<start>False<end> Reason<start>none<end>\"\n"
         "    default: \"Completion<start>False<end> Reason<start>no<end> Risk<start>False<end> Reason<start>none<end>\"\n"
         "  reporter:\n"
         "    default: \"- Line zero is shown[1(Line 0 value 0)].\"\n";
    return y.str();
}

dr::RunResult run(const std::string& stem, const std::string& task, dr::RunConfig cfg) {
    auto sc = scenario(stem);
    dr::Orchestrator orch(sc, dr::scripted_gateway(*sc), cfg);
    return orch.run(task);
}

std::filesystem::path temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto p = std::filesystem::temp_directory_path() /
             ("drtest-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace drt
