#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "droidretriever/orchestrator.hpp"
#include "droidretriever/scenario.hpp"

namespace drt {

std::filesystem::path source_path(const std::string& rel);
std::string read_file(const std::filesystem::path& p);

std::shared_ptr<const dr::Scenario> scenario(const std::string& stem);

// Compares against tests/golden/<name>; DR_UPDATE_GOLDEN=1 rewrites the file.
// Returns an empty string on a match, otherwise a short diff description.
std::string golden_diff(const std::string& name, const std::string& actual);

// Single app, one home screen with a button to a scrollable page of
// `canvas_height` rows holding evenly spaced text lines.
std::string minimal_yaml(int canvas_height = 0, int lines = 12);

dr::RunResult run(const std::string& stem, const std::string& task, dr::RunConfig cfg = {});

// Fresh temporary directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

struct GoldenTask {
    const char* stem;
    const char* task;
};
inline constexpr GoldenTask kHotel{"hotel_focused", "Check the room prices of Hilton Shanghai Hongqiao on Trip"};
inline constexpr GoldenTask kNews{"news_list", "Find the latest articles about electric cars on NewsHub"};
inline constexpr GoldenTask kShopping{"shopping_multipage", "Compare wireless earbuds on ShopA and ShopB"};
inline constexpr GoldenTask kMovies{"movies_dedup", "Find sci-fi movies on MovieBox"};
inline constexpr GoldenTask kLogin{"login_risk", "Check the price of a kettle on Mall"};

}  // namespace drt
