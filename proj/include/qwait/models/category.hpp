#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "qwait/time.hpp"

namespace qwait {

// Start-time buckets, each inclusive on its upper edge.
enum class StartCategory : int {
  immediate = 0,  // <= 10 s
  le_1m,
  le_5m,
  le_10m,
  le_30m,
  le_1h,
  le_4h,
  gt_4h,
};

inline constexpr int kCategoryCount = 8;
// Categories excluding `immediate`, seen by the 7-way classifier and regressors.
inline constexpr int kWaitingCategories = 7;
inline constexpr std::array<double, 7> kCategoryUpperEdges = {10, 60, 300, 600, 1800, 3600, 14400};
// An immediate starter is predicted to start this long after submission.
inline constexpr double kImmediateStartDelay = 10.0;

StartCategory categorize(double wait_seconds);

// 0..6 for the waiting categories; `immediate` has no index.
inline int waiting_index(StartCategory c) { return static_cast<int>(c) - 1; }
inline StartCategory from_waiting_index(int i) { return static_cast<StartCategory>(i + 1); }

// "IMMEDIATE", "LE_1M", ..., "GT_4H".
std::string_view category_code(StartCategory c);
std::optional<StartCategory> category_from_code(std::string_view code);
// Report row labels ("Immediately", "Up to 1 minute", ...).
std::string_view category_label(StartCategory c);

}  // namespace qwait
