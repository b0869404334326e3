#include "qwait/models/category.hpp"

#include "qwait/error.hpp"

namespace qwait {
namespace {

constexpr std::array<std::string_view, kCategoryCount> kCodes = {
    "IMMEDIATE", "LE_1M", "LE_5M", "LE_10M", "LE_30M", "LE_1H", "LE_4H", "GT_4H"};
constexpr std::array<std::string_view, kCategoryCount> kLabels = {
    "Immediately",
    "Up to 1 minute",
    "Between 1 and 5 minutes",
    "Between 5 and 10 minutes",
    "Between 10 and 30 minutes",
    "Between 30 minutes and 1 hour",
    "Between 1 and 4 hours",
    "Over 4 hours"};

}  // namespace

StartCategory categorize(double wait_seconds) {
  if (!(wait_seconds >= 0.0)) throw Error("wait time must be non-negative");
  for (std::size_t i = 0; i < kCategoryUpperEdges.size(); ++i) {
    if (wait_seconds <= kCategoryUpperEdges[i]) return static_cast<StartCategory>(i);
  }
  return StartCategory::gt_4h;
}

std::string_view category_code(StartCategory c) { return kCodes.at(static_cast<std::size_t>(c)); }

std::optional<StartCategory> category_from_code(std::string_view code) {
  for (std::size_t i = 0; i < kCodes.size(); ++i) {
    if (kCodes[i] == code) return static_cast<StartCategory>(i);
  }
  return std::nullopt;
}

std::string_view category_label(StartCategory c) { return kLabels.at(static_cast<std::size_t>(c)); }

}  // namespace qwait
