#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qwait/pipeline.hpp"

namespace qwait {

// Bundle file layout (little-endian):
//   "QWAITBND"  u32 format_version  u32 section_count
//   per section: u32 name_len, name, u64 payload_len, payload
// Sections: metadata (JSON), normalizer, bins, ratio_model, knn_basic,
// knn_temporal, knn_queue, immediate_model, category_model, regressors,
// global_regressor. Doubles are stored bit-exact.
std::string serialize_bundle(const TrainedBundle& bundle);
TrainedBundle deserialize_bundle(std::string_view bytes);

void save_bundle(const TrainedBundle& bundle, const std::filesystem::path& path);
TrainedBundle load_bundle(const std::filesystem::path& path);

// FNV-1a hash of the serialized bundle with an empty model_version, as 16 hex digits.
std::string compute_model_version(const TrainedBundle& bundle);

}  // namespace qwait
