#pragma once

#include <span>
#include <vector>

#include "qwait/models/matrix.hpp"

namespace qwait {

// Per-feature standardisation f -> (f - mean) / std with the population std.
// Constant columns (std == 0) map to 0.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> mean, std::vector<double> stddev);

  static Normalizer fit(const Matrix& train);

  std::size_t size() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

  // Uses the leading `out.size()` statistics, so a 59-wide normalizer also
  // serves the 2- and 4-feature baselines.
  void transform(std::span<const double> in, std::span<double> out) const;
  std::vector<double> transform(std::span<const double> in) const;
  Matrix transform(const Matrix& m) const;

  // Inverse on non-constant columns; constant columns return their mean.
  std::vector<double> inverse(std::span<const double> in) const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

Normalizer fit_normalizer(const Matrix& train);

}  // namespace qwait
