#include "qwait/models/normalizer.hpp"

#include <cmath>

namespace qwait {

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), std_(std::move(stddev)) {
  if (mean_.size() != std_.size()) throw Error("normalizer mean/std size mismatch");
}

Normalizer Normalizer::fit(const Matrix& train) {
  if (train.empty()) throw Error("cannot fit a normalizer on an empty matrix");
  const std::size_t n = train.rows(), d = train.cols();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += train(i, j);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = train(i, j) - mean[j];
      sd[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
    // Rounding can leave a tiny spread on a constant column.
    bool constant = true;
    for (std::size_t i = 1; i < n && constant; ++i) constant = train(i, j) == train(0, j);
    if (constant) {
      sd[j] = 0.0;
      mean[j] = train(0, j);
    }
  }
  return Normalizer(std::move(mean), std::move(sd));
}

void Normalizer::transform(std::span<const double> in, std::span<double> out) const {
  if (in.size() < out.size() || out.size() > mean_.size()) throw Error("normalizer width mismatch");
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std_[j] > 0.0 ? (in[j] - mean_[j]) / std_[j] : 0.0;
  }
}

std::vector<double> Normalizer::transform(std::span<const double> in) const {
  std::vector<double> out(in.size());
  transform(in, out);
  return out;
}

Matrix Normalizer::transform(const Matrix& m) const {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) transform(m.row(i), out.row(i));
  return out;
}

std::vector<double> Normalizer::inverse(std::span<const double> in) const {
  std::vector<double> out(in.size());
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = std_[j] > 0.0 ? in[j] * std_[j] + mean_[j] : mean_[j];
  }
  return out;
}

Normalizer fit_normalizer(const Matrix& train) { return Normalizer::fit(train); }

}  // namespace qwait
