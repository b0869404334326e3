#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qwait/models/matrix.hpp"

namespace qwait {

// Exact k-nearest-neighbour regression under the Minkowski metric of order p.
// Neighbours are ranked by the power sum sum_i |x_i - q_i|^p (monotone in the
// distance), ties broken by lower training index. The prediction is the mean
// of the k neighbour targets.
class KnnModel {
 public:
  KnnModel() = default;
  KnnModel(Matrix points, std::vector<double> targets, int k = 10, double p = 2.0);

  int k() const { return k_; }
  double p() const { return p_; }
  std::size_t size() const { return points_.rows(); }
  std::size_t dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  const std::vector<double>& targets() const { return targets_; }

  // Training indices of the k nearest points, nearest first. Throws when k > size().
  std::vector<std::size_t> neighbors(std::span<const double> query) const;
  double predict(std::span<const double> query) const;

  friend bool operator==(const KnnModel&, const KnnModel&) = default;

 private:
  Matrix points_;
  std::vector<double> targets_;
  int k_ = 10;
  double p_ = 2.0;
};

double knn_predict(const KnnModel& model, std::span<const double> query);

}  // namespace qwait
