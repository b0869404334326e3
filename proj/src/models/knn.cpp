#include "qwait/models/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace qwait {

KnnModel::KnnModel(Matrix points, std::vector<double> targets, int k, double p)
    : points_(std::move(points)), targets_(std::move(targets)), k_(k), p_(p) {
  if (points_.rows() != targets_.size()) throw Error("KNN points and targets differ in length");
  if (k_ < 1) throw Error("KNN k must be at least 1");
  if (!(p_ >= 1.0)) throw Error("Minkowski order must be >= 1");
}

std::vector<std::size_t> KnnModel::neighbors(std::span<const double> query) const {
  const std::size_t k = static_cast<std::size_t>(k_);
  if (k > points_.rows()) {
    throw Error("KNN k=" + std::to_string(k_) + " exceeds the " + std::to_string(points_.rows()) +
                " training points");
  }
  if (query.size() != points_.cols()) throw Error("KNN query width does not match training points");
  const std::size_t d = points_.cols();
  const bool euclid = p_ == 2.0;

  // Max-heap on (power sum, index) holding the best k so far. Points are
  // scanned in index order, so a later point only displaces the worst entry
  // with a strictly smaller sum, and a partial sum that already reaches the
  // worst one can be abandoned.
  std::vector<std::pair<double, std::size_t>> best;
  best.reserve(k + 1);
  double worst = std::numeric_limits<double>::infinity();
  const double* base = points_.data().data();
  for (std::size_t i = 0; i < points_.rows(); ++i) {
    const double* x = base + i * d;
    double sum = 0.0;
    std::size_t j = 0;
    if (euclid) {
      for (; j < d; ++j) {
        const double diff = x[j] - query[j];
        sum += diff * diff;
        if (sum >= worst) break;
      }
    } else {
      for (; j < d; ++j) {
        sum += std::pow(std::abs(x[j] - query[j]), p_);
        if (sum >= worst) break;
      }
    }
    if (j < d) continue;
    if (best.size() < k) {
      best.emplace_back(sum, i);
      std::push_heap(best.begin(), best.end());
      if (best.size() == k) worst = best.front().first;
    } else if (sum < worst) {
      std::pop_heap(best.begin(), best.end());
      best.back() = {sum, i};
      std::push_heap(best.begin(), best.end());
      worst = best.front().first;
    }
  }
  std::sort(best.begin(), best.end());
  std::vector<std::size_t> out;
  out.reserve(best.size());
  for (const auto& b : best) out.push_back(b.second);
  return out;
}

double KnnModel::predict(std::span<const double> query) const {
  const auto idx = neighbors(query);
  double sum = 0.0;
  for (std::size_t i : idx) sum += targets_[i];
  return sum / static_cast<double>(idx.size());
}

double knn_predict(const KnnModel& model, std::span<const double> query) { return model.predict(query); }

}  // namespace qwait
