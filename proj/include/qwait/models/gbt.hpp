#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qwait/models/matrix.hpp"

namespace qwait {

enum class GbtLoss : int { squared_error = 0, logistic = 1, softmax = 2 };

struct GbtConfig {
  int n_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_leaf = 20;
  double reg_lambda = 1.0;
  // Class count for softmax.
  int num_class = 2;

  friend bool operator==(const GbtConfig&, const GbtConfig&) = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double evaluate(std::span<const double> x) const;
  std::size_t leaf_count() const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

// Additive tree ensemble. raw_k(x) = base_score[k] + learning_rate * sum of
// tree outputs of output k. Trees are stored round-major, one per output per
// round (one output except for softmax, which has num_class).
struct GbtEnsemble {
  GbtLoss loss = GbtLoss::squared_error;
  int num_outputs = 1;
  double learning_rate = 0.1;
  int max_depth = 6;
  int min_leaf = 20;
  double reg_lambda = 1.0;
  std::vector<double> base_score{0.0};
  std::vector<RegressionTree> trees;

  int rounds() const { return num_outputs == 0 ? 0 : static_cast<int>(trees.size()) / num_outputs; }

  std::vector<double> raw(std::span<const double> x) const;
  // Regression value.
  double predict_value(std::span<const double> x) const;
  // Logistic: P(label = 1).
  double predict_probability(std::span<const double> x) const;
  // Logistic: {P(0), P(1)}; softmax: per-class probabilities.
  std::vector<double> predict_proba(std::span<const double> x) const;
  // Argmax probability, ties to the lower class.
  int predict_class(std::span<const double> x) const;

  friend bool operator==(const GbtEnsemble&, const GbtEnsemble&) = default;
};

// Exact greedy boosting. Squared error fits residuals; logistic and softmax
// use second-order (Newton) leaf weights -G / (H + lambda). Labels are 0/1
// for logistic and 0..num_class-1 for softmax. When `loss_history` is given
// it receives the mean training loss before the first round and after each
// round. Throws Error on non-finite inputs, bad labels or too few rows.
GbtEnsemble gbt_fit(const Matrix& features, std::span<const double> targets, GbtLoss loss,
                    const GbtConfig& config, std::vector<double>* loss_history = nullptr);

namespace gbt_loss {

double squared_error(double raw, double target);
double logistic(double raw, double label);
double logistic_gradient(double raw, double label);
double logistic_hessian(double raw);
double softmax(std::span<const double> raw, int label);
// d loss / d raw[c].
double softmax_gradient(std::span<const double> raw, int label, int c);
double sigmoid(double raw);

}  // namespace gbt_loss

}  // namespace qwait
