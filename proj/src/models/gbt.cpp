#include "qwait/models/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace qwait {

namespace gbt_loss {

double sigmoid(double raw) {
  if (raw >= 0) return 1.0 / (1.0 + std::exp(-raw));
  const double e = std::exp(raw);
  return e / (1.0 + e);
}

double squared_error(double raw, double target) {
  const double d = raw - target;
  return 0.5 * d * d;
}

double logistic(double raw, double label) {
  // log(1 + e^raw) - label * raw, evaluated without overflow.
  const double softplus = raw > 0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  return softplus - label * raw;
}

double logistic_gradient(double raw, double label) { return sigmoid(raw) - label; }

double logistic_hessian(double raw) {
  const double p = sigmoid(raw);
  return p * (1.0 - p);
}

double softmax(std::span<const double> raw, int label) {
  const double m = *std::max_element(raw.begin(), raw.end());
  double sum = 0.0;
  for (double r : raw) sum += std::exp(r - m);
  return m + std::log(sum) - raw[static_cast<std::size_t>(label)];
}

double softmax_gradient(std::span<const double> raw, int label, int c) {
  const double m = *std::max_element(raw.begin(), raw.end());
  double sum = 0.0;
  for (double r : raw) sum += std::exp(r - m);
  const double p = std::exp(raw[static_cast<std::size_t>(c)] - m) / sum;
  return p - (c == label ? 1.0 : 0.0);
}

}  // namespace gbt_loss

double RegressionTree::evaluate(std::span<const double> x) const {
  std::int32_t i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::vector<double> GbtEnsemble::raw(std::span<const double> x) const {
  std::vector<double> out(base_score);
  std::vector<double> sums(static_cast<std::size_t>(num_outputs), 0.0);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    sums[t % static_cast<std::size_t>(num_outputs)] += trees[t].evaluate(x);
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += learning_rate * sums[k];
  return out;
}

double GbtEnsemble::predict_value(std::span<const double> x) const { return raw(x)[0]; }

double GbtEnsemble::predict_probability(std::span<const double> x) const {
  return gbt_loss::sigmoid(raw(x)[0]);
}

std::vector<double> GbtEnsemble::predict_proba(std::span<const double> x) const {
  const auto r = raw(x);
  if (loss == GbtLoss::logistic) {
    const double p = gbt_loss::sigmoid(r[0]);
    return {1.0 - p, p};
  }
  if (loss != GbtLoss::softmax) throw Error("predict_proba needs a classification ensemble");
  const double m = *std::max_element(r.begin(), r.end());
  std::vector<double> p(r.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) sum += (p[k] = std::exp(r[k] - m));
  for (auto& v : p) v /= sum;
  return p;
}

int GbtEnsemble::predict_class(std::span<const double> x) const {
  if (loss == GbtLoss::logistic) return raw(x)[0] > 0.0 ? 1 : 0;
  const auto r = raw(x);
  // Softmax is monotone in the raw score, so argmax over raw equals argmax over probability.
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

namespace {

// Each feature's (value, row) pairs in ascending value order.
struct SortedColumns {
  std::vector<std::vector<std::pair<double, std::uint32_t>>> cols;
};

SortedColumns presort(const Matrix& x) {
  SortedColumns s;
  s.cols.resize(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& c = s.cols[f];
    c.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) c[i] = {x(i, f), static_cast<std::uint32_t>(i)};
    std::sort(c.begin(), c.end());
  }
  return s;
}

struct NodeStats {
  double g = 0.0, h = 0.0;
  std::size_t n = 0;
};

struct SplitCandidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

// Grows one tree level by level. On return `leaf_of[row]` holds the leaf
// node index each training row reached.
RegressionTree grow_tree(const Matrix& x, const SortedColumns& sorted, std::span<const double> grad,
                         std::span<const double> hess, const GbtConfig& cfg,
                         std::vector<std::int32_t>& leaf_of) {
  const std::size_t n = grad.size();
  const double lambda = cfg.reg_lambda;
  const std::size_t min_leaf = static_cast<std::size_t>(std::max(cfg.min_leaf, 1));
  auto score = [&](double g, double h) { return g * g / (h + lambda); };

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<NodeStats> stats(1);
  for (std::size_t i = 0; i < n; ++i) {
    stats[0].g += grad[i];
    stats[0].h += hess[i];
  }
  stats[0].n = n;
  leaf_of.assign(n, 0);

  std::vector<std::int32_t> frontier{0};
  std::vector<std::int32_t> slot_of(1, 0);  // node -> frontier slot, -1 otherwise

  for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    const std::size_t m = frontier.size();
    std::vector<SplitCandidate> best(m);
    std::vector<NodeStats> left(m);
    std::vector<double> last(m);
    std::vector<char> seen(m);

    for (std::size_t f = 0; f < sorted.cols.size(); ++f) {
      std::fill(left.begin(), left.end(), NodeStats{});
      std::fill(seen.begin(), seen.end(), 0);
      for (const auto& [v, row] : sorted.cols[f]) {
        const std::int32_t node = leaf_of[row];
        const std::int32_t slot = slot_of[static_cast<std::size_t>(node)];
        if (slot < 0) continue;
        const auto s = static_cast<std::size_t>(slot);
        const NodeStats& total = stats[static_cast<std::size_t>(node)];
        if (seen[s] && v != last[s]) {
          const std::size_t nl = left[s].n, nr = total.n - nl;
          if (nl >= min_leaf && nr >= min_leaf) {
            const double gl = left[s].g, hl = left[s].h;
            const double gain = score(gl, hl) + score(total.g - gl, total.h - hl) - score(total.g, total.h);
            if (gain > best[s].gain) best[s] = {gain, static_cast<std::int32_t>(f), last[s]};
          }
        }
        left[s].g += grad[row];
        left[s].h += hess[row];
        ++left[s].n;
        last[s] = v;
        seen[s] = 1;
      }
    }

    std::vector<std::int32_t> next;
    for (std::size_t s = 0; s < m; ++s) {
      const std::int32_t node = frontier[s];
      const auto& parent = stats[static_cast<std::size_t>(node)];
      // Splits whose gain is lost in rounding are not worth a node.
      const double eps = 1e-12 * std::max(1.0, score(parent.g, parent.h));
      slot_of[static_cast<std::size_t>(node)] = -1;
      if (best[s].feature < 0 || !(best[s].gain > eps)) continue;
      const auto l = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      nd.feature = best[s].feature;
      nd.threshold = best[s].threshold;
      nd.left = l;
      nd.right = l + 1;
      stats.resize(tree.nodes.size());
      slot_of.resize(tree.nodes.size(), -1);
      next.push_back(l);
      next.push_back(l + 1);
    }
    if (next.empty()) break;

    // Route rows of split nodes to their children.
    for (std::size_t row = 0; row < n; ++row) {
      const auto& nd = tree.nodes[static_cast<std::size_t>(leaf_of[row])];
      // Rows still sitting on a split node belong to a node split at this level.
      if (nd.feature < 0) continue;
      const std::int32_t child = x(row, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left : nd.right;
      leaf_of[row] = child;
      auto& cs = stats[static_cast<std::size_t>(child)];
      cs.g += grad[row];
      cs.h += hess[row];
      ++cs.n;
    }
    for (std::size_t s = 0; s < next.size(); ++s) slot_of[static_cast<std::size_t>(next[s])] = static_cast<std::int32_t>(s);
    frontier = std::move(next);
  }

  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    auto& nd = tree.nodes[i];
    if (nd.feature < 0) nd.value = -stats[i].g / (stats[i].h + lambda);
  }
  return tree;
}

double mean_loss(GbtLoss loss, std::span<const double> raw, std::span<const double> y, int outputs) {
  const std::size_t n = y.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    switch (loss) {
      case GbtLoss::squared_error: sum += gbt_loss::squared_error(raw[i], y[i]); break;
      case GbtLoss::logistic: sum += gbt_loss::logistic(raw[i], y[i]); break;
      case GbtLoss::softmax:
        sum += gbt_loss::softmax(raw.subspan(i * static_cast<std::size_t>(outputs), static_cast<std::size_t>(outputs)),
                                 static_cast<int>(y[i]));
        break;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

GbtEnsemble gbt_fit(const Matrix& x, std::span<const double> y, GbtLoss loss, const GbtConfig& cfg,
                    std::vector<double>* loss_history) {
  const std::size_t n = x.rows();
  if (n == 0) throw Error("cannot fit boosted trees on an empty matrix");
  if (y.size() != n) throw Error("boosted trees: target length does not match rows");
  if (cfg.n_trees < 0 || cfg.max_depth < 1 || !(cfg.learning_rate > 0) || cfg.reg_lambda < 0) {
    throw Error("boosted trees: invalid configuration");
  }
  if (cfg.n_trees > 0 && n < 2 * static_cast<std::size_t>(std::max(cfg.min_leaf, 1))) {
    throw Error("boosted trees: need at least 2*min_leaf = " + std::to_string(2 * cfg.min_leaf) +
                " rows, got " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (!std::isfinite(x(i, j))) {
        throw Error("boosted trees: non-finite feature at row " + std::to_string(i) + " column " + std::to_string(j));
      }
    }
    if (!std::isfinite(y[i])) throw Error("boosted trees: non-finite target at row " + std::to_string(i));
  }

  GbtEnsemble model;
  model.loss = loss;
  model.learning_rate = cfg.learning_rate;
  model.max_depth = cfg.max_depth;
  model.min_leaf = cfg.min_leaf;
  model.reg_lambda = cfg.reg_lambda;
  int outputs = 1;
  constexpr double kProbFloor = 1e-6;

  switch (loss) {
    case GbtLoss::squared_error:
      model.base_score = {std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n)};
      break;
    case GbtLoss::logistic: {
      double pos = 0;
      for (double v : y) {
        if (v != 0.0 && v != 1.0) throw Error("logistic labels must be 0 or 1");
        pos += v;
      }
      const double p = std::clamp(pos / static_cast<double>(n), kProbFloor, 1.0 - kProbFloor);
      model.base_score = {std::log(p / (1.0 - p))};
      break;
    }
    case GbtLoss::softmax: {
      if (cfg.num_class < 2) throw Error("softmax needs num_class >= 2");
      outputs = cfg.num_class;
      std::vector<double> counts(static_cast<std::size_t>(outputs), 0.0);
      for (double v : y) {
        if (v < 0 || v >= outputs || v != std::floor(v)) throw Error("softmax label out of range");
        counts[static_cast<std::size_t>(v)] += 1;
      }
      model.base_score.resize(static_cast<std::size_t>(outputs));
      for (int k = 0; k < outputs; ++k) {
        model.base_score[static_cast<std::size_t>(k)] =
            std::log(std::max(counts[static_cast<std::size_t>(k)] / static_cast<double>(n), kProbFloor));
      }
      break;
    }
  }
  model.num_outputs = outputs;

  const auto k_out = static_cast<std::size_t>(outputs);
  std::vector<double> raw(n * k_out);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_out; ++k) raw[i * k_out + k] = model.base_score[k];
  }
  double current = mean_loss(loss, raw, y, outputs);
  if (loss_history) {
    loss_history->clear();
    loss_history->push_back(current);
  }
  if (cfg.n_trees == 0) return model;

  const SortedColumns sorted = presort(x);
  std::vector<double> grad(n), hess(n), candidate(raw.size());
  std::vector<std::vector<std::int32_t>> leaves(k_out);
  std::vector<RegressionTree> round_trees(k_out);

  for (int round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t k = 0; k < k_out; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        switch (loss) {
          case GbtLoss::squared_error:
            grad[i] = raw[i] - y[i];
            hess[i] = 1.0;
            break;
          case GbtLoss::logistic:
            grad[i] = gbt_loss::logistic_gradient(raw[i], y[i]);
            hess[i] = gbt_loss::logistic_hessian(raw[i]);
            break;
          case GbtLoss::softmax: {
            const std::span<const double> r(raw.data() + i * k_out, k_out);
            const double m = *std::max_element(r.begin(), r.end());
            double sum = 0.0;
            for (double v : r) sum += std::exp(v - m);
            const double p = std::exp(r[k] - m) / sum;
            grad[i] = p - (static_cast<std::size_t>(y[i]) == k ? 1.0 : 0.0);
            hess[i] = p * (1.0 - p);
            break;
          }
        }
      }
      round_trees[k] = grow_tree(x, sorted, grad, hess, cfg, leaves[k]);
    }

    // Damp the round if it would raise the training loss.
    double scale = 1.0;
    double next = current;
    for (int attempt = 0; attempt <= 30; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < k_out; ++k) {
          const double leaf = round_trees[k].nodes[static_cast<std::size_t>(leaves[k][i])].value;
          candidate[i * k_out + k] = raw[i * k_out + k] + cfg.learning_rate * scale * leaf;
        }
      }
      next = mean_loss(loss, candidate, y, outputs);
      if (next <= current) break;
      scale = attempt == 30 ? 0.0 : scale * 0.5;
    }
    for (auto& t : round_trees) {
      if (scale != 1.0) {
        for (auto& nd : t.nodes) nd.value *= scale;
      }
      model.trees.push_back(std::move(t));
    }
    raw.swap(candidate);
    current = next;
    if (loss_history) loss_history->push_back(current);
  }
  return model;
}

}  // namespace qwait
