#ifndef XSHIFT_MODELS_HPP_
#define XSHIFT_MODELS_HPP_

#include "xshift/core.hpp"

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace xshift {

/// Anything that maps one feature row to a real prediction.
template <class M>
concept Predictor = requires(const M& m, std::span<const double> x) {
  { m.predict_row(x) } -> std::convertible_to<double>;
  { m.feature_count() } -> std::convertible_to<Eigen::Index>;
};

/// f(x) = intercept + <coefficients, x>.
struct LinearModel {
  double intercept = 0.0;
  Vector coefficients;

  Eigen::Index feature_count() const { return coefficients.size(); }

  double predict_row(std::span<const double> x) const {
    double acc = intercept;
    for (Eigen::Index j = 0; j < coefficients.size(); ++j) acc += coefficients[j] * x[static_cast<std::size_t>(j)];
    return acc;
  }
};

/// Wraps an arbitrary callable as a Predictor of fixed dimension.
struct FunctionModel {
  std::function<double(std::span<const double>)> fn;
  Eigen::Index dim = 0;

  Eigen::Index feature_count() const { return dim; }
  double predict_row(std::span<const double> x) const { return fn(x); }
};

template <Predictor M>
Vector predict(const M& model, const DataMatrix& x) {
  if (x.cols() != model.feature_count()) {
    throw ConfigError("predict: matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                      std::to_string(model.feature_count()));
  }
  Vector out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out[r] = model.predict_row(row_span(x, r));
  return out;
}

namespace detail {

inline Eigen::MatrixXd design_with_intercept(const DataMatrix& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return a;
}

}  // namespace detail

/// Ordinary least squares with intercept, solved by column-pivoted Householder QR.
/// Throws NumericalError if the design matrix is rank deficient.
inline LinearModel fit_ols(const DataMatrix& x, const Vector& y) {
  if (x.rows() != y.size()) throw ConfigError("fit_ols: row count does not match target length");
  if (x.rows() < x.cols() + 1) {
    throw ConfigError("fit_ols: need at least " + std::to_string(x.cols() + 1) + " rows, got " +
                      std::to_string(x.rows()));
  }
  if (!x.allFinite() || !y.allFinite()) throw ConfigError("fit_ols: non-finite input");

  const Eigen::MatrixXd a = detail::design_with_intercept(x);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const auto diag = qr.matrixR().diagonal().cwiseAbs();
  const double rmax = diag.maxCoeff();
  const double rmin = diag.minCoeff();
  const double cond = rmin > 0.0 ? rmax / rmin : std::numeric_limits<double>::infinity();
  qr.setThreshold(1e-12);
  if (qr.rank() < a.cols() || !(cond < 1e12)) {
    std::ostringstream msg;
    msg << "fit_ols: design matrix is rank deficient (rank " << qr.rank() << " of " << a.cols()
        << ", condition estimate " << cond << ")";
    throw NumericalError(msg.str());
  }
  const Vector beta = qr.solve(y);
  LinearModel m;
  m.intercept = beta[0];
  m.coefficients = beta.tail(x.cols());
  return m;
}

/// Ridge regression with an unpenalised intercept (centred normal equations).
inline LinearModel fit_ridge(const DataMatrix& x, const Vector& y, double lambda) {
  if (x.rows() != y.size() || x.rows() == 0) throw ConfigError("fit_ridge: shape mismatch or empty input");
  const Vector xm = x.colwise().mean().transpose();
  const double ym = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - xm.transpose();
  const Vector yc = y.array() - ym;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda * static_cast<double>(x.rows());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericalError("fit_ridge: factorization failed");
  LinearModel m;
  m.coefficients = ldlt.solve(xc.transpose() * yc);
  m.intercept = ym - xm.dot(m.coefficients);
  return m;
}

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees (squared error).

struct TreeNode {
  static constexpr int kLeaf = -1;

  int feature = kLeaf;  // split feature, or kLeaf
  double threshold = 0.0;  // rows with x[feature] < threshold go left
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
  double cover = 0.0;  // number of training rows reaching the node

  bool is_leaf() const { return feature == kLeaf; }
};

/// Nodes stored flat; index 0 is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].leaf_value;
  }

  bool uses_feature(int j) const {
    return std::any_of(nodes.begin(), nodes.end(), [j](const TreeNode& n) { return n.feature == j; });
  }
};

struct GbdtParams {
  int rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 20;

  void validate() const {
    if (rounds < 0) throw ConfigError("gbdt: rounds must be >= 0");
    if (max_depth < 1) throw ConfigError("gbdt: max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("gbdt: learning_rate must be in (0, 1]");
    if (min_samples_leaf < 1) throw ConfigError("gbdt: min_samples_leaf must be >= 1");
  }
};

/// f(x) = base_score + sum_t learning_rate * tree_t(x), accumulated tree by tree.
struct GbdtModel {
  double base_score = 0.0;
  double learning_rate = 0.1;
  Eigen::Index n_features = 0;
  std::vector<RegressionTree> trees;
  GbdtParams params;
  /// Training MSE after 0, 1, ..., rounds trees.
  std::vector<double> train_mse_history;

  Eigen::Index feature_count() const { return n_features; }

  double predict_row(std::span<const double> x) const {
    double acc = base_score;
    for (const auto& t : trees) acc += learning_rate * t.predict_row(x);
    return acc;
  }

  bool uses_feature(int j) const {
    return std::any_of(trees.begin(), trees.end(), [j](const RegressionTree& t) { return t.uses_feature(j); });
  }
};

namespace detail {

struct SplitCandidate {
  int feature = TreeNode::kLeaf;
  double threshold = 0.0;
  double gain = 0.0;
};

// Rows of one node, kept sorted by each feature.
using SortedRows = std::vector<std::vector<std::uint32_t>>;

class TreeBuilder {
 public:
  TreeBuilder(const DataMatrix& x, const std::vector<double>& residual, const GbdtParams& params,
              std::vector<std::uint32_t>& leaf_of_row)
      : x_(x), r_(residual), params_(params), leaf_of_row_(leaf_of_row) {}

  RegressionTree build(SortedRows root_rows) {
    tree_.nodes.clear();
    grow(std::move(root_rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(SortedRows rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto& any = rows.front();
    const std::size_t n = any.size();
    double sum = 0.0;
    for (auto i : any) sum += r_[i];
    tree_.nodes[static_cast<std::size_t>(id)].cover = static_cast<double>(n);

    SplitCandidate best;
    if (depth < params_.max_depth && n >= 2 * static_cast<std::size_t>(params_.min_samples_leaf)) {
      best = find_split(rows, sum);
    }
    if (best.feature == TreeNode::kLeaf) {
      auto& node = tree_.nodes[static_cast<std::size_t>(id)];
      node.leaf_value = sum / static_cast<double>(n);
      for (auto i : any) leaf_of_row_[i] = static_cast<std::uint32_t>(id);
      return id;
    }

    std::vector<char> goes_left(static_cast<std::size_t>(x_.rows()), 0);
    for (auto i : any) goes_left[i] = x_(i, best.feature) < best.threshold ? 1 : 0;
    SortedRows left(rows.size()), right(rows.size());
    for (std::size_t f = 0; f < rows.size(); ++f) {
      for (auto i : rows[f]) (goes_left[i] ? left[f] : right[f]).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();

    tree_.nodes[static_cast<std::size_t>(id)].feature = best.feature;
    tree_.nodes[static_cast<std::size_t>(id)].threshold = best.threshold;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  // Exact greedy variance reduction. Ties keep the first candidate, i.e. the
  // lowest feature index and then the lowest threshold.
  SplitCandidate find_split(const SortedRows& rows, double total) const {
    SplitCandidate best;
    const std::size_t n = rows.front().size();
    const auto msl = static_cast<std::size_t>(params_.min_samples_leaf);
    const double parent = total * total / static_cast<double>(n);
    for (std::size_t f = 0; f < rows.size(); ++f) {
      const auto& order = rows[f];
      const auto col = static_cast<Eigen::Index>(f);
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left_sum += r_[order[k]];
        const std::size_t nl = k + 1;
        const std::size_t nr = n - nl;
        if (nl < msl) continue;
        if (nr < msl) break;
        const double lo = x_(order[k], col);
        const double hi = x_(order[k + 1], col);
        if (!(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent;
        if (gain > best.gain) {
          double t = lo + (hi - lo) / 2.0;
          if (!(t > lo)) t = hi;
          best = {static_cast<int>(f), t, gain};
        }
      }
    }
    return best;
  }

  const DataMatrix& x_;
  const std::vector<double>& r_;
  const GbdtParams& params_;
  std::vector<std::uint32_t>& leaf_of_row_;
  RegressionTree tree_;
};

}  // namespace detail

/// Squared-error gradient boosting with depth-limited exact-greedy trees.
inline GbdtModel fit_gbdt(const DataMatrix& x, const Vector& y, const GbdtParams& params = {}) {
  params.validate();
  if (x.rows() == 0 || x.cols() == 0) throw ConfigError("fit_gbdt: empty data");
  if (x.rows() != y.size()) throw ConfigError("fit_gbdt: row count does not match target length");
  if (x.rows() < 2 * static_cast<Eigen::Index>(params.min_samples_leaf)) {
    throw ConfigError("fit_gbdt: need at least 2*min_samples_leaf rows");
  }
  if (!x.allFinite() || !y.allFinite()) throw ConfigError("fit_gbdt: non-finite input");
  if (x.rows() > static_cast<Eigen::Index>(UINT32_MAX)) throw ConfigError("fit_gbdt: too many rows");

  const auto n = static_cast<std::size_t>(x.rows());
  GbdtModel model;
  model.n_features = x.cols();
  model.learning_rate = params.learning_rate;
  model.params = params;
  model.base_score = y.mean();

  detail::SortedRows presorted(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    auto& order = presorted[static_cast<std::size_t>(f)];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }

  std::vector<double> pred(n, model.base_score);
  std::vector<double> residual(n);
  std::vector<std::uint32_t> leaf_of_row(n, 0);
  auto mse = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y[static_cast<Eigen::Index>(i)] - pred[i];
      acc += d * d;
    }
    return acc / static_cast<double>(n);
  };
  model.train_mse_history.push_back(mse());

  model.trees.reserve(static_cast<std::size_t>(params.rounds));
  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[static_cast<Eigen::Index>(i)] - pred[i];
    detail::TreeBuilder builder(x, residual, params, leaf_of_row);
    RegressionTree tree = builder.build(presorted);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += params.learning_rate * tree.nodes[leaf_of_row[i]].leaf_value;
    }
    model.trees.push_back(std::move(tree));
    model.train_mse_history.push_back(mse());
  }
  return model;
}

}  // namespace xshift

#endif  // XSHIFT_MODELS_HPP_
