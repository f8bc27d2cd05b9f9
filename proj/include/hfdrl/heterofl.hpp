#pragma once

// Width-scaled nested sub-models, shell-wise weighted aggregation and
// PCA / zero-padding alignment between networks of different widths.
//
// Level l keeps round(zeta^(l-1) * width) hidden units of every hidden layer
// (minimum 1). The first layer's input and the last layer's output are fixed
// by the environment and never shrink.

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hfdrl/errors.hpp"
#include "hfdrl/nn_core.hpp"

namespace hfdrl {

struct HeteroConfig {
  int levels = 2;
  double shrinkage = 0.5;

  bool operator==(const HeteroConfig&) const = default;

  void validate() const {
    if (levels < 1) throw DomainError("levels must be >= 1");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw DomainError("shrinkage must lie in (0, 1]");
  }
};

inline std::size_t scaled_width(std::size_t global_width, int level, double shrinkage) {
  const double w = std::round(std::pow(shrinkage, level - 1) * static_cast<double>(global_width));
  return w < 1.0 ? 1 : static_cast<std::size_t>(w);
}

/// Shapes of the level-`level` sub-model of a network with `global_shapes`.
inline std::vector<LayerShape> level_shapes(const std::vector<LayerShape>& global_shapes, int level,
                                            double shrinkage) {
  check_chain(global_shapes);
  std::vector<LayerShape> out = global_shapes;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (k > 0) out[k].in_dim = scaled_width(global_shapes[k].in_dim, level, shrinkage);
    if (k + 1 < out.size()) out[k].out_dim = scaled_width(global_shapes[k].out_dim, level, shrinkage);
  }
  return out;
}

struct GlobalModel {
  ParamSet params;  // level-1 architecture
  HeteroConfig config;

  std::vector<LayerShape> shapes_at(int level) const {
    return level_shapes(params.shapes(), level, config.shrinkage);
  }
};

inline void check_level(const GlobalModel& g, int level) {
  if (level < 1 || level > g.config.levels)
    throw DomainError("level " + std::to_string(level) + " outside [1, " + std::to_string(g.config.levels) + "]");
}

/// Top-left blocks of every layer (theta_g[1:x^l, 1:y^l]).
inline ParamSet extract_submodel(const GlobalModel& global, int level) {
  check_level(global, level);
  const auto shapes = global.shapes_at(level);
  ParamSet sub;
  sub.layers.reserve(shapes.size());
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto rows = static_cast<Eigen::Index>(shapes[k].out_dim);
    const auto cols = static_cast<Eigen::Index>(shapes[k].in_dim);
    const auto& src = global.params.layers[k];
    DenseLayer l;
    l.weights = src.weights.topLeftCorner(rows, cols);
    l.biases = src.biases.head(rows);
    l.activation = src.activation;
    sub.layers.push_back(std::move(l));
  }
  return sub;
}

/// Index of the shell (1..levels) that owns weight cell (row, col) of `layer`:
/// the largest level whose region still contains the cell. Bias entries use col = 0.
inline int shell_of_cell(const std::vector<LayerShape>& global_shapes, const HeteroConfig& cfg, std::size_t layer,
                         std::size_t row, std::size_t col) {
  int shell = 1;
  for (int l = 2; l <= cfg.levels; ++l) {
    const auto s = level_shapes(global_shapes, l, cfg.shrinkage)[layer];
    if (row < s.out_dim && col < s.in_dim) shell = l;
  }
  return shell;
}

struct Contribution {
  ParamSet params;
  int level = 1;
  double weight = 0.0;
};

/// Every global cell becomes the weight-normalized mean of the contributors
/// whose level region covers it; uncovered cells keep their previous value.
inline GlobalModel aggregate(const std::vector<Contribution>& contributions, const GlobalModel& global_prev) {
  const auto& prev_layers = global_prev.params.layers;
  std::vector<Matrix> num_w, den_w, cover_w;
  std::vector<Vector> num_b, den_b, cover_b;
  for (const auto& l : prev_layers) {
    num_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    den_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    cover_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    num_b.push_back(Vector::Zero(l.biases.size()));
    den_b.push_back(Vector::Zero(l.biases.size()));
    cover_b.push_back(Vector::Zero(l.biases.size()));
  }

  for (std::size_t i = 0; i < contributions.size(); ++i) {
    const auto& c = contributions[i];
    check_level(global_prev, c.level);
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
      throw DomainError("contribution " + std::to_string(i) + " has a negative or non-finite weight");
    if (c.params.shapes() != global_prev.shapes_at(c.level))
      throw ShapeError("contribution " + std::to_string(i) + " is not congruent with level " +
                       std::to_string(c.level));
    for (std::size_t k = 0; k < prev_layers.size(); ++k) {
      const auto& w = c.params.layers[k].weights;
      const auto& b = c.params.layers[k].biases;
      num_w[k].topLeftCorner(w.rows(), w.cols()) += c.weight * w;
      den_w[k].topLeftCorner(w.rows(), w.cols()).array() += c.weight;
      cover_w[k].topLeftCorner(w.rows(), w.cols()).array() += 1.0;
      num_b[k].head(b.size()) += c.weight * b;
      den_b[k].head(b.size()).array() += c.weight;
      cover_b[k].head(b.size()).array() += 1.0;
    }
  }

  GlobalModel next = global_prev;
  for (std::size_t k = 0; k < prev_layers.size(); ++k) {
    auto& w = next.params.layers[k].weights;
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        if (cover_w[k](r, c) == 0.0) continue;
        if (den_w[k](r, c) <= 0.0)
          throw DegenerateInputError("all covering weights are zero at layer " + std::to_string(k));
        w(r, c) = num_w[k](r, c) / den_w[k](r, c);
      }
    auto& b = next.params.layers[k].biases;
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      if (cover_b[k][r] == 0.0) continue;
      if (den_b[k][r] <= 0.0) throw DegenerateInputError("all covering weights are zero at layer " + std::to_string(k));
      b[r] = num_b[k][r] / den_b[k][r];
    }
  }
  return next;
}

/// Uncentered PCA of the columns of `m` (columns are features).
struct PcaProjection {
  Matrix projected;  // m * basis
  Matrix basis;      // cols(m) x k, orthonormal principal directions
};

inline PcaProjection pca_columns(const Matrix& m, std::size_t k) {
  if (k == 0 || k > static_cast<std::size_t>(m.cols())) throw ShapeError("PCA target dimension out of range");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinV);
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix basis(m.cols(), kk);
  const Eigen::Index available = svd.matrixV().cols();
  // a wide matrix has fewer singular directions than features; the rest stay zero
  basis.setZero();
  basis.leftCols(std::min(kk, available)) = svd.matrixV().leftCols(std::min(kk, available));
  return {m * basis, basis};
}

namespace detail {

/// Row alignment of one weight block and its bias: PCA over rows when
/// shrinking (bias projected onto the same basis), zero padding when growing.
inline void align_rows(Matrix& w, Vector& b, Eigen::Index rows) {
  if (rows < w.rows()) {
    const PcaProjection p = pca_columns(w.transpose(), static_cast<std::size_t>(rows));
    w = p.projected.transpose();
    b = p.basis.transpose() * b;
  } else if (rows > w.rows()) {
    Matrix padded = Matrix::Zero(rows, w.cols());
    padded.topRows(w.rows()) = w;
    w = std::move(padded);
    Vector pb = Vector::Zero(rows);
    pb.head(b.size()) = b;
    b = std::move(pb);
  }
}

}  // namespace detail

/// Aligns every layer of `source` to `target_shapes`: PCA where a dimension
/// shrinks, zero padding where it grows, untouched where it matches. The output
/// layer keeps its value row in place; only the logit rows are resized.
inline ParamSet align_params(const ParamSet& source, const std::vector<LayerShape>& target_shapes) {
  if (source.layers.size() != target_shapes.size())
    throw ShapeError("cannot align " + std::to_string(source.layers.size()) + " layers to " +
                     std::to_string(target_shapes.size()));
  ParamSet out;
  out.layers.reserve(source.layers.size());
  for (std::size_t k = 0; k < target_shapes.size(); ++k) {
    const auto& src = source.layers[k];
    const auto rows = static_cast<Eigen::Index>(target_shapes[k].out_dim);
    const auto cols = static_cast<Eigen::Index>(target_shapes[k].in_dim);
    Matrix w = src.weights;
    Vector b = src.biases;

    if (cols < w.cols()) {
      w = pca_columns(w, static_cast<std::size_t>(cols)).projected;
    } else if (cols > w.cols()) {
      Matrix padded = Matrix::Zero(w.rows(), cols);
      padded.leftCols(w.cols()) = w;
      w = std::move(padded);
    }

    const bool head = k + 1 == target_shapes.size();
    if (head && rows != w.rows()) {
      if (rows < 2 || w.rows() < 2) throw ShapeError("output layer needs at least one logit and the value row");
      Matrix logits = w.topRows(w.rows() - 1);
      Vector logit_bias = b.head(b.size() - 1);
      detail::align_rows(logits, logit_bias, rows - 1);
      Matrix hw(rows, w.cols());
      hw.topRows(rows - 1) = logits;
      hw.row(rows - 1) = w.row(w.rows() - 1);
      Vector hb(rows);
      hb.head(rows - 1) = logit_bias;
      hb[rows - 1] = b[b.size() - 1];
      w = std::move(hw);
      b = std::move(hb);
    } else {
      detail::align_rows(w, b, rows);
    }

    DenseLayer l;
    l.weights = std::move(w);
    l.biases = std::move(b);
    l.activation = src.activation;
    out.layers.push_back(std::move(l));
  }
  return out;
}

}  // namespace hfdrl
