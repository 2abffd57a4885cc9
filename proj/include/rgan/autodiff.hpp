#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "rgan/common.hpp"

namespace rgan::ad {

class Tape;

/// Handle to a node on a Tape. Values are matrices with the batch along rows.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Var constant(Mat v);
  Var constant(double v) { return constant(Mat::Constant(1, 1, v)); }
  /// Leaf whose gradient is kept.
  Var variable(Mat v);

  /// Records an op result. `back` runs only if some parent needs a gradient.
  Var push(Mat value, const std::vector<std::size_t>& parents, Backward back);

  void backward(const Var& loss);

  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient accumulator of a node, zero-initialized on first access.
  Mat& grad(std::size_t id);
  /// Gradient of a variable after backward(); zeros if it did not influence the loss.
  Mat gradient(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    bool needs_grad = false;
    bool has_grad = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise ops broadcast a 1 x c row, an r x 1 column or a 1 x 1 scalar
// against the other operand.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double s);
Var operator+(double s, const Var& a);
Var operator-(const Var& a, double s);
Var operator-(double s, const Var& a);
Var operator*(const Var& a, double s);
Var operator*(double s, const Var& a);
Var operator/(const Var& a, double s);

Var matmul(const Var& a, const Var& b);
/// x W + b with b a 1 x out row.
Var affine(const Var& x, const Var& w, const Var& b);
/// Elementwise tanh through a vectorized exp; shared by tape and inference code.
Mat tanh_values(const Mat& v);
Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var pow(const Var& x, double p);
Var square(const Var& x);
/// Subgradient 0 at 0.
Var abs(const Var& x);
/// max(x, c); no gradient where the floor is active.
Var clamp_min(const Var& x, double c);

Var sum_cols(const Var& x);   // r x 1 row sums
Var mean_rows(const Var& x);  // 1 x c column means
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var col(const Var& x, Eigen::Index j);
Var cols(const Var& x, Eigen::Index first, Eigen::Index count);
Var hcat(const std::vector<Var>& parts);

/// Row b of m holds a d x d matrix in row-major order; returns M_b v_b per row.
Var batch_matvec(const Var& m, const Var& v);
/// Per row: vec(u_b v_b^T) in row-major order.
Var batch_outer(const Var& u, const Var& v);
/// Per row: vec(M_b M_b^T) for a row-major d x d M_b.
Var batch_gram(const Var& m);

/// Treats the value as a constant from here on.
Var detach(const Var& x);

}  // namespace rgan::ad
