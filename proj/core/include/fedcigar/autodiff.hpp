#pragma once

// Dense reverse-mode differentiation over Eigen matrices.
//
// A Tape records primitive applications; Var is a lightweight handle to one
// recorded value. Trainable weights live in Tensor objects owned outside the
// tape; Tape::parameter() links a Tensor into the graph and backward()
// accumulates into Tensor::grad. A tape can be differentiated once.

#include "fedcigar/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedcigar::ad {

/// A named trainable (or frozen) matrix with its gradient accumulator.
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Tensor() = default;
  Tensor(std::string name_, Matrix value_, bool requires_grad_ = true);

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;
struct TapeAccess;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 result.
  double scalar() const;
  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }

 private:
  friend class Tape;
  friend struct TapeAccess;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  AddScalar,
  Transpose,
  ConcatCols,
  RowSlice,
  Relu,
  Sigmoid,
  Log,
  Sqrt,
  Sum,
  Mean,
  RowSum,
  StdDev,
  RowL2Normalize,
  Clamp,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a value that does not receive gradients.
  Var constant(Matrix value);
  /// Links a Tensor into the tape. Gradients reach it only when
  /// `requires_grad` is set.
  Var parameter(Tensor& tensor);

  /// Reverse sweep from a 1x1 output. Throws UsageError when the output is
  /// not scalar, belongs to another tape, or the tape was already swept.
  void backward(const Var& output);

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(std::size_t index) const { return nodes_[index].value; }

 private:
  friend struct TapeAccess;

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Op op = Op::Leaf;
    std::size_t a = kNone;
    std::size_t b = kNone;
    double s0 = 0.0;
    double s1 = 0.0;
    bool needs_grad = false;
    Tensor* param = nullptr;
    Matrix value;
    Matrix grad;
  };

  Var push(Node node);
  void propagate(std::size_t index);
  void accumulate(std::size_t target, const Matrix& contribution);
  void accumulate_broadcast(std::size_t target, const Matrix& contribution);

  std::vector<Node> nodes_;
  bool swept_ = false;
};

// Primitive set. Binary elementwise ops accept `b` either of the same shape
// as `a`, a 1x1 scalar, a 1xC row vector, or an Rx1 column vector.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var transpose(const Var& a);
Var concat_cols(const Var& a, const Var& b);
Var row_slice(const Var& a, Eigen::Index begin, Eigen::Index count);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
/// Sum of all entries, 1x1.
Var sum(const Var& a);
/// Mean of all entries, 1x1.
Var mean(const Var& a);
/// Per-row sums, Rx1.
Var row_sum(const Var& a);
/// Population standard deviation of all entries: sqrt(var + eps), 1x1.
Var std_dev(const Var& a, double eps = 1e-8);
/// Rows scaled to unit l2 norm; rows with norm below `min_norm` map to zero.
Var row_l2_normalize(const Var& a, double min_norm = 1e-12);
/// Clamp to [lo, hi]; gradient passes where lo <= x <= hi.
Var clamp(const Var& a, double lo, double hi);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-tensor first and second moments plus the step counter.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update over `params`; gradients are cleared
/// afterwards. Tensors with requires_grad == false are skipped.
void adam_step(const std::vector<Tensor*>& params, AdamState& state, const AdamOptions& options);

}  // namespace fedcigar::ad
