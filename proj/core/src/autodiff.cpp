#include "fedcigar/autodiff.hpp"

#include "fedcigar/error.hpp"

#include <cmath>
#include <utility>

namespace fedcigar::ad {

namespace {

std::string shape(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

enum class Broadcast { Same, Scalar, Row, Col };

Broadcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::Col;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape(a) + " and " + shape(b));
}

Matrix expand(const Matrix& b, Eigen::Index rows, Eigen::Index cols) {
  if (b.rows() == rows && b.cols() == cols) return b;
  if (b.size() == 1) return Matrix::Constant(rows, cols, b(0, 0));
  if (b.rows() == 1) return b.replicate(rows, 1);
  return b.replicate(1, cols);
}

// Sums a full-shape gradient down to the shape of a broadcast operand.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

void check_same_tape(const char* op, const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape())
    throw UsageError(std::string(op) + ": operands belong to different tapes");
}

}  // namespace

Tensor::Tensor(std::string name_, Matrix value_, bool requires_grad_)
    : name(std::move(name_)), value(std::move(value_)), requires_grad(requires_grad_) {
  zero_grad();
}

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw UsageError("use of an unbound Var");
  return tape_->value(index_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw DimensionError("scalar(): value has shape " + shape(v));
  return v(0, 0);
}

struct TapeAccess {
  static Var record(Tape& tape, Op op, Matrix value, std::size_t a, std::size_t b = Tape::kNone,
                    double s0 = 0.0, double s1 = 0.0) {
    Tape::Node node;
    node.op = op;
    node.a = a;
    node.b = b;
    node.s0 = s0;
    node.s1 = s1;
    node.needs_grad = tape.nodes_[a].needs_grad || (b != Tape::kNone && tape.nodes_[b].needs_grad);
    node.value = std::move(value);
    return tape.push(std::move(node));
  }
  static Var unary(const Var& a, Op op, Matrix value, double s0 = 0.0, double s1 = 0.0) {
    return record(*a.tape(), op, std::move(value), a.index(), Tape::kNone, s0, s1);
  }
  static Var binary(const char* name, const Var& a, const Var& b, Op op, Matrix value) {
    check_same_tape(name, a, b);
    return record(*a.tape(), op, std::move(value), a.index(), b.index());
  }
};

Var Tape::push(Node node) {
  if (swept_) throw UsageError("cannot record on a tape that was already differentiated");
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::parameter(Tensor& tensor) {
  Node node;
  node.value = tensor.value;
  node.param = &tensor;
  node.needs_grad = tensor.requires_grad;
  return push(std::move(node));
}

void Tape::accumulate(std::size_t target, const Matrix& contribution) {
  Node& node = nodes_[target];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0)
    node.grad = contribution;
  else
    node.grad += contribution;
}

void Tape::accumulate_broadcast(std::size_t target, const Matrix& contribution) {
  const Node& node = nodes_[target];
  if (!node.needs_grad) return;
  accumulate(target, reduce_to(contribution, node.value.rows(), node.value.cols()));
}

void Tape::backward(const Var& output) {
  if (output.tape() != this) throw UsageError("backward: output was not produced by this tape");
  if (swept_) throw UsageError("backward: tape was already differentiated; re-run forward first");
  const Matrix& out = nodes_[output.index()].value;
  if (out.rows() != 1 || out.cols() != 1)
    throw UsageError("backward: output must be 1x1, got " + shape(out));
  swept_ = true;

  nodes_[output.index()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.grad.size() == 0) continue;
    if (node.op == Op::Leaf) {
      if (node.param != nullptr) {
        Tensor& t = *node.param;
        if (t.grad.rows() != t.value.rows() || t.grad.cols() != t.value.cols()) t.zero_grad();
        t.grad += node.grad;
      }
      continue;
    }
    propagate(i);
  }
}

void Tape::propagate(std::size_t index) {
  const Node& node = nodes_[index];
  const Matrix& g = node.grad;
  const Matrix& y = node.value;
  const Matrix& a = nodes_[node.a].value;
  const std::size_t ia = node.a;
  const std::size_t ib = node.b;

  switch (node.op) {
    case Op::Leaf:
      break;
    case Op::MatMul: {
      const Matrix& b = nodes_[ib].value;
      if (nodes_[ia].needs_grad) accumulate(ia, g * b.transpose());
      if (nodes_[ib].needs_grad) accumulate(ib, a.transpose() * g);
      break;
    }
    case Op::Add:
      accumulate(ia, g);
      accumulate_broadcast(ib, g);
      break;
    case Op::Sub:
      accumulate(ia, g);
      accumulate_broadcast(ib, -g);
      break;
    case Op::Mul: {
      const Matrix& b = nodes_[ib].value;
      if (nodes_[ia].needs_grad) accumulate(ia, g.cwiseProduct(expand(b, g.rows(), g.cols())));
      if (nodes_[ib].needs_grad) accumulate_broadcast(ib, g.cwiseProduct(a));
      break;
    }
    case Op::Div: {
      const Matrix bb = expand(nodes_[ib].value, g.rows(), g.cols());
      if (nodes_[ia].needs_grad) accumulate(ia, g.cwiseQuotient(bb));
      if (nodes_[ib].needs_grad)
        accumulate_broadcast(ib, -g.cwiseProduct(a).cwiseQuotient(bb.cwiseProduct(bb)));
      break;
    }
    case Op::Scale:
      accumulate(ia, node.s0 * g);
      break;
    case Op::AddScalar:
      accumulate(ia, g);
      break;
    case Op::Transpose:
      accumulate(ia, g.transpose());
      break;
    case Op::ConcatCols:
      accumulate(ia, g.leftCols(a.cols()));
      accumulate(ib, g.rightCols(nodes_[ib].value.cols()));
      break;
    case Op::RowSlice: {
      Matrix full = Matrix::Zero(a.rows(), a.cols());
      full.middleRows(static_cast<Eigen::Index>(node.s0), g.rows()) = g;
      accumulate(ia, full);
      break;
    }
    case Op::Relu:
      accumulate(ia, g.cwiseProduct((a.array() > 0.0).cast<double>().matrix()));
      break;
    case Op::Sigmoid:
      accumulate(ia, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
      break;
    case Op::Log:
      accumulate(ia, g.cwiseQuotient(a));
      break;
    case Op::Sqrt:
      accumulate(ia, g.cwiseQuotient(2.0 * y));
      break;
    case Op::Sum:
      accumulate(ia, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
      break;
    case Op::Mean:
      accumulate(ia, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / static_cast<double>(a.size())));
      break;
    case Op::RowSum:
      accumulate(ia, g.replicate(1, a.cols()));
      break;
    case Op::StdDev: {
      const double mu = a.mean();
      const double n = static_cast<double>(a.size());
      accumulate(ia, (g(0, 0) / (n * y(0, 0))) * (a.array() - mu).matrix());
      break;
    }
    case Op::RowL2Normalize: {
      Matrix ga = Matrix::Zero(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double norm = a.row(r).norm();
        if (norm < node.s0) continue;
        const double proj = y.row(r).dot(g.row(r));
        ga.row(r) = (g.row(r) - proj * y.row(r)) / norm;
      }
      accumulate(ia, ga);
      break;
    }
    case Op::Clamp:
      accumulate(ia, g.cwiseProduct(((a.array() >= node.s0) && (a.array() <= node.s1))
                                        .cast<double>()
                                        .matrix()));
      break;
  }
}

Var matmul(const Var& a, const Var& b) {
  check_same_tape("matmul", a, b);
  if (a.cols() != b.rows())
    throw DimensionError("matmul: incompatible shapes " + shape(a.value()) + " and " +
                         shape(b.value()));
  return TapeAccess::binary("matmul", a, b, Op::MatMul, a.value() * b.value());
}

Var add(const Var& a, const Var& b) {
  check_same_tape("add", a, b);
  broadcast_kind("add", a.value(), b.value());
  return TapeAccess::binary("add", a, b, Op::Add,
                            a.value() + expand(b.value(), a.rows(), a.cols()));
}

Var sub(const Var& a, const Var& b) {
  check_same_tape("sub", a, b);
  broadcast_kind("sub", a.value(), b.value());
  return TapeAccess::binary("sub", a, b, Op::Sub,
                            a.value() - expand(b.value(), a.rows(), a.cols()));
}

Var mul(const Var& a, const Var& b) {
  check_same_tape("mul", a, b);
  broadcast_kind("mul", a.value(), b.value());
  return TapeAccess::binary("mul", a, b, Op::Mul,
                            a.value().cwiseProduct(expand(b.value(), a.rows(), a.cols())));
}

Var div(const Var& a, const Var& b) {
  check_same_tape("div", a, b);
  broadcast_kind("div", a.value(), b.value());
  return TapeAccess::binary("div", a, b, Op::Div,
                            a.value().cwiseQuotient(expand(b.value(), a.rows(), a.cols())));
}

Var scale(const Var& a, double factor) {
  return TapeAccess::unary(a, Op::Scale, factor * a.value(), factor);
}

Var add_scalar(const Var& a, double offset) {
  return TapeAccess::unary(a, Op::AddScalar, (a.value().array() + offset).matrix(), offset);
}

Var transpose(const Var& a) { return TapeAccess::unary(a, Op::Transpose, a.value().transpose()); }

Var concat_cols(const Var& a, const Var& b) {
  check_same_tape("concat_cols", a, b);
  if (a.rows() != b.rows())
    throw DimensionError("concat_cols: incompatible shapes " + shape(a.value()) + " and " +
                         shape(b.value()));
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return TapeAccess::binary("concat_cols", a, b, Op::ConcatCols, std::move(out));
}

Var row_slice(const Var& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows())
    throw DimensionError("row_slice: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + shape(a.value()));
  return TapeAccess::unary(a, Op::RowSlice, a.value().middleRows(begin, count),
                           static_cast<double>(begin));
}

Var relu(const Var& a) { return TapeAccess::unary(a, Op::Relu, a.value().cwiseMax(0.0)); }

Var sigmoid(const Var& a) {
  Matrix y = a.value().unaryExpr([](double x) {
    // Split form avoids overflow of exp for large |x|.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return TapeAccess::unary(a, Op::Sigmoid, std::move(y));
}

Var log(const Var& a) {
  if ((a.value().array() <= 0.0).any()) throw UsageError("log: input has non-positive entries");
  return TapeAccess::unary(a, Op::Log, a.value().array().log().matrix());
}

Var sqrt(const Var& a) {
  if ((a.value().array() <= 0.0).any()) throw UsageError("sqrt: input has non-positive entries");
  return TapeAccess::unary(a, Op::Sqrt, a.value().cwiseSqrt());
}

Var sum(const Var& a) {
  return TapeAccess::unary(a, Op::Sum, Matrix::Constant(1, 1, a.value().sum()));
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw DimensionError("mean: empty input");
  return TapeAccess::unary(a, Op::Mean, Matrix::Constant(1, 1, a.value().mean()));
}

Var row_sum(const Var& a) { return TapeAccess::unary(a, Op::RowSum, a.value().rowwise().sum()); }

Var std_dev(const Var& a, double eps) {
  if (a.value().size() == 0) throw DimensionError("std_dev: empty input");
  const double mu = a.value().mean();
  const double var = (a.value().array() - mu).square().mean();
  return TapeAccess::unary(a, Op::StdDev, Matrix::Constant(1, 1, std::sqrt(var + eps)), eps);
}

Var row_l2_normalize(const Var& a, double min_norm) {
  Matrix y = Matrix::Zero(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double norm = a.value().row(r).norm();
    if (norm >= min_norm) y.row(r) = a.value().row(r) / norm;
  }
  return TapeAccess::unary(a, Op::RowL2Normalize, std::move(y), min_norm);
}

Var clamp(const Var& a, double lo, double hi) {
  if (!(lo <= hi)) throw UsageError("clamp: lo must not exceed hi");
  return TapeAccess::unary(a, Op::Clamp, a.value().cwiseMax(lo).cwiseMin(hi), lo, hi);
}

void adam_step(const std::vector<Tensor*>& params, AdamState& state, const AdamOptions& options) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Tensor* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.requires_grad) continue;
    if (p.grad.rows() != p.rows() || p.grad.cols() != p.cols()) p.zero_grad();
    state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * p.grad;
    state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * p.grad.cwiseProduct(p.grad);
    const auto m_hat = state.m[i].array() / c1;
    const auto v_hat = state.v[i].array() / c2;
    p.value.array() -= options.lr * m_hat / (v_hat.sqrt() + options.eps);
    p.zero_grad();
  }
}

}  // namespace fedcigar::ad
