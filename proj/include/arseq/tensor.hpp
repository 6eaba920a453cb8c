#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape is an append-only list of nodes. Every forward op computes its value
// eagerly and, when any operand requires gradients, records a backward rule.
// Column vectors are n x 1 matrices; scalars are 1 x 1.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace arseq {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}
}  // namespace detail

/// A named trainable matrix plus its gradient accumulator.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix<Scalar>& value() const { return tape_->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(*this); }
  Scalar scalar() const {
    if (rows() != 1 || cols() != 1)
      throw ShapeError("scalar(): tensor is " + detail::shape_str(rows(), cols()));
    return value()(0, 0);
  }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using VarT = Var<Scalar>;
  using Backward = std::function<void(Tape&, const Mat& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  VarT constant(Mat value) { return push(std::move(value), false); }

  /// Leaf whose gradient is read back with grad().
  VarT variable(Mat value) { return push(std::move(value), true); }

  /// Leaf bound to a parameter: reads p.value in place and accumulates into p.grad.
  VarT parameter(Parameter<Scalar>& p) {
    Node n;
    n.external = &p.value;
    n.external_grad = &p.grad;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return VarT(this, nodes_.size() - 1);
  }

  /// Leaf reading a matrix in place, never differentiated.
  VarT frozen(const Mat& value) {
    Node n;
    n.external = &value;
    nodes_.push_back(std::move(n));
    return VarT(this, nodes_.size() - 1);
  }

  const Mat& value(VarT v) const {
    const Node& n = nodes_.at(v.id());
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(VarT v) const { return nodes_.at(v.id()).requires_grad; }

  /// Gradient of the last backward() w.r.t. v; zeros if v was unreachable.
  Mat grad(VarT v) const {
    const Node& n = nodes_.at(v.id());
    if (n.external_grad) return *n.external_grad;
    if (!n.grad_live) return Mat::Zero(value(v).rows(), value(v).cols());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Records a computed value. The backward rule is kept only when a parent
  /// requires gradients.
  VarT record(Mat value, std::initializer_list<VarT> parents, Backward backward) {
    bool needs = false;
    for (const VarT& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return record_impl(std::move(value), needs, std::move(backward));
  }

  VarT record(Mat value, const std::vector<VarT>& parents, Backward backward) {
    bool needs = false;
    for (const VarT& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return record_impl(std::move(value), needs, std::move(backward));
  }

  /// Gradient slot of a node, zero-initialized on first use. Backward rules
  /// write through this.
  Mat& grad_slot(VarT v) {
    Node& n = nodes_[v.id()];
    if (n.external_grad) return *n.external_grad;
    if (!n.grad_live) {
      const Mat& val = n.external ? *n.external : n.value;
      n.grad = Mat::Zero(val.rows(), val.cols());
      n.grad_live = true;
    }
    return n.grad;
  }

  template <typename Expr>
  void accumulate(VarT v, const Expr& g) {
    if (!nodes_[v.id()].requires_grad) return;
    grad_slot(v) += g;
  }

  /// Propagates d(loss)/d(node) to every node recorded before the loss.
  /// Parameter leaves accumulate into their Parameter::grad.
  void backward(VarT loss) {
    check_owner(loss);
    const Mat& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
      throw ShapeError("backward: loss must be scalar, got " + detail::shape_str(lv.rows(), lv.cols()));
    for (Node& n : nodes_) {
      if (!n.external_grad) {
        n.grad_live = false;
        n.grad.resize(0, 0);
      }
    }
    if (!nodes_[loss.id()].requires_grad) return;
    grad_slot(loss) += Mat::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward) continue;
      if (!n.grad_live) continue;
      n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat* external_grad = nullptr;
    Mat grad;
    bool requires_grad = false;
    bool grad_live = false;
    Backward backward;
  };

  VarT push(Mat value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return VarT(this, nodes_.size() - 1);
  }

  VarT record_impl(Mat value, bool needs, Backward backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = needs;
    if (needs) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return VarT(this, nodes_.size() - 1);
  }

  void check_owner(VarT v) const {
    if (&v.tape() != this) throw std::logic_error("Var belongs to a different tape");
  }

  // deque keeps element references stable while ops append nodes
  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Forward ops
// ---------------------------------------------------------------------------

namespace detail {
template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.rows(), a.cols()) + " and " +
                     shape_str(b.rows(), b.cols()) + " differ");
}
}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: shapes " + detail::shape_str(a.rows(), a.cols()) + " and " +
                     detail::shape_str(b.rows(), b.cols()) + " do not conform");
  auto& t = a.tape();
  Matrix<Scalar> out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("hadamard", a, b);
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Matrix<Scalar> out = a.value() * s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(a, g * s);
  });
}

template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) {
  return scale(a, s);
}

/// Adds a scalar to every element.
template <typename Scalar>
Var<Scalar> shift(const Var<Scalar>& a, Scalar s) {
  Matrix<Scalar> out = a.value().array() + s;
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(a, g);
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  Matrix<Scalar> out = a.value().array().tanh();
  auto& t = a.tape();
  return t.record(std::move(out), {a}, [a, &t, id = t.size()](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const Matrix<Scalar>& y = tp.value(Var<Scalar>(&t, id));
    tp.accumulate(a, g.cwiseProduct((1 - y.array().square()).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  Matrix<Scalar> out = (1 + (-a.value().array()).exp()).inverse();
  auto& t = a.tape();
  return t.record(std::move(out), {a}, [a, &t, id = t.size()](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const Matrix<Scalar>& y = tp.value(Var<Scalar>(&t, id));
    tp.accumulate(a, g.cwiseProduct((y.array() * (1 - y.array())).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  Matrix<Scalar> out = a.value().array().log();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(a, g.cwiseQuotient(tp.value(a)));
  });
}

/// Softmax over each column.
template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& a) {
  const Matrix<Scalar>& x = a.value();
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Scalar mx = x.col(j).maxCoeff();
    out.col(j) = (x.col(j).array() - mx).exp();
    out.col(j) /= out.col(j).sum();
  }
  auto& t = a.tape();
  return t.record(std::move(out), {a}, [a, &t, id = t.size()](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const Matrix<Scalar>& y = tp.value(Var<Scalar>(&t, id));
    Matrix<Scalar> dx(y.rows(), y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const Scalar inner = g.col(j).dot(y.col(j));
      dx.col(j) = y.col(j).cwiseProduct((g.col(j).array() - inner).matrix());
    }
    tp.accumulate(a, dx);
  });
}

/// Log-softmax over each column.
template <typename Scalar>
Var<Scalar> log_softmax(const Var<Scalar>& a) {
  const Matrix<Scalar>& x = a.value();
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Scalar mx = x.col(j).maxCoeff();
    const Scalar lse = mx + std::log((x.col(j).array() - mx).exp().sum());
    out.col(j) = x.col(j).array() - lse;
  }
  auto& t = a.tape();
  return t.record(std::move(out), {a}, [a, &t, id = t.size()](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const Matrix<Scalar>& y = tp.value(Var<Scalar>(&t, id));
    Matrix<Scalar> dx(y.rows(), y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      dx.col(j) = g.col(j) - y.col(j).array().exp().matrix() * g.col(j).sum();
    tp.accumulate(a, dx);
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  Matrix<Scalar> out = a.value().transpose();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(a, g.transpose());
  });
}

/// Stacks operands vertically; all must have the same column count.
template <typename Scalar>
Var<Scalar> vstack(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("vstack: no operands");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ShapeError("vstack: column mismatch " + detail::shape_str(p.rows(), p.cols()) + " vs " +
                       detail::shape_str(parts.front().rows(), cols));
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      const Eigen::Index n = tp.value(p).rows();
      tp.accumulate(p, g.middleRows(off, n));
      off += n;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat(const Var<Scalar>& a, const Var<Scalar>& b) {
  return vstack<Scalar>({a, b});
}

/// Places operands side by side; all must have the same row count.
template <typename Scalar>
Var<Scalar> hstack(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("hstack: no operands");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw ShapeError("hstack: row mismatch " + detail::shape_str(p.rows(), p.cols()) + " vs " +
                       detail::shape_str(rows, parts.front().cols()));
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      const Eigen::Index n = tp.value(p).cols();
      tp.accumulate(p, g.middleCols(off, n));
      off += n;
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of " + detail::shape_str(a.rows(), a.cols()));
  Matrix<Scalar> out = a.value().middleRows(start, count);
  return a.tape().record(std::move(out), {a}, [a, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.grad_slot(a).middleRows(start, count) += g;
  });
}

/// Row `index` of a table, returned as a column vector.
template <typename Scalar>
Var<Scalar> gather_row(const Var<Scalar>& table, Eigen::Index index) {
  if (index < 0 || index >= table.rows())
    throw ShapeError("gather_row: index " + std::to_string(index) + " out of " +
                     detail::shape_str(table.rows(), table.cols()));
  Matrix<Scalar> out = table.value().row(index).transpose();
  return table.tape().record(std::move(out), {table}, [table, index](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.grad_slot(table).row(index) += g.transpose();
  });
}

/// Element (i, j) as a 1x1 scalar.
template <typename Scalar>
Var<Scalar> pick(const Var<Scalar>& a, Eigen::Index i, Eigen::Index j = 0) {
  if (i < 0 || i >= a.rows() || j < 0 || j >= a.cols())
    throw ShapeError("pick: index (" + std::to_string(i) + "," + std::to_string(j) + ") out of " +
                     detail::shape_str(a.rows(), a.cols()));
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value()(i, j);
  return a.tape().record(std::move(out), {a}, [a, i, j](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.grad_slot(a)(i, j) += g(0, 0);
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const auto& v = tp.value(a);
    tp.accumulate(a, Matrix<Scalar>::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> dot(const Var<Scalar>& a, const Var<Scalar>& b) {
  return sum(hadamard(a, b));
}

/// Squared Frobenius norm as a 1x1 scalar.
template <typename Scalar>
Var<Scalar> l2_norm_sq(const Var<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(a, tp.value(a) * (2 * g(0, 0)));
  });
}

/// Sum of scalars.
template <typename Scalar>
Var<Scalar> add_n(const std::vector<Var<Scalar>>& terms) {
  if (terms.empty()) throw ShapeError("add_n: no operands");
  Matrix<Scalar> out = Matrix<Scalar>::Zero(terms.front().rows(), terms.front().cols());
  for (const auto& t : terms) {
    if (t.rows() != out.rows() || t.cols() != out.cols())
      throw ShapeError("add_n: shape " + detail::shape_str(t.rows(), t.cols()) + " differs from " +
                       detail::shape_str(out.rows(), out.cols()));
    out += t.value();
  }
  return terms.front().tape().record(std::move(out), terms, [terms](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    for (const auto& t : terms) tp.accumulate(t, g);
  });
}

}  // namespace arseq
