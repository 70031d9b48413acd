#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace apg {

// Reverse-mode tape over small dense vectors. Values are computed eagerly at
// node creation; backward() runs one vector-Jacobian sweep in reverse order.
// Node payloads live in flat arenas so clear() keeps all capacity.
//
// Network weights are not nodes: Affine references a parameter bank (caller
// owned flat array) and accumulates its weight gradients into the matching
// gradient buffer during backward.
class Tape {
 public:
  using Index = std::int32_t;

  struct Bank {
    const double* params = nullptr;
    double* grads = nullptr;  // may be null: parameters treated as constants
  };

  int add_bank(const double* params, double* grads);
  void clear();  // drops nodes and banks, keeps arena capacity

  // Leaves.
  Index constant(std::span<const double> v);
  Index constant(double v);
  Index constant(const Eigen::VectorXd& v);

  // y = W x + b with W (rows x size(x), row-major) and b (rows) taken from
  // the bank at the given offsets.
  Index affine(int bank, int w_offset, int b_offset, int rows, Index x);

  Index add(Index a, Index b);
  Index sub(Index a, Index b);
  Index mul(Index a, Index b);  // elementwise
  Index div(Index a, Index b);  // elementwise
  Index min2(Index a, Index b); // elementwise min, gradient follows the winner

  Index gelu(Index x);  // tanh approximation
  Index tanh(Index x);
  Index relu(Index x);
  Index square(Index x);
  Index sqrt(Index x);
  Index sin(Index x);
  Index cos(Index x);
  Index exp(Index x);
  Index max0(Index x);  // max(0, x), derivative 0 at x <= 0

  Index axpb(Index x, double alpha, double beta);        // alpha*x + beta
  Index scale_vec(Index x, std::span<const double> c);   // x .* c
  Index add_vec(Index x, std::span<const double> c);     // x + c
  // Hard clamp; gradient is identity strictly inside [lo, hi], zero outside.
  Index clamp(Index x, std::span<const double> lo, std::span<const double> hi);
  Index clamp(Index x, double lo, double hi);

  Index concat(Index a, Index b);
  Index concat(std::span<const Index> parts);
  Index slice(Index x, int offset, int size);
  Index sum(Index x);         // size-1
  Index dot(Index a, Index b);  // size-1

  int size(Index i) const { return nodes_[i].size; }
  double value(Index i, int component = 0) const {
    return values_[nodes_[i].offset + component];
  }
  std::span<const double> values(Index i) const {
    return {values_.data() + nodes_[i].offset, static_cast<size_t>(nodes_[i].size)};
  }
  Eigen::VectorXd value_vector(Index i) const;

  // Gradients of the given scalar root w.r.t. every node and bank. Bank
  // gradient buffers are accumulated into (caller zeroes them as needed).
  void backward(Index root);
  std::span<const double> grad(Index i) const {
    return {grads_.data() + nodes_[i].offset, static_cast<size_t>(nodes_[i].size)};
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Const, Affine, Add, Sub, Mul, Div, Min2, Gelu, Tanh, Relu, Square, Sqrt,
    Sin, Cos, Exp, Max0, Axpb, ScaleVec, AddVec, Clamp, Concat, Slice, Sum, Dot,
  };

  struct Node {
    Op op;
    int size;
    int offset;  // into values_/grads_
    Index a = -1, b = -1;
    int aux = 0;   // op specific: arena offset / bank / slice offset
    int aux2 = 0;  // op specific: param offsets packed elsewhere if needed
    int aux3 = 0;
  };

  Index push(Op op, int size, Index a, Index b);
  int aux_store(std::span<const double> v);
  double* val(Index i) { return values_.data() + nodes_[i].offset; }
  const double* cval(Index i) const { return values_.data() + nodes_[i].offset; }
  double* gval(Index i) { return grads_.data() + nodes_[i].offset; }

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<double> aux_;
  std::vector<Bank> banks_;
};

}  // namespace apg
