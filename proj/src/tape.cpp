#include "apg/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace apg {

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

int Tape::add_bank(const double* params, double* grads) {
  banks_.push_back({params, grads});
  return static_cast<int>(banks_.size()) - 1;
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  grads_.clear();
  aux_.clear();
  banks_.clear();
}

Tape::Index Tape::push(Op op, int size, Index a, Index b) {
  Node n;
  n.op = op;
  n.size = size;
  n.offset = static_cast<int>(values_.size());
  n.a = a;
  n.b = b;
  values_.resize(values_.size() + size, 0.0);
  nodes_.push_back(n);
  return static_cast<Index>(nodes_.size()) - 1;
}

int Tape::aux_store(std::span<const double> v) {
  const int off = static_cast<int>(aux_.size());
  aux_.insert(aux_.end(), v.begin(), v.end());
  return off;
}

Tape::Index Tape::constant(std::span<const double> v) {
  const Index i = push(Op::Const, static_cast<int>(v.size()), -1, -1);
  std::copy(v.begin(), v.end(), val(i));
  return i;
}

Tape::Index Tape::constant(double v) { return constant(std::span<const double>(&v, 1)); }

Tape::Index Tape::constant(const Eigen::VectorXd& v) {
  return constant(std::span<const double>(v.data(), static_cast<size_t>(v.size())));
}

Eigen::VectorXd Tape::value_vector(Index i) const {
  return Eigen::Map<const Eigen::VectorXd>(cval(i), nodes_[i].size);
}

Tape::Index Tape::affine(int bank, int w_offset, int b_offset, int rows, Index x) {
  const int n = nodes_[x].size;
  const Index i = push(Op::Affine, rows, x, -1);
  nodes_[i].aux = bank;
  nodes_[i].aux2 = w_offset;
  nodes_[i].aux3 = b_offset;
  const double* p = banks_[bank].params;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      p + w_offset, rows, n);
  Eigen::Map<const Eigen::VectorXd> bvec(p + b_offset, rows);
  Eigen::Map<const Eigen::VectorXd> xv(cval(x), n);
  Eigen::Map<Eigen::VectorXd>(val(i), rows) = w * xv + bvec;
  return i;
}

#define APG_BINARY(NAME, OP, EXPR)                                    \
  Tape::Index Tape::NAME(Index a, Index b) {                          \
    assert(nodes_[a].size == nodes_[b].size);                         \
    const int n = nodes_[a].size;                                     \
    const Index i = push(Op::OP, n, a, b);                            \
    const double* pa = cval(a);                                       \
    const double* pb = cval(b);                                       \
    double* py = val(i);                                              \
    for (int k = 0; k < n; ++k) py[k] = EXPR;                         \
    return i;                                                         \
  }

APG_BINARY(add, Add, pa[k] + pb[k])
APG_BINARY(sub, Sub, pa[k] - pb[k])
APG_BINARY(mul, Mul, pa[k] * pb[k])
APG_BINARY(div, Div, pa[k] / pb[k])
APG_BINARY(min2, Min2, std::min(pa[k], pb[k]))
#undef APG_BINARY

#define APG_UNARY(NAME, OP, EXPR)                                     \
  Tape::Index Tape::NAME(Index x) {                                   \
    const int n = nodes_[x].size;                                     \
    const Index i = push(Op::OP, n, x, -1);                           \
    const double* px = cval(x);                                       \
    double* py = val(i);                                              \
    for (int k = 0; k < n; ++k) py[k] = EXPR;                         \
    return i;                                                         \
  }

APG_UNARY(tanh, Tanh, std::tanh(px[k]))
APG_UNARY(relu, Relu, px[k] > 0.0 ? px[k] : 0.0)
APG_UNARY(square, Square, px[k] * px[k])
APG_UNARY(sqrt, Sqrt, std::sqrt(px[k]))
APG_UNARY(sin, Sin, std::sin(px[k]))
APG_UNARY(cos, Cos, std::cos(px[k]))
APG_UNARY(exp, Exp, std::exp(px[k]))
APG_UNARY(max0, Max0, px[k] > 0.0 ? px[k] : 0.0)
APG_UNARY(gelu, Gelu,
          0.5 * px[k] * (1.0 + std::tanh(kGeluC * (px[k] + kGeluA * px[k] * px[k] * px[k]))))
#undef APG_UNARY

Tape::Index Tape::axpb(Index x, double alpha, double beta) {
  const int n = nodes_[x].size;
  const Index i = push(Op::Axpb, n, x, -1);
  const double ab[2] = {alpha, beta};
  nodes_[i].aux = aux_store(ab);
  const double* px = cval(x);
  double* py = val(i);
  for (int k = 0; k < n; ++k) py[k] = alpha * px[k] + beta;
  return i;
}

Tape::Index Tape::scale_vec(Index x, std::span<const double> c) {
  assert(static_cast<int>(c.size()) == nodes_[x].size);
  const int n = nodes_[x].size;
  const Index i = push(Op::ScaleVec, n, x, -1);
  nodes_[i].aux = aux_store(c);
  const double* px = cval(x);
  const double* pc = aux_.data() + nodes_[i].aux;
  double* py = val(i);
  for (int k = 0; k < n; ++k) py[k] = px[k] * pc[k];
  return i;
}

Tape::Index Tape::add_vec(Index x, std::span<const double> c) {
  assert(static_cast<int>(c.size()) == nodes_[x].size);
  const int n = nodes_[x].size;
  const Index i = push(Op::AddVec, n, x, -1);
  nodes_[i].aux = aux_store(c);
  const double* px = cval(x);
  const double* pc = aux_.data() + nodes_[i].aux;
  double* py = val(i);
  for (int k = 0; k < n; ++k) py[k] = px[k] + pc[k];
  return i;
}

Tape::Index Tape::clamp(Index x, std::span<const double> lo, std::span<const double> hi) {
  const int n = nodes_[x].size;
  assert(static_cast<int>(lo.size()) == n && static_cast<int>(hi.size()) == n);
  const Index i = push(Op::Clamp, n, x, -1);
  nodes_[i].aux = aux_store(lo);
  aux_store(hi);  // stored contiguously after lo
  const double* px = cval(x);
  const double* pl = aux_.data() + nodes_[i].aux;
  const double* ph = pl + n;
  double* py = val(i);
  for (int k = 0; k < n; ++k) py[k] = std::min(std::max(px[k], pl[k]), ph[k]);
  return i;
}

Tape::Index Tape::clamp(Index x, double lo, double hi) {
  const int n = nodes_[x].size;
  std::vector<double> l(n, lo), h(n, hi);
  return clamp(x, l, h);
}

Tape::Index Tape::concat(Index a, Index b) {
  const int na = nodes_[a].size, nb = nodes_[b].size;
  const Index i = push(Op::Concat, na + nb, a, b);
  std::copy(cval(a), cval(a) + na, val(i));
  std::copy(cval(b), cval(b) + nb, val(i) + na);
  return i;
}

Tape::Index Tape::concat(std::span<const Index> parts) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  Index acc = parts[0];
  for (size_t k = 1; k < parts.size(); ++k) acc = concat(acc, parts[k]);
  return acc;
}

Tape::Index Tape::slice(Index x, int offset, int size) {
  assert(offset >= 0 && offset + size <= nodes_[x].size);
  const Index i = push(Op::Slice, size, x, -1);
  nodes_[i].aux = offset;
  std::copy(cval(x) + offset, cval(x) + offset + size, val(i));
  return i;
}

Tape::Index Tape::sum(Index x) {
  const Index i = push(Op::Sum, 1, x, -1);
  double s = 0.0;
  const double* px = cval(x);
  for (int k = 0; k < nodes_[x].size; ++k) s += px[k];
  *val(i) = s;
  return i;
}

Tape::Index Tape::dot(Index a, Index b) {
  assert(nodes_[a].size == nodes_[b].size);
  const Index i = push(Op::Dot, 1, a, b);
  double s = 0.0;
  const double* pa = cval(a);
  const double* pb = cval(b);
  for (int k = 0; k < nodes_[a].size; ++k) s += pa[k] * pb[k];
  *val(i) = s;
  return i;
}

void Tape::backward(Index root) {
  if (nodes_[root].size != 1) throw std::invalid_argument("backward root must be scalar");
  grads_.assign(values_.size(), 0.0);
  gval(root)[0] = 1.0;

  for (Index i = static_cast<Index>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& n = nodes_[i];
    const double* gy = grads_.data() + n.offset;
    bool any = false;
    for (int k = 0; k < n.size; ++k) {
      if (gy[k] != 0.0) {
        any = true;
        break;
      }
    }
    if (!any || n.op == Op::Const) continue;

    double* ga = n.a >= 0 ? gval(n.a) : nullptr;
    double* gb = n.b >= 0 ? gval(n.b) : nullptr;
    const double* xa = n.a >= 0 ? cval(n.a) : nullptr;
    const double* xb = n.b >= 0 ? cval(n.b) : nullptr;
    const double* y = cval(i);

    switch (n.op) {
      case Op::Const:
        break;
      case Op::Affine: {
        const Bank& bank = banks_[n.aux];
        const int rows = n.size, cols = nodes_[n.a].size;
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
            w(bank.params + n.aux2, rows, cols);
        Eigen::Map<const Eigen::VectorXd> g(gy, rows);
        Eigen::Map<Eigen::VectorXd>(ga, cols).noalias() += w.transpose() * g;
        if (bank.grads != nullptr) {
          Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
              gw(bank.grads + n.aux2, rows, cols);
          gw.noalias() += g * Eigen::Map<const Eigen::VectorXd>(xa, cols).transpose();
          Eigen::Map<Eigen::VectorXd>(bank.grads + n.aux3, rows) += g;
        }
        break;
      }
      case Op::Add:
        for (int k = 0; k < n.size; ++k) {
          ga[k] += gy[k];
          gb[k] += gy[k];
        }
        break;
      case Op::Sub:
        for (int k = 0; k < n.size; ++k) {
          ga[k] += gy[k];
          gb[k] -= gy[k];
        }
        break;
      case Op::Mul:
        for (int k = 0; k < n.size; ++k) {
          ga[k] += gy[k] * xb[k];
          gb[k] += gy[k] * xa[k];
        }
        break;
      case Op::Div:
        for (int k = 0; k < n.size; ++k) {
          ga[k] += gy[k] / xb[k];
          gb[k] -= gy[k] * y[k] / xb[k];
        }
        break;
      case Op::Min2:
        for (int k = 0; k < n.size; ++k) {
          if (xa[k] <= xb[k]) {
            ga[k] += gy[k];
          } else {
            gb[k] += gy[k];
          }
        }
        break;
      case Op::Gelu:
        for (int k = 0; k < n.size; ++k) {
          const double x = xa[k];
          const double u = kGeluC * (x + kGeluA * x * x * x);
          const double t = std::tanh(u);
          const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
          ga[k] += gy[k] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
        }
        break;
      case Op::Tanh:
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k] * (1.0 - y[k] * y[k]);
        break;
      case Op::Relu:
      case Op::Max0:
        for (int k = 0; k < n.size; ++k) {
          if (xa[k] > 0.0) ga[k] += gy[k];
        }
        break;
      case Op::Square:
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k] * 2.0 * xa[k];
        break;
      case Op::Sqrt:
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k] * 0.5 / y[k];
        break;
      case Op::Sin:
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k] * std::cos(xa[k]);
        break;
      case Op::Cos:
        for (int k = 0; k < n.size; ++k) ga[k] -= gy[k] * std::sin(xa[k]);
        break;
      case Op::Exp:
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k] * y[k];
        break;
      case Op::Axpb: {
        const double alpha = aux_[n.aux];
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k] * alpha;
        break;
      }
      case Op::ScaleVec: {
        const double* c = aux_.data() + n.aux;
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k] * c[k];
        break;
      }
      case Op::AddVec:
        for (int k = 0; k < n.size; ++k) ga[k] += gy[k];
        break;
      case Op::Clamp: {
        const double* lo = aux_.data() + n.aux;
        const double* hi = lo + n.size;
        for (int k = 0; k < n.size; ++k) {
          if (xa[k] > lo[k] && xa[k] < hi[k]) ga[k] += gy[k];
        }
        break;
      }
      case Op::Concat: {
        const int na = nodes_[n.a].size;
        for (int k = 0; k < na; ++k) ga[k] += gy[k];
        for (int k = 0; k < n.size - na; ++k) gb[k] += gy[na + k];
        break;
      }
      case Op::Slice:
        for (int k = 0; k < n.size; ++k) ga[n.aux + k] += gy[k];
        break;
      case Op::Sum:
        for (int k = 0; k < nodes_[n.a].size; ++k) ga[k] += gy[0];
        break;
      case Op::Dot:
        for (int k = 0; k < nodes_[n.a].size; ++k) {
          ga[k] += gy[0] * xb[k];
          gb[k] += gy[0] * xa[k];
        }
        break;
    }
  }
}

}  // namespace apg
