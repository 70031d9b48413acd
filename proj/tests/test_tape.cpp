#include "apg/tape.hpp"

#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

using namespace apg;

namespace {

using Builder =
    std::function<Tape::Index(Tape&, const std::vector<Tape::Index>&)>;

double eval(const Builder& f, const std::vector<Eigen::VectorXd>& xs) {
  Tape tape;
  std::vector<Tape::Index> leaves;
  for (const auto& x : xs) leaves.push_back(tape.constant(x));
  const Tape::Index root = f(tape, leaves);
  REQUIRE(tape.size(root) == 1);
  return tape.value(root);
}

// Backward gradients of a scalar-valued graph vs central differences over
// every component of every leaf.
void check_grads(const Builder& f, const std::vector<Eigen::VectorXd>& xs,
                 double tol = 1e-6) {
  Tape tape;
  std::vector<Tape::Index> leaves;
  for (const auto& x : xs) leaves.push_back(tape.constant(x));
  tape.backward(f(tape, leaves));

  const double h = 1e-6;
  for (size_t k = 0; k < xs.size(); ++k) {
    const auto g = tape.grad(leaves[k]);
    for (int i = 0; i < xs[k].size(); ++i) {
      auto hi = xs, lo = xs;
      hi[k][i] += h;
      lo[k][i] -= h;
      const double fd = (eval(f, hi) - eval(f, lo)) / (2 * h);
      CHECK(std::abs(g[i] - fd) <= tol * std::max(1.0, std::abs(fd)));
    }
  }
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST_CASE("binary elementwise op gradients") {
  const auto a = vec({0.3, -1.2, 2.5});
  const auto b = vec({1.1, 0.7, -0.4});
  check_grads([](Tape& t, const auto& l) { return t.sum(t.add(l[0], l[1])); }, {a, b});
  check_grads([](Tape& t, const auto& l) { return t.sum(t.sub(l[0], l[1])); }, {a, b});
  check_grads([](Tape& t, const auto& l) { return t.sum(t.mul(l[0], l[1])); }, {a, b});
  check_grads([](Tape& t, const auto& l) { return t.sum(t.div(l[0], l[1])); }, {a, b});
  check_grads([](Tape& t, const auto& l) { return t.dot(l[0], l[1]); }, {a, b});
  // min2 away from ties: gradient follows the winner per component
  check_grads([](Tape& t, const auto& l) { return t.sum(t.min2(l[0], l[1])); }, {a, b});
}

TEST_CASE("unary op gradients") {
  const auto x = vec({0.4, -0.9, 1.7, -2.2});
  auto u = [&](auto op) {
    check_grads([op](Tape& t, const auto& l) { return t.sum(op(t, l[0])); }, {x});
  };
  u([](Tape& t, Tape::Index i) { return t.gelu(i); });
  u([](Tape& t, Tape::Index i) { return t.tanh(i); });
  u([](Tape& t, Tape::Index i) { return t.relu(i); });
  u([](Tape& t, Tape::Index i) { return t.square(i); });
  u([](Tape& t, Tape::Index i) { return t.sin(i); });
  u([](Tape& t, Tape::Index i) { return t.cos(i); });
  u([](Tape& t, Tape::Index i) { return t.exp(i); });
  u([](Tape& t, Tape::Index i) { return t.max0(i); });
  const auto pos = vec({0.3, 1.6, 4.0});
  check_grads([](Tape& t, const auto& l) { return t.sum(t.sqrt(l[0])); }, {pos});
}

TEST_CASE("axpb, scale_vec, add_vec gradients and values") {
  const auto x = vec({0.5, -1.5});
  const double c[2] = {2.0, -3.0};
  check_grads([](Tape& t, const auto& l) { return t.sum(t.axpb(l[0], 2.5, -1.0)); }, {x});
  check_grads([&](Tape& t, const auto& l) { return t.sum(t.scale_vec(l[0], c)); }, {x});
  check_grads([&](Tape& t, const auto& l) { return t.sum(t.add_vec(l[0], c)); }, {x});

  Tape t;
  const auto i = t.axpb(t.constant(x), 2.5, -1.0);
  CHECK(t.value(i, 0) == doctest::Approx(0.25));
  CHECK(t.value(i, 1) == doctest::Approx(-4.75));
}

TEST_CASE("clamp gradient is identity inside and zero outside") {
  Tape t;
  const auto x = t.constant(vec({0.2, 5.0, -5.0}));
  const auto y = t.clamp(x, -1.0, 1.0);
  CHECK(t.value(y, 0) == 0.2);
  CHECK(t.value(y, 1) == 1.0);
  CHECK(t.value(y, 2) == -1.0);
  t.backward(t.sum(y));
  const auto g = t.grad(x);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
}

TEST_CASE("concat and slice route gradients to the right components") {
  const auto a = vec({1.0, 2.0});
  const auto b = vec({3.0});
  check_grads(
      [](Tape& t, const auto& l) {
        const auto c = t.concat(l[0], l[1]);
        return t.sum(t.mul(t.slice(c, 1, 2), t.slice(c, 0, 2)));
      },
      {a, b});

  Tape t;
  const auto c = t.concat(t.constant(a), t.constant(b));
  REQUIRE(t.size(c) == 3);
  CHECK(t.value(c, 2) == 3.0);
  const auto s = t.slice(c, 1, 2);
  CHECK(t.value(s, 0) == 2.0);
  CHECK(t.value(s, 1) == 3.0);
}

TEST_CASE("composed graph gradient") {
  const auto x = vec({0.7, -0.3, 1.1});
  check_grads(
      [](Tape& t, const auto& l) {
        const auto y = t.tanh(t.axpb(l[0], 1.5, 0.2));
        const auto z = t.mul(y, t.sin(l[0]));
        return t.dot(z, t.exp(t.axpb(l[0], -0.5, 0.0)));
      },
      {x});
}

TEST_CASE("affine accumulates parameter bank gradients") {
  const int rows = 3, cols = 4;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> params(rows * cols + rows);
  for (auto& p : params) p = u(rng);
  Eigen::VectorXd x(cols);
  for (int i = 0; i < cols; ++i) x[i] = u(rng);

  auto run = [&](const std::vector<double>& pv, const Eigen::VectorXd& xv,
                 std::vector<double>* grads_out, double* xin_grad) {
    Tape t;
    std::vector<double> g(pv.size(), 0.0);
    const int bank = t.add_bank(pv.data(), g.data());
    const auto xi = t.constant(xv);
    const auto y = t.affine(bank, 0, rows * cols, rows, xi);
    const auto root = t.sum(t.square(y));
    const double v = t.value(root);
    if (grads_out) {
      t.backward(root);
      *grads_out = g;
      if (xin_grad) {
        const auto gx = t.grad(xi);
        for (int i = 0; i < cols; ++i) xin_grad[i] = gx[i];
      }
    }
    return v;
  };

  // forward value matches Eigen
  {
    Eigen::MatrixXd W(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) W(r, c) = params[r * cols + c];
    Eigen::VectorXd b(rows);
    for (int r = 0; r < rows; ++r) b[r] = params[rows * cols + r];
    const Eigen::VectorXd y = W * x + b;
    CHECK(run(params, x, nullptr, nullptr) ==
          doctest::Approx(y.squaredNorm()).epsilon(1e-12));
  }

  std::vector<double> bank_grads;
  std::vector<double> x_grads(cols);
  run(params, x, &bank_grads, x_grads.data());

  const double h = 1e-6;
  for (size_t k = 0; k < params.size(); ++k) {
    auto hi = params, lo = params;
    hi[k] += h;
    lo[k] -= h;
    const double fd = (run(hi, x, nullptr, nullptr) - run(lo, x, nullptr, nullptr)) / (2 * h);
    CHECK(std::abs(bank_grads[k] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
  for (int i = 0; i < cols; ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    const double fd = (run(params, hi, nullptr, nullptr) - run(params, lo, nullptr, nullptr)) / (2 * h);
    CHECK(std::abs(x_grads[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("affine with null gradient buffer treats parameters as constants") {
  std::vector<double> params = {1.0, 2.0, 0.5};
  Tape t;
  const int bank = t.add_bank(params.data(), nullptr);
  const auto x = t.constant(vec({3.0, -1.0}));
  const auto y = t.affine(bank, 0, 2, 1, x);
  CHECK(t.value(y) == doctest::Approx(1.5));
  t.backward(y);  // must not write through the null buffer
  CHECK(t.grad(x)[0] == doctest::Approx(1.0));
  CHECK(t.grad(x)[1] == doctest::Approx(2.0));
}

TEST_CASE("clear keeps the tape reusable and deterministic") {
  Tape t;
  double first = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    t.clear();
    const auto x = t.constant(vec({0.4, 1.3}));
    const auto root = t.sum(t.gelu(t.square(x)));
    t.backward(root);
    const double v = t.value(root) + t.grad(x)[0] + t.grad(x)[1];
    if (rep == 0)
      first = v;
    else
      CHECK(v == first);
  }
}

TEST_CASE("fan-out accumulates gradients") {
  // y = x*x + x used twice: dy/dx = 2x + 1
  Tape t;
  const auto x = t.constant(2.0);
  const auto root = t.add(t.mul(x, x), x);
  t.backward(root);
  CHECK(t.grad(x)[0] == doctest::Approx(5.0));
}

TEST_CASE("repeated backward calls reset adjoints") {
  Tape t;
  const auto x = t.constant(1.5);
  const auto root = t.square(x);
  t.backward(root);
  const double g1 = t.grad(x)[0];
  t.backward(root);
  CHECK(t.grad(x)[0] == g1);
}
