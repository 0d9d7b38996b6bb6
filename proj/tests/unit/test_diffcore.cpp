#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../support/oracles.hpp"
#include "rdosr/adam.hpp"
#include "rdosr/errors.hpp"
#include "rdosr/gradcheck.hpp"
#include "rdosr/layers.hpp"
#include "rdosr/losses.hpp"

using namespace rdosr;

namespace {

double dot(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

}  // namespace

TEST_CASE("affine examples") {
  const Matrix eye{{1, 0}, {0, 1}};
  CHECK(affine(eye, Matrix{{0, 0}}, Matrix{{3, 4}}) == Matrix{{3, 4}});
  CHECK(affine(Matrix{{1}, {1}}, Matrix{{5}}, Matrix{{2, 3}}) == Matrix{{10}});
}

TEST_CASE("affine shape errors name both shapes") {
  try {
    affine(Matrix(3, 2), Matrix(1, 2), Matrix(1, 4));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3x2") != std::string::npos);
    CHECK(msg.find("1x4") != std::string::npos);
  }
}

TEST_CASE("activation values") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(softplus(0.0) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  const Matrix r = activate(Activation::relu, Matrix{{-3, 3}});
  CHECK(r == Matrix{{0, 3}});
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(softplus(800.0) == 800.0);
  CHECK(std::isfinite(softplus(-800.0)));
  CHECK_THROWS_AS(activate(Activation::relu, Matrix{{NAN}}), NumericalError);
}

TEST_CASE("softmax cross-entropy examples") {
  CHECK(softmax_xent(Matrix{{0, 0}}, Matrix{{1, 0}}).value ==
        doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  const auto confident = softmax_xent(Matrix{{1000, 0}}, Matrix{{1, 0}});
  CHECK(std::isfinite(confident.value));
  CHECK(confident.value == doctest::Approx(0.0));
  CHECK(confident.grad.all_finite());
}

TEST_CASE("softmax rows sum to one and ignore a constant shift") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    Matrix z = oracle::random_matrix(4, 7, rng, -30, 30);
    const Matrix p = softmax(z);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (double v : p.row(r)) s += v;
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    Matrix shifted = z;
    for (std::size_t c = 0; c < z.cols(); ++c) shifted(1, c) += 123.25;
    const Matrix q = softmax(shifted);
    for (std::size_t c = 0; c < z.cols(); ++c) CHECK(q(1, c) == doctest::Approx(p(1, c)).epsilon(1e-12));
  }
}

TEST_CASE("l1 and l2 reconstruction examples") {
  CHECK(l1_mean(Matrix{{1, -2, 3}}).value == 6.0);
  CHECK(l1_mean(Matrix(3, 4)).value == 0.0);
  CHECK(l1_mean(Matrix{{0.5, 0.5}, {1, 0}}).value == 1.0);
  CHECK(l1_mean(Matrix{{0, 2}}).grad == Matrix{{0, 1}});

  const Matrix z{{1, 2}, {3, 4}};
  const auto same = l2_recon_mean(z, z);
  CHECK(same.value == 0.0);
  CHECK(same.grad == Matrix(2, 2));
  CHECK(l2_recon_mean(Matrix{{1, 0}}, Matrix{{0, 0}}).value == 1.0);
  CHECK(l2_recon_mean(Matrix{{3, 4}}, Matrix{{0, 0}}).value == 5.0);
}

TEST_CASE("layer and loss gradients match central differences") {
  std::mt19937_64 rng(2024);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    CAPTURE(trial);
    const std::size_t n = 1 + rng() % 6, in = 1 + rng() % 5, out = 1 + rng() % 5;

    // affine: weights, bias and input together
    ParamBlock w(oracle::random_matrix(in, out, rng));
    ParamBlock b(oracle::random_matrix(1, out, rng));
    ParamBlock x(oracle::random_matrix(n, in, rng));
    const Matrix probe = oracle::random_matrix(n, out, rng);
    auto affine_loss = [&] { return dot(probe, affine(w.value, b.value, x.value)); };
    w.zero_grad();
    b.zero_grad();
    x.grad = affine_backward(w.value, x.value, probe, w.grad, b.grad);
    std::vector<ParamBlock*> blocks{&w, &b, &x};
    CHECK(oracle::max_rel_error(oracle::flatten_grads(blocks),
                                oracle::fd_gradient(blocks, affine_loss, h)) < 1e-4);

    // activations
    for (Activation act : {Activation::relu, Activation::sigmoid, Activation::softplus}) {
      ParamBlock a(oracle::random_matrix(n, out, rng, -3, 3));
      auto act_loss = [&] { return dot(probe, activate(act, a.value)); };
      a.grad = activate_backward(act, a.value, activate(act, a.value), probe);
      std::vector<ParamBlock*> ab{&a};
      CHECK(oracle::max_rel_error(oracle::flatten_grads(ab), oracle::fd_gradient(ab, act_loss, h)) <
            1e-4);
    }

    // losses
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng() % out);
    const Matrix y = one_hot(labels, out);
    ParamBlock logits(oracle::random_matrix(n, out, rng, -4, 4));
    logits.grad = softmax_xent(logits.value, y).grad;
    std::vector<ParamBlock*> lb{&logits};
    CHECK(oracle::max_rel_error(
              oracle::flatten_grads(lb),
              oracle::fd_gradient(lb, [&] { return softmax_xent(logits.value, y).value; }, h)) <
          1e-4);

    logits.grad = l1_mean(logits.value).grad;
    CHECK(oracle::max_rel_error(
              oracle::flatten_grads(lb),
              oracle::fd_gradient(lb, [&] { return l1_mean(logits.value).value; }, h)) < 1e-4);

    const Matrix target = oracle::random_matrix(n, out, rng);
    logits.grad = l2_recon_mean(target, logits.value).grad;
    CHECK(oracle::max_rel_error(
              oracle::flatten_grads(lb),
              oracle::fd_gradient(lb, [&] { return l2_recon_mean(target, logits.value).value; },
                                  h)) < 1e-4);
  }
}

TEST_CASE("mlp backward matches central differences") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Rng init(trial);
    const std::vector<std::size_t> widths{6, 4, 3};
    Mlp net(5, widths, Activation::relu, Activation::identity, init);
    const Matrix x = oracle::random_matrix(7, 5, rng);
    const Matrix probe = oracle::random_matrix(7, 3, rng);
    auto params = net.params();
    oracle::randomize(params, rng);
    for (auto* p : params) p->zero_grad();
    MlpTape tape;
    net.forward(x, tape);
    net.backward(tape, probe, false);
    CHECK(oracle::max_rel_error(oracle::flatten_grads(params),
                                oracle::fd_gradient(params, [&] { return dot(probe, net.forward(x)); })) <
          1e-4);
  }
}

TEST_CASE("adam first step and zero gradient") {
  ParamBlock p(Matrix{{1.0}});
  AdamState s(1, 1, 1e-3);
  p.grad(0, 0) = 0.5;
  adam_step(p, s);
  // m̂ = g and v̂ = g², so the step is -lr·g/(|g| + ε).
  const double expected = -1e-3 * 0.5 / (0.5 + 1e-8);
  CHECK(p.value(0, 0) - 1.0 == doctest::Approx(expected).epsilon(1e-9));
  CHECK(p.value(0, 0) - 1.0 == doctest::Approx(-9.99998e-4).epsilon(1e-5));
  CHECK(s.step_count == 1);
  CHECK(p.grad(0, 0) == 0.0);

  ParamBlock q(Matrix{{2.0, -3.0}});
  AdamState t(1, 2, 1e-3);
  adam_step(q, t);
  CHECK(q.value == Matrix{{2.0, -3.0}});
  for (double v : t.second_moment.values()) CHECK(v >= 0.0);
}

TEST_CASE("adam decreases a quadratic") {
  ParamBlock w(Matrix{{3.0}});
  Adam opt({&w}, 0.05);
  double prev = 9.0;
  for (int i = 0; i < 50; ++i) {
    opt.zero_grad();
    w.grad(0, 0) = 2 * w.value(0, 0);
    opt.step();
    const double now = w.value(0, 0) * w.value(0, 0);
    CHECK(now < prev);
    prev = now;
  }
  CHECK(opt.states()[0].step_count == 50);
}

TEST_CASE("grad_check examples") {
  const VectorLoss square = [](std::span<const double> x) { return x[0] * x[0]; };
  const std::vector<double> at{3.0}, six{6.0};
  CHECK(grad_check(square, six, at, 1e-5) < 1e-8);
  const VectorLoss constant = [](std::span<const double>) { return 4.0; };
  const std::vector<double> zeros{0.0, 0.0}, pt{1.0, -2.0};
  CHECK(grad_check(constant, zeros, pt, 1e-5) == 0.0);
  for (double g : numeric_gradient(constant, pt, 1e-5)) CHECK(g == 0.0);
  CHECK_THROWS_AS(grad_check(square, six, at, 1e-2), DomainError);
  // A wrong analytic gradient is caught.
  const std::vector<double> wrong{5.0};
  CHECK(grad_check(square, wrong, at, 1e-5) > 0.1);
}

TEST_CASE("grad_check_params restores values") {
  Rng init(1);
  const std::vector<std::size_t> widths{3, 2};
  Mlp net(4, widths, Activation::softplus, Activation::identity, init);
  const Matrix x{{0.1, 0.2, -0.3, 0.4}, {1, -1, 0.5, 0}};
  const auto before = net.params()[0]->value;
  auto params = net.params();
  const double err = grad_check_params(
      params,
      [&](bool backward) {
        if (!backward) return l1_mean(net.forward(x)).value;
        MlpTape tape;
        const auto r = l1_mean(net.forward(x, tape));
        net.backward(tape, r.grad, false);
        return r.value;
      },
      1e-5);
  CHECK(err < 1e-4);
  CHECK(net.params()[0]->value == before);
}
