#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "trajevent/common.hpp"
#include "trajevent/tape.hpp"

using namespace trajevent;
using autodiff::Node;
using autodiff::Tape;
using testsupport::finite_diff_check;

namespace {

Tensor random_tensor(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

// Weighted sum of an op's output makes the loss sensitive to every element.
double weighted_loss(Node* out, const Tensor& weights, Tape& tape,
                     Node** loss_node = nullptr) {
  Node* w = tape.input(weights);
  Node* prod = tape.mul(out, w);
  Node* loss = tape.mul_scalar(tape.mean_all(prod),
                               static_cast<double>(out->value.numel()));
  if (loss_node != nullptr) *loss_node = loss;
  return loss->value[0];
}

// Checks d(loss)/d(param) for a single differentiable leaf feeding `build`.
void check_op_grad(Tensor param_init,
                   const std::function<Node*(Tape&, Node*)>& build,
                   uint64_t seed) {
  Rng rng(seed);
  Tensor param = param_init;
  Tensor weights;

  auto eval = [&](std::vector<double>* grad_out) {
    Tape tape;
    Node* p = tape.param(param);
    Node* out = build(tape, p);
    if (weights.numel() == 0) weights = random_tensor(out->value.shape(), rng);
    Node* loss_node = nullptr;
    const double loss = weighted_loss(out, weights, tape, &loss_node);
    if (grad_out != nullptr) {
      tape.backward(loss_node);
      grad_out->assign(p->grad.data(), p->grad.data() + p->grad.numel());
    }
    return loss;
  };

  std::vector<double> analytic;
  eval(&analytic);
  std::vector<double> values(param.data(), param.data() + param.numel());
  auto loss_fn = [&]() {
    for (size_t i = 0; i < values.size(); ++i) param[i] = values[i];
    return eval(nullptr);
  };
  const auto result = finite_diff_check(values, analytic, loss_fn);
  CAPTURE(result.worst);
  CHECK(result.max_rel_err <= 1e-3);
}

}  // namespace

TEST_CASE("softmax of zeros is uniform") {
  Tape tape;
  Node* x = tape.input(Tensor::vector({0.0, 0.0, 0.0, 0.0}));
  Node* s = tape.softmax(x, 0);
  for (int i = 0; i < 4; ++i) CHECK(s->value[i] == doctest::Approx(0.25));
}

TEST_CASE("softmax rows sum to one and are strictly positive") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t r = 1 + rng.uniform_int(0, 7);
    const size_t c = 2 + rng.uniform_int(0, 10);
    Tape tape;
    Node* x = tape.input(random_tensor({r, c}, rng, 8.0));
    Node* s = tape.softmax(x, 1);
    for (size_t i = 0; i < r; ++i) {
      double sum = 0.0;
      for (size_t j = 0; j < c; ++j) {
        CHECK(s->value.at(i, j) > 0.0);
        sum += s->value.at(i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("conv on all-zero input with zero bias is all-zero") {
  Rng rng(5);
  Tape tape;
  Node* x = tape.input(Tensor({4, 16}));
  Node* k = tape.input(random_tensor({6, 4, 3}, rng));
  Node* b = tape.input(Tensor({6}));
  Node* y = tape.conv1d_causal_dilated(x, k, b, 2);
  for (size_t i = 0; i < y->value.numel(); ++i) CHECK(y->value[i] == 0.0);
}

TEST_CASE("causal conv receptive field: dilation 4, kernel 3 spans 9 frames") {
  Rng rng(7);
  const size_t t_len = 32;
  Tensor x = random_tensor({1, t_len}, rng);
  Tensor k = random_tensor({1, 1, 3}, rng);
  Tensor b = random_tensor({1}, rng);

  auto output_at = [&](const Tensor& input, size_t t) {
    Tape tape;
    Node* y = tape.conv1d_causal_dilated(tape.input(input), tape.input(k),
                                         tape.input(b), 4);
    return y->value[t];
  };

  const size_t t = 20;
  const double base = output_at(x, t);
  Tensor poke9 = x;
  poke9[t - 9] += 1.0;
  CHECK(output_at(poke9, t) == base);  // outside the receptive field
  Tensor poke8 = x;
  poke8[t - 8] += 1.0;
  CHECK(output_at(poke8, t) != base);  // (kernel-1)*dilation frames back
}

TEST_CASE("causal conv output is unchanged by future frames") {
  Rng rng(13);
  const size_t t_len = 24;
  Tensor x = random_tensor({3, t_len}, rng);
  Tensor k = random_tensor({2, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  auto run = [&](const Tensor& input) {
    Tape tape;
    Node* y = tape.conv1d_causal_dilated(tape.input(input), tape.input(k),
                                         tape.input(b), 2);
    return y->value;
  };
  const Tensor base = run(x);
  const size_t t = 10;
  Tensor poked = x;
  for (size_t c = 0; c < 3; ++c)
    for (size_t f = t + 1; f < t_len; ++f) poked.at(c, f) += rng.uniform(1.0, 2.0);
  const Tensor after = run(poked);
  for (size_t c = 0; c < 2; ++c)
    for (size_t f = 0; f <= t; ++f) CHECK(after.at(c, f) == base.at(c, f));
}

TEST_CASE("backward of sum(W*x) with fixed x equals x") {
  Rng rng(17);
  Tensor w0 = random_tensor({3, 5}, rng);
  Tensor x0 = random_tensor({3, 5}, rng);
  Tape tape;
  Node* w = tape.param(w0);
  Node* x = tape.input(x0);
  Node* prod = tape.mul(w, x);
  Node* loss = tape.mul_scalar(tape.mean_all(prod), 15.0);
  tape.backward(loss);
  for (size_t i = 0; i < 15; ++i)
    CHECK(w->grad[i] == doctest::Approx(x0[i]).epsilon(1e-12));
}

TEST_CASE("gradient of softmax plus cross-entropy is p minus one-hot") {
  Rng rng(19);
  Tensor logits0 = random_tensor({4}, rng, 2.0);
  Tape tape;
  Node* logits = tape.param(logits0);
  Node* probs = tape.softmax(logits, 0);
  Node* loss = tape.cross_entropy(probs, 2);
  tape.backward(loss);
  for (int i = 0; i < 4; ++i) {
    const double expect = probs->value[i] - (i == 2 ? 1.0 : 0.0);
    CHECK(logits->grad[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("cross_entropy values") {
  {
    Tape tape;
    Node* p = tape.input(Tensor::vector({0.0, 1.0, 0.0, 0.0}));
    CHECK(tape.cross_entropy(p, 1)->value[0] == doctest::Approx(0.0));
  }
  {
    Tape tape;
    Node* p = tape.input(Tensor::vector({0.25, 0.25, 0.25, 0.25}));
    CHECK(tape.cross_entropy(p, 3)->value[0] ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  {
    Tape tape;
    Node* p = tape.input(Tensor::vector({0.5, 0.5, 0.5, 0.5}));
    CHECK_THROWS_AS(tape.cross_entropy(p, 0), ContractError);
  }
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape tape;
  Node* x = tape.param(Tensor::vector({1.0, 2.0}));
  Node* y = tape.relu(x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("shape mismatches name both shapes") {
  Tape tape;
  Node* a = tape.input(Tensor({2, 3}));
  Node* b = tape.input(Tensor({4, 5}));
  try {
    tape.add(a, b);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
}

TEST_CASE("finite differences validate every op") {
  Rng rng(23);

  SUBCASE("add") {
    Tensor other = random_tensor({4, 6}, rng);
    check_op_grad(random_tensor({4, 6}, rng), [other](Tape& t, Node* p) {
      return t.add(p, t.input(other));
    }, 101);
  }
  SUBCASE("mul") {
    Tensor other = random_tensor({5, 3}, rng);
    check_op_grad(random_tensor({5, 3}, rng), [other](Tape& t, Node* p) {
      return t.mul(p, t.input(other));
    }, 102);
  }
  SUBCASE("matmul all transpose combinations") {
    for (int ta = 0; ta < 2; ++ta)
      for (int tb = 0; tb < 2; ++tb) {
        CAPTURE(ta);
        CAPTURE(tb);
        const size_t m = 4, k = 3, n = 5;
        Tensor a_shape = ta ? random_tensor({k, m}, rng)
                            : random_tensor({m, k}, rng);
        Tensor b_val =
            tb ? random_tensor({n, k}, rng) : random_tensor({k, n}, rng);
        check_op_grad(a_shape, [b_val, ta, tb](Tape& t, Node* p) {
          return t.matmul(p, t.input(b_val), ta != 0, tb != 0);
        }, 103 + ta * 2 + tb);
        // Also check the second operand.
        Tensor a_val = a_shape;
        check_op_grad(b_val, [a_val, ta, tb](Tape& t, Node* p) {
          return t.matmul(t.input(a_val), p, ta != 0, tb != 0);
        }, 113 + ta * 2 + tb);
      }
  }
  SUBCASE("linear, both matrix and vector input") {
    Tensor w = random_tensor({6, 4}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor x2 = random_tensor({5, 6}, rng);
    Tensor x1 = random_tensor({6}, rng);
    check_op_grad(x2, [w, b](Tape& t, Node* p) {
      return t.linear(p, t.input(w), t.input(b));
    }, 120);
    check_op_grad(w, [x1, b](Tape& t, Node* p) {
      return t.linear(t.input(x1), p, t.input(b));
    }, 121);
    check_op_grad(b, [x1, w](Tape& t, Node* p) {
      return t.linear(t.input(x1), t.input(w), p);
    }, 122);
  }
  SUBCASE("conv1d_causal_dilated") {
    for (size_t dilation : {1, 2, 4}) {
      CAPTURE(dilation);
      Tensor x = random_tensor({3, 14}, rng);
      Tensor k = random_tensor({2, 3, 3}, rng);
      Tensor b = random_tensor({2}, rng);
      check_op_grad(x, [k, b, dilation](Tape& t, Node* p) {
        return t.conv1d_causal_dilated(p, t.input(k), t.input(b), dilation);
      }, 130 + dilation);
      check_op_grad(k, [x, b, dilation](Tape& t, Node* p) {
        return t.conv1d_causal_dilated(t.input(x), p, t.input(b), dilation);
      }, 140 + dilation);
      check_op_grad(b, [x, k, dilation](Tape& t, Node* p) {
        return t.conv1d_causal_dilated(t.input(x), t.input(k), p, dilation);
      }, 150 + dilation);
    }
  }
  SUBCASE("gated_activation") {
    Tensor gate = random_tensor({4, 7}, rng);
    check_op_grad(random_tensor({4, 7}, rng), [gate](Tape& t, Node* p) {
      return t.gated_activation(p, t.input(gate));
    }, 160);
    Tensor filt = random_tensor({4, 7}, rng);
    check_op_grad(gate, [filt](Tape& t, Node* p) {
      return t.gated_activation(t.input(filt), p);
    }, 161);
  }
  SUBCASE("relu") {
    check_op_grad(random_tensor({6, 6}, rng), [](Tape& t, Node* p) {
      return t.relu(p);
    }, 170);
  }
  SUBCASE("layer_norm") {
    Tensor gamma = random_tensor({8}, rng);
    Tensor beta = random_tensor({8}, rng);
    Tensor x = random_tensor({5, 8}, rng);
    check_op_grad(x, [gamma, beta](Tape& t, Node* p) {
      return t.layer_norm(p, t.input(gamma), t.input(beta));
    }, 180);
    check_op_grad(gamma, [x, beta](Tape& t, Node* p) {
      return t.layer_norm(t.input(x), p, t.input(beta));
    }, 181);
    check_op_grad(beta, [x, gamma](Tape& t, Node* p) {
      return t.layer_norm(t.input(x), t.input(gamma), p);
    }, 182);
  }
  SUBCASE("softmax rows") {
    check_op_grad(random_tensor({4, 5}, rng, 2.0), [](Tape& t, Node* p) {
      return t.softmax(p, 1);
    }, 190);
  }
  SUBCASE("softmax columns") {
    check_op_grad(random_tensor({4, 5}, rng, 2.0), [](Tape& t, Node* p) {
      return t.softmax(p, 0);
    }, 191);
  }
  SUBCASE("mean over both axes") {
    check_op_grad(random_tensor({6, 3}, rng), [](Tape& t, Node* p) {
      return t.mean(p, 0);
    }, 200);
    check_op_grad(random_tensor({6, 3}, rng), [](Tape& t, Node* p) {
      return t.mean(p, 1);
    }, 201);
  }
  SUBCASE("concat") {
    Tensor other = random_tensor({4, 3}, rng);
    check_op_grad(random_tensor({4, 5}, rng), [other](Tape& t, Node* p) {
      return t.concat({p, t.input(other), p}, 1);
    }, 210);
  }
  SUBCASE("transpose") {
    check_op_grad(random_tensor({3, 7}, rng), [](Tape& t, Node* p) {
      return t.transpose(p);
    }, 220);
  }
  SUBCASE("random shapes up to 32") {
    for (uint64_t trial = 0; trial < 8; ++trial) {
      Rng srng(300 + trial);
      const size_t r = 1 + srng.uniform_int(0, 31);
      const size_t c = 1 + srng.uniform_int(0, 31);
      CAPTURE(r);
      CAPTURE(c);
      Tensor other = random_tensor({r, c}, srng);
      check_op_grad(random_tensor({r, c}, srng), [other](Tape& t, Node* p) {
        return t.relu(t.mul(t.add(p, t.input(other)), p));
      }, 400 + trial);
    }
  }
}

TEST_CASE("two-block dilated conv stack passes a finite-difference check") {
  Rng rng(31);
  const size_t d = 4, t_len = 12;
  Tensor x = random_tensor({d, t_len}, rng);
  std::vector<Tensor> params;
  for (int b = 0; b < 2; ++b) {
    params.push_back(random_tensor({d, d, 3}, rng));  // filter
    params.push_back(random_tensor({d}, rng));
    params.push_back(random_tensor({d, d, 3}, rng));  // gate
    params.push_back(random_tensor({d}, rng));
    params.push_back(random_tensor({d, d, 1}, rng));  // residual 1x1
    params.push_back(random_tensor({d}, rng));
  }
  Tensor weights = random_tensor({d, t_len}, rng);

  auto eval = [&](std::vector<std::vector<double>>* grads) {
    Tape tape;
    std::vector<Node*> p_nodes;
    for (const auto& p : params) p_nodes.push_back(tape.param(p));
    Node* h = tape.input(x);
    for (int b = 0; b < 2; ++b) {
      const size_t dilation = b == 0 ? 1 : 2;
      Node* f = tape.conv1d_causal_dilated(h, p_nodes[b * 6 + 0],
                                           p_nodes[b * 6 + 1], dilation);
      Node* g = tape.conv1d_causal_dilated(h, p_nodes[b * 6 + 2],
                                           p_nodes[b * 6 + 3], dilation);
      Node* z = tape.gated_activation(f, g);
      Node* r = tape.conv1d_causal_dilated(z, p_nodes[b * 6 + 4],
                                           p_nodes[b * 6 + 5], 1);
      h = tape.add(h, r);
    }
    Node* loss = tape.mul_scalar(tape.mean_all(tape.mul(h, tape.input(weights))),
                                 static_cast<double>(d * t_len));
    if (grads != nullptr) {
      tape.backward(loss);
      grads->clear();
      for (Node* pn : p_nodes)
        grads->emplace_back(pn->grad.data(), pn->grad.data() + pn->grad.numel());
    }
    return loss->value[0];
  };

  std::vector<std::vector<double>> analytic;
  eval(&analytic);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    std::vector<double> values(params[pi].data(),
                               params[pi].data() + params[pi].numel());
    auto loss_fn = [&]() {
      for (size_t i = 0; i < values.size(); ++i) params[pi][i] = values[i];
      return eval(nullptr);
    };
    const auto result = finite_diff_check(values, analytic[pi], loss_fn);
    CAPTURE(pi);
    CAPTURE(result.worst);
    CHECK(result.max_rel_err <= 1e-3);
  }
}
