#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "glee/common/error.hpp"
#include "glee/nn/layers.hpp"
#include "glee/nn/ops.hpp"
#include "glee/nn/optim.hpp"
#include "glee/nn/serialize.hpp"
#include "support.hpp"

using namespace glee;
using namespace glee::nn;
using Catch::Approx;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, float bound = 1.0f) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

using Graph = std::function<Var(Tape&, std::vector<Var>&)>;

// Scalarizes the graph output with fixed random weights, then compares
// tape gradients against central differences of the float forward pass.
void check_gradients(const Graph& graph, std::vector<Tensor> inputs, double h = 1e-2,
                     double tol = 2e-3, std::uint64_t seed = 17) {
  std::vector<Parameter> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.emplace_back("in" + std::to_string(i), inputs[i]);

  Tensor weights;
  auto forward = [&](bool with_grad) {
    Tape tape;
    std::vector<Var> vars;
    for (Parameter& p : params) vars.push_back(tape.parameter(p));
    const Var out = graph(tape, vars);
    if (weights.empty()) {
      Rng rng(seed);
      weights = random_tensor(out.shape(), rng);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < out.value().size(); ++i) s += static_cast<double>(weights[i]) * out.value()[i];
    if (with_grad) tape.backward(out, weights);
    return s;
  };

  for (Parameter& p : params) p.zero_grad();
  forward(true);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float orig = p.value[i];
      p.value[i] = orig + static_cast<float>(h);
      const double up = forward(false);
      p.value[i] = orig - static_cast<float>(h);
      const double down = forward(false);
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      INFO("input " << pi << " element " << i);
      REQUIRE(p.grad[i] == Approx(numeric).margin(tol).epsilon(tol));
    }
  }
}

}  // namespace

TEST_CASE("tensor construction and reshape validate sizes", "[tensor]") {
  const Tensor t({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.dim(1) == 3);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ValidationError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), ValidationError);
}

TEST_CASE("elementwise op gradients", "[ops][grad]") {
  Rng rng(1);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  check_gradients([](Tape&, std::vector<Var>& v) { return add(v[0], v[1]); }, {a, b});
  check_gradients([](Tape&, std::vector<Var>& v) { return sub(v[0], v[1]); }, {a, b});
  check_gradients([](Tape&, std::vector<Var>& v) { return scale(v[0], -2.5f); }, {a});
  check_gradients([](Tape&, std::vector<Var>& v) { return sigmoid(v[0]); }, {a});
  // Keep relu inputs away from the kink.
  Tensor r = a;
  for (float& x : r.values()) x = x >= 0 ? x + 0.1f : x - 0.1f;
  check_gradients([](Tape&, std::vector<Var>& v) { return relu(v[0]); }, {r});
}

TEST_CASE("matmul family gradients", "[ops][grad]") {
  Rng rng(2);
  check_gradients([](Tape&, std::vector<Var>& v) { return matmul(v[0], v[1]); },
                  {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)});
  check_gradients([](Tape&, std::vector<Var>& v) { return matmul_nt(v[0], v[1]); },
                  {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng)});
  check_gradients([](Tape&, std::vector<Var>& v) { return matmul_tn(v[0], v[1]); },
                  {random_tensor({4, 3}, rng), random_tensor({4, 5}, rng)});
  check_gradients([](Tape&, std::vector<Var>& v) { return linear(v[0], v[1], v[2]); },
                  {random_tensor({2, 4}, rng), random_tensor({3, 4}, rng), random_tensor({3}, rng)});
  check_gradients([](Tape&, std::vector<Var>& v) { return linear(v[0], v[1]); },
                  {random_tensor({4}, rng), random_tensor({3, 4}, rng)});
}

TEST_CASE("bias broadcast gradients", "[ops][grad]") {
  Rng rng(3);
  check_gradients([](Tape&, std::vector<Var>& v) { return add_row_bias(v[0], v[1]); },
                  {random_tensor({3, 4}, rng), random_tensor({4}, rng)});
  check_gradients([](Tape&, std::vector<Var>& v) { return add_channel_bias(v[0], v[1]); },
                  {random_tensor({3, 2, 2}, rng), random_tensor({3}, rng)});
}

TEST_CASE("conv2d gradients with stride and padding", "[ops][grad]") {
  Rng rng(4);
  for (std::size_t stride : {1u, 2u}) {
    check_gradients(
        [stride](Tape&, std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], stride, 1); },
        {random_tensor({2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)});
  }
}

TEST_CASE("conv2d matches a direct convolution", "[ops]") {
  Rng rng(5);
  const Tensor x = random_tensor({2, 6, 7}, rng), w = random_tensor({3, 2, 3, 3}, rng),
               b = random_tensor({3}, rng);
  Tape tape;
  const Tensor y = conv2d(tape.constant(x), tape.constant(w), tape.constant(b), 2, 1).value();
  REQUIRE(y.shape() == Shape{3, 3, 4});
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        double s = b[o];
        for (std::size_t ch = 0; ch < 2; ++ch) {
          for (std::size_t kr = 0; kr < 3; ++kr) {
            for (std::size_t kc = 0; kc < 3; ++kc) {
              const long ir = static_cast<long>(2 * r + kr) - 1, ic = static_cast<long>(2 * c + kc) - 1;
              if (ir < 0 || ic < 0 || ir >= 6 || ic >= 7) continue;
              s += static_cast<double>(x[(ch * 6 + ir) * 7 + ic]) * w[((o * 2 + ch) * 3 + kr) * 3 + kc];
            }
          }
        }
        CHECK(y[(o * 3 + r) * 4 + c] == Approx(s).margin(1e-5));
      }
    }
  }
}

TEST_CASE("reduction, normalization and softmax gradients", "[ops][grad]") {
  Rng rng(6);
  check_gradients([](Tape&, std::vector<Var>& v) { return mean_trailing(v[0]); },
                  {random_tensor({3, 2, 4}, rng)});
  check_gradients([](Tape&, std::vector<Var>& v) { return softmax_rows(v[0]); },
                  {random_tensor({3, 5}, rng, 2.0f)});
  check_gradients([](Tape&, std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2]); },
                  {random_tensor({3, 6}, rng, 2.0f), random_tensor({6}, rng), random_tensor({6}, rng)},
                  1e-2, 5e-3);
  check_gradients([](Tape&, std::vector<Var>& v) { return sum(v[0]); }, {random_tensor({4, 2}, rng)});
}

TEST_CASE("shape op gradients", "[ops][grad]") {
  Rng rng(7);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 2}, rng), c = random_tensor({4}, rng);
  check_gradients([](Tape&, std::vector<Var>& v) { return transpose(v[0]); }, {a});
  check_gradients([](Tape&, std::vector<Var>& v) { return reshape(v[0], {2, 6}); }, {a});
  check_gradients([](Tape&, std::vector<Var>& v) { return concat({v[0], v[1]}); }, {a, b});
  check_gradients([](Tape&, std::vector<Var>& v) { return stack_rows({v[0], v[1], v[0]}); },
                  {c, random_tensor({4}, rng)});
  check_gradients([](Tape&, std::vector<Var>& v) { return row(v[0], 1); }, {a});
  check_gradients([](Tape&, std::vector<Var>& v) { return slice_cols(v[0], 1, 3); }, {a});
  check_gradients([](Tape&, std::vector<Var>& v) { return concat_cols({v[0], v[1]}); }, {a, b});
}

TEST_CASE("softmax rows sum to one and layer norm standardizes", "[ops]") {
  Rng rng(8);
  Tape tape;
  const Tensor s = softmax_rows(tape.constant(random_tensor({4, 9}, rng, 20.0f))).value();
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 9; ++c) total += s.at(r, c);
    CHECK(total == Approx(1.0).margin(1e-6));
  }
  const Tensor n = layer_norm(tape.constant(random_tensor({2, 16}, rng, 5.0f)),
                              tape.constant(Tensor({16}, 1.0f)), tape.constant(Tensor({16}))).value();
  for (std::size_t r = 0; r < 2; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 16; ++c) m += n.at(r, c);
    m /= 16;
    for (std::size_t c = 0; c < 16; ++c) v += (n.at(r, c) - m) * (n.at(r, c) - m);
    CHECK(m == Approx(0.0).margin(1e-5));
    CHECK(v / 16 == Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("ops reject mismatched shapes", "[ops]") {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3})), b = tape.constant(Tensor({3, 2}));
  CHECK_THROWS_AS(add(a, b), ValidationError);
  CHECK_THROWS_AS(matmul(a, a), ValidationError);
  CHECK_THROWS_AS(slice_cols(a, 2, 5), ValidationError);
  CHECK_THROWS_AS(row(a, 2), ValidationError);
}

TEST_CASE("gradients accumulate over reused inputs and skip frozen parameters", "[tape]") {
  Parameter p("p", Tensor({2}, std::vector<float>{1.0f, 2.0f}));
  Parameter q("q", Tensor({2}, std::vector<float>{3.0f, 4.0f}));
  q.frozen = true;
  Tape tape;
  const Var x = tape.parameter(p), y = tape.parameter(q);
  const Var out = sum(add(add(x, x), y));
  CHECK_FALSE(y.requires_grad());
  tape.backward(out);
  CHECK(p.grad[0] == 2.0f);
  CHECK(p.grad[1] == 2.0f);
  CHECK(q.grad[0] == 0.0f);
}

TEST_CASE("heavy-ball SGD follows its update rule", "[optim]") {
  Parameter w("w", Tensor({2}, std::vector<float>{1.0f, -1.0f}));
  Parameter frozen("f", Tensor({1}, 5.0f));
  frozen.frozen = true;
  Sgd opt({&w, &frozen}, {0.1, 0.9});
  w.grad = Tensor({2}, std::vector<float>{1.0f, 2.0f});
  frozen.grad = Tensor({1}, 1.0f);
  opt.step();
  // v = g, w -= 0.1 v
  CHECK(w.value[0] == Approx(0.9f));
  CHECK(w.value[1] == Approx(-1.2f));
  opt.step(0.5f);
  // v = 0.9 g + 0.5 g = 1.4 g
  CHECK(w.value[0] == Approx(0.9f - 0.14f));
  CHECK(w.value[1] == Approx(-1.2f - 0.28f));
  CHECK(frozen.value[0] == 5.0f);
  opt.zero_grad();
  CHECK(w.grad[0] == 0.0f);
}

TEST_CASE("layers produce documented shapes", "[layers]") {
  Rng rng(9);
  Linear lin("lin", 5, 3, true, rng);
  Conv2d conv("conv", 3, 4, 3, 2, 1, rng);
  LayerNorm ln("ln", 5);
  Tape tape;
  CHECK(lin.forward(tape, tape.constant(Tensor({7, 5}))).shape() == Shape{7, 3});
  CHECK(conv.forward(tape, tape.constant(Tensor({3, 9, 8}))).shape() == Shape{4, 5, 4});
  CHECK(ln.forward(tape, tape.constant(Tensor({2, 5}))).shape() == Shape{2, 5});
  ParameterList ps;
  lin.parameters(ps);
  conv.parameters(ps);
  ln.parameters(ps);
  CHECK(ps.size() == 6);
}

TEST_CASE("weights round-trip bitwise and reject corruption", "[serialize]") {
  Rng rng(10);
  std::vector<NamedTensor> ts{{"a", random_tensor({3, 4}, rng)}, {"b.c", random_tensor({7}, rng)}};
  const std::vector<unsigned char> blob = encode_weights(ts);
  const std::vector<NamedTensor> back = decode_weights(blob);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "a");
  CHECK(back[0].tensor == ts[0].tensor);
  CHECK(back[1].tensor == ts[1].tensor);

  std::vector<unsigned char> truncated(blob.begin(), blob.end() - 9);
  CHECK_THROWS_AS(decode_weights(truncated), CorruptCheckpoint);
  std::vector<unsigned char> flipped = blob;
  flipped[30] ^= 0x40;
  CHECK_THROWS_AS(decode_weights(flipped), CorruptCheckpoint);

  Parameter a("a", Tensor({3, 4})), missing("zzz", Tensor({1}));
  assign({&a}, back);
  CHECK(a.value == ts[0].tensor);
  CHECK_THROWS_AS(assign({&missing}, back), CorruptCheckpoint);
  Parameter wrong("b.c", Tensor({8}));
  CHECK_THROWS_AS(assign({&wrong}, back), CorruptCheckpoint);

  test::TempDir dir("nn");
  save_weights(dir.str("w.bin"), ts);
  CHECK(load_weights(dir.str("w.bin"))[1].tensor == ts[1].tensor);
}
