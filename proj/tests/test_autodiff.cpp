#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#include "zrnmt/params.hpp"
#include "zrnmt/rng.hpp"
#include "zrnmt/tape.hpp"
#include "test_util.hpp"

using namespace zrnmt;
using testutil::rel_err;

namespace {

Tensor random_tensor(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

// Contract a matrix-valued node to a scalar against a fixed random weight
// leaf; keeps every entry of the op's output visible to the gradient check.
Var contracted(Tape& t, Var m, Rng& rng) {
  const Tensor& v = t.value(m);
  return t.sum_all(t.mul(m, t.leaf(random_tensor(v.rows, v.cols, rng))));
}

}  // namespace

TEST_CASE("square function value and derivative") {
  Tape t;
  Var x = t.leaf(Tensor::scalar(3.0));
  Var y = t.mul(x, x);
  CHECK(t.value(y).item() == 9.0);
  t.backward(y);
  CHECK(t.grad(x).item() == 6.0);
}

TEST_CASE("softmax of a constant row is uniform") {
  Tape t;
  Var x = t.leaf(Tensor::row({0.0, 0.0, 0.0}));
  Var s = t.softmax_rows(x);
  for (int j = 0; j < 3; ++j) CHECK(t.value(s)(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax cross-entropy gradient has the closed form softmax(l) - onehot") {
  Rng rng(31);
  for (int target = 0; target < 4; ++target) {
    Tape t;
    Var logits = t.leaf(random_tensor(1, 4, rng, -2.0, 2.0));
    Var nll = t.scale(t.pick(t.log_softmax_rows(logits), 0, target), -1.0);
    t.backward(nll);
    // d nll / d logits = softmax(logits) - onehot(target)
    std::vector<double> sm(t.value(logits).v.begin(), t.value(logits).v.end());
    double mx = *std::max_element(sm.begin(), sm.end()), z = 0.0;
    for (double& v : sm) z += (v = std::exp(v - mx));
    for (double& v : sm) v /= z;
    for (int j = 0; j < 4; ++j) {
      const double expect = sm[j] - (j == target ? 1.0 : 0.0);
      CHECK(rel_err(t.grad(logits)(0, j), expect) < 1e-12);
    }
  }
}

TEST_CASE("backward rejects a non-scalar root") {
  Tape t;
  Var x = t.leaf(Tensor(2, 3, 1.0));
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("shape mismatch is reported with both shapes and the op tag") {
  Tape t;
  Var a = t.leaf(Tensor(2, 3, 1.0));
  Var b = t.leaf(Tensor(3, 2, 1.0));
  try {
    t.add(a, b);
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
    CHECK(msg.find("(3x2)") != std::string::npos);
    CHECK(msg.find("add") != std::string::npos);
  }
}

TEST_CASE("two-layer tanh network matches a scalar-by-scalar recomputation") {
  Rng rng(77);
  const int in = 3, hid = 4;
  Tensor x = random_tensor(1, in, rng), w1 = random_tensor(in, hid, rng),
         b1 = random_tensor(1, hid, rng), w2 = random_tensor(hid, 1, rng),
         b2 = random_tensor(1, 1, rng);

  Tape t;
  Var vx = t.leaf(x), vw1 = t.leaf(w1), vb1 = t.leaf(b1), vw2 = t.leaf(w2), vb2 = t.leaf(b2);
  Var h = t.tanh(t.add(t.matmul(vx, vw1), vb1));
  Var out = t.tanh(t.add(t.matmul(h, vw2), vb2));

  // Independent route: plain double arithmetic, no Tensor machinery.
  double expect = 0.0;
  {
    double hs[4];
    for (int j = 0; j < hid; ++j) {
      double acc = b1.v[j];
      for (int i = 0; i < in; ++i) acc += x.v[i] * w1(i, j);
      hs[j] = std::tanh(acc);
    }
    double acc = b2.v[0];
    for (int j = 0; j < hid; ++j) acc += hs[j] * w2(j, 0);
    expect = std::tanh(acc);
  }
  CHECK(rel_err(t.value(out).item(), expect) < 1e-14);
}

TEST_CASE("every op passes central finite differences") {
  // One compound graph per op; 1e-4 relative tolerance at h=1e-4.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    std::vector<std::pair<const char*, double>> results;

    auto check = [&](const char* name, Tape& t, Var root, const std::vector<Var>& leaves) {
      results.emplace_back(name, testutil::fd_max_rel(t, root, leaves));
    };

    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 4, rng)), b = t.leaf(random_tensor(3, 4, rng));
      check("add", t, contracted(t, t.add(a, b), rng), {a, b});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 4, rng)), b = t.leaf(random_tensor(3, 4, rng));
      check("sub", t, contracted(t, t.sub(a, b), rng), {a, b});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 4, rng)), b = t.leaf(random_tensor(3, 4, rng));
      check("mul", t, contracted(t, t.mul(a, b), rng), {a, b});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 5, rng)), b = t.leaf(random_tensor(5, 3, rng));
      check("matmul", t, contracted(t, t.matmul(a, b), rng), {a, b});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(4, 3, rng)), r = t.leaf(random_tensor(1, 3, rng));
      check("add_row", t, contracted(t, t.add_row(a, r), rng), {a, r});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 3, rng));
      check("scale", t, contracted(t, t.scale(a, -1.7), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 3, rng));
      check("affine", t, contracted(t, t.affine(a, 0.6, -0.3), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 4, rng, -2.0, 2.0));
      check("tanh", t, contracted(t, t.tanh(a), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 4, rng, -2.0, 2.0));
      check("sigmoid", t, contracted(t, t.sigmoid(a), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 3, rng));
      check("exp", t, contracted(t, t.exp(a), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 3, rng, 0.5, 2.0));
      check("log", t, contracted(t, t.log(a), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 5, rng, -2.0, 2.0));
      check("softmax_rows", t, contracted(t, t.softmax_rows(a), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 5, rng, -2.0, 2.0));
      check("log_softmax_rows", t, contracted(t, t.log_softmax_rows(a), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 4, rng));
      check("pick", t, t.pick(a, 2, 1), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(5, 3, rng));
      check("pick_row", t, contracted(t, t.pick_row(a, 3), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(2, 3, rng)), b = t.leaf(random_tensor(2, 4, rng));
      check("concat_cols", t, contracted(t, t.concat_cols(a, b), rng), {a, b});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(1, 4, rng)), b = t.leaf(random_tensor(1, 4, rng)),
          c = t.leaf(random_tensor(1, 4, rng));
      check("concat_rows", t, contracted(t, t.concat_rows({a, b, c}), rng), {a, b, c});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(4, 3, rng));
      check("mean_rows", t, contracted(t, t.mean_rows(a), rng), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 4, rng));
      check("sum_all", t, t.sum_all(a), {a});
    }
    {
      Tape t;
      Var a = t.leaf(random_tensor(3, 4, rng));
      check("transpose", t, contracted(t, t.transpose(a), rng), {a});
    }

    for (const auto& [name, err] : results) {
      INFO("op ", name, " seed ", seed, " rel err ", err);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("gradient of a sum of scalars is the sum of the gradients") {
  Rng rng(5);
  const Tensor x0 = random_tensor(2, 3, rng), w0 = random_tensor(3, 2, rng);

  auto grads_of = [&](int which) {
    Tape t;
    Var x = t.leaf(x0), w = t.leaf(w0);
    Var f = t.sum_all(t.tanh(t.matmul(x, w)));
    Var g = t.pick(t.sigmoid(t.matmul(x, w)), 1, 0);
    Var root = which == 0 ? f : which == 1 ? g : t.add(f, g);
    t.backward(root);
    return std::pair<Tensor, Tensor>{t.grad(x), t.grad(w)};
  };

  auto [fx, fw] = grads_of(0);
  auto [gx, gw] = grads_of(1);
  auto [sx, sw] = grads_of(2);
  for (std::size_t i = 0; i < sx.v.size(); ++i) CHECK(rel_err(sx.v[i], fx.v[i] + gx.v[i]) < 1e-12);
  for (std::size_t i = 0; i < sw.v.size(); ++i) CHECK(rel_err(sw.v[i], fw.v[i] + gw.v[i]) < 1e-12);
}

TEST_CASE("re-evaluating an unchanged graph is bitwise identical") {
  Rng rng(9);
  Tape t;
  Var x = t.leaf(random_tensor(3, 4, rng));
  Var w = t.leaf(random_tensor(4, 4, rng));
  Var root = t.sum_all(t.log_softmax_rows(t.tanh(t.matmul(x, w))));
  const double v1 = t.value(root).item();
  t.forward();
  const double v2 = t.value(root).item();
  CHECK(std::memcmp(&v1, &v2, sizeof v1) == 0);
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    Tape t;
    Var a = t.leaf(random_tensor(4, 6, rng, -8.0, 8.0));
    Var s = t.softmax_rows(a);
    for (int i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 6; ++j) {
        CHECK(t.value(s)(i, j) >= 0.0);
        sum += t.value(s)(i, j);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("gradients accumulate additively over shared subexpressions") {
  Tape t;
  Var x = t.leaf(Tensor::scalar(2.0));
  Var sq = t.mul(x, x);
  Var root = t.add(sq, t.mul(sq, x));  // x^2 + x^3
  t.backward(root);
  CHECK(rel_err(t.grad(x).item(), 2.0 * 2.0 + 3.0 * 4.0) < 1e-14);
}

TEST_CASE("parameter checkpoint round-trip is value-exact") {
  Rng rng(21);
  ParamStore s(123456789u);
  s.create("w", random_tensor(3, 5, rng, -1e3, 1e3));
  s.create("b", random_tensor(1, 5, rng, -1e-7, 1e-7));
  s.create("odd", Tensor::scalar(0x1.fffffffffffffp-2));

  const std::string path = "/tmp/zrnmt_test_store.ckpt";
  s.save(path);
  const ParamStore r = ParamStore::load(path);
  CHECK(r.rng_seed() == s.rng_seed());
  CHECK(r.bitwise_equal(s));
  CHECK(r == s);
  std::remove(path.c_str());
}
