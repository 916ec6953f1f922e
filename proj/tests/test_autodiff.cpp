#include <cmath>

#include "doctest.h"
#include "gcrec/graph.hpp"
#include "test_util.hpp"

using namespace gcrec;
using gcrec::test::fd_max_rel_err;

namespace {

ParamStore random_store(std::initializer_list<std::pair<const char*, Shape>> specs,
                        std::uint64_t seed = 1) {
  ParamStore ps;
  RngStream rng(seed);
  for (auto& [name, shape] : specs) ps.add(name, rng.gaussian_tensor(shape));
  return ps;
}

}  // namespace

TEST_CASE("leaky_relu forward matches definition") {
  Graph g;
  NodeId x = g.constant(Tensor::from({2}, {-1.0, 2.0}));
  NodeId y = g.leaky_relu(x, 0.1);
  CHECK(g.value(y).at(0) == doctest::Approx(-0.1));
  CHECK(g.value(y).at(1) == doctest::Approx(2.0));
}

TEST_CASE("group_norm of a constant tensor is all zeros") {
  Graph g;
  NodeId x = g.constant(Tensor::full({4, 6}, 3.25));
  NodeId y = g.group_norm(x, 1, 1e-5);
  for (std::int64_t i = 0; i < g.value(y).numel(); ++i) CHECK(g.value(y).at(i) == 0.0);
}

TEST_CASE("group_norm per-group statistics") {
  RngStream rng(9);
  Graph g;
  NodeId x = g.constant(rng.gaussian_tensor({50, 12}));
  const double eps = 1e-10;
  NodeId y = g.group_norm(x, 3, eps);
  const Tensor& out = g.value(y);
  const std::int64_t cg = 4;
  for (int grp = 0; grp < 3; ++grp) {
    double s = 0, s2 = 0;
    for (std::int64_t r = 0; r < 50; ++r)
      for (std::int64_t c = 0; c < cg; ++c) {
        double v = out.at(r * 12 + grp * cg + c);
        s += v;
        s2 += v * v;
      }
    const double n = 50.0 * 4.0;
    const double mean = s / n, var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("sinusoidal embedding zero phase") {
  Graph g;
  NodeId e = g.sinusoidal_embed(4, 0.0);
  const Tensor& v = g.value(e);
  CHECK(v.at(0) == 0.0);
  CHECK(v.at(1) == 0.0);
  CHECK(v.at(2) == 1.0);
  CHECK(v.at(3) == 1.0);
}

TEST_CASE("softmax rows sum to one") {
  RngStream rng(4);
  Graph g;
  NodeId x = g.constant(rng.gaussian_tensor({5, 7}));
  NodeId y = g.softmax(x, 1);
  const Tensor& out = g.value(y);
  for (int r = 0; r < 5; ++r) {
    double s = 0;
    for (int c = 0; c < 7; ++c) s += out.at(r * 7 + c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward of sum(W x) has outer-product structure") {
  ParamStore ps;
  ps.add("W", Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}));
  const std::vector<double> xv = {0.5, -1.5};
  ps.zero_grad();
  Graph g;
  NodeId W = g.param(ps, "W");
  NodeId x = g.constant(Tensor::from({2, 1}, std::vector<double>(xv)));
  NodeId loss = g.reduce_sum(g.matmul(W, x));
  g.backward(loss);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(ps.grad("W").at(i * 2 + j) == doctest::Approx(xv[j]));
}

TEST_CASE("disconnected parameter keeps exactly zero gradient") {
  ParamStore ps = random_store({{"used", {2, 2}}, {"unused", {3}}});
  ps.zero_grad();
  Graph g;
  NodeId w = g.param(ps, "used");
  (void)g.param(ps, "unused");
  NodeId loss = g.reduce_sum(g.mul(w, w));
  g.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(ps.grad("unused").at(i) == 0.0);
}

TEST_CASE("backward twice without reset is an error") {
  ParamStore ps = random_store({{"w", {2}}});
  Graph g;
  NodeId loss = g.reduce_sum(g.param(ps, "w"));
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), Error);
  g.reset();
}

TEST_CASE("backward rejects non-scalar loss") {
  ParamStore ps = random_store({{"w", {2}}});
  Graph g;
  NodeId w = g.param(ps, "w");
  CHECK_THROWS_AS(g.backward(w), ShapeError);
}

TEST_CASE("gradients are additive across summed losses") {
  ParamStore ps = random_store({{"w", {4}}}, 3);
  auto loss1 = [](Graph& g, ParamStore& s) {
    NodeId w = g.param(s, "w");
    return g.reduce_sum(g.mul(w, w));
  };
  auto loss2 = [](Graph& g, ParamStore& s) {
    NodeId w = g.param(s, "w");
    return g.reduce_mean(g.sigmoid(w));
  };
  ps.zero_grad();
  {
    Graph g;
    g.backward(loss1(g, ps));
  }
  Tensor g1 = ps.grad("w").clone();
  ps.zero_grad();
  {
    Graph g;
    g.backward(loss2(g, ps));
  }
  Tensor g2 = ps.grad("w").clone();
  ps.zero_grad();
  {
    Graph g;
    g.backward(g.add(loss1(g, ps), loss2(g, ps)));
  }
  for (int i = 0; i < 4; ++i)
    CHECK(ps.grad("w").at(i) == doctest::Approx(g1.at(i) + g2.at(i)).epsilon(1e-12));
}

TEST_CASE("finite differences validate every op kind") {
  RngStream data_rng(17);
  const Tensor c34 = data_rng.gaussian_tensor({3, 4});
  const Tensor c43 = data_rng.gaussian_tensor({4, 3});
  const Tensor c4 = data_rng.gaussian_tensor({4});

  struct Case {
    const char* name;
    std::function<NodeId(Graph&, ParamStore&)> build;
  };
  // Each case contracts the op output against a fixed random tensor so
  // gradients are non-uniform.
  std::vector<Case> cases;
  auto contract = [](Graph& g, NodeId y, const Tensor& c) {
    return g.reduce_sum(g.mul(y, g.constant(c.clone())));
  };
  cases.push_back({"add", [&](Graph& g, ParamStore& s) {
                     NodeId a = g.param(s, "a34"), b = g.param(s, "b34");
                     return contract(g, g.add(a, b), c34);
                   }});
  cases.push_back({"sub", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.sub(g.param(s, "a34"), g.param(s, "b34")), c34);
                   }});
  cases.push_back({"mul", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.mul(g.param(s, "a34"), g.param(s, "b34")), c34);
                   }});
  cases.push_back({"scale_shift", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.shift(g.scale(g.param(s, "a34"), -1.7), 0.3), c34);
                   }});
  cases.push_back({"matmul_nn", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.matmul(g.param(s, "a34"), g.param(s, "w43")), Tensor::full({3, 3}, 0.5));
                   }});
  cases.push_back({"matmul_nt", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.matmul(g.param(s, "a34"), g.param(s, "b34"), false, true),
                                     Tensor::full({3, 3}, 0.25));
                   }});
  cases.push_back({"matmul_tn", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.matmul(g.param(s, "a34"), g.param(s, "c35"), true, false),
                                     Tensor::full({4, 5}, 0.25));
                   }});
  cases.push_back({"linear", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.linear(g.param(s, "a34"), g.param(s, "w54"), g.param(s, "b5")),
                                     Tensor::full({3, 5}, 0.3));
                   }});
  cases.push_back({"concat", [&](Graph& g, ParamStore& s) {
                     NodeId y = g.concat({g.param(s, "a34"), g.param(s, "b34")}, 1);
                     return contract(g, y, Tensor::full({3, 8}, 0.7));
                   }});
  cases.push_back({"slice", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.slice(g.param(s, "a34"), 1, 1, 3), Tensor::full({3, 2}, 1.1));
                   }});
  cases.push_back({"reshape", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.reshape(g.param(s, "a34"), {4, 3}), c43);
                   }});
  cases.push_back({"reduce_sum", [&](Graph& g, ParamStore& s) {
                     return g.reduce_sum(g.param(s, "a34"));
                   }});
  cases.push_back({"reduce_mean", [&](Graph& g, ParamStore& s) {
                     return g.reduce_mean(g.mul(g.param(s, "a34"), g.param(s, "a34")));
                   }});
  cases.push_back({"leaky_relu", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.leaky_relu(g.param(s, "a34"), 0.1), c34);
                   }});
  cases.push_back({"sigmoid", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.sigmoid(g.param(s, "a34")), c34);
                   }});
  cases.push_back({"exp", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.exp(g.scale(g.param(s, "a34"), 0.5)), c34);
                   }});
  cases.push_back({"group_norm", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.group_norm(g.param(s, "a34"), 2, 1e-5), c34);
                   }});
  cases.push_back({"softmax", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.softmax(g.param(s, "a34"), 1), c34);
                   }});
  cases.push_back({"gather", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.gather(g.param(s, "a34"), {2, 0, 2, 1}),
                                     Tensor::full({4, 4}, 0.6));
                   }});
  cases.push_back({"interp_rows", [&](Graph& g, ParamStore& s) {
                     return contract(g,
                                     g.interp_rows(g.param(s, "a34"), {0, 1, 2, 1, 0, 2},
                                                   {0.2, 0.5, 0.3, 0.9, 0.05, 0.05}, 3),
                                     Tensor::full({2, 4}, 0.8));
                   }});
  cases.push_back({"max_pool", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.max_pool(g.param(s, "a34"), 0), c4);
                   }});
  cases.push_back({"broadcast_rows", [&](Graph& g, ParamStore& s) {
                     return contract(g, g.broadcast_rows(g.param(s, "b5"), 3),
                                     Tensor::full({3, 5}, 0.4));
                   }});
  cases.push_back({"mse", [&](Graph& g, ParamStore& s) {
                     return g.mse(g.param(s, "a34"), g.param(s, "b34"));
                   }});

  for (auto& c : cases) {
    CAPTURE(c.name);
    ParamStore ps;
    RngStream rng(23);
    ps.add("a34", rng.gaussian_tensor({3, 4}));
    ps.add("b34", rng.gaussian_tensor({3, 4}));
    ps.add("w43", rng.gaussian_tensor({4, 3}));
    ps.add("c35", rng.gaussian_tensor({3, 5}));
    ps.add("w54", rng.gaussian_tensor({5, 4}));
    ps.add("b5", rng.gaussian_tensor({5}));
    CHECK(fd_max_rel_err(ps, c.build) < 1e-4);
  }
}

TEST_CASE("finite differences validate a random three-layer net") {
  ParamStore ps;
  RngStream rng(31);
  ps.add("w1", rng.gaussian_tensor({8, 5}));
  ps.add("b1", rng.gaussian_tensor({8}));
  ps.add("w2", rng.gaussian_tensor({6, 8}));
  ps.add("b2", rng.gaussian_tensor({6}));
  ps.add("w3", rng.gaussian_tensor({1, 6}));
  ps.add("b3", rng.gaussian_tensor({1}));
  const Tensor input = rng.gaussian_tensor({4, 5});
  auto build = [&](Graph& g, ParamStore& s) {
    NodeId h = g.leaky_relu(g.linear(g.constant(input.clone()), g.param(s, "w1"), g.param(s, "b1")), 0.1);
    h = g.leaky_relu(g.linear(h, g.param(s, "w2"), g.param(s, "b2")), 0.1);
    h = g.linear(h, g.param(s, "w3"), g.param(s, "b3"));
    return g.reduce_mean(g.mul(h, h));
  };
  CHECK(fd_max_rel_err(ps, build) < 1e-4);
}

TEST_CASE("dropout scales kept activations and is identity in eval") {
  Graph g;
  NodeId x = g.constant(Tensor::full({1000}, 1.0));
  RngStream rng(2);
  NodeId y = g.dropout(x, 0.1, rng, true);
  double mean = 0;
  int zeros = 0;
  for (int i = 0; i < 1000; ++i) {
    double v = g.value(y).at(i);
    mean += v;
    if (v == 0.0) ++zeros;
    else CHECK(v == doctest::Approx(1.0 / 0.9));
  }
  CHECK(zeros > 50);
  CHECK(zeros < 170);
  CHECK(mean / 1000.0 == doctest::Approx(1.0).epsilon(0.05));
  NodeId z = g.dropout(x, 0.1, rng, false);
  CHECK(z == x);
}

TEST_CASE("ops reject shape and dtype mismatches") {
  Graph g;
  NodeId a = g.constant(Tensor::zeros({2, 3}));
  NodeId b = g.constant(Tensor::zeros({3, 2}));
  NodeId f = g.constant(Tensor::zeros({2, 3}, DType::F32));
  CHECK_THROWS_AS(g.add(a, b), ShapeError);
  CHECK_THROWS_AS(g.add(a, f), ShapeError);
  CHECK_THROWS_AS(g.matmul(a, a), ShapeError);
  CHECK_THROWS_AS(g.group_norm(a, 2, 1e-5), ShapeError);
  CHECK_THROWS_AS(g.slice(a, 1, 2, 2), ShapeError);
}

TEST_CASE("non-finite op output is surfaced as an error") {
  Graph g;
  NodeId x = g.constant(Tensor::full({2}, 1e308));
  CHECK_THROWS_AS(g.add(x, x), NumericError);
  NodeId big = g.constant(Tensor::full({2}, 800.0));
  CHECK_THROWS_AS(g.exp(big), NumericError);
}
