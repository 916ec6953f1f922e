#include <cmath>

#include "doctest.h"
#include "gcrec/nets.hpp"
#include "gcrec/optim.hpp"
#include "gcrec/schedule.hpp"
#include "gcrec/shapes.hpp"
#include "test_util.hpp"

using namespace gcrec;

namespace {

NetConfig toy_config() {
  NetConfig cfg;
  cfg.dz = 8;
  cfg.dh = 2;
  cfg.colors = 0;
  cfg.width = 0.0625;
  return cfg;
}

PointCloud toy_cloud(std::int64_t n, std::uint64_t seed) {
  ShapeFamily fam;
  fam.kind = ShapeKind::Sphere;
  fam.point_count = n;
  return gen_shape(fam, seed, 0);
}

Tensor random_latent_points(std::int64_t n, const NetConfig& cfg, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor h = rng.uniform_tensor({n, cfg.latent_point_channels()}, 0.0, 1.0);
  return h;
}

void randomize_head(ParamStore& ps, const std::string& name, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor& w = ps.value(name);
  for (std::int64_t i = 0; i < w.numel(); ++i) w.set(i, rng.gaussian() * 0.2);
}

}  // namespace

TEST_CASE("width 1.0 reproduces the reference layer dimensions") {
  NetConfig cfg;
  cfg.width = 1.0;
  cfg.dz = 128;
  cfg.dh = 4;
  cfg.colors = 0;

  SldmNet::Plan sp = SldmNet::plan(cfg);
  CHECK(sp.input == 128);
  CHECK(sp.hidden == 2048);
  CHECK(sp.time_sinusoidal == 128);
  CHECK(sp.time_hidden == 512);
  CHECK(sp.res_blocks == 8);

  PointUNet::Spec lp = lpgdm_unet_spec(cfg);
  REQUIRE(lp.sa.size() == 4);
  CHECK(lp.sa[0].centers == 1024);
  CHECK(lp.sa[1].centers == 256);
  CHECK(lp.sa[2].centers == 64);
  CHECK(lp.sa[3].centers == 16);
  CHECK(lp.sa[0].radius == doctest::Approx(0.1));
  CHECK(lp.sa[3].radius == doctest::Approx(0.8));
  for (const auto& sa : lp.sa) CHECK(sa.neighbors == 32);
  CHECK(lp.sa[0].mlp == std::vector<int>{32, 32});
  CHECK(lp.sa[1].mlp == std::vector<int>{64, 128});
  CHECK(lp.sa[2].mlp == std::vector<int>{128, 128});
  CHECK(lp.sa[3].mlp == std::vector<int>{128, 128, 128});
  CHECK(lp.sa[1].attention == 128);
  CHECK(lp.global_attention == 256);
  CHECK(lp.fp[3].mlp == std::vector<int>{128, 128, 64});
  CHECK(lp.head_mlp == std::vector<int>{128});
  CHECK(lp.out_channels == 3 + 0 + 4);
  CHECK(lp.time_sinusoidal == 64);

  PointUNet::Spec gp = lpg_unet_spec(cfg);
  CHECK(gp.sa[2].mlp == std::vector<int>{128, 256});
  CHECK(gp.fp[1].attention == 128);
  CHECK(gp.out_channels == 2 * (3 + 0 + 4));
  CHECK_FALSE(gp.time_conditioned);

  PointUNet::Spec rp = rd_unet_spec(cfg);
  CHECK(rp.out_channels == 3);
  CHECK(rp.sa[2].mlp == std::vector<int>{128, 256});
  CHECK(rp.fp[1].attention == 0);
}

TEST_CASE("adagn with zero conditioning reduces to plain group norm") {
  NetConfig cfg = toy_config();
  ParamStore ps;
  RngStream rng(3);
  AdaGnLayer layer(ps, "ada", 12, cfg.dz, rng, cfg);
  Graph g;
  RngStream data(5);
  NodeId x = g.constant(data.gaussian_tensor({20, 12}));
  NodeId zero_cond = g.constant(Tensor::zeros({cfg.dz}));
  NodeId out = layer.forward(g, ps, x, zero_cond);
  NodeId plain = g.group_norm(x, layer.groups, layer.eps);
  for (std::int64_t i = 0; i < g.value(out).numel(); ++i)
    CHECK(std::abs(g.value(out).at(i) - g.value(plain).at(i)) < 1e-12);
}

TEST_CASE("sldm zero-initialized head predicts zero at init") {
  NetConfig cfg = toy_config();
  SldmNet net(cfg, 7);
  RngStream rng(9);
  Tensor z = rng.gaussian_tensor({4, cfg.dz});
  Tensor out = net.predict_value(z, 3.0);
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == 0.0);
}

TEST_CASE("sldm eval mode is deterministic") {
  NetConfig cfg = toy_config();
  SldmNet net(cfg, 7);
  randomize_head(net.params(), "sldm.out.w", 11);
  RngStream rng(13);
  Tensor z = rng.gaussian_tensor({2, cfg.dz});
  Tensor a = net.predict_value(z, 5.0);
  Tensor b = net.predict_value(z, 5.0);
  CHECK(a.bit_equal(b));
  Tensor c = net.predict_value(z, 6.0);
  bool differs = false;
  for (std::int64_t i = 0; i < c.numel(); ++i) differs = differs || c.at(i) != a.at(i);
  CHECK(differs);  // time conditioning is live
}

TEST_CASE("sldm trains below half the zero-predictor loss on a toy set") {
  NetConfig cfg;
  cfg.dz = 2;
  cfg.width = 0.02;
  SldmNet net(cfg, 17);
  NoiseSchedule sched = make_schedule(50, 1e-4, 0.05, 1.0);
  RngStream rng(19);
  // two-cluster toy latent set
  std::vector<Tensor> data;
  for (int i = 0; i < 64; ++i) {
    Tensor z = Tensor::zeros({cfg.dz});
    const double cx = i % 2 == 0 ? 1.2 : -1.2;
    z.set(0, cx + 0.1 * rng.gaussian());
    z.set(1, -cx + 0.1 * rng.gaussian());
    data.push_back(z);
  }
  Adam opt(2e-3);
  const int batch = 16;
  for (int step = 0; step < 3000; ++step) {
    Tensor zb = Tensor::zeros({batch, cfg.dz});
    for (int b = 0; b < batch; ++b) {
      const Tensor& z = data[static_cast<std::size_t>(rng.uniform_index(64))];
      for (int d = 0; d < cfg.dz; ++d) zb.set(b * cfg.dz + d, z.at(d));
    }
    const int t = 1 + static_cast<int>(rng.uniform_index(sched.steps));
    ForwardSample fs = gaussian_forward(sched, zb, t, rng);
    net.params().zero_grad();
    Graph g;
    NodeId pred = net.predict(g, g.constant(fs.x_t), t, false, nullptr);
    NodeId loss = g.mse(pred, g.constant(fs.noise));
    g.backward(loss);
    opt.step(net.params());
  }
  // measure on fresh draws
  double loss_sum = 0, zero_sum = 0;
  const int eval_rounds = 200;
  for (int r = 0; r < eval_rounds; ++r) {
    Tensor zb = Tensor::zeros({batch, cfg.dz});
    for (int b = 0; b < batch; ++b) {
      const Tensor& z = data[static_cast<std::size_t>(rng.uniform_index(64))];
      for (int d = 0; d < cfg.dz; ++d) zb.set(b * cfg.dz + d, z.at(d));
    }
    const int t = 1 + static_cast<int>(rng.uniform_index(sched.steps));
    ForwardSample fs = gaussian_forward(sched, zb, t, rng);
    Tensor pred = net.predict_value(fs.x_t, t);
    loss_sum += sldm_loss(fs.noise, pred);
    zero_sum += sldm_loss(fs.noise, Tensor::zeros(fs.noise.shape()));
  }
  CHECK(loss_sum / eval_rounds < 0.5 * (zero_sum / eval_rounds));
}

TEST_CASE("lpgdm zero-initialized head predicts zero and output keeps the shape") {
  NetConfig cfg = toy_config();
  LpgdmNet net(cfg, 23);
  Tensor h = random_latent_points(64, cfg, 29);
  RngStream rng(31);
  Tensor cond = rng.gaussian_tensor({cfg.dz});
  Tensor out = net.predict_value(h, cond, 2.0);
  REQUIRE(out.shape() == h.shape());  // SA down + FP up restores the point count
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == 0.0);
}

TEST_CASE("lpgdm conditioning on the shape latent is live") {
  NetConfig cfg = toy_config();
  LpgdmNet net(cfg, 23);
  randomize_head(net.params(), "lpgdm.out.w", 37);
  Tensor h = random_latent_points(48, cfg, 41);
  RngStream rng(43);
  Tensor cond = rng.gaussian_tensor({cfg.dz});
  Tensor doubled = cond.clone();
  for (std::int64_t i = 0; i < doubled.numel(); ++i) doubled.set(i, 2.0 * doubled.at(i));
  Tensor a = net.predict_value(h, cond, 2.0);
  Tensor b = net.predict_value(h, doubled, 2.0);
  double max_delta = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    max_delta = std::max(max_delta, std::abs(a.at(i) - b.at(i)));
  CHECK(max_delta > 0.0);
  // determinism in eval mode
  CHECK(net.predict_value(h, cond, 2.0).bit_equal(a));
}

TEST_CASE("lpgdm full-network gradients pass finite differences") {
  NetConfig cfg = toy_config();
  cfg.width = 0.04;
  LpgdmNet net(cfg, 47);
  randomize_head(net.params(), "lpgdm.out.w", 53);
  Tensor h = random_latent_points(24, cfg, 59);
  RngStream crng(61);
  Tensor cond = crng.gaussian_tensor({cfg.dz});
  RngStream wrng(67);
  Tensor contract = wrng.gaussian_tensor({24, cfg.latent_point_channels()});
  auto build = [&](Graph& g, ParamStore&) {
    NodeId out = net.predict(g, g.constant(h), g.constant(cond), 3.0, false, nullptr);
    return g.reduce_mean(g.mul(out, g.constant(contract.clone())));
  };
  CHECK(test::fd_max_rel_err(net.params(), build, 1e-5, 4) < 1e-4);
}

TEST_CASE("lpg anchored mean equals the anchor at init and sampling is reparameterized") {
  NetConfig cfg = toy_config();
  LpgNet net(cfg, 71);
  PointCloud anchor = toy_cloud(40, 73);
  Graph g;
  RngStream rng(79);
  NodeId cond = g.constant(rng.gaussian_tensor({cfg.dz}));
  LpgNet::Output out = net.encode(g, anchor, cond, false, nullptr);
  const Tensor& mu = g.value(out.mu);
  const int lc = cfg.latent_point_channels();
  for (std::int64_t i = 0; i < anchor.size(); ++i) {
    CHECK(mu.at(i * lc + 0) == doctest::Approx(anchor.positions[static_cast<std::size_t>(i)].x));
    CHECK(mu.at(i * lc + 1) == doctest::Approx(anchor.positions[static_cast<std::size_t>(i)].y));
    CHECK(mu.at(i * lc + 2) == doctest::Approx(anchor.positions[static_cast<std::size_t>(i)].z));
  }
  // logvar is zero at init, so sample - mu must be exactly the drawn noise
  RngStream sample_rng(83);
  NodeId h0 = net.sample_latent(g, out, sample_rng);
  RngStream replay(83);
  Tensor eps = replay.gaussian_tensor(mu.shape());
  for (std::int64_t i = 0; i < mu.numel(); ++i)
    CHECK(g.value(h0).at(i) - mu.at(i) == doctest::Approx(eps.at(i)).epsilon(1e-12));
}

TEST_CASE("gaussian kl closed-form identities") {
  Graph g;
  NodeId zero = g.constant(Tensor::zeros({10}));
  CHECK(g.value(gaussian_kl_mean(g, zero, zero)).item() == doctest::Approx(0.0));
  NodeId ones = g.constant(Tensor::full({10}, 1.0));
  CHECK(g.value(gaussian_kl_mean(g, ones, zero)).item() == doctest::Approx(0.5));
}

TEST_CASE("lpg template anchor is deterministic, unit-cube normalized, size n") {
  PointCloud a = LpgNet::template_anchor(128, 0);
  PointCloud b = LpgNet::template_anchor(128, 0);
  REQUIRE(a.size() == 128);
  for (std::int64_t i = 0; i < a.size(); ++i) {
    CHECK(a.positions[static_cast<std::size_t>(i)].x == b.positions[static_cast<std::size_t>(i)].x);
  }
  Aabb box = a.bounds();
  CHECK(box.lo.x >= -1e-12);
  CHECK(box.hi.x <= 1.0 + 1e-12);
  PointCloud colored = LpgNet::template_anchor(64, 3);
  CHECK(colored.has_colors());
}

TEST_CASE("lpg generate runs without a raw cloud and respects the mean flag") {
  NetConfig cfg = toy_config();
  LpgNet net(cfg, 89);
  RngStream rng(97);
  Tensor cond = rng.gaussian_tensor({cfg.dz});
  Tensor h0 = net.generate(cond, 50);
  CHECK(h0.dim(0) == 50);
  CHECK(h0.dim(1) == cfg.latent_point_channels());
  Tensor again = net.generate(cond, 50);
  CHECK(h0.bit_equal(again));  // posterior mean is deterministic
  RngStream srng(101);
  Tensor sampled = net.generate(cond, 50, true, &srng);
  bool differs = false;
  for (std::int64_t i = 0; i < sampled.numel(); ++i)
    differs = differs || sampled.at(i) != h0.at(i);
  CHECK(differs);
}

TEST_CASE("rd zero-initialized net reproduces the latent point geometry") {
  NetConfig cfg = toy_config();
  RdNet net(cfg, 103);
  Tensor h0 = random_latent_points(36, cfg, 107);
  RngStream rng(109);
  Tensor cond = rng.gaussian_tensor({cfg.dz});
  Tensor x = net.decode_value(h0, cond);
  REQUIRE(x.dim(0) == 36);
  REQUIRE(x.dim(1) == cfg.point_channels());
  const int lc = cfg.latent_point_channels();
  for (std::int64_t i = 0; i < 36; ++i)
    for (int c = 0; c < cfg.point_channels(); ++c)
      CHECK(x.at(i * cfg.point_channels() + c) == doctest::Approx(h0.at(i * lc + c)));
}

TEST_CASE("rd gradients reach both the latent points and the conditioning") {
  NetConfig cfg = toy_config();
  RdNet net(cfg, 113);
  randomize_head(net.params(), "rd.out.w", 127);
  Tensor h0 = random_latent_points(30, cfg, 131);
  RngStream rng(137);
  Tensor cond = rng.gaussian_tensor({cfg.dz});
  Graph g;
  NodeId h0_node = g.leaf(h0);
  NodeId cond_node = g.leaf(cond);
  NodeId x = net.decode(g, h0_node, cond_node, false, nullptr);
  g.backward(g.reduce_mean(g.mul(x, x)));
  double h0_grad = 0, cond_grad = 0;
  Tensor gh = g.grad_of(h0_node);
  for (std::int64_t i = 0; i < gh.numel(); ++i) h0_grad += std::abs(gh.at(i));
  Tensor gc = g.grad_of(cond_node);
  for (std::int64_t i = 0; i < gc.numel(); ++i) cond_grad += std::abs(gc.at(i));
  CHECK(h0_grad > 0.0);
  CHECK(cond_grad > 0.0);
}

TEST_CASE("lpg and rd full gradients pass sampled finite differences") {
  NetConfig cfg = toy_config();
  cfg.width = 0.04;
  LpgNet lpg(cfg, 139);
  RdNet rd(cfg, 149);
  randomize_head(lpg.params(), "lpg.out.w", 151);
  randomize_head(rd.params(), "rd.out.w", 157);
  PointCloud anchor = toy_cloud(20, 163);
  RngStream rng(167);
  Tensor z0 = rng.gaussian_tensor({cfg.dz});
  Tensor contract = rng.gaussian_tensor({20, cfg.point_channels()});
  {
    auto build = [&](Graph& g, ParamStore&) {
      NodeId cond = lpg.embed_mean(g, g.constant(z0));
      LpgNet::Output out = lpg.encode(g, anchor, cond, false, nullptr);
      NodeId probe = g.add(g.mse(out.mu, g.constant(Tensor::zeros(g.value(out.mu).shape()))),
                           gaussian_kl_mean(g, out.mu, out.logvar));
      return probe;
    };
    CHECK(test::fd_max_rel_err(lpg.params(), build, 1e-5, 4) < 1e-4);
  }
  {
    Tensor h0 = random_latent_points(20, cfg, 173);
    auto build = [&](Graph& g, ParamStore&) {
      NodeId x = rd.decode(g, g.constant(h0), g.constant(z0), false, nullptr);
      return g.reduce_mean(g.mul(x, g.constant(contract.clone())));
    };
    CHECK(test::fd_max_rel_err(rd.params(), build, 1e-5, 4) < 1e-4);
  }
}

TEST_CASE("sldm full gradients pass sampled finite differences") {
  NetConfig cfg;
  cfg.dz = 6;
  cfg.width = 0.01;
  SldmNet net(cfg, 179);
  randomize_head(net.params(), "sldm.out.w", 181);
  RngStream rng(191);
  Tensor z = rng.gaussian_tensor({3, cfg.dz});
  Tensor contract = rng.gaussian_tensor({3, cfg.dz});
  auto build = [&](Graph& g, ParamStore&) {
    NodeId out = net.predict(g, g.constant(z), 4.0, false, nullptr);
    return g.reduce_mean(g.mul(out, g.constant(contract.clone())));
  };
  CHECK(test::fd_max_rel_err(net.params(), build, 1e-5, 6) < 1e-4);
}

TEST_CASE("nets reject malformed inputs") {
  NetConfig cfg = toy_config();
  SldmNet sldm(cfg, 193);
  Graph g;
  CHECK_THROWS_AS(sldm.predict(g, g.constant(Tensor::zeros({2, cfg.dz + 1})), 1.0), ShapeError);
  LpgdmNet lpgdm(cfg, 197);
  CHECK_THROWS_AS(
      lpgdm.predict(g, g.constant(Tensor::zeros({10, 2})), g.constant(Tensor::zeros({cfg.dz})), 1.0),
      ShapeError);
  CHECK_THROWS_AS(lpgdm.predict(g, g.constant(Tensor::zeros({10, cfg.latent_point_channels()})),
                                g.constant(Tensor::zeros({cfg.dz + 3})), 1.0),
                  ShapeError);
}
