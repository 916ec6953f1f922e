#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gcrec/metrics.hpp"
#include "gcrec/shapes.hpp"
#include "gcrec/victim.hpp"

using namespace gcrec;
namespace fs = std::filesystem;

namespace {

VictimConfig tiny_victim() {
  VictimConfig cfg;
  cfg.dz = 16;
  cfg.encoder_mlp = {32, 64};
  cfg.decoder_mlp = {64, 64};
  cfg.decode_points = 128;
  return cfg;
}

std::vector<PointCloud> sphere_set(int count, std::int64_t n, std::uint64_t seed) {
  ShapeFamily fam;
  fam.kind = ShapeKind::Sphere;
  fam.point_count = n;
  return gen_shapes(fam, count, seed);
}

}  // namespace

TEST_CASE("encoder output dimension holds even untrained") {
  VictimConfig cfg = tiny_victim();
  VictimEncoder enc(cfg, 3);
  PointCloud x = sphere_set(1, 128, 5)[0];
  Tensor z = enc.encode(x);
  CHECK(z.numel() == cfg.dz);
  CHECK(z.all_finite());
}

TEST_CASE("encoding is exactly permutation invariant") {
  VictimConfig cfg = tiny_victim();
  VictimEncoder enc(cfg, 7);
  PointCloud x = sphere_set(1, 200, 11)[0];
  Tensor z1 = enc.encode(x);
  PointCloud shuffled = x;
  std::reverse(shuffled.positions.begin(), shuffled.positions.end());
  std::swap(shuffled.positions[3], shuffled.positions[77]);
  Tensor z2 = enc.encode(shuffled);
  CHECK(z1.bit_equal(z2));
}

TEST_CASE("decoder emits the configured point count deterministically") {
  VictimConfig cfg = tiny_victim();
  VictimDecoder dec(cfg, 13);
  RngStream rng(17);
  Tensor z = rng.gaussian_tensor({cfg.dz});
  PointCloud a = dec.decode(z);
  PointCloud b = dec.decode(z);
  REQUIRE(a.size() == cfg.decode_points);
  for (std::int64_t i = 0; i < a.size(); ++i) {
    CHECK(a.positions[static_cast<std::size_t>(i)].x == b.positions[static_cast<std::size_t>(i)].x);
    CHECK(a.positions[static_cast<std::size_t>(i)].z == b.positions[static_cast<std::size_t>(i)].z);
  }
}

TEST_CASE("training reaches a chamfer below a tenth of the mean spacing") {
  // needs N large enough that the sampling floor (~1/N) sits below the
  // spacing bound (~1/sqrt(N)); a non-spherical family keeps it honest,
  // the folding template would match spheres before any training
  VictimConfig cfg = tiny_victim();
  cfg.decode_points = 512;
  VictimEncoder enc(cfg, 19);
  VictimDecoder dec(cfg, 23);
  ShapeFamily fam;
  fam.kind = ShapeKind::Superquadric;
  fam.point_count = 512;
  fam.params["e1"] = {0.8, 1.2};
  fam.params["e2"] = {0.8, 1.2};
  auto clouds = gen_shapes(fam, 8, 29);
  VictimTrainOptions opt;
  opt.epochs = 30;
  opt.lr = 2e-3;
  VictimTrainReport report = train_victim(enc, dec, clouds, opt);
  CHECK(report.steps == 30 * 8);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
  opt.lr = 1e-3;
  opt.seed = 2;
  train_victim(enc, dec, clouds, opt);
  // mean inter-point spacing from N points filling unit-cube surface area
  const double spacing = 1.0 / std::sqrt(512.0);
  double worst = 0;
  for (const auto& x : clouds) {
    PointCloud rec = dec.decode(enc.encode(x));
    worst = std::max(worst, chamfer(rec, x));
  }
  CHECK(worst < 0.1 * spacing);
}

TEST_CASE("distinct clouds produce distinct latents") {
  VictimConfig cfg = tiny_victim();
  VictimEncoder enc(cfg, 31);
  auto clouds = sphere_set(6, 100, 37);
  std::vector<Tensor> zs;
  for (const auto& c : clouds) zs.push_back(enc.encode(c));
  for (std::size_t i = 0; i < zs.size(); ++i)
    for (std::size_t j = i + 1; j < zs.size(); ++j) CHECK_FALSE(zs[i].bit_equal(zs[j]));
}

TEST_CASE("bitrate quantization basics") {
  Tensor sigma = Tensor::full({4}, 2.0);
  Tensor zero = Tensor::zeros({4});
  Tensor q = simulate_bitrate_noise(zero, BitrateLevel::High, sigma);
  for (int i = 0; i < 4; ++i) CHECK(q.at(i) == 0.0);

  RngStream rng(41);
  Tensor z = rng.gaussian_tensor({4});
  for (BitrateLevel level : {BitrateLevel::High, BitrateLevel::Mid, BitrateLevel::Low}) {
    Tensor out = simulate_bitrate_noise(z, level, sigma);
    const double step = bitrate_quant_step(level) * 2.0;
    for (int i = 0; i < 4; ++i) CHECK(std::abs(out.at(i) - z.at(i)) <= step / 2 + 1e-12);
  }
}

TEST_CASE("quantization error grows monotonically with coarser levels") {
  RngStream rng(43);
  Tensor sigma = Tensor::full({32}, 1.0);
  double prev = -1.0;
  for (BitrateLevel level : {BitrateLevel::High, BitrateLevel::Mid, BitrateLevel::Low}) {
    double err = 0;
    RngStream zr(47);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor z = zr.gaussian_tensor({32});
      Tensor q = simulate_bitrate_noise(z, level, sigma);
      for (int i = 0; i < 32; ++i) err += (q.at(i) - z.at(i)) * (q.at(i) - z.at(i));
    }
    CHECK(err >= prev);
    prev = err;
  }
  (void)rng;
}

TEST_CASE("latent container round trip and stats") {
  RngStream rng(53);
  std::vector<Tensor> latents;
  for (int i = 0; i < 10; ++i) latents.push_back(rng.gaussian_tensor({6}));
  fs::path path = fs::temp_directory_path() / "gcrec_latents.gczl";
  save_latents(path.string(), latents);
  auto back = load_latents(path.string());
  REQUIRE(back.size() == latents.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i].bit_equal(latents[i]));
  Tensor mean, sd;
  latent_stats(back, mean, sd);
  CHECK(mean.numel() == 6);
  for (int d = 0; d < 6; ++d) CHECK(sd.at(d) > 0.0);
  fs::remove(path);
}

TEST_CASE("latent container rejects foreign files") {
  fs::path path = fs::temp_directory_path() / "gcrec_notlatents.bin";
  {
    std::ofstream os(path);
    os << "GCPTjunk";
  }
  CHECK_THROWS_AS(load_latents(path.string()), Error);
  fs::remove(path);
}
