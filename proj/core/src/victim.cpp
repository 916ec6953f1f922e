#include "gcrec/victim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gcrec/kd_tree.hpp"
#include "gcrec/optim.hpp"
#include "gcrec/shapes.hpp"

namespace gcrec {

namespace {

Tensor kaiming(int out, int in, RngStream& rng, DType dt) {
  const double bound = std::sqrt(3.0 / in) * std::sqrt(2.0);
  return rng.uniform_tensor({out, in}, -bound, bound, dt);
}

void add_mlp(ParamStore& ps, const std::string& prefix, int in, const std::vector<int>& widths,
             RngStream& rng, DType dt) {
  int c = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    ps.add(prefix + std::to_string(i) + ".w", kaiming(widths[i], c, rng, dt));
    ps.add(prefix + std::to_string(i) + ".b", Tensor::zeros({widths[i]}, dt));
    c = widths[i];
  }
}

NodeId run_mlp(Graph& g, ParamStore& ps, const std::string& prefix, std::size_t layers, NodeId x,
               double slope) {
  NodeId h = x;
  for (std::size_t i = 0; i < layers; ++i) {
    h = g.linear(h, g.param(ps, prefix + std::to_string(i) + ".w"),
                 g.param(ps, prefix + std::to_string(i) + ".b"));
    h = g.leaky_relu(h, slope);
  }
  return h;
}

}  // namespace

VictimEncoder::VictimEncoder(const VictimConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  RngStream rng(init_seed);
  add_mlp(ps_, "enc.mlp", 3 + cfg.colors, cfg.encoder_mlp, rng, cfg.dtype);
  ps_.add("enc.head.w", kaiming(cfg.dz, cfg.encoder_mlp.back(), rng, cfg.dtype));
  ps_.add("enc.head.b", Tensor::zeros({cfg.dz}, cfg.dtype));
}

NodeId VictimEncoder::encode_node(Graph& g, const PointCloud& x) {
  if (x.channels() != 3 + cfg_.colors) throw ShapeError("victim encoder: channel mismatch");
  NodeId features = g.constant(x.to_tensor().cast(cfg_.dtype));
  NodeId h = run_mlp(g, ps_, "enc.mlp", cfg_.encoder_mlp.size(), features, cfg_.leaky_slope);
  NodeId pooled = g.reshape(g.max_pool(h, 0), {1, cfg_.encoder_mlp.back()});
  NodeId z = g.linear(pooled, g.param(ps_, "enc.head.w"), g.param(ps_, "enc.head.b"));
  return g.reshape(z, {cfg_.dz});
}

Tensor VictimEncoder::encode(const PointCloud& x) const {
  Graph g(false, cfg_.dtype);
  return g.value(const_cast<VictimEncoder*>(this)->encode_node(g, x));
}

VictimDecoder::VictimDecoder(const VictimConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  RngStream rng(init_seed);
  add_mlp(ps_, "dec.mlp", 3 + cfg.dz, cfg.decoder_mlp, rng, cfg.dtype);
  // zero-init displacement head: decoding starts from the template
  ps_.add("dec.head.w", Tensor::zeros({3 + cfg.colors, cfg.decoder_mlp.back()}, cfg.dtype));
  ps_.add("dec.head.b", Tensor::zeros({3 + cfg.colors}, cfg.dtype));
}

NodeId VictimDecoder::decode_node(Graph& g, NodeId z0) {
  if (g.value(z0).numel() != cfg_.dz) throw ShapeError("victim decoder: latent dim mismatch");
  const std::int64_t n = cfg_.decode_points;
  PointCloud tmpl = sphere_template(n, 0);
  Tensor tmpl_t = tmpl.to_tensor().cast(cfg_.dtype);
  NodeId tmpl_node = g.constant(tmpl_t);
  NodeId zin = g.broadcast_rows(z0, n);
  NodeId h = g.concat({tmpl_node, zin}, 1);
  h = run_mlp(g, ps_, "dec.mlp", cfg_.decoder_mlp.size(), h, cfg_.leaky_slope);
  NodeId out = g.linear(h, g.param(ps_, "dec.head.w"), g.param(ps_, "dec.head.b"));
  NodeId pos = g.add(g.slice(out, 1, 0, 3), tmpl_node);
  if (cfg_.colors > 0) return g.concat({pos, g.slice(out, 1, 3, 3 + cfg_.colors)}, 1);
  return pos;
}

PointCloud VictimDecoder::decode(const Tensor& z0) const {
  Graph g(false, cfg_.dtype);
  NodeId out = const_cast<VictimDecoder*>(this)->decode_node(g, g.constant(z0.cast(cfg_.dtype)));
  PointCloud pc = PointCloud::from_tensor(g.value(out), cfg_.colors > 0);
  pc.clamp_colors();
  return pc;
}

NodeId chamfer_loss(Graph& g, NodeId pred, const PointCloud& target) {
  const Tensor& pv = g.value(pred);
  if (pv.rank() != 2 || pv.dim(1) != target.channels())
    throw ShapeError("chamfer loss: channel mismatch");
  const std::int64_t n = pv.dim(0), m = target.size();
  const int ch = static_cast<int>(pv.dim(1));
  std::vector<Vec3> pred_pos = positions_from_tensor(pv);
  KdIndex pred_index(pred_pos);
  KdIndex target_index(target);

  // pred -> target: constant gathered targets
  Tensor matched = Tensor::zeros({n, ch}, pv.dtype());
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t j = target_index.nearest(pred_pos[static_cast<std::size_t>(i)]);
    const Vec3& q = target.positions[static_cast<std::size_t>(j)];
    matched.set(i * ch + 0, q.x);
    matched.set(i * ch + 1, q.y);
    matched.set(i * ch + 2, q.z);
    if (ch == 6) {
      const Vec3& c = target.colors[static_cast<std::size_t>(j)];
      matched.set(i * ch + 3, c.x);
      matched.set(i * ch + 4, c.y);
      matched.set(i * ch + 5, c.z);
    }
  }
  NodeId d1 = g.sub(pred, g.constant(std::move(matched)));
  NodeId term1 = g.scale(g.reduce_sum(g.mul(d1, d1)), 1.0 / static_cast<double>(n));

  // target -> pred: gather matched predictions (differentiable path)
  std::vector<std::int64_t> match(static_cast<std::size_t>(m));
  Tensor target_t = target.to_tensor().cast(pv.dtype());
  for (std::int64_t j = 0; j < m; ++j)
    match[static_cast<std::size_t>(j)] =
        pred_index.nearest(target.positions[static_cast<std::size_t>(j)]);
  NodeId gathered = g.gather(pred, match);
  NodeId d2 = g.sub(gathered, g.constant(std::move(target_t)));
  NodeId term2 = g.scale(g.reduce_sum(g.mul(d2, d2)), 1.0 / static_cast<double>(m));
  return g.add(term1, term2);
}

VictimTrainReport train_victim(VictimEncoder& enc, VictimDecoder& dec,
                               const std::vector<PointCloud>& dataset,
                               const VictimTrainOptions& opt) {
  if (dataset.empty()) throw Error("train_victim: empty dataset");
  Adam enc_opt(opt.lr), dec_opt(opt.lr);
  RngStream order_rng(opt.seed);
  VictimTrainReport report;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    double epoch_loss = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const PointCloud& x = dataset[static_cast<std::size_t>(order_rng.uniform_index(
          static_cast<std::int64_t>(dataset.size())))];
      enc.params().zero_grad();
      dec.params().zero_grad();
      double loss_value = 0;
      try {
        Graph g(true, enc.config().dtype);
        NodeId z = enc.encode_node(g, x);
        NodeId decoded = dec.decode_node(g, z);
        NodeId loss = chamfer_loss(g, decoded, x);
        loss_value = g.value(loss).item();
        g.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError(std::string("victim training diverged: ") + e.what());
      }
      enc_opt.step(enc.params());
      dec_opt.step(dec.params());
      epoch_loss += loss_value;
      ++report.steps;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return report;
}

BitrateLevel bitrate_level_from_string(const std::string& s) {
  if (s == "high") return BitrateLevel::High;
  if (s == "mid") return BitrateLevel::Mid;
  if (s == "low") return BitrateLevel::Low;
  throw Error("unknown bitrate level '" + s + "'");
}

std::string bitrate_level_to_string(BitrateLevel level) {
  switch (level) {
    case BitrateLevel::High: return "high";
    case BitrateLevel::Mid: return "mid";
    case BitrateLevel::Low: return "low";
  }
  return "high";
}

double bitrate_quant_step(BitrateLevel level) {
  switch (level) {
    case BitrateLevel::High: return 0.01;
    case BitrateLevel::Mid: return 0.05;
    case BitrateLevel::Low: return 0.1;
  }
  return 0.01;
}

Tensor simulate_bitrate_noise(const Tensor& z0, BitrateLevel level, const Tensor& per_dim_std) {
  if (z0.numel() != per_dim_std.numel()) throw ShapeError("bitrate noise: stats dim mismatch");
  const double q = bitrate_quant_step(level);
  Tensor out = z0.clone();
  for (std::int64_t i = 0; i < z0.numel(); ++i) {
    const double step = q * per_dim_std.at(i);
    if (step <= 0) continue;
    out.set(i, std::round(z0.at(i) / step) * step);
  }
  return out;
}

namespace {
constexpr char kLatentMagic[4] = {'G', 'C', 'Z', 'L'};
}

void save_latents(const std::string& path, const std::vector<Tensor>& latents) {
  if (latents.empty()) throw Error("save_latents: nothing to save");
  const std::int64_t dz = latents.front().numel();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(kLatentMagic, 4);
  const std::uint32_t count = static_cast<std::uint32_t>(latents.size());
  const std::uint32_t dim = static_cast<std::uint32_t>(dz);
  os.write(reinterpret_cast<const char*>(&count), 4);
  os.write(reinterpret_cast<const char*>(&dim), 4);
  for (const Tensor& z : latents) {
    if (z.numel() != dz) throw ShapeError("save_latents: inconsistent dims");
    for (std::int64_t i = 0; i < dz; ++i) {
      const double v = z.at(i);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
  if (!os) throw Error("write failed for '" + path + "'");
}

std::vector<Tensor> load_latents(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kLatentMagic, 4) != 0)
    throw Error("'" + path + "' is not a latent container");
  std::uint32_t count = 0, dim = 0;
  is.read(reinterpret_cast<char*>(&count), 4);
  is.read(reinterpret_cast<char*>(&dim), 4);
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor z = Tensor::zeros({static_cast<std::int64_t>(dim)});
    for (std::uint32_t d = 0; d < dim; ++d) {
      double v;
      is.read(reinterpret_cast<char*>(&v), 8);
      z.set(d, v);
    }
    if (!is) throw Error("latent container truncated");
    out.push_back(std::move(z));
  }
  return out;
}

void latent_stats(const std::vector<Tensor>& latents, Tensor& mean, Tensor& std_dev) {
  if (latents.empty()) throw Error("latent_stats: empty set");
  const std::int64_t dz = latents.front().numel();
  mean = Tensor::zeros({dz});
  std_dev = Tensor::zeros({dz});
  for (const Tensor& z : latents)
    for (std::int64_t d = 0; d < dz; ++d) mean.set(d, mean.at(d) + z.at(d));
  for (std::int64_t d = 0; d < dz; ++d) mean.set(d, mean.at(d) / static_cast<double>(latents.size()));
  for (const Tensor& z : latents)
    for (std::int64_t d = 0; d < dz; ++d) {
      const double diff = z.at(d) - mean.at(d);
      std_dev.set(d, std_dev.at(d) + diff * diff);
    }
  for (std::int64_t d = 0; d < dz; ++d)
    std_dev.set(d, std::sqrt(std_dev.at(d) / static_cast<double>(latents.size())));
}

}  // namespace gcrec
