#pragma once

#include <string>
#include <vector>

#include "gcrec/graph.hpp"
#include "gcrec/point_cloud.hpp"

namespace gcrec {

struct VictimConfig {
  int dz = 128;
  int colors = 0;
  std::vector<int> encoder_mlp = {64, 128, 256};
  std::vector<int> decoder_mlp = {256, 256};
  std::int64_t decode_points = 2048;
  DType dtype = DType::F64;
  double leaky_slope = 0.1;
};

/// Per-point MLP, max-pool over points, linear head. Exactly permutation
/// invariant by construction.
class VictimEncoder {
 public:
  VictimEncoder(const VictimConfig& cfg, std::uint64_t init_seed);
  NodeId encode_node(Graph& g, const PointCloud& x);
  Tensor encode(const PointCloud& x) const;  // [Dz]
  ParamStore& params() { return ps_; }
  const VictimConfig& config() const { return cfg_; }

 private:
  VictimConfig cfg_;
  mutable ParamStore ps_;
};

/// Folding-style generator: a fixed template cloud concatenated with the
/// latent, per-point MLP, displacement head. Output size is fixed by config.
class VictimDecoder {
 public:
  VictimDecoder(const VictimConfig& cfg, std::uint64_t init_seed);
  NodeId decode_node(Graph& g, NodeId z0);  // [N, 3+c]
  PointCloud decode(const Tensor& z0) const;
  ParamStore& params() { return ps_; }
  const VictimConfig& config() const { return cfg_; }

 private:
  VictimConfig cfg_;
  mutable ParamStore ps_;
};

/// Differentiable symmetric Chamfer between a predicted [N, 3+c] node and a
/// target cloud; matches are recomputed from current values each call and
/// the color channels of matched pairs are included when present.
NodeId chamfer_loss(Graph& g, NodeId pred, const PointCloud& target);

struct VictimTrainReport {
  std::vector<double> epoch_loss;
  std::int64_t steps = 0;
};

struct VictimTrainOptions {
  int epochs = 20;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

/// Joint reconstruction training of the stand-in codec (symmetric Chamfer).
VictimTrainReport train_victim(VictimEncoder& enc, VictimDecoder& dec,
                               const std::vector<PointCloud>& dataset,
                               const VictimTrainOptions& opt);

enum class BitrateLevel { High, Mid, Low };

BitrateLevel bitrate_level_from_string(const std::string& s);
std::string bitrate_level_to_string(BitrateLevel level);
double bitrate_quant_step(BitrateLevel level);  // in units of latent std

/// Uniform per-dimension quantization of the latent; the coarser the level
/// the larger the step.
Tensor simulate_bitrate_noise(const Tensor& z0, BitrateLevel level, const Tensor& per_dim_std);

/// Flat latent container with a fixed-size header (magic, count, dim).
void save_latents(const std::string& path, const std::vector<Tensor>& latents);
std::vector<Tensor> load_latents(const std::string& path);

/// Per-dimension mean and standard deviation over a latent set.
void latent_stats(const std::vector<Tensor>& latents, Tensor& mean, Tensor& std_dev);

}  // namespace gcrec
