#pragma once

#include <string>
#include <vector>

#include "gcrec/graph.hpp"
#include "gcrec/kd_tree.hpp"

namespace gcrec {

/// Shared network hyperparameters. `width` scales every hidden dimension;
/// 1.0 reproduces the reference layer sizes exactly.
struct NetConfig {
  int dz = 128;  // shape latent dimension
  int dh = 4;    // extra latent point channels
  int colors = 0;
  double width = 0.125;
  DType dtype = DType::F64;
  double leaky_slope = 0.1;
  double dropout_p = 0.1;
  int gn_groups = 8;
  double adagn_init_scale = 0.1;
  double residual_scale = 0.01;
  int sldm_time_dim = 128;
  int lpgdm_time_dim = 64;

  int point_channels() const { return 3 + colors; }
  int latent_point_channels() const { return 3 + colors + dh; }
  int scaled(int dim) const;
};

int pick_groups(int channels, int want);

/// y = x W^T + b
struct LinearLayer {
  std::string w, b;
  int in = 0, out = 0;

  LinearLayer() = default;
  LinearLayer(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim, RngStream& rng,
              const NetConfig& cfg, bool zero_init = false, double weight_scale = 1.0);
  NodeId forward(Graph& g, ParamStore& ps, NodeId x) const;
};

/// Group norm followed by a conditioned scale/shift. With a zero
/// conditioning vector the layer reduces to plain group norm.
struct AdaGnLayer {
  LinearLayer proj;  // cond -> [2C]
  int channels = 0, groups = 0;
  double eps = 1e-6;

  AdaGnLayer() = default;
  AdaGnLayer(ParamStore& ps, const std::string& prefix, int channels_, int cond_dim,
             RngStream& rng, const NetConfig& cfg);
  /// x: [M, C]; cond: [Dcond] vector node
  NodeId forward(Graph& g, ParamStore& ps, NodeId x, NodeId cond) const;
};

/// Single-head scaled dot-product attention with a residual connection.
struct AttentionLayer {
  LinearLayer wq, wk, wv, wo;
  int dim = 0;

  AttentionLayer() = default;
  AttentionLayer(ParamStore& ps, const std::string& prefix, int channels, int attn_dim,
                 RngStream& rng, const NetConfig& cfg);
  NodeId forward(Graph& g, ParamStore& ps, NodeId x) const;
};

/// Residual block of two linears with squeeze-and-excitation gating.
struct ResSeBlock {
  LinearLayer fc1, fc2, se1, se2;
  double slope = 0.1;
  double dropout_p = 0.1;

  ResSeBlock() = default;
  ResSeBlock(ParamStore& ps, const std::string& prefix, int channels, RngStream& rng,
             const NetConfig& cfg);
  NodeId forward(Graph& g, ParamStore& ps, NodeId x, bool training, RngStream* drop_rng) const;
};

struct SaSpec {
  int centers = 0;
  double radius = 0.0;
  int neighbors = 32;
  std::vector<int> mlp;  // output dims, already width-scaled
  int attention = 0;     // scaled attention dim, 0 = none
};

struct FpSpec {
  std::vector<int> mlp;
  int attention = 0;
};

/// Set abstraction: FPS to `centers`, ball-group, shared MLP, max-pool.
struct SaBlock {
  SaSpec spec;
  std::vector<LinearLayer> mlp;
  std::vector<AdaGnLayer> norms;  // empty when unconditioned
  AttentionLayer attn;
  int in_channels = 0, out_channels = 0;

  SaBlock() = default;
  SaBlock(ParamStore& ps, const std::string& prefix, const SaSpec& s, int in_channels_,
          int cond_dim, RngStream& rng, const NetConfig& cfg);

  struct Result {
    std::vector<Vec3> positions;
    NodeId features = -1;
  };
  Result forward(Graph& g, ParamStore& ps, const std::vector<Vec3>& positions, NodeId features,
                 NodeId cond, const NetConfig& cfg) const;
};

/// Feature propagation: inverse-distance interpolation (k=3), skip concat,
/// shared MLP.
struct FpBlock {
  FpSpec spec;
  std::vector<LinearLayer> mlp;
  std::vector<AdaGnLayer> norms;
  AttentionLayer attn;
  int out_channels = 0;

  FpBlock() = default;
  FpBlock(ParamStore& ps, const std::string& prefix, const FpSpec& s, int coarse_channels,
          int skip_channels, int cond_dim, RngStream& rng, const NetConfig& cfg);

  NodeId forward(Graph& g, ParamStore& ps, const std::vector<Vec3>& fine_positions,
                 NodeId skip_features, const std::vector<Vec3>& coarse_positions,
                 NodeId coarse_features, NodeId cond, const NetConfig& cfg) const;
};

}  // namespace gcrec
