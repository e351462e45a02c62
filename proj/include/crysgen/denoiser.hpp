#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crysgen/crystal.hpp"
#include "crysgen/elements.hpp"

namespace crysgen {

struct DenoiserConfig {
  int width = 128;               // hidden width
  int n_freq = 128;              // Fourier frequencies per coordinate axis
  int layers = 6;                // message-passing rounds
  int max_types = kMaxAtomicNumber;

  int edge_input_dim() const { return 2 * width + 9 + 6 * n_freq; }
  bool operator==(const DenoiserConfig&) const = default;
};

// All learnable tensors in a fixed, serialization-stable order:
//   [0] atom embedding table, [1] time projection, [2] time bias,
//   then 12 tensors per layer (message MLP 3x{W,b}, update MLP 3x{W,b}),
//   then the lattice head (2x{W,b}) and the coordinate head (2x{W,b}).
struct DenoiserParams {
  DenoiserConfig cfg;
  std::vector<Eigen::MatrixXd> tensors;

  static constexpr int kAtomEmb = 0;
  static constexpr int kTimeW = 1;
  static constexpr int kTimeB = 2;
  static constexpr int kPerLayer = 12;
  int layer_base(int k) const { return 3 + kPerLayer * k; }
  int head_base() const { return 3 + kPerLayer * cfg.layers; }
  int num_tensors() const { return head_base() + 8; }

  std::size_t num_scalars() const;
};

// Name of a tensor slot, for diagnostics ("layer2.msg_w1", "coord_head_b2", ...).
std::string denoiser_tensor_name(const DenoiserConfig& cfg, int index);

// Fan-in scaled uniform weights, zero biases; bit-reproducible for a seed.
DenoiserParams init_denoiser(const DenoiserConfig& cfg, std::uint64_t seed);

// Zero tensors with the same shapes (gradients, optimizer moments).
DenoiserParams zeros_like(const DenoiserParams& p);

// sin/cos features of integer multiples of the coordinate difference;
// period 1 in every entry. Layout: axis-major, then frequency, sin then cos.
Eigen::VectorXd fourier_features(const Vec3& dx, int n_freq);

struct DenoiserOutput {
  Mat3 lattice_noise;   // epsilon-hat for the lattice DDPM chain
  MatX3 coord_score;    // sigma-scaled wrapped-normal score estimate
};

// Opaque intermediates retained for the exact backward pass.
struct DenoiserCache;

DenoiserOutput denoiser_forward(const DenoiserParams& p, const std::vector<int>& atom_types,
                                const MatX3& frac_coords, const Mat3& lattice, int t,
                                DenoiserCache* cache = nullptr);

// Exact reverse-mode gradients for every parameter tensor. The cache must
// come from a forward pass over the same parameter object (StaleCache).
DenoiserParams denoiser_backward(const DenoiserParams& p, const DenoiserCache& cache,
                                 const Mat3& d_lattice_noise, const MatX3& d_coord_score);

struct DenoiserCache {
  bool filled = false;
  const DenoiserParams* owner = nullptr;

  std::vector<int> atom_types;
  MatX3 frac_coords;
  Mat3 lattice;
  int t = 0;
  std::vector<int> order;  // canonical content order used for aggregation

  Eigen::VectorXd time_embed;
  Eigen::VectorXd gram_symlog;
  Eigen::MatrixXd fourier_block;  // (N*N) x 6F

  struct LayerCache {
    Eigen::MatrixXd h_in;
    Eigen::MatrixXd msg_z1, msg_a1, msg_z2, msg_a2, messages;
    Eigen::MatrixXd msg_sum;
    Eigen::MatrixXd upd_in, upd_z1, upd_a1, upd_z2, upd_a2;
  };
  std::vector<LayerCache> layers;

  Eigen::MatrixXd h_final;
  Eigen::VectorXd pooled;
  Eigen::VectorXd lat_z1, lat_a1;
  Eigen::MatrixXd coord_z1, coord_a1;
};

}  // namespace crysgen
