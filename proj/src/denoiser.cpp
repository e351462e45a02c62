#include "crysgen/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crysgen/errors.hpp"
#include "crysgen/rng.hpp"

namespace crysgen {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

Eigen::ArrayXXd silu(const Eigen::ArrayXXd& z) { return z / (1.0 + (-z).exp()); }

Eigen::ArrayXXd silu_grad(const Eigen::ArrayXXd& z) {
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z).exp());
  return s * (1.0 + z * (1.0 - s));
}

Eigen::VectorXd sinusoidal_time_embed(int t, int dim) {
  Eigen::VectorXd pe(dim);
  const int pairs = dim / 2;
  for (int i = 0; i < pairs; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * i / std::max(1, pairs - 1));
    pe(2 * i) = std::sin(t * freq);
    pe(2 * i + 1) = std::cos(t * freq);
  }
  if (dim % 2 == 1) pe(dim - 1) = std::sin(static_cast<double>(t));
  return pe;
}

// Content-keyed aggregation order: permuting atom indices permutes the key
// sequence identically, so sums taken in this order are bit-stable under
// permutation.
std::vector<int> canonical_order(const std::vector<int>& types, const MatX3& coords) {
  std::vector<int> ord(types.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
    if (types[a] != types[b]) return types[a] < types[b];
    for (int j = 0; j < 3; ++j) {
      if (coords(a, j) != coords(b, j)) return coords(a, j) < coords(b, j);
    }
    return false;
  });
  return ord;
}

Eigen::VectorXd gram_symlog(const Mat3& lattice) {
  const Mat3 gram = lattice.transpose() * lattice;
  Eigen::VectorXd g(9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double v = gram(i, j);
      g(3 * i + j) = std::copysign(std::log1p(std::abs(v)), v);
    }
  }
  return g;
}

// The network runs entirely in canonical (content-sorted) atom order, so
// every internal matrix is bit-identical no matter how the caller ordered the
// atoms; inputs are permuted in at entry and row outputs scattered back at
// exit. Edge rows pair receiver ii with sender jj, both canonical.
Eigen::MatrixXd build_edge_inputs(const Eigen::MatrixXd& h, const DenoiserCache& cache,
                                  const DenoiserConfig& cfg) {
  const int n = static_cast<int>(cache.atom_types.size());
  Eigen::MatrixXd e(n * n, cfg.edge_input_dim());
  const int d = cfg.width;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int row = i * n + j;
      e.block(row, 0, 1, d) = h.row(i);
      e.block(row, d, 1, d) = h.row(j);
    }
  }
  e.middleCols(2 * d, 9) = cache.gram_symlog.transpose().replicate(n * n, 1);
  e.rightCols(6 * cfg.n_freq) = cache.fourier_block;
  return e;
}

struct Mlp3Refs {
  const Eigen::MatrixXd &w1, &b1, &w2, &b2, &w3, &b3;
};

Mlp3Refs layer_mlp(const DenoiserParams& p, int base) {
  return {p.tensors[base], p.tensors[base + 1], p.tensors[base + 2],
          p.tensors[base + 3], p.tensors[base + 4], p.tensors[base + 5]};
}

}  // namespace

std::size_t DenoiserParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

std::string denoiser_tensor_name(const DenoiserConfig& cfg, int index) {
  if (index == DenoiserParams::kAtomEmb) return "atom_embedding";
  if (index == DenoiserParams::kTimeW) return "time_w";
  if (index == DenoiserParams::kTimeB) return "time_b";
  const int head = 3 + DenoiserParams::kPerLayer * cfg.layers;
  if (index < head) {
    const int k = (index - 3) / DenoiserParams::kPerLayer;
    const int slot = (index - 3) % DenoiserParams::kPerLayer;
    static const char* names[] = {"msg_w1", "msg_b1", "msg_w2", "msg_b2",
                                  "msg_w3", "msg_b3", "upd_w1", "upd_b1",
                                  "upd_w2", "upd_b2", "upd_w3", "upd_b3"};
    return "layer" + std::to_string(k) + "." + names[slot];
  }
  static const char* head_names[] = {"lattice_head_w1", "lattice_head_b1",
                                     "lattice_head_w2", "lattice_head_b2",
                                     "coord_head_w1",   "coord_head_b1",
                                     "coord_head_w2",   "coord_head_b2"};
  return head_names[index - head];
}

DenoiserParams init_denoiser(const DenoiserConfig& cfg, std::uint64_t seed) {
  if (cfg.width < 1 || cfg.n_freq < 1 || cfg.layers < 1 || cfg.max_types < 1) {
    throw ValidationError("denoiser config fields must be positive");
  }
  DenoiserParams p;
  p.cfg = cfg;
  const int d = cfg.width;
  auto weight = [](int rows, int cols) { return Eigen::MatrixXd(rows, cols); };
  p.tensors.push_back(weight(cfg.max_types, d));
  p.tensors.push_back(weight(d, d));
  p.tensors.push_back(weight(d, 1));
  for (int k = 0; k < cfg.layers; ++k) {
    p.tensors.push_back(weight(d, cfg.edge_input_dim()));
    p.tensors.push_back(weight(d, 1));
    p.tensors.push_back(weight(d, d));
    p.tensors.push_back(weight(d, 1));
    p.tensors.push_back(weight(d, d));
    p.tensors.push_back(weight(d, 1));
    p.tensors.push_back(weight(d, 2 * d));
    p.tensors.push_back(weight(d, 1));
    p.tensors.push_back(weight(d, d));
    p.tensors.push_back(weight(d, 1));
    p.tensors.push_back(weight(d, d));
    p.tensors.push_back(weight(d, 1));
  }
  p.tensors.push_back(weight(d, d));
  p.tensors.push_back(weight(d, 1));
  p.tensors.push_back(weight(9, d));
  p.tensors.push_back(weight(9, 1));
  p.tensors.push_back(weight(d, d));
  p.tensors.push_back(weight(d, 1));
  p.tensors.push_back(weight(3, d));
  p.tensors.push_back(weight(3, 1));

  Rng rng(seed);
  for (auto& tensor : p.tensors) {
    if (tensor.cols() == 1) {
      tensor.setZero();  // bias
      continue;
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(tensor.cols()));
    for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
      for (Eigen::Index j = 0; j < tensor.cols(); ++j) {
        tensor(i, j) = (2.0 * rng.uniform01() - 1.0) * scale;
      }
    }
  }
  return p;
}

DenoiserParams zeros_like(const DenoiserParams& p) {
  DenoiserParams z;
  z.cfg = p.cfg;
  z.tensors.reserve(p.tensors.size());
  for (const auto& t : p.tensors) z.tensors.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  return z;
}

Eigen::VectorXd fourier_features(const Vec3& dx, int n_freq) {
  Eigen::VectorXd out(6 * n_freq);
  for (int axis = 0; axis < 3; ++axis) {
    for (int f = 1; f <= n_freq; ++f) {
      const double arg = kTwoPi * f * dx(axis);
      out(axis * 2 * n_freq + 2 * (f - 1)) = std::sin(arg);
      out(axis * 2 * n_freq + 2 * (f - 1) + 1) = std::cos(arg);
    }
  }
  return out;
}

DenoiserOutput denoiser_forward(const DenoiserParams& p, const std::vector<int>& atom_types,
                                const MatX3& frac_coords, const Mat3& lattice, int t,
                                DenoiserCache* cache) {
  const int n = static_cast<int>(atom_types.size());
  if (n < 1) throw ShapeMismatch("denoiser needs at least one atom");
  if (frac_coords.rows() != n) throw ShapeMismatch("atom_types vs frac_coords rows");
  for (int z : atom_types) {
    if (z < 1 || z > p.cfg.max_types) {
      throw ShapeMismatch("atom type outside embedding table: " + std::to_string(z));
    }
  }
  const int d = p.cfg.width;

  DenoiserCache local;
  DenoiserCache& c = cache ? *cache : local;
  c = DenoiserCache{};
  c.owner = &p;
  c.lattice = lattice;
  c.t = t;
  c.order = canonical_order(atom_types, frac_coords);
  // Canonical copies; everything below sees only these.
  c.atom_types.resize(static_cast<std::size_t>(n));
  c.frac_coords.resize(n, 3);
  for (int ii = 0; ii < n; ++ii) {
    const int src = c.order[static_cast<std::size_t>(ii)];
    c.atom_types[static_cast<std::size_t>(ii)] = atom_types[static_cast<std::size_t>(src)];
    c.frac_coords.row(ii) = frac_coords.row(src);
  }
  c.time_embed = sinusoidal_time_embed(t, d);
  c.gram_symlog = gram_symlog(lattice);
  c.fourier_block.resize(n * n, 6 * p.cfg.n_freq);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec3 dx = c.frac_coords.row(i) - c.frac_coords.row(j);
      c.fourier_block.row(i * n + j) = fourier_features(dx, p.cfg.n_freq).transpose();
    }
  }

  const Eigen::VectorXd time_vec =
      p.tensors[DenoiserParams::kTimeW] * c.time_embed + p.tensors[DenoiserParams::kTimeB].col(0);
  Eigen::MatrixXd h(n, d);
  for (int i = 0; i < n; ++i) {
    h.row(i) = p.tensors[DenoiserParams::kAtomEmb].row(c.atom_types[static_cast<std::size_t>(i)] - 1) +
               time_vec.transpose();
  }

  c.layers.resize(static_cast<std::size_t>(p.cfg.layers));
  for (int k = 0; k < p.cfg.layers; ++k) {
    auto& lc = c.layers[static_cast<std::size_t>(k)];
    lc.h_in = h;
    const auto m = layer_mlp(p, p.layer_base(k));
    const auto u = layer_mlp(p, p.layer_base(k) + 6);

    const Eigen::MatrixXd edge_in = build_edge_inputs(h, c, p.cfg);
    lc.msg_z1 = (edge_in * m.w1.transpose()).rowwise() + m.b1.col(0).transpose();
    lc.msg_a1 = silu(lc.msg_z1.array()).matrix();
    lc.msg_z2 = (lc.msg_a1 * m.w2.transpose()).rowwise() + m.b2.col(0).transpose();
    lc.msg_a2 = silu(lc.msg_z2.array()).matrix();
    lc.messages = (lc.msg_a2 * m.w3.transpose()).rowwise() + m.b3.col(0).transpose();

    lc.msg_sum.resize(n, d);
    for (int i = 0; i < n; ++i) {
      lc.msg_sum.row(i) = lc.messages.block(i * n, 0, n, d).colwise().sum();
    }

    lc.upd_in.resize(n, 2 * d);
    lc.upd_in << h, lc.msg_sum;
    lc.upd_z1 = (lc.upd_in * u.w1.transpose()).rowwise() + u.b1.col(0).transpose();
    lc.upd_a1 = silu(lc.upd_z1.array()).matrix();
    lc.upd_z2 = (lc.upd_a1 * u.w2.transpose()).rowwise() + u.b2.col(0).transpose();
    lc.upd_a2 = silu(lc.upd_z2.array()).matrix();
    h = h + ((lc.upd_a2 * u.w3.transpose()).rowwise() + u.b3.col(0).transpose());
  }
  c.h_final = h;

  c.pooled = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) c.pooled += h.row(i).transpose();
  c.pooled /= static_cast<double>(n);

  const int hb = p.head_base();
  c.lat_z1 = p.tensors[hb] * c.pooled + p.tensors[hb + 1].col(0);
  c.lat_a1 = silu(c.lat_z1.array()).matrix();
  const Eigen::VectorXd r = p.tensors[hb + 2] * c.lat_a1 + p.tensors[hb + 3].col(0);
  Mat3 r_mat;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r_mat(i, j) = r(3 * i + j);
  }

  c.coord_z1 = (h * p.tensors[hb + 4].transpose()).rowwise() + p.tensors[hb + 5].col(0).transpose();
  c.coord_a1 = silu(c.coord_z1.array()).matrix();

  DenoiserOutput out;
  out.lattice_noise = lattice * r_mat;
  const Eigen::MatrixXd score_canonical =
      (c.coord_a1 * p.tensors[hb + 6].transpose()).rowwise() + p.tensors[hb + 7].col(0).transpose();
  out.coord_score.resize(n, 3);
  for (int ii = 0; ii < n; ++ii) {
    out.coord_score.row(c.order[static_cast<std::size_t>(ii)]) = score_canonical.row(ii);
  }
  if (!out.lattice_noise.allFinite() || !out.coord_score.allFinite()) {
    throw NonFiniteActivation("denoiser output is not finite");
  }
  c.filled = true;
  return out;
}

DenoiserParams denoiser_backward(const DenoiserParams& p, const DenoiserCache& cache,
                                 const Mat3& d_lattice_noise, const MatX3& d_coord_score) {
  if (!cache.filled || cache.owner != &p) {
    throw StaleCache("backward requires a cache filled by forward on the same params");
  }
  const int n = static_cast<int>(cache.atom_types.size());
  const int d = p.cfg.width;
  if (d_coord_score.rows() != n) throw ShapeMismatch("upstream coord gradient rows");

  DenoiserParams g = zeros_like(p);
  const int hb = p.head_base();

  // Upstream coordinate gradients arrive in caller order; move them into the
  // canonical order the cache was built with.
  Eigen::MatrixXd d_score(n, 3);
  for (int ii = 0; ii < n; ++ii) {
    d_score.row(ii) = d_coord_score.row(cache.order[static_cast<std::size_t>(ii)]);
  }

  // Coordinate head.
  Eigen::MatrixXd d_h = Eigen::MatrixXd::Zero(n, d);
  {
    g.tensors[hb + 6] += d_score.transpose() * cache.coord_a1;
    g.tensors[hb + 7].col(0) += d_score.colwise().sum().transpose();
    Eigen::MatrixXd d_a1 = d_score * p.tensors[hb + 6];
    Eigen::MatrixXd d_z1 = (d_a1.array() * silu_grad(cache.coord_z1.array())).matrix();
    g.tensors[hb + 4] += d_z1.transpose() * cache.h_final;
    g.tensors[hb + 5].col(0) += d_z1.colwise().sum().transpose();
    d_h += d_z1 * p.tensors[hb + 4];
  }

  // Lattice head.
  {
    const Mat3 d_r_mat = cache.lattice.transpose() * d_lattice_noise;
    Eigen::VectorXd d_r(9);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) d_r(3 * i + j) = d_r_mat(i, j);
    }
    g.tensors[hb + 2] += d_r * cache.lat_a1.transpose();
    g.tensors[hb + 3].col(0) += d_r;
    Eigen::VectorXd d_a1 = p.tensors[hb + 2].transpose() * d_r;
    Eigen::VectorXd d_z1 = (d_a1.array() * silu_grad(cache.lat_z1.array()).col(0)).matrix();
    g.tensors[hb] += d_z1 * cache.pooled.transpose();
    g.tensors[hb + 1].col(0) += d_z1;
    const Eigen::VectorXd d_pooled = p.tensors[hb].transpose() * d_z1;
    d_h.rowwise() += d_pooled.transpose() / static_cast<double>(n);
  }

  // Layers in reverse.
  for (int k = p.cfg.layers - 1; k >= 0; --k) {
    const auto& lc = cache.layers[static_cast<std::size_t>(k)];
    const int base = p.layer_base(k);
    const auto m = layer_mlp(p, base);
    const auto u = layer_mlp(p, base + 6);

    // h_out = h_in + upd(h_in, sum); d_h currently holds d(h_out).
    const Eigen::MatrixXd d_update = d_h;
    g.tensors[base + 10] += d_update.transpose() * lc.upd_a2;
    g.tensors[base + 11].col(0) += d_update.colwise().sum().transpose();
    Eigen::MatrixXd d_ua2 = d_update * u.w3;
    Eigen::MatrixXd d_uz2 = (d_ua2.array() * silu_grad(lc.upd_z2.array())).matrix();
    g.tensors[base + 8] += d_uz2.transpose() * lc.upd_a1;
    g.tensors[base + 9].col(0) += d_uz2.colwise().sum().transpose();
    Eigen::MatrixXd d_ua1 = d_uz2 * u.w2;
    Eigen::MatrixXd d_uz1 = (d_ua1.array() * silu_grad(lc.upd_z1.array())).matrix();
    g.tensors[base + 6] += d_uz1.transpose() * lc.upd_in;
    g.tensors[base + 7].col(0) += d_uz1.colwise().sum().transpose();
    Eigen::MatrixXd d_upd_in = d_uz1 * u.w1;

    Eigen::MatrixXd d_h_in = d_h + d_upd_in.leftCols(d);
    const Eigen::MatrixXd d_msg_sum = d_upd_in.rightCols(d);

    Eigen::MatrixXd d_messages(n * n, d);
    for (int i = 0; i < n; ++i) {
      d_messages.block(i * n, 0, n, d) = d_msg_sum.row(i).replicate(n, 1);
    }
    Eigen::MatrixXd d_ma2 = d_messages * m.w3;
    g.tensors[base + 4] += d_messages.transpose() * lc.msg_a2;
    g.tensors[base + 5].col(0) += d_messages.colwise().sum().transpose();
    Eigen::MatrixXd d_mz2 = (d_ma2.array() * silu_grad(lc.msg_z2.array())).matrix();
    g.tensors[base + 2] += d_mz2.transpose() * lc.msg_a1;
    g.tensors[base + 3].col(0) += d_mz2.colwise().sum().transpose();
    Eigen::MatrixXd d_ma1 = d_mz2 * m.w2;
    Eigen::MatrixXd d_mz1 = (d_ma1.array() * silu_grad(lc.msg_z1.array())).matrix();
    const Eigen::MatrixXd edge_in = build_edge_inputs(lc.h_in, cache, p.cfg);
    g.tensors[base] += d_mz1.transpose() * edge_in;
    g.tensors[base + 1].col(0) += d_mz1.colwise().sum().transpose();
    const Eigen::MatrixXd d_edge = d_mz1 * m.w1;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int row = i * n + j;
        d_h_in.row(i) += d_edge.block(row, 0, 1, d);
        d_h_in.row(j) += d_edge.block(row, d, 1, d);
      }
    }
    d_h = std::move(d_h_in);
  }

  // Input embeddings: h0_i = atom_emb[type_i] + time_w * pe + time_b.
  Eigen::VectorXd d_time_vec = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    g.tensors[DenoiserParams::kAtomEmb].row(cache.atom_types[static_cast<std::size_t>(i)] - 1) +=
        d_h.row(i);
    d_time_vec += d_h.row(i).transpose();
  }
  g.tensors[DenoiserParams::kTimeW] += d_time_vec * cache.time_embed.transpose();
  g.tensors[DenoiserParams::kTimeB].col(0) += d_time_vec;
  return g;
}

}  // namespace crysgen
