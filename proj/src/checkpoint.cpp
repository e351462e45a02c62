#include "crysgen/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "crysgen/errors.hpp"

namespace crysgen {

LatticeStandardizer fit_standardizer(const std::vector<Crystal>& dataset, bool enabled) {
  LatticeStandardizer st;
  st.enabled = enabled;
  if (!enabled || dataset.empty()) return st;
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& c : dataset) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        sum += c.lattice(i, j);
        sum2 += c.lattice(i, j) * c.lattice(i, j);
        ++n;
      }
    }
  }
  st.mean = sum / static_cast<double>(n);
  const double var = sum2 / static_cast<double>(n) - st.mean * st.mean;
  st.stddev = var > 1e-12 ? std::sqrt(var) : 1.0;
  return st;
}

namespace {

constexpr char kMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::istream& is) {
  const auto len = get<std::uint64_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(os, m(i, j));
  }
}
Eigen::MatrixXd get_matrix(std::istream& is) {
  const auto rows = get<std::uint64_t>(is);
  const auto cols = get<std::uint64_t>(is);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>(is);
  }
  return m;
}

void put_tensors(std::ostream& os, const DenoiserParams& p) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensors.size()));
  for (const auto& t : p.tensors) put_matrix(os, t);
}
void get_tensors(std::istream& is, DenoiserParams& p) {
  const auto n = get<std::uint32_t>(is);
  p.tensors.clear();
  p.tensors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) p.tensors.push_back(get_matrix(is));
}

void put_dvec(std::ostream& os, const std::vector<double>& v) {
  put<std::uint64_t>(os, v.size());
  for (double x : v) put<double>(os, x);
}
std::vector<double> get_dvec(std::istream& is) {
  std::vector<double> v(get<std::uint64_t>(is));
  for (auto& x : v) x = get<double>(is);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, 1);  // version

  const TrainConfig& tc = ck.config;
  put<std::int32_t>(out, tc.batch_size);
  put<double>(out, tc.learning_rate);
  put<std::int32_t>(out, tc.diffusion_steps);
  put<std::int32_t>(out, tc.epochs);
  put<std::int64_t>(out, tc.max_steps);
  put<std::uint64_t>(out, tc.seed);
  put<double>(out, tc.adam_beta1);
  put<double>(out, tc.adam_beta2);
  put<double>(out, tc.adam_eps);
  put<std::int64_t>(out, tc.checkpoint_every);
  put<double>(out, tc.grad_clip_norm);
  put<std::uint8_t>(out, tc.standardize_lattice ? 1 : 0);
  put<double>(out, tc.sigma_min);
  put<double>(out, tc.sigma_max);
  put<std::int32_t>(out, tc.net.width);
  put<std::int32_t>(out, tc.net.n_freq);
  put<std::int32_t>(out, tc.net.layers);
  put<std::int32_t>(out, tc.net.max_types);

  put<std::int32_t>(out, ck.schedules.total_steps);
  put<double>(out, ck.schedules.sigma_min);
  put<double>(out, ck.schedules.sigma_max);
  put<double>(out, ck.schedules.cosine_offset);
  put<double>(out, ck.schedules.terminal_tv_uniform);
  put_dvec(out, ck.schedules.betas);
  put_dvec(out, ck.schedules.alphas);
  put_dvec(out, ck.schedules.alpha_bars);
  put_dvec(out, ck.schedules.sigmas);

  put<std::uint8_t>(out, ck.standardizer.enabled ? 1 : 0);
  put<double>(out, ck.standardizer.mean);
  put<double>(out, ck.standardizer.stddev);

  put<std::uint64_t>(out, ck.step);
  put_tensors(out, ck.params);
  put_tensors(out, ck.adam_m);
  put_tensors(out, ck.adam_v);

  put_string(out, ck.rng_noise_state);
  put_string(out, ck.rng_data_state);
  put<std::uint64_t>(out, ck.epoch_order.size());
  for (auto idx : ck.epoch_order) put<std::uint32_t>(out, idx);
  put<std::uint64_t>(out, ck.epoch_cursor);

  put<double>(out, ck.loss_stats.ema_coord);
  put<double>(out, ck.loss_stats.ema_lattice);
  put<std::int64_t>(out, ck.loss_stats.count);
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError("not a checkpoint file: " + path);
  }
  const auto version = get<std::uint32_t>(in);
  if (version != 1) throw IoError("unsupported checkpoint version");

  Checkpoint ck;
  TrainConfig& tc = ck.config;
  tc.batch_size = get<std::int32_t>(in);
  tc.learning_rate = get<double>(in);
  tc.diffusion_steps = get<std::int32_t>(in);
  tc.epochs = get<std::int32_t>(in);
  tc.max_steps = get<std::int64_t>(in);
  tc.seed = get<std::uint64_t>(in);
  tc.adam_beta1 = get<double>(in);
  tc.adam_beta2 = get<double>(in);
  tc.adam_eps = get<double>(in);
  tc.checkpoint_every = get<std::int64_t>(in);
  tc.grad_clip_norm = get<double>(in);
  tc.standardize_lattice = get<std::uint8_t>(in) != 0;
  tc.sigma_min = get<double>(in);
  tc.sigma_max = get<double>(in);
  tc.net.width = get<std::int32_t>(in);
  tc.net.n_freq = get<std::int32_t>(in);
  tc.net.layers = get<std::int32_t>(in);
  tc.net.max_types = get<std::int32_t>(in);

  ck.schedules.total_steps = get<std::int32_t>(in);
  ck.schedules.sigma_min = get<double>(in);
  ck.schedules.sigma_max = get<double>(in);
  ck.schedules.cosine_offset = get<double>(in);
  ck.schedules.terminal_tv_uniform = get<double>(in);
  ck.schedules.betas = get_dvec(in);
  ck.schedules.alphas = get_dvec(in);
  ck.schedules.alpha_bars = get_dvec(in);
  ck.schedules.sigmas = get_dvec(in);

  ck.standardizer.enabled = get<std::uint8_t>(in) != 0;
  ck.standardizer.mean = get<double>(in);
  ck.standardizer.stddev = get<double>(in);

  ck.step = get<std::uint64_t>(in);
  ck.params.cfg = tc.net;
  ck.adam_m.cfg = tc.net;
  ck.adam_v.cfg = tc.net;
  get_tensors(in, ck.params);
  get_tensors(in, ck.adam_m);
  get_tensors(in, ck.adam_v);

  ck.rng_noise_state = get_string(in);
  ck.rng_data_state = get_string(in);
  ck.epoch_order.resize(get<std::uint64_t>(in));
  for (auto& idx : ck.epoch_order) idx = get<std::uint32_t>(in);
  ck.epoch_cursor = get<std::uint64_t>(in);

  ck.loss_stats.ema_coord = get<double>(in);
  ck.loss_stats.ema_lattice = get<double>(in);
  ck.loss_stats.count = get<std::int64_t>(in);
  if (!in) throw IoError("truncated checkpoint: " + path);
  if (static_cast<int>(ck.params.tensors.size()) != ck.params.num_tensors()) {
    throw IoError("checkpoint tensor count mismatch");
  }
  return ck;
}

}  // namespace crysgen
