#include "crysgen/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "crysgen/elements.hpp"
#include "crysgen/errors.hpp"
#include "crysgen/text.hpp"

namespace crysgen {

namespace {
constexpr double kRdfCutoff = 8.0;
constexpr int kRdfBins = 32;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

bool structural_validity(const Crystal& c, double min_dist) {
  const int n = c.num_atoms();
  if (n == 1) {
    // Nearest periodic self-image.
    double best = std::numeric_limits<double>::infinity();
    for (int k0 = -1; k0 <= 1; ++k0) {
      for (int k1 = -1; k1 <= 1; ++k1) {
        for (int k2 = -1; k2 <= 1; ++k2) {
          if (k0 == 0 && k1 == 0 && k2 == 0) continue;
          best = std::min(best, (Vec3(k0, k1, k2).transpose() * c.lattice).norm());
        }
      }
    }
    return best > min_dist;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = min_periodic_distance(c.frac_coords.row(i).transpose(),
                                             c.frac_coords.row(j).transpose(), c.lattice);
      if (d <= min_dist) return false;
    }
  }
  return true;
}

namespace {

bool neutral_assignment_exists(const std::vector<std::pair<int, long long>>& species) {
  // One oxidation state per species; DFS with partial-sum bounds.
  const std::size_t k = species.size();
  std::vector<const std::vector<int>*> states(k);
  std::vector<long long> lo(k + 1, 0), hi(k + 1, 0);
  for (std::size_t i = 0; i < k; ++i) {
    states[i] = &common_oxidation_states(species[i].first);
    if (states[i]->empty()) return false;
  }
  for (std::size_t i = k; i-- > 0;) {
    const auto [mn, mx] = std::minmax_element(states[i]->begin(), states[i]->end());
    lo[i] = lo[i + 1] + species[i].second * *mn;
    hi[i] = hi[i + 1] + species[i].second * *mx;
  }
  std::function<bool(std::size_t, long long)> dfs = [&](std::size_t i, long long sum) {
    if (i == k) return sum == 0;
    if (sum + lo[i] > 0 || sum + hi[i] < 0) return false;
    for (int s : *states[i]) {
      if (dfs(i + 1, sum + species[i].second * s)) return true;
    }
    return false;
  };
  return dfs(0, 0);
}

}  // namespace

bool compositional_validity(const Crystal& c) {
  std::map<int, long long> counts;
  for (int z : c.atom_types) counts[z] += 1;
  if (counts.size() == 1) return true;  // elemental solid, neutral state
  std::vector<std::pair<int, long long>> species(counts.begin(), counts.end());
  return neutral_assignment_exists(species);
}

Eigen::VectorXd fingerprint(const Crystal& c) {
  Eigen::VectorXd fp = Eigen::VectorXd::Zero(kMaxAtomicNumber + kRdfBins);
  const int n = c.num_atoms();
  for (int z : c.atom_types) fp(z - 1) += 1.0;
  fp.head(kMaxAtomicNumber) /= static_cast<double>(n);

  // Image range wide enough to cover the cutoff plus one wrapped cell.
  const Mat3 inv = c.lattice.inverse();
  int range[3];
  for (int axis = 0; axis < 3; ++axis) {
    range[axis] = static_cast<int>(std::ceil(kRdfCutoff * inv.col(axis).norm())) + 1;
  }
  Eigen::VectorXd rdf = Eigen::VectorXd::Zero(kRdfBins);
  const double bin_width = kRdfCutoff / kRdfBins;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec3 d = c.frac_coords.row(i) - c.frac_coords.row(j);
      for (int k0 = -range[0]; k0 <= range[0]; ++k0) {
        for (int k1 = -range[1]; k1 <= range[1]; ++k1) {
          for (int k2 = -range[2]; k2 <= range[2]; ++k2) {
            if (i == j && k0 == 0 && k1 == 0 && k2 == 0) continue;
            const double dist = ((d + Vec3(k0, k1, k2)).transpose() * c.lattice).norm();
            if (dist > 0.0 && dist < kRdfCutoff) {
              rdf(static_cast<int>(dist / bin_width)) += 1.0;
            }
          }
        }
      }
    }
  }
  // g(r)-style normalization against the ideal-gas pair count.
  const double number_density = n / c.volume();
  for (int b = 0; b < kRdfBins; ++b) {
    const double r_mid = (b + 0.5) * bin_width;
    const double shell = 4.0 * kPi * r_mid * r_mid * bin_width * number_density * n;
    rdf(b) /= shell;
  }
  fp.tail(kRdfBins) = rdf;
  return fp;
}

CoverageResult coverage(const std::vector<Eigen::VectorXd>& gen,
                        const std::vector<Eigen::VectorXd>& ref, double d_threshold) {
  if (gen.empty() || ref.empty()) throw EmptySet("coverage needs non-empty sets");
  auto covered = [&](const Eigen::VectorXd& probe, const std::vector<Eigen::VectorXd>& pool) {
    for (const auto& other : pool) {
      if ((probe - other).norm() <= d_threshold) return true;
    }
    return false;
  };
  CoverageResult out;
  int hit = 0;
  for (const auto& r : ref) hit += covered(r, gen) ? 1 : 0;
  out.recall_pct = 100.0 * hit / static_cast<double>(ref.size());
  hit = 0;
  for (const auto& g : gen) hit += covered(g, ref) ? 1 : 0;
  out.precision_pct = 100.0 * hit / static_cast<double>(gen.size());
  return out;
}

double emd_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptySet("emd_1d needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Integrate |F_a - F_b| across the merged breakpoints.
  double emd = 0.0;
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  while (i < a.size() || j < b.size()) {
    const double xa = i < a.size() ? a[i] : std::numeric_limits<double>::infinity();
    const double xb = j < b.size() ? b[j] : std::numeric_limits<double>::infinity();
    const double x = std::min(xa, xb);
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    emd += std::abs(fa - fb) * (x - prev);
    prev = x;
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
  }
  return emd;
}

// --- structure matcher --------------------------------------------------------

std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost) {
  // Potential-based O(n^3) assignment (1-indexed internal arrays).
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

namespace {

struct AlignmentScore {
  double rms = std::numeric_limits<double>::infinity();
  double max_disp = std::numeric_limits<double>::infinity();
};

struct SpeciesBlock {
  std::vector<int> idx_a;
  std::vector<int> idx_b;
};

// Cartesian lattice translations of the 27 neighbour images.
std::vector<Vec3> image_translations(const Mat3& lattice) {
  std::vector<Vec3> imgs;
  imgs.reserve(27);
  for (int k0 = -1; k0 <= 1; ++k0) {
    for (int k1 = -1; k1 <= 1; ++k1) {
      for (int k2 = -1; k2 <= 1; ++k2) {
        imgs.push_back(lattice.transpose() * Vec3(k0, k1, k2));
      }
    }
  }
  return imgs;
}

// Displacement (angstrom) between fractional sites pa and pb + shift under
// the comparison lattice, minimized over neighbour images.
double site_distance2(const Vec3& pa, const Vec3& pb, const Vec3& shift, const Mat3& lattice,
                      const std::vector<Vec3>& images) {
  Vec3 d = pa - pb - shift;
  for (int k = 0; k < 3; ++k) d(k) = wrap_centered(d(k));
  const Vec3 base = lattice.transpose() * d;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& img : images) {
    best = std::min(best, (base + img).squaredNorm());
  }
  return best;
}

AlignmentScore score_translation(const Crystal& a, const Crystal& b,
                                 const std::vector<SpeciesBlock>& blocks, const Vec3& shift,
                                 const Mat3& lattice, const std::vector<Vec3>& images,
                                 std::vector<std::vector<int>>* out_assign) {
  AlignmentScore s;
  double sum2 = 0.0, maxd = 0.0;
  int count = 0;
  if (out_assign) out_assign->clear();
  for (const auto& blk : blocks) {
    const int m = static_cast<int>(blk.idx_a.size());
    Eigen::MatrixXd cost(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        cost(i, j) = site_distance2(a.frac_coords.row(blk.idx_a[i]).transpose(),
                                    b.frac_coords.row(blk.idx_b[j]).transpose(), shift,
                                    lattice, images);
      }
    }
    const auto assign = hungarian_assignment(cost);
    for (int i = 0; i < m; ++i) {
      sum2 += cost(i, assign[i]);
      maxd = std::max(maxd, std::sqrt(cost(i, assign[i])));
      ++count;
    }
    if (out_assign) out_assign->push_back(assign);
  }
  s.rms = std::sqrt(sum2 / count);
  s.max_disp = maxd;
  return s;
}

// Iterates assignment <-> optimal mean shift from a starting translation.
AlignmentScore refine_translation(const Crystal& a, const Crystal& b,
                                  const std::vector<SpeciesBlock>& blocks, Vec3 shift,
                                  const Mat3& lattice, const std::vector<Vec3>& images) {
  AlignmentScore best = score_translation(a, b, blocks, shift, lattice, images, nullptr);
  for (int iter = 0; iter < 40; ++iter) {
    std::vector<std::vector<int>> assign;
    score_translation(a, b, blocks, shift, lattice, images, &assign);
    Vec3 delta = Vec3::Zero();
    int count = 0;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& blk = blocks[bi];
      for (std::size_t i = 0; i < blk.idx_a.size(); ++i) {
        const int ia = blk.idx_a[i];
        const int jb = blk.idx_b[assign[bi][i]];
        for (int k = 0; k < 3; ++k) {
          delta(k) += wrap_centered(a.frac_coords(ia, k) - b.frac_coords(jb, k) - shift(k));
        }
        ++count;
      }
    }
    delta /= static_cast<double>(count);
    shift += delta;
    const AlignmentScore cur = score_translation(a, b, blocks, shift, lattice, images, nullptr);
    if (cur.rms < best.rms) best = cur;
    if (delta.norm() < 1e-12) break;
  }
  return best;
}

}  // namespace

MatchResult structure_match(const Crystal& a, const Crystal& b, const MatchTolerances& tol) {
  MatchResult res;
  std::map<int, int> ca, cb;
  for (int z : a.atom_types) ca[z] += 1;
  for (int z : b.atom_types) cb[z] += 1;
  if (ca != cb) return res;

  const LatticeParams pa = params_from_lattice(a.lattice);
  const LatticeParams pb = params_from_lattice(b.lattice);
  auto len_ok = [&](double la, double lb) {
    return std::abs(la - lb) <= tol.ltol * 0.5 * (la + lb);
  };
  if (!len_ok(pa.a, pb.a) || !len_ok(pa.b, pb.b) || !len_ok(pa.c, pb.c)) return res;
  if (std::abs(pa.alpha - pb.alpha) > tol.angle_tol ||
      std::abs(pa.beta - pb.beta) > tol.angle_tol ||
      std::abs(pa.gamma - pb.gamma) > tol.angle_tol) {
    return res;
  }

  const LatticeParams mid{0.5 * (pa.a + pb.a),         0.5 * (pa.b + pb.b),
                          0.5 * (pa.c + pb.c),         0.5 * (pa.alpha + pb.alpha),
                          0.5 * (pa.beta + pb.beta),   0.5 * (pa.gamma + pb.gamma)};
  const Mat3 cmp_lattice = lattice_from_params(mid);
  const std::vector<Vec3> images = image_translations(cmp_lattice);

  std::vector<SpeciesBlock> blocks;
  for (const auto& [z, cnt] : ca) {
    SpeciesBlock blk;
    for (int i = 0; i < a.num_atoms(); ++i) {
      if (a.atom_types[static_cast<std::size_t>(i)] == z) blk.idx_a.push_back(i);
    }
    for (int i = 0; i < b.num_atoms(); ++i) {
      if (b.atom_types[static_cast<std::size_t>(i)] == z) blk.idx_b.push_back(i);
    }
    blocks.push_back(std::move(blk));
  }

  // Coarse translation scan, then local refinement of the best candidates.
  constexpr double kGridStep = 0.05;
  const int grid = static_cast<int>(std::round(1.0 / kGridStep));
  std::vector<std::pair<double, Vec3>> candidates;
  for (int g0 = 0; g0 < grid; ++g0) {
    for (int g1 = 0; g1 < grid; ++g1) {
      for (int g2 = 0; g2 < grid; ++g2) {
        const Vec3 shift(g0 * kGridStep, g1 * kGridStep, g2 * kGridStep);
        const AlignmentScore s =
            score_translation(a, b, blocks, shift, cmp_lattice, images, nullptr);
        candidates.emplace_back(s.rms, shift);
      }
    }
  }
  std::partial_sort(candidates.begin(), candidates.begin() + 3, candidates.end(),
                    [](const auto& x, const auto& y) { return x.first < y.first; });

  AlignmentScore best;
  for (int k = 0; k < 3; ++k) {
    const AlignmentScore s =
        refine_translation(a, b, blocks, candidates[k].second, cmp_lattice, images);
    if (s.rms < best.rms) best = s;
  }

  const double va = a.volume() / a.num_atoms();
  const double vb = b.volume() / b.num_atoms();
  const double norm = std::cbrt(0.5 * (va + vb));
  if (best.max_disp / norm <= tol.stol) {
    res.matched = true;
    res.rmse = best.rms / norm;
  }
  return res;
}

double composition_match_rate(const std::vector<Crystal>& gen,
                              const std::vector<Crystal>& targets) {
  if (gen.size() != targets.size()) {
    throw LengthMismatch("paired sequences differ in length");
  }
  if (gen.empty()) throw EmptySet("composition_match_rate needs non-empty input");
  int hits = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    hits += reduced_formula(gen[i].atom_types) == reduced_formula(targets[i].atom_types) ? 1 : 0;
  }
  return 100.0 * hits / static_cast<double>(gen.size());
}

double composition_match_rate(const std::vector<Crystal>& gen,
                              const std::vector<std::string>& target_formulas) {
  if (gen.size() != target_formulas.size()) {
    throw LengthMismatch("paired sequences differ in length");
  }
  if (gen.empty()) throw EmptySet("composition_match_rate needs non-empty input");
  int hits = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    std::vector<int> types;
    for (const auto& [z, n] : parse_formula(target_formulas[i])) {
      types.insert(types.end(), static_cast<std::size_t>(n), z);
    }
    hits += reduced_formula(gen[i].atom_types) == reduced_formula(types) ? 1 : 0;
  }
  return 100.0 * hits / static_cast<double>(gen.size());
}

namespace {

template <typename Fn>
void parallel_indexed(int n, int jobs, Fn fn) {
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

MetricsReport evaluate(const std::vector<Crystal>& gen, const std::vector<Crystal>& ref,
                       const MatchTolerances& tol, const EvalThresholds& thresholds,
                       EvalMode mode, int jobs) {
  if (gen.empty() || ref.empty()) throw EmptySet("evaluate needs non-empty sets");
  if (mode == EvalMode::Csp && gen.size() != ref.size()) {
    throw LengthMismatch("csp mode needs paired files of equal length");
  }
  MetricsReport r;
  r.n_generated = static_cast<int>(gen.size());
  r.n_reference = static_cast<int>(ref.size());
  r.fingerprint_threshold = thresholds.fingerprint_threshold;

  int sv = 0, cv = 0;
  for (const auto& c : gen) {
    sv += structural_validity(c, thresholds.validity_min_dist) ? 1 : 0;
    cv += compositional_validity(c) ? 1 : 0;
  }
  r.structural_validity_pct = 100.0 * sv / gen.size();
  r.compositional_validity_pct = 100.0 * cv / gen.size();

  std::vector<Eigen::VectorXd> fp_gen(gen.size()), fp_ref(ref.size());
  parallel_indexed(static_cast<int>(gen.size()), jobs,
                   [&](int i) { fp_gen[static_cast<std::size_t>(i)] = fingerprint(gen[i]); });
  parallel_indexed(static_cast<int>(ref.size()), jobs,
                   [&](int i) { fp_ref[static_cast<std::size_t>(i)] = fingerprint(ref[i]); });
  const CoverageResult cov = coverage(fp_gen, fp_ref, thresholds.fingerprint_threshold);
  r.cov_recall_pct = cov.recall_pct;
  r.cov_precision_pct = cov.precision_pct;

  auto densities = [](const std::vector<Crystal>& set) {
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& c : set) out.push_back(density(c));
    return out;
  };
  auto n_elems = [](const std::vector<Crystal>& set) {
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& c : set) {
      out.push_back(static_cast<double>(
          std::set<int>(c.atom_types.begin(), c.atom_types.end()).size()));
    }
    return out;
  };
  r.emd_density = emd_1d(densities(gen), densities(ref));
  r.emd_nelem = emd_1d(n_elems(gen), n_elems(ref));

  double rmse_sum = 0.0;
  int matched = 0;
  if (mode == EvalMode::Gen) {
    std::vector<double> best_rmse(ref.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_indexed(static_cast<int>(ref.size()), jobs, [&](int i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& g : gen) {
        const MatchResult m = structure_match(g, ref[static_cast<std::size_t>(i)], tol);
        if (m.matched) best = std::min(best, m.rmse);
      }
      if (std::isfinite(best)) best_rmse[static_cast<std::size_t>(i)] = best;
    });
    for (double v : best_rmse) {
      if (!std::isnan(v)) {
        ++matched;
        rmse_sum += v;
      }
    }
    r.match_rate_pct = 100.0 * matched / ref.size();
  } else {
    std::vector<double> pair_rmse(ref.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_indexed(static_cast<int>(ref.size()), jobs, [&](int i) {
      const MatchResult m =
          structure_match(gen[static_cast<std::size_t>(i)], ref[static_cast<std::size_t>(i)], tol);
      if (m.matched) pair_rmse[static_cast<std::size_t>(i)] = m.rmse;
    });
    for (double v : pair_rmse) {
      if (!std::isnan(v)) {
        ++matched;
        rmse_sum += v;
      }
    }
    r.match_rate_pct = 100.0 * matched / ref.size();
    r.composition_match_pct = composition_match_rate(gen, ref);
  }
  if (matched > 0) r.rmse_mean = rmse_sum / matched;
  return r;
}

std::string report_table(const MetricsReport& r) {
  std::ostringstream os;
  auto num = [](double v) {
    if (std::isnan(v)) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  os << "            | Validity              | Coverage              | Property\n";
  os << "            | Struct     Comp       | Precision  Recall     | Density    # Elem\n";
  os << "  gen/ref   | " << num(r.structural_validity_pct) << "   " << num(r.compositional_validity_pct)
     << "   | " << num(r.cov_precision_pct) << "   " << num(r.cov_recall_pct) << "   | "
     << num(r.emd_density) << "   " << num(r.emd_nelem) << "\n";
  os << "\n";
  os << "  match rate: " << num(r.match_rate_pct) << " %   rmse: " << num(r.rmse_mean)
     << "   composition match: " << num(r.composition_match_pct) << " %\n";
  os << "  n_generated: " << r.n_generated << "   n_reference: " << r.n_reference
     << "   fingerprint threshold: " << num(r.fingerprint_threshold) << "\n";
  return os.str();
}

}  // namespace crysgen
