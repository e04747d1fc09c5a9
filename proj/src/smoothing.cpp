#include "otmap/smoothing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "otmap/numerics.hpp"

namespace otmap {

namespace {

constexpr double kTailMass = 1e-10;

double horner(const std::vector<double>& c, double u) {
  double r = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) r = r * u + c[k];
  return r;
}

// Sign changes of K on [0, R], refined by bisection; K is even so the
// negative side mirrors these.
std::vector<double> positive_roots(const KernelSpec& k, double radius) {
  std::vector<double> roots;
  const int steps = 4000;
  double prev_u = 0.0, prev = k(0.0);
  for (int t = 1; t <= steps; ++t) {
    const double u = radius * t / steps;
    const double val = k(u);
    if ((prev < 0.0) != (val < 0.0)) {
      double lo = prev_u, hi = u;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((k(mid) < 0.0) == (prev < 0.0))
          lo = mid;
        else
          hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_u = u;
    prev = val;
  }
  return roots;
}

// Integral over [-R, R] of an even-or-odd integrand, split at the kernel's
// sign changes so the pieces are smooth.
double integrate_split(const std::function<double(double)>& f, const std::vector<double>& roots,
                       double radius) {
  std::vector<double> cuts{-radius};
  for (auto it = roots.rbegin(); it != roots.rend(); ++it) cuts.push_back(-*it);
  cuts.push_back(0.0);
  for (double r : roots) cuts.push_back(r);
  cuts.push_back(radius);
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) total += integrate(f, cuts[p], cuts[p + 1], 1e-14);
  return total;
}

// Draws from |K| / |K|_1 by rejection under N(0, sigma^2).
class AbsKernelSampler {
 public:
  explicit AbsKernelSampler(const KernelSpec& k) : kernel_(k) {
    double best_c = std::numeric_limits<double>::infinity();
    for (double sigma = 1.05; sigma <= 2.5; sigma += 0.05) {
      double c = 0.0;
      for (double u = 0.0; u <= 40.0; u += 1e-3) c = std::max(c, std::abs(k(u)) / normal_pdf(u, sigma));
      if (c < best_c) {
        best_c = c;
        sigma_ = sigma;
      }
    }
    c_ = best_c * (1.0 + 1e-6);
  }

  double draw(Rng& rng) const {
    for (;;) {
      const double u = sigma_ * standard_normal(rng);
      if (uniform01(rng) * c_ * normal_pdf(u, sigma_) <= std::abs(kernel_(u))) return u;
    }
  }

 private:
  static double normal_pdf(double u, double sigma) {
    const double z = u / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  }

  const KernelSpec& kernel_;
  double sigma_ = 1.5;
  double c_ = 1.0;
};

}  // namespace

// ------------------------------------------------------------------ kernel

double KernelSpec::operator()(double u) const { return std::exp(-0.5 * u * u) * horner(poly, u); }

KernelSpec hermite_kernel(int s) {
  if (s < 0) throw Error("hermite_kernel: s must be nonnegative");
  KernelSpec k;
  k.s = s;
  k.order = 2 * s + 2;
  const int top = 2 * s + 2;
  // He_{m+1} = u He_m - m He_{m-1}
  std::vector<std::vector<double>> he{{1.0}, {0.0, 1.0}};
  for (int m = 1; m < top; ++m) {
    std::vector<double> next(static_cast<std::size_t>(m + 2), 0.0);
    for (std::size_t c = 0; c < he[m].size(); ++c) next[c + 1] += he[m][c];
    for (std::size_t c = 0; c < he[m - 1].size(); ++c) next[c] -= m * he[m - 1][c];
    he.push_back(std::move(next));
  }
  k.poly.assign(static_cast<std::size_t>(top + 1), 0.0);
  double factorial = 1.0;
  for (int m = 0; m <= top; ++m) {
    if (m > 0) factorial *= m;
    const double at_zero = he[m][0];
    if (at_zero == 0.0) continue;
    for (std::size_t c = 0; c < he[m].size(); ++c) k.poly[c] += at_zero / factorial * he[m][c];
  }
  for (double& c : k.poly) c /= std::sqrt(2.0 * std::numbers::pi);

  double radius = 1.0;
  auto abs_k = [&](double u) { return std::abs(k(u)); };
  auto weighted = [&](double u) { return std::pow(u, k.order) * std::abs(k(u)); };
  while (2.0 * integrate(abs_k, radius, radius + 40.0) > kTailMass ||
         2.0 * integrate(weighted, radius, radius + 40.0) > kTailMass)
    radius += 0.25;
  k.support_radius = radius;
  const auto roots = positive_roots(k, radius);
  k.l1_norm = integrate_split(abs_k, roots, radius);
  return k;
}

KernelMoments kernel_moments(const KernelSpec& kernel) {
  const double r = kernel.support_radius;
  const auto roots = positive_roots(kernel, r);
  KernelMoments out;
  for (int j = 0; j <= kernel.order; ++j)
    out.moments.push_back(
        integrate_split([&](double u) { return std::pow(u, j) * kernel(u); }, roots, r));
  out.abs_moment = integrate_split(
      [&](double u) { return std::pow(std::abs(u), kernel.order) * std::abs(kernel(u)); }, roots, r);
  return out;
}

void check_kernel_moments(const KernelSpec& kernel, double tol) {
  const auto m = kernel_moments(kernel);
  std::string problems;
  if (std::abs(m.moments[0] - 1.0) >= tol)
    problems += " integral " + std::to_string(m.moments[0]) + ";";
  for (int j = 1; j <= 2 * kernel.s + 1; ++j)
    if (std::abs(m.moments[static_cast<std::size_t>(j)]) >= tol)
      problems += " moment " + std::to_string(j) + " = " + std::to_string(m.moments[static_cast<std::size_t>(j)]) + ";";
  if (!std::isfinite(m.abs_moment)) problems += " absolute moment not finite;";
  if (!problems.empty()) throw Error("kernel moment check failed:" + problems);
}

double bandwidth(double n, int d, int s) {
  if (!(n >= 2.0)) throw Error("bandwidth: n must be at least 2");
  if (d < 1 || s < 0) throw Error("bandwidth: need d >= 1 and s >= 0");
  return std::pow(n, -1.0 / (d + 2.0 * s)) * std::log(n);
}

// ------------------------------------------------------------------ KDE

SmoothedDensity::SmoothedDensity(PointSet sample, KernelSpec kernel, double h, DensityMode mode,
                                 std::uint64_t seed)
    : sample_(std::move(sample)), kernel_(std::move(kernel)), h_(h), mode_(mode) {
  if (sample_.empty()) throw Error("SmoothedDensity: empty sample");
  if (!(h_ > 0.0)) throw Error("SmoothedDensity: bandwidth must be positive");
  if (mode_ == DensityMode::raw) return;

  const std::size_t d = dim();
  const double reach = kernel_.support_radius * h_;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < sample_.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) {
      lo[k] = std::min(lo[k], sample_[i][k] - reach);
      hi[k] = std::max(hi[k], sample_[i][k] + reach);
    }
  auto positive = [&](std::span<const double> x) { return std::max(raw(x), 0.0); };

  if (d == 1) {
    const double width = h_ / 4.0;
    const auto panels = static_cast<std::size_t>(std::ceil((hi[0] - lo[0]) / width));
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
      const double a = lo[0] + (hi[0] - lo[0]) * p / panels;
      const double b = lo[0] + (hi[0] - lo[0]) * (p + 1) / panels;
      total += integrate([&](double u) { return positive({&u, 1}); }, a, b, 1e-10);
    }
    norm_ = total;
  } else if (d <= 3) {
    // Tensor composite Gauss-Legendre.
    const std::size_t per_panel = d == 2 ? 8 : 6;
    const std::size_t max_nodes = d == 2 ? 400 : 90;
    std::vector<double> gx, gw;
    gauss_legendre(per_panel, gx, gw);
    std::vector<std::vector<double>> nodes(d), weights(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double panel_width = d == 2 ? h_ / 2.0 : h_;
      auto panels = static_cast<std::size_t>(std::ceil((hi[k] - lo[k]) / panel_width));
      panels = std::clamp<std::size_t>(panels, 1, max_nodes / per_panel);
      const double w = (hi[k] - lo[k]) / panels;
      for (std::size_t p = 0; p < panels; ++p)
        for (std::size_t q = 0; q < per_panel; ++q) {
          nodes[k].push_back(lo[k] + w * (p + 0.5 * (gx[q] + 1.0)));
          weights[k].push_back(0.5 * w * gw[q]);
        }
    }
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d);
    double total = 0.0;
    for (;;) {
      double w = 1.0;
      for (std::size_t k = 0; k < d; ++k) {
        x[k] = nodes[k][idx[k]];
        w *= weights[k][idx[k]];
      }
      total += w * positive(x);
      std::size_t k = 0;
      while (k < d && ++idx[k] == nodes[k].size()) idx[k++] = 0;
      if (k == d) break;
    }
    norm_ = total;
  } else {
    // Importance sampling from the |K| mixture: E[max(f,0)/envelope] times
    // the envelope's total mass |K|_1^d.
    const std::size_t draws = 20000;
    AbsKernelSampler abs_k(kernel_);
    Rng rng = make_rng(derive_seed(seed, streams::dense_reference, 0x6e6f726dULL));
    std::vector<double> x(d);
    double total = 0.0;
    for (std::size_t t = 0; t < draws; ++t) {
      const auto i = uniform_index(rng, sample_.size());
      for (std::size_t k = 0; k < d; ++k) x[k] = sample_[i][k] + h_ * abs_k.draw(rng);
      double sgn, env;
      sums(x, sgn, env);
      if (env > 0.0 && sgn > 0.0) total += sgn / env;
    }
    norm_ = std::pow(kernel_.l1_norm, static_cast<double>(d)) * total / draws;
  }
  if (!(norm_ > 0.0)) throw Error("SmoothedDensity: positive part has zero mass");
}

void SmoothedDensity::sums(std::span<const double> x, double& signed_sum, double& abs_sum) const {
  const std::size_t d = dim();
  if (x.size() != d) throw DimensionMismatch("SmoothedDensity: point dimension differs");
  const double inv_h = 1.0 / h_;
  const double radius = kernel_.support_radius;
  signed_sum = 0.0;
  abs_sum = 0.0;
  for (std::size_t i = 0; i < sample_.size(); ++i) {
    const auto xi = sample_[i];
    double prod = 1.0;
    bool inside = true;
    for (std::size_t k = 0; k < d; ++k) {
      const double t = (xi[k] - x[k]) * inv_h;
      if (std::abs(t) > radius) {
        inside = false;
        break;
      }
      prod *= kernel_(t);
    }
    if (!inside) continue;
    signed_sum += prod;
    abs_sum += std::abs(prod);
  }
  const double scale = 1.0 / (static_cast<double>(sample_.size()) * std::pow(h_, static_cast<double>(d)));
  signed_sum *= scale;
  abs_sum *= scale;
}

double SmoothedDensity::raw(std::span<const double> x) const {
  double s, a;
  sums(x, s, a);
  return s;
}

double SmoothedDensity::envelope(std::span<const double> x) const {
  double s, a;
  sums(x, s, a);
  return a;
}

double SmoothedDensity::operator()(std::span<const double> x) const {
  const double r = raw(x);
  if (mode_ == DensityMode::raw) return r;
  return std::max(r, 0.0) / norm_;
}

double kde_eval(const SmoothedDensity& f, std::span<const double> x) { return f(x); }

PointSet sample_positive_part(const SmoothedDensity& f, std::size_t count, std::uint64_t seed,
                              SamplerStats* stats) {
  const std::size_t d = f.dim();
  const auto& data = f.sample();
  AbsKernelSampler abs_k(f.kernel());
  Rng rng = make_rng(seed);
  PointSet out(count, d);
  std::vector<double> x(d);
  SamplerStats local;
  std::size_t filled = 0;
  while (filled < count) {
    const auto i = uniform_index(rng, data.size());
    for (std::size_t k = 0; k < d; ++k) x[k] = data[i][k] + f.bandwidth() * abs_k.draw(rng);
    ++local.proposals;
    double value, env;
    f.sums(x, value, env);
    if (value > 0.0 && env > 0.0 && uniform01(rng) * env <= value) {
      std::ranges::copy(x, out[filled].begin());
      ++filled;
      ++local.accepted;
    }
    if (local.proposals >= 2000 && local.acceptance() < 1e-3)
      throw Error("sample_positive_part: acceptance rate " + std::to_string(local.acceptance()) +
                  " below 1e-3; bandwidth looks pathological");
  }
  if (stats) *stats = local;
  return out;
}

// ---------------------------------------------------------------- wavelet

int haar_level(std::size_t n, int d, int s) {
  if (n == 0) throw Error("haar_level: empty sample");
  const double l2 = std::log2(static_cast<double>(n));
  const double lo = l2 / (d + 2.0 * s);
  const double hi = l2 / d;
  int j = static_cast<int>(std::ceil(lo - 1e-12));
  if (j > hi + 1e-12) j = std::max(0, static_cast<int>(std::floor(hi + 1e-12)));
  return j;
}

std::uint64_t WaveletDensity::key(int j, std::span<const std::uint64_t> cell) const {
  std::uint64_t k = 0;
  for (std::size_t c = 0; c < cell.size(); ++c) k |= cell[c] << (static_cast<unsigned>(j) * c);
  return k;
}

std::vector<std::uint64_t> WaveletDensity::cell_of(int j, std::span<const double> u) const {
  const auto side = std::uint64_t{1} << j;
  std::vector<std::uint64_t> cell(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double scaled = std::floor(u[k] * static_cast<double>(side));
    cell[k] = static_cast<std::uint64_t>(std::clamp(scaled, 0.0, static_cast<double>(side - 1)));
  }
  return cell;
}

std::vector<double> WaveletDensity::to_unit(std::span<const double> x) const {
  std::vector<double> u(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) u[k] = (x[k] - lower_[k]) / (upper_[k] - lower_[k]);
  return u;
}

double WaveletDensity::detail_coefficient(int j, std::span<const std::uint64_t> cell,
                                          unsigned type) const {
  if (j < 0 || j >= level_) return 0.0;
  if (type == 0 || type >= (1u << dim())) throw Error("detail_coefficient: type out of range");
  auto it = details_[static_cast<std::size_t>(j)].find(key(j, cell));
  if (it == details_[static_cast<std::size_t>(j)].end()) return 0.0;
  return it->second[type - 1];
}

double WaveletDensity::series_unit(std::span<const double> u) const {
  for (double c : u)
    if (c < 0.0 || c >= 1.0) return 0.0;
  const std::size_t d = dim();
  const unsigned types = 1u << d;
  double value = scaling_;
  for (int j = 0; j < level_; ++j) {
    const auto cell = cell_of(j, u);
    auto it = details_[static_cast<std::size_t>(j)].find(key(j, cell));
    if (it == details_[static_cast<std::size_t>(j)].end()) continue;
    const double norm = std::pow(2.0, 0.5 * j * static_cast<double>(d));
    unsigned upper_half = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const double pos = u[k] * std::ldexp(1.0, j) - static_cast<double>(cell[k]);
      if (pos >= 0.5) upper_half |= 1u << k;
    }
    for (unsigned e = 1; e < types; ++e) {
      const double sign = (std::popcount(e & upper_half) % 2 == 0) ? 1.0 : -1.0;
      value += it->second[e - 1] * norm * sign;
    }
  }
  return value;
}

double WaveletDensity::histogram_unit(std::span<const double> u) const {
  for (double c : u)
    if (c < 0.0 || c >= 1.0) return 0.0;
  auto it = counts_.find(key(level_, cell_of(level_, u)));
  if (it == counts_.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(m_) *
         std::ldexp(1.0, level_ * static_cast<int>(dim()));
}

double WaveletDensity::operator()(std::span<const double> x) const {
  double volume = 1.0;
  for (std::size_t k = 0; k < dim(); ++k) volume *= upper_[k] - lower_[k];
  return series_unit(to_unit(x)) / volume;
}

PointSet WaveletDensity::sample(std::size_t count, std::uint64_t seed) const {
  const std::size_t d = dim();
  Rng rng = make_rng(seed);
  PointSet out(count, d);
  const double side = std::ldexp(1.0, -level_);
  const std::uint64_t mask = (std::uint64_t{1} << level_) - 1;
  for (std::size_t t = 0; t < count; ++t) {
    const auto r = static_cast<std::size_t>(uniform_index(rng, m_));
    const auto pos = static_cast<std::size_t>(
        std::upper_bound(cumulative_counts_.begin(), cumulative_counts_.end(), r) -
        cumulative_counts_.begin());
    const std::uint64_t k = occupied_[pos];
    for (std::size_t c = 0; c < d; ++c) {
      const auto idx = (k >> (static_cast<unsigned>(level_) * c)) & mask;
      const double u = (static_cast<double>(idx) + uniform01(rng)) * side;
      out[t][c] = lower_[c] + u * (upper_[c] - lower_[c]);
    }
  }
  return out;
}

WaveletDensity haar_wavelet_fit(
    const PointSet& sample, int s,
    std::optional<std::pair<std::vector<double>, std::vector<double>>> box) {
  if (sample.empty()) throw Error("haar_wavelet_fit: empty sample");
  const std::size_t d = sample.dim();
  const std::size_t m = sample.size();
  WaveletDensity w;
  w.m_ = m;
  w.level_ = haar_level(m, static_cast<int>(d), s);
  if (static_cast<std::size_t>(w.level_) * d > 60)
    throw Error("haar_wavelet_fit: level too deep for the cell encoding");
  if (box) {
    if (box->first.size() != d || box->second.size() != d)
      throw DimensionMismatch("haar_wavelet_fit: box dimension differs from the sample");
    w.lower_ = box->first;
    w.upper_ = box->second;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < d; ++k)
        if (sample[i][k] < w.lower_[k] || sample[i][k] >= w.upper_[k])
          throw Error("haar_wavelet_fit: sample point outside the given box");
  } else {
    w.lower_.assign(d, std::numeric_limits<double>::infinity());
    w.upper_.assign(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        w.lower_[k] = std::min(w.lower_[k], sample[i][k]);
        w.upper_[k] = std::max(w.upper_[k], sample[i][k]);
      }
    for (std::size_t k = 0; k < d; ++k) {
      const double range = w.upper_[k] - w.lower_[k];
      const double pad = range > 0.0 ? range / (2.0 * static_cast<double>(m)) : 0.5;
      w.lower_[k] -= pad;
      w.upper_[k] += pad;
    }
  }

  const unsigned types = 1u << d;
  const double inv_m = 1.0 / static_cast<double>(m);
  w.details_.resize(static_cast<std::size_t>(w.level_));
  for (std::size_t i = 0; i < m; ++i) {
    const auto u = w.to_unit(sample[i]);
    for (int j = 0; j < w.level_; ++j) {
      const auto cell = w.cell_of(j, u);
      auto& coeffs = w.details_[static_cast<std::size_t>(j)][w.key(j, cell)];
      if (coeffs.empty()) coeffs.assign(types - 1, 0.0);
      const double norm = std::pow(2.0, 0.5 * j * static_cast<double>(d));
      unsigned upper_half = 0;
      for (std::size_t k = 0; k < d; ++k) {
        const double pos = u[k] * std::ldexp(1.0, j) - static_cast<double>(cell[k]);
        if (pos >= 0.5) upper_half |= 1u << k;
      }
      for (unsigned e = 1; e < types; ++e) {
        const double sign = (std::popcount(e & upper_half) % 2 == 0) ? 1.0 : -1.0;
        coeffs[e - 1] += inv_m * norm * sign;
      }
    }
    ++w.counts_[w.key(w.level_, w.cell_of(w.level_, u))];
  }
  for (const auto& [k, c] : w.counts_) w.occupied_.push_back(k);
  std::sort(w.occupied_.begin(), w.occupied_.end());
  std::size_t running = 0;
  for (auto k : w.occupied_) {
    running += w.counts_[k];
    w.cumulative_counts_.push_back(running);
  }
  return w;
}

}  // namespace otmap
