#include "otmap/applications.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "otmap/experiments.hpp"
#include "otmap/numerics.hpp"
#include "otmap/ot_core.hpp"

namespace otmap {

using nlohmann::json;

// ------------------------------------------------------------- barycenter

DiscreteMeasure BarycenterEstimate::measure() const { return DiscreteMeasure(atoms, weights); }

BarycenterEstimate plugin_barycenter(const DiscreteMeasure& src, const DiscreteMeasure& tgt) {
  const auto map = barycentric_projection(solve_ot(src, tgt));
  BarycenterEstimate b;
  b.atoms = PointSet(src.size(), src.dim());
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t k = 0; k < src.dim(); ++k)
      b.atoms[i][k] = 0.5 * src.point(i)[k] + 0.5 * map.images[i][k];
  b.weights = src.weights();
  return b;
}

double w2_squared_to_quantile_1d(const DiscreteMeasure& measure,
                                 const std::function<double(double)>& q) {
  if (measure.dim() != 1) throw DimensionMismatch("w2_squared_to_quantile_1d: measure must be 1D");
  std::vector<std::pair<double, double>> atoms;
  for (std::size_t i = 0; i < measure.size(); ++i)
    atoms.emplace_back(measure.point(i)[0], measure.weight(i));
  std::sort(atoms.begin(), atoms.end());
  // Fixed Gauss-Legendre per cell: an adaptive rule with a relative tolerance
  // keeps refining cells whose integral is nearly zero.
  static const auto rule = [] {
    std::pair<std::vector<double>, std::vector<double>> r;
    gauss_legendre(32, r.first, r.second);
    return r;
  }();
  std::vector<double> terms;
  double p0 = 0.0;
  for (const auto& [a, w] : atoms) {
    const double p1 = std::min(1.0, p0 + w);
    const double half = 0.5 * (p1 - p0), mid = 0.5 * (p0 + p1);
    double sum = 0.0;
    for (std::size_t k = 0; k < rule.first.size(); ++k) {
      const double diff = a - q(mid + half * rule.first[k]);
      sum += rule.second[k] * diff * diff;
    }
    terms.push_back(half * sum);
    p0 = p1;
  }
  return stable_sum(terms);
}

// ------------------------------------------------------- independence test

BarycentricMap semi_discrete_rank_map(const DiscreteMeasure& data, const PointSet& reference) {
  if (reference.size() != data.size())
    throw Error("semi_discrete_rank_map: reference size must equal the data size");
  if (!data.has_uniform_weights())
    throw Error("semi_discrete_rank_map: data must carry uniform weights");
  return barycentric_projection(solve_ot(data, DiscreteMeasure::uniform(reference)));
}

BarycentricMap semi_discrete_rank_map(const DiscreteMeasure& data, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  PointSet ref(data.size(), data.dim());
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (std::size_t k = 0; k < ref.dim(); ++k) ref[i][k] = uniform01(rng);
  return semi_discrete_rank_map(data, ref);
}

double GaussianKernel::operator()(std::span<const double> a, std::span<const double> b) const {
  return std::exp(-squared_distance(a, b) / (2.0 * bandwidth * bandwidth));
}

double median_heuristic(const PointSet& points) {
  std::vector<double> dist;
  dist.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      dist.push_back(std::sqrt(squared_distance(points[i], points[j])));
  if (dist.empty()) return 1.0;
  const double m = median(std::move(dist));
  return m > 0.0 ? m : 1.0;
}

GaussianKernel reference_kernel(std::size_t n, std::size_t d) {
  // Pairwise distances are O(n^2); a few hundred points pin the median.
  const std::size_t size = std::clamp<std::size_t>(n, 2, 500);
  Rng rng = make_rng(derive_seed(0x6b65726eULL, streams::dense_reference, d));
  PointSet ref(size, d);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t k = 0; k < d; ++k) ref[i][k] = uniform01(rng);
  return GaussianKernel{median_heuristic(ref)};
}

std::vector<double> gram_matrix(const PointSet& images, const GaussianKernel& kernel) {
  const std::size_t n = images.size();
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) g[i * n + j] = g[j * n + i] = kernel(images[i], images[j]);
  }
  return g;
}

double hsic_from_gram(const std::vector<double>& k, const std::vector<double>& l, std::size_t n) {
  if (k.size() != n * n || l.size() != n * n) throw Error("hsic_from_gram: Gram sizes differ from n");
  if (n == 0) throw Error("hsic_from_gram: empty sample");
  const double nn = static_cast<double>(n);
  double cross = 0.0, k_total = 0.0, l_total = 0.0, rows = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double k_row = 0.0, l_row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      cross += k[i * n + j] * l[i * n + j];
      k_row += k[i * n + j];
      l_row += l[i * n + j];
    }
    k_total += k_row;
    l_total += l_row;
    rows += k_row * l_row;
  }
  return cross / (nn * nn) + k_total * l_total / (nn * nn * nn * nn) - 2.0 * rows / (nn * nn * nn);
}

double hsic_statistic(const BarycentricMap& x_map, const BarycentricMap& y_map,
                      const GaussianKernel& kernel_x, const GaussianKernel& kernel_y) {
  const std::size_t n = x_map.images.size();
  if (y_map.images.size() != n) throw Error("hsic_statistic: the two maps cover different sample sizes");
  return hsic_from_gram(gram_matrix(x_map.images, kernel_x), gram_matrix(y_map.images, kernel_y), n);
}

namespace {

void fill_marginal(PointSet& p, NullMarginal marginal, Rng& rng) {
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t k = 0; k < p.dim(); ++k) {
      if (marginal == NullMarginal::uniform) {
        p[i][k] = uniform01(rng);
      } else {
        double z;
        do z = standard_normal(rng);
        while (std::abs(z) > 2.0);
        p[i][k] = z;
      }
    }
}

PointSet uniform_reference(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  PointSet ref(n, d);
  fill_marginal(ref, NullMarginal::uniform, rng);
  return ref;
}

double n_times_hsic(const PointSet& x, const PointSet& y, std::uint64_t seed) {
  const std::size_t n = x.size();
  const auto mx = semi_discrete_rank_map(DiscreteMeasure::uniform(x),
                                         uniform_reference(n, x.dim(), derive_seed(seed, streams::reference_x)));
  const auto my = semi_discrete_rank_map(DiscreteMeasure::uniform(y),
                                         uniform_reference(n, y.dim(), derive_seed(seed, streams::reference_y)));
  return static_cast<double>(n) *
         hsic_statistic(mx, my, reference_kernel(n, x.dim()), reference_kernel(n, y.dim()));
}

std::string marginal_name(NullMarginal m) {
  return m == NullMarginal::uniform ? "uniform" : "truncated_normal";
}

json null_key(const NullConfig& c) {
  const auto k1 = reference_kernel(c.n, c.d1), k2 = reference_kernel(c.n, c.d2);
  std::ostringstream bw;
  bw.precision(17);
  bw << k1.bandwidth << ',' << k2.bandwidth;
  return {{"n", c.n},           {"d1", c.d1},     {"d2", c.d2},
          {"kernels", "gaussian:" + bw.str()},  {"draws", c.draws},
          {"seed", c.seed},     {"marginal", marginal_name(c.marginal)}};
}

}  // namespace

std::optional<std::string> null_cache_path(const NullConfig& config) {
  const char* dir = std::getenv("OTMAP_CACHE_DIR");
  if (!dir || !*dir) return std::nullopt;
  const auto key = null_key(config).dump();
  std::ostringstream name;
  name << "null_" << std::hex << mix64(std::hash<std::string>{}(key)) << ".json";
  return (std::filesystem::path(dir) / name.str()).string();
}

std::vector<double> simulate_null(const NullConfig& config) {
  if (config.n < 2) throw Error("simulate_null: n must be at least 2");
  if (config.draws < 200) throw Error("simulate_null: at least 200 draws are required");
  if (config.d1 == 0 || config.d2 == 0) throw Error("simulate_null: dimensions must be positive");

  const auto path = config.use_cache ? null_cache_path(config) : std::nullopt;
  const json key = null_key(config);
  if (path) {
    std::ifstream in(*path);
    if (in) {
      try {
        const json cached = json::parse(in);
        if (cached.at("key") == key) return cached.at("values").get<std::vector<double>>();
      } catch (const json::exception&) {
        // Unreadable cache entries are recomputed and overwritten.
      }
    }
  }

  std::vector<double> values(config.draws);
  parallel_for(config.draws, config.threads, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(config.seed, streams::null_draw, i);
    Rng rng = make_rng(s);
    PointSet x(config.n, config.d1), y(config.n, config.d2);
    fill_marginal(x, config.marginal, rng);
    fill_marginal(y, config.marginal, rng);
    values[i] = n_times_hsic(x, y, s);
  });
  std::sort(values.begin(), values.end());

  if (path) {
    std::error_code ec;
    std::filesystem::create_directories(std::filesystem::path(*path).parent_path(), ec);
    const std::string tmp = *path + ".tmp";
    std::ofstream out(tmp);
    if (out) {
      out << json{{"key", key}, {"values", values}}.dump();
      out.close();
      std::filesystem::rename(tmp, *path, ec);
    }
  }
  return values;
}

double null_quantile(const NullConfig& config, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("null_quantile: alpha must lie in (0, 1)");
  return quantile(simulate_null(config), 1.0 - alpha);
}

json IndepTestResult::to_json() const {
  return {{"statistic", statistic},   {"n_times_stat", n_times_stat}, {"critical_value", critical_value},
          {"reject", reject},         {"alpha", alpha},               {"null_draws", null_draws}};
}

IndepTestResult indep_test_with_critical(const PointSet& x, const PointSet& y, double alpha,
                                         double critical_value, std::size_t null_draws,
                                         std::uint64_t seed) {
  if (x.size() != y.size()) throw Error("indep_test: x and y must have the same number of rows");
  if (x.size() < 5) throw Error("indep_test: at least 5 observations are required");
  IndepTestResult r;
  r.alpha = alpha;
  r.n_times_stat = n_times_hsic(x, y, seed);
  r.statistic = r.n_times_stat / static_cast<double>(x.size());
  r.critical_value = critical_value;
  r.reject = r.n_times_stat >= critical_value;
  r.null_draws = null_draws;
  return r;
}

IndepTestResult indep_test(const PointSet& x, const PointSet& y, double alpha,
                           const IndepConfig& config, std::uint64_t seed) {
  if (x.size() != y.size()) throw Error("indep_test: x and y must have the same number of rows");
  if (x.size() < 5) throw Error("indep_test: at least 5 observations are required");
  NullConfig nc;
  nc.n = x.size();
  nc.d1 = x.dim();
  nc.d2 = y.dim();
  nc.draws = config.null_draws;
  nc.seed = config.null_seed;
  nc.threads = config.threads;
  nc.use_cache = config.use_cache;
  return indep_test_with_critical(x, y, alpha, null_quantile(nc, alpha), config.null_draws, seed);
}

std::pair<PointSet, PointSet> gaussian_copula_sample(std::size_t n, std::size_t d1, std::size_t d2,
                                                     double rho, std::uint64_t seed) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw Error("gaussian_copula_sample: rho must lie in [-1, 1]");
  Rng rng = make_rng(seed);
  auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  PointSet x(n, d1), y(n, d2);
  const double tail = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> zx(d1);
    for (auto& z : zx) z = standard_normal(rng);
    for (std::size_t k = 0; k < d1; ++k) x[i][k] = phi(zx[k]);
    for (std::size_t k = 0; k < d2; ++k) {
      const double e = standard_normal(rng);
      y[i][k] = phi(k < d1 ? rho * zx[k] + tail * e : e);
    }
  }
  return {std::move(x), std::move(y)};
}

PopulationHsic population_hsic(const JointSampler& sampler, const TransportFn& t1,
                               const TransportFn& t2, const GaussianKernel& kernel_x,
                               const GaussianKernel& kernel_y, std::size_t mc_size,
                               std::uint64_t seed) {
  if (mc_size < 2) throw Error("population_hsic: mc_size must be at least 2");
  if (!t1 || !t2) throw Error("population_hsic: both transport maps are required");
  std::vector<double> h(mc_size);
  for (std::size_t t = 0; t < mc_size; ++t) {
    Rng rng = make_rng(derive_seed(seed, streams::trial, t));
    std::vector<std::vector<double>> a, b;
    for (int g = 0; g < 4; ++g) {
      auto [x, y] = sampler(rng);
      a.push_back(t1(x));
      b.push_back(t2(y));
    }
    const double k12 = kernel_x(a[0], a[1]);
    h[t] = k12 * (kernel_y(b[0], b[1]) + kernel_y(b[2], b[3]) - 2.0 * kernel_y(b[0], b[2]));
  }
  PopulationHsic r;
  r.value = stable_sum(h) / static_cast<double>(mc_size);
  double ss = 0.0;
  for (double v : h) ss += (v - r.value) * (v - r.value);
  r.std_error = std::sqrt(ss / static_cast<double>(mc_size - 1) / static_cast<double>(mc_size));
  return r;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.distance = d;
  // Asymptotic Kolmogorov tail with the usual small-sample correction.
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  if (lambda < 1e-3) return r;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  r.p_value = std::clamp(2.0 * sum, 0.0, 1.0);
  return r;
}

}  // namespace otmap
