#include "otmap/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "otmap/config_util.hpp"
#include "otmap/numerics.hpp"

namespace otmap {

using nlohmann::json;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

// Mass of N(mean, sd^2) inside [lo, hi].
double normal_mass(double mean, double sd, double lo, double hi) {
  return normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
}

// E[x] and E[x^2] of coordinate k under mu.
std::pair<double, double> coordinate_moments(const Support& s, std::size_t k) {
  const double lo = s.lower[k], hi = s.upper[k];
  if (s.kind == Support::Kind::box)
    return {0.5 * (lo + hi), (lo * lo + lo * hi + hi * hi) / 3.0};
  const double m1 = integrate([&](double x) { return x * s.coordinate_density(k, x); }, lo, hi);
  const double m2 = integrate([&](double x) { return x * x * s.coordinate_density(k, x); }, lo, hi);
  return {m1, m2};
}

const char* map_kind_name(CoordinateMap::Kind k) {
  switch (k) {
    case CoordinateMap::Kind::identity: return "identity";
    case CoordinateMap::Kind::affine: return "affine";
    case CoordinateMap::Kind::cubic: return "cubic";
    case CoordinateMap::Kind::tanh: return "tanh";
  }
  return "identity";
}

}  // namespace

// ---------------------------------------------------------------- Support

Support Support::unit_box(std::size_t d) {
  return box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
}

Support Support::box(std::vector<double> lower, std::vector<double> upper) {
  Support s;
  s.kind = Kind::box;
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  s.validate();
  return s;
}

Support Support::truncated_normal(std::vector<double> mean, std::vector<double> sd,
                                  std::vector<double> lower, std::vector<double> upper) {
  Support s;
  s.kind = Kind::truncated_normal;
  s.mean = std::move(mean);
  s.sd = std::move(sd);
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  s.validate();
  return s;
}

void Support::validate() const {
  if (lower.empty()) throw Error("Support: dimension must be positive");
  if (upper.size() != lower.size()) throw DimensionMismatch("Support: bound sizes differ");
  for (std::size_t k = 0; k < lower.size(); ++k)
    if (!(lower[k] < upper[k]) || !std::isfinite(lower[k]) || !std::isfinite(upper[k]))
      throw Error("Support: need finite lower < upper in coordinate " + std::to_string(k));
  if (kind == Kind::truncated_normal) {
    if (mean.size() != lower.size() || sd.size() != lower.size())
      throw DimensionMismatch("Support: mean/sd sizes differ from the bounds");
    for (std::size_t k = 0; k < lower.size(); ++k) {
      if (!(sd[k] > 0.0)) throw Error("Support: sd must be positive");
      if (normal_mass(mean[k], sd[k], lower[k], upper[k]) < 1e-8)
        throw Error("Support: truncation window has negligible normal mass");
    }
  }
}

void Support::sample(Rng& rng, std::span<double> out) const {
  for (std::size_t k = 0; k < dim(); ++k) {
    const double lo = lower[k], hi = upper[k];
    if (kind == Kind::box) {
      out[k] = lo + (hi - lo) * uniform01(rng);
      continue;
    }
    const double mass = normal_mass(mean[k], sd[k], lo, hi);
    if (mass > 0.25) {
      for (;;) {
        const double x = mean[k] + sd[k] * standard_normal(rng);
        if (x >= lo && x <= hi) {
          out[k] = x;
          break;
        }
      }
    } else {
      // Uniform proposal on the window against the peak of the density there.
      const double peak_at = std::clamp(mean[k], lo, hi);
      const double z0 = (peak_at - mean[k]) / sd[k];
      for (;;) {
        const double x = lo + (hi - lo) * uniform01(rng);
        const double z = (x - mean[k]) / sd[k];
        if (uniform01(rng) <= std::exp(-0.5 * (z * z - z0 * z0))) {
          out[k] = x;
          break;
        }
      }
    }
  }
}

double Support::coordinate_density(std::size_t k, double x) const {
  if (x < lower[k] || x > upper[k]) return 0.0;
  if (kind == Kind::box) return 1.0 / (upper[k] - lower[k]);
  const double z = (x - mean[k]) / sd[k];
  return std::exp(-0.5 * z * z) / (sd[k] * std::sqrt(2.0 * std::numbers::pi)) /
         normal_mass(mean[k], sd[k], lower[k], upper[k]);
}

double Support::coordinate_quantile(std::size_t k, double p) const {
  p = std::clamp(p, 0.0, 1.0);
  const double lo = lower[k], hi = upper[k];
  if (kind == Kind::box) return lo + p * (hi - lo);
  const boost::math::normal_distribution<double> z;
  const double a = normal_cdf((lo - mean[k]) / sd[k]);
  const double b = normal_cdf((hi - mean[k]) / sd[k]);
  const double q = a + p * (b - a);
  if (q <= 0.0) return lo;
  if (q >= 1.0) return hi;
  return std::clamp(mean[k] + sd[k] * boost::math::quantile(z, q), lo, hi);
}

// ---------------------------------------------------------- CoordinateMap

double CoordinateMap::operator()(double x) const {
  switch (kind) {
    case Kind::identity: return x;
    case Kind::affine: return a * x + b;
    case Kind::cubic: return a * x + b + c * x * x * x;
    case Kind::tanh: return a * x + b + c * std::tanh(x);
  }
  return x;
}

double CoordinateMap::derivative(double x) const {
  switch (kind) {
    case Kind::identity: return 1.0;
    case Kind::affine: return a;
    case Kind::cubic: return a + 3.0 * c * x * x;
    case Kind::tanh: {
      const double t = std::tanh(x);
      return a + c * (1.0 - t * t);
    }
  }
  return 1.0;
}

double CoordinateMap::potential(double x) const {
  switch (kind) {
    case Kind::identity: return 0.5 * x * x;
    case Kind::affine: return 0.5 * a * x * x + b * x;
    case Kind::cubic: return 0.5 * a * x * x + b * x + 0.25 * c * x * x * x * x;
    case Kind::tanh: return 0.5 * a * x * x + b * x + c * log_cosh(x);
  }
  return 0.5 * x * x;
}

double CoordinateMap::inverse(double y) const {
  if (kind == Kind::identity) return y;
  if (kind == Kind::affine) return (y - b) / a;
  double lo = -1.0, hi = 1.0;
  while ((*this)(lo) > y) lo *= 2.0;
  while ((*this)(hi) < y) hi *= 2.0;
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((*this)(mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  // Pick the endpoint whose image is closer.
  return std::abs((*this)(lo) - y) <= std::abs((*this)(hi) - y) ? lo : hi;
}

double CoordinateMap::conjugate(double y) const {
  const double x = inverse(y);
  return x * y - potential(x);
}

void CoordinateMap::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
    throw Error("CoordinateMap: non-finite parameter");
  switch (kind) {
    case Kind::identity: break;
    case Kind::affine:
      if (!(a > 0.0)) throw Error("CoordinateMap: affine map needs a > 0");
      break;
    case Kind::cubic:
      if (!(a > 0.0) || c < 0.0) throw Error("CoordinateMap: cubic map needs a > 0 and c >= 0");
      break;
    case Kind::tanh:
      if (!(a > 0.0) || !(a + c > 0.0))
        throw Error("CoordinateMap: tanh map needs a > 0 and a + c > 0");
      break;
  }
}

// ------------------------------------------------------- SyntheticProblem

SyntheticProblem make_linear_problem(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                     Support support) {
  support.validate();
  const auto d = static_cast<Eigen::Index>(support.dim());
  if (a.rows() != d || a.cols() != d || b.size() != d)
    throw DimensionMismatch("make_linear_problem: A, b and support dimensions differ");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()))
    throw Error("make_linear_problem: A is not symmetric");

  SyntheticProblem p;
  p.kind_ = SyntheticProblem::Kind::linear;
  p.support_ = std::move(support);
  p.a_ = a;
  p.b_ = b;
  p.llt_.compute(a);
  if (p.llt_.info() != Eigen::Success)
    throw Error("make_linear_problem: A is not positive definite (Cholesky failed)");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  p.lipschitz_ = eig.eigenvalues().maxCoeff();

  // E|(A - I) x + b|^2 from the first two coordinate moments.
  Eigen::VectorXd m1(d);
  Eigen::MatrixXd second(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    auto [e1, e2] = coordinate_moments(p.support_, static_cast<std::size_t>(k));
    m1(k) = e1;
    second(k, k) = e2;
  }
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index l = 0; l < d; ++l)
      if (k != l) second(k, l) = m1(k) * m1(l);
  const Eigen::MatrixXd bm = a - Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd g = bm.transpose() * bm;
  p.true_w2sq_ = (g.cwiseProduct(second)).sum() + 2.0 * b.dot(bm * m1) + b.squaredNorm();
  p.true_w2sq_ = std::max(0.0, p.true_w2sq_);
  return p;
}

SyntheticProblem make_separable_problem(std::vector<CoordinateMap> maps, Support support) {
  support.validate();
  if (maps.size() != support.dim())
    throw DimensionMismatch("make_separable_problem: need one map per coordinate");
  SyntheticProblem p;
  p.kind_ = SyntheticProblem::Kind::separable;
  p.support_ = std::move(support);
  p.maps_ = std::move(maps);

  constexpr int kGrid = 2000;
  double lip = 0.0;
  double w2 = 0.0;
  for (std::size_t k = 0; k < p.maps_.size(); ++k) {
    const auto& g = p.maps_[k];
    g.validate();
    const double lo = p.support_.lower[k], hi = p.support_.upper[k];
    double prev = g(lo);
    for (int t = 0; t <= kGrid; ++t) {
      const double x = lo + (hi - lo) * t / kGrid;
      const double gx = g(x);
      if (t > 0 && !(gx > prev))
        throw Error("make_separable_problem: map " + std::to_string(k) +
                    " is not increasing on the support");
      prev = gx;
      lip = std::max(lip, g.derivative(x));
    }
    if (g.kind == CoordinateMap::Kind::tanh && lo < 0.0 && hi > 0.0)
      lip = std::max(lip, g.derivative(0.0));
    w2 += integrate(
        [&](double x) {
          const double r = x - g(x);
          return r * r * p.support_.coordinate_density(k, x);
        },
        lo, hi);
  }
  p.lipschitz_ = lip;
  p.true_w2sq_ = w2;
  return p;
}

void SyntheticProblem::transport(std::span<const double> x, std::span<double> out) const {
  const std::size_t d = dim();
  if (kind_ == Kind::linear) {
    for (std::size_t k = 0; k < d; ++k) {
      double s = b_(static_cast<Eigen::Index>(k));
      for (std::size_t l = 0; l < d; ++l)
        s += a_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * x[l];
      out[k] = s;
    }
  } else {
    for (std::size_t k = 0; k < d; ++k) out[k] = maps_[k](x[k]);
  }
}

std::vector<double> SyntheticProblem::transport(std::span<const double> x) const {
  std::vector<double> out(dim());
  transport(x, out);
  return out;
}

double SyntheticProblem::potential(std::span<const double> x) const {
  const std::size_t d = dim();
  if (kind_ == Kind::linear) {
    Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(d));
    return 0.5 * v.dot(a_ * v) + b_.dot(v);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += maps_[k].potential(x[k]);
  return s;
}

double SyntheticProblem::conjugate(std::span<const double> y) const {
  const std::size_t d = dim();
  if (kind_ == Kind::linear) {
    Eigen::Map<const Eigen::VectorXd> v(y.data(), static_cast<Eigen::Index>(d));
    const Eigen::VectorXd r = v - b_;
    return 0.5 * r.dot(llt_.solve(r));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += maps_[k].conjugate(y[k]);
  return s;
}

std::vector<double> SyntheticProblem::inverse_transport(std::span<const double> y) const {
  const std::size_t d = dim();
  std::vector<double> out(d);
  if (kind_ == Kind::linear) {
    Eigen::Map<const Eigen::VectorXd> v(y.data(), static_cast<Eigen::Index>(d));
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(d)) = llt_.solve(v - b_);
  } else {
    for (std::size_t k = 0; k < d; ++k) out[k] = maps_[k].inverse(y[k]);
  }
  return out;
}

std::vector<double> SyntheticProblem::pushforward_mean() const {
  const std::size_t d = dim();
  std::vector<double> out(d);
  if (kind_ == Kind::linear) {
    Eigen::VectorXd m1(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k)
      m1(static_cast<Eigen::Index>(k)) = coordinate_moments(support_, k).first;
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(d)) = a_ * m1 + b_;
  } else {
    for (std::size_t k = 0; k < d; ++k)
      out[k] = integrate([&](double x) { return maps_[k](x) * support_.coordinate_density(k, x); },
                         support_.lower[k], support_.upper[k]);
  }
  return out;
}

PointSet SyntheticProblem::sample_source(std::size_t n, Rng& rng) const {
  PointSet out(n, dim());
  for (std::size_t i = 0; i < n; ++i) support_.sample(rng, out[i]);
  return out;
}

PointSet SyntheticProblem::push_forward(const PointSet& x) const {
  PointSet out(x.size(), dim());
  for (std::size_t i = 0; i < x.size(); ++i) transport(x[i], out[i]);
  return out;
}

json SyntheticProblem::to_json() const {
  json j;
  const std::size_t d = dim();
  j["dim"] = d;
  if (kind_ == Kind::linear) {
    j["kind"] = "linear";
    json rows = json::array();
    for (std::size_t k = 0; k < d; ++k) {
      json row = json::array();
      for (std::size_t l = 0; l < d; ++l)
        row.push_back(a_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)));
      rows.push_back(row);
    }
    j["A"] = rows;
    j["b"] = std::vector<double>(b_.data(), b_.data() + b_.size());
  } else {
    j["kind"] = "separable";
    json maps = json::array();
    for (const auto& g : maps_)
      maps.push_back({{"type", map_kind_name(g.kind)}, {"a", g.a}, {"b", g.b}, {"c", g.c}});
    j["maps"] = maps;
  }
  json s;
  s["kind"] = support_.kind == Support::Kind::box ? "box" : "truncated_normal";
  s["lower"] = support_.lower;
  s["upper"] = support_.upper;
  if (support_.kind == Support::Kind::truncated_normal) {
    s["mean"] = support_.mean;
    s["sd"] = support_.sd;
  }
  j["support"] = s;
  return j;
}

// ------------------------------------------------------------------- JSON

namespace {

std::optional<Support> support_from_json(const json& spec, std::size_t d,
                                         std::vector<std::string>& errors,
                                         const std::string& where) {
  JsonFields f(spec, where, errors);
  if (!f.ok()) return std::nullopt;
  const auto before = errors.size();
  const auto kind = f.string("kind", "box", false, {"box", "truncated_normal"});
  const auto lower = f.vector("lower", d, 0.0);
  const auto upper = f.vector("upper", d, 1.0);
  std::vector<double> mean, sd;
  if (kind == "truncated_normal") {
    mean = f.vector("mean", d, 0.0, true);
    sd = f.vector("sd", d, 1.0, true);
  }
  f.reject_unknown();
  if (errors.size() != before) return std::nullopt;
  try {
    if (kind == "box") return Support::box(lower, upper);
    return Support::truncated_normal(mean, sd, lower, upper);
  } catch (const Error& e) {
    errors.push_back(where + ": " + e.what());
    return std::nullopt;
  }
}

std::optional<CoordinateMap> map_from_json(const json& spec, std::vector<std::string>& errors,
                                           const std::string& where) {
  JsonFields f(spec, where, errors);
  if (!f.ok()) return std::nullopt;
  const auto before = errors.size();
  CoordinateMap g;
  const auto type = f.string("type", "", true, {"identity", "affine", "cubic", "tanh"});
  if (type == "affine") g.kind = CoordinateMap::Kind::affine;
  if (type == "cubic") g.kind = CoordinateMap::Kind::cubic;
  if (type == "tanh") g.kind = CoordinateMap::Kind::tanh;
  g.a = f.number("a", 1.0);
  g.b = f.number("b", 0.0);
  g.c = f.number("c", 0.0);
  f.reject_unknown();
  if (errors.size() != before) return std::nullopt;
  try {
    g.validate();
  } catch (const Error& e) {
    errors.push_back(where + ": " + e.what());
    return std::nullopt;
  }
  return g;
}

}  // namespace

std::optional<SyntheticProblem> problem_from_json(const json& spec, std::vector<std::string>& errors,
                                                  const std::string& where) {
  JsonFields f(spec, where, errors);
  if (!f.ok()) return std::nullopt;
  const auto before = errors.size();
  const auto kind = f.string("kind", "linear", true, {"linear", "separable"});
  const std::int64_t dim = f.integer("dim", 1, true);
  if (dim < 1) {
    f.error(f.path("dim") + ": must be at least 1");
    f.reject_unknown();
    return std::nullopt;
  }
  const auto d = static_cast<std::size_t>(dim);

  std::optional<Support> support;
  if (const json* s = f.raw("support"))
    support = support_from_json(*s, d, errors, f.path("support"));
  else
    support = Support::unit_box(d);
  f.allow("support");

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  std::vector<CoordinateMap> maps(d);
  if (kind == "linear") {
    if (f.has("A") && f.has("A_diag")) f.error(where + ": give either A or A_diag, not both");
    if (const json* m = f.raw("A")) {
      bool shape_ok = m->is_array() && m->size() == d;
      for (std::size_t k = 0; shape_ok && k < d; ++k) {
        const json& row = (*m)[k];
        shape_ok = row.is_array() && row.size() == d;
        for (std::size_t l = 0; shape_ok && l < d; ++l) {
          shape_ok = row[l].is_number();
          if (shape_ok) a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = row[l].get<double>();
        }
      }
      if (!shape_ok) f.error(f.path("A") + ": expected a " + std::to_string(d) + "x" +
                             std::to_string(d) + " array of numbers");
    }
    f.allow("A");
    if (f.has("A_diag")) {
      const auto diag = f.vector("A_diag", d, 1.0);
      for (std::size_t k = 0; k < d; ++k) a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = diag[k];
    }
    const auto bv = f.vector("b", d, 0.0);
    for (std::size_t k = 0; k < d; ++k) b(static_cast<Eigen::Index>(k)) = bv[k];
  } else {
    if (f.has("maps") && f.has("map")) f.error(where + ": give either maps or map, not both");
    if (const json* m = f.raw("maps")) {
      if (!m->is_array() || m->size() != d) {
        f.error(f.path("maps") + ": expected an array of " + std::to_string(d) + " maps");
      } else {
        for (std::size_t k = 0; k < d; ++k)
          if (auto g = map_from_json((*m)[k], errors, f.path("maps") + "[" + std::to_string(k) + "]"))
            maps[k] = *g;
      }
    } else if (const json* m = f.raw("map")) {
      if (auto g = map_from_json(*m, errors, f.path("map"))) std::fill(maps.begin(), maps.end(), *g);
    } else {
      f.error(where + ": separable problem needs maps or map");
    }
    f.allow("maps");
    f.allow("map");
  }
  f.reject_unknown();
  if (errors.size() != before || !support) return std::nullopt;
  try {
    if (kind == "linear") return make_linear_problem(a, b, *support);
    return make_separable_problem(maps, *support);
  } catch (const Error& e) {
    errors.push_back(where + ": " + e.what());
    return std::nullopt;
  }
}

SyntheticProblem problem_from_json(const json& spec) {
  std::vector<std::string> errors;
  auto p = problem_from_json(spec, errors);
  if (!p) throw Error("invalid problem:\n" + join_errors(errors));
  return *p;
}

std::pair<DiscreteMeasure, DiscreteMeasure> sample_pair(const SyntheticProblem& problem,
                                                        std::size_t m, std::size_t n,
                                                        std::uint64_t seed, SamplingMode mode) {
  if (m == 0 || n == 0) throw Error("sample_pair: sample sizes must be positive");
  Rng rx = make_rng(derive_seed(seed, streams::source_sample));
  PointSet x = problem.sample_source(m, rx);
  PointSet y;
  if (mode == SamplingMode::paired) {
    if (m != n) throw Error("sample_pair: paired mode needs m == n");
    y = problem.push_forward(x);
  } else {
    Rng ry = make_rng(derive_seed(seed, streams::target_sample));
    y = problem.push_forward(problem.sample_source(n, ry));
  }
  return {DiscreteMeasure::uniform(std::move(x)), DiscreteMeasure::uniform(std::move(y))};
}

}  // namespace otmap
