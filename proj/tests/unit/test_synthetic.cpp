#include <doctest.h>

#include <cmath>

#include "otmap/ot_core.hpp"
#include "otmap/synthetic.hpp"

using namespace otmap;

namespace {

SyntheticProblem linear_diag(std::vector<double> diag) {
  const auto d = static_cast<Eigen::Index>(diag.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) a(k, k) = diag[static_cast<std::size_t>(k)];
  return make_linear_problem(a, Eigen::VectorXd::Zero(d), Support::unit_box(diag.size()));
}

CoordinateMap cubic(double a, double c) {
  return CoordinateMap{CoordinateMap::Kind::cubic, a, 0.0, c};
}

std::vector<SyntheticProblem> problem_zoo() {
  std::vector<SyntheticProblem> out;
  out.push_back(linear_diag({2.0}));
  out.push_back(linear_diag({2.0, 1.0}));
  Eigen::MatrixXd a(3, 3);
  a << 2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8;
  Eigen::VectorXd b(3);
  b << 0.5, -1.0, 0.25;
  out.push_back(make_linear_problem(
      a, b, Support::truncated_normal({0, 0, 0}, {1, 1, 1}, {-2, -2, -2}, {2, 2, 2})));
  out.push_back(make_separable_problem(
      {cubic(1.0, 1.0 / 3.0), CoordinateMap{CoordinateMap::Kind::tanh, 1.0, 0.2, 0.8}},
      Support::box({-1.0, -1.0}, {1.0, 1.5})));
  out.push_back(make_separable_problem(
      {CoordinateMap{CoordinateMap::Kind::affine, 0.5, 1.0, 0.0}, cubic(0.8, 0.2),
       CoordinateMap{}},
      Support::truncated_normal({0, 0.5, 0}, {0.7, 1.0, 2.0}, {-1, -1, -1}, {1, 1, 1})));
  return out;
}

}  // namespace

TEST_CASE("make_linear_problem examples") {
  auto id = make_linear_problem(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3),
                                Support::unit_box(3));
  CHECK(id.true_w2sq() == doctest::Approx(0.0));
  CHECK(linear_diag({2.0}).true_w2sq() == doctest::Approx(1.0 / 3).epsilon(1e-14));
  auto p = linear_diag({2.0, 1.0});
  CHECK(p.true_w2sq() == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(p.lipschitz() == doctest::Approx(2.0));

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(make_linear_problem(bad, Eigen::VectorXd::Zero(2), Support::unit_box(2)), Error);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(make_linear_problem(asym, Eigen::VectorXd::Zero(2), Support::unit_box(2)), Error);
}

TEST_CASE("true_w2sq agrees with Monte Carlo on a truncated normal") {
  auto zoo = problem_zoo();
  for (std::size_t idx : {2u, 4u}) {
    const auto& p = zoo[idx];
    Rng rng = make_rng(idx);
    const std::size_t n = 200000;
    auto x = p.sample_source(n, rng);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = squared_distance(x[i], p.transport(x[i]));
      s += v;
      s2 += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - p.true_w2sq()) < 4.0 * se);
  }
}

TEST_CASE("make_separable_problem examples") {
  auto id = make_separable_problem({CoordinateMap{}, CoordinateMap{}}, Support::unit_box(2));
  CHECK(id.true_w2sq() == doctest::Approx(0.0));
  auto p = make_separable_problem({cubic(1.0, 1.0 / 3.0)}, Support::unit_box(1));
  CHECK(p.true_w2sq() == doctest::Approx(1.0 / 63).epsilon(1e-12));
  CHECK(p.lipschitz() == doctest::Approx(2.0).epsilon(1e-12));

  for (const auto& g : {cubic(1.0, 1.0 / 3.0), CoordinateMap{CoordinateMap::Kind::tanh, 0.5, 0.1, 2.0}}) {
    for (int t = 0; t <= 1000; ++t) {
      const double x = -1.0 + 2.0 * t / 1000.0;
      CHECK(std::abs(g.inverse(g(x)) - x) <= 1e-10);
    }
  }
  CHECK_THROWS_AS(make_separable_problem({cubic(1.0, -1.0)}, Support::unit_box(1)), Error);
  CHECK_THROWS_AS(make_separable_problem({CoordinateMap{}}, Support::unit_box(2)), DimensionMismatch);
}

TEST_CASE("sample_pair") {
  auto zoo = problem_zoo();
  const auto& p = zoo[3];
  auto [x1, y1] = sample_pair(p, 50, 40, 17);
  auto [x2, y2] = sample_pair(p, 50, 40, 17);
  CHECK(x1.points().coords() == x2.points().coords());
  CHECK(y1.points().coords() == y2.points().coords());
  CHECK(x1.size() == 50);
  CHECK(y1.size() == 40);

  const std::size_t n = 20000;
  auto [x, y] = sample_pair(p, 10, n, 5);
  const auto expect = p.pushforward_mean();
  for (std::size_t k = 0; k < p.dim(); ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += y.point(i)[k];
      s2 += y.point(i)[k] * y.point(i)[k];
    }
    const double mean = s / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    CHECK(std::abs(mean - expect[k]) < 4.0 * sd / std::sqrt(double(n)));
  }

  auto [xp, yp] = sample_pair(p, 30, 30, 9, SamplingMode::paired);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto t = p.transport(xp.point(i));
    for (std::size_t k = 0; k < p.dim(); ++k) CHECK(yp.point(i)[k] == t[k]);
  }
  CHECK_THROWS_AS(sample_pair(p, 3, 4, 1, SamplingMode::paired), Error);
}

TEST_CASE("identity problem: W2 between samples shrinks with n") {
  auto id = make_linear_problem(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                                Support::unit_box(2));
  auto median_w2 = [&](std::size_t n) {
    std::vector<double> v;
    for (int r = 0; r < 9; ++r) {
      auto [x, y] = sample_pair(id, n, n, 100 + r);
      v.push_back(w2_squared(x, y));
    }
    std::sort(v.begin(), v.end());
    return v[4];
  };
  CHECK(median_w2(400) < median_w2(50));
}

TEST_CASE("property: gradient consistency, conjugacy, inverse, Lipschitz") {
  auto zoo = problem_zoo();
  for (std::size_t idx = 0; idx < zoo.size(); ++idx) {
    const auto& p = zoo[idx];
    const std::size_t d = p.dim();
    Rng rng = make_rng(1000 + idx);
    CAPTURE(idx);
    int bad_grad = 0, bad_conj = 0, bad_inv = 0, bad_lip = 0;
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(d);
      p.support().sample(rng, x);
      const auto tx = p.transport(x);
      double scale = 1.0;
      for (double v : x) scale = std::max(scale, std::abs(v));
      const double h = 1e-5 * scale;
      for (std::size_t k = 0; k < d; ++k) {
        auto xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const double fd = (p.potential(xp) - p.potential(xm)) / (2.0 * h);
        if (std::abs(fd - tx[k]) > 1e-5 * std::max(1.0, std::abs(tx[k]))) ++bad_grad;
      }
      if (std::abs(p.potential(x) + p.conjugate(tx) - dot(x, tx)) > 1e-8) ++bad_conj;
      const auto back = p.inverse_transport(tx);
      for (std::size_t k = 0; k < d; ++k)
        if (std::abs(back[k] - x[k]) > 1e-8) ++bad_inv;
    }
    for (int t = 0; t < 10000; ++t) {
      std::vector<double> x(d), z(d);
      p.support().sample(rng, x);
      p.support().sample(rng, z);
      const double lhs = std::sqrt(squared_distance(p.transport(x), p.transport(z)));
      if (lhs > p.lipschitz() * std::sqrt(squared_distance(x, z)) * (1 + 1e-12) + 1e-14) ++bad_lip;
    }
    CHECK(bad_grad == 0);
    CHECK(bad_conj == 0);
    CHECK(bad_inv == 0);
    CHECK(bad_lip == 0);
  }
}

TEST_CASE("JSON round trip and validation") {
  for (const auto& p : problem_zoo()) {
    auto q = problem_from_json(p.to_json());
    CHECK(q.to_json() == p.to_json());
    CHECK(q.true_w2sq() == doctest::Approx(p.true_w2sq()).epsilon(1e-14));
  }
  nlohmann::json bad = {{"kind", "linear"},
                        {"dim", 2},
                        {"A_diag", {1.0, 2.0, 3.0}},
                        {"colour", "blue"},
                        {"support", {{"kind", "box"}, {"lower", "x"}}}};
  std::vector<std::string> errors;
  CHECK_FALSE(problem_from_json(bad, errors).has_value());
  CHECK(errors.size() == 3);

  nlohmann::json sep = {{"kind", "separable"},
                        {"dim", 3},
                        {"map", {{"type", "cubic"}, {"a", 1.0}, {"c", 0.25}}}};
  auto p = problem_from_json(sep);
  CHECK(p.maps().size() == 3);
  CHECK(p.maps()[2].c == 0.25);
}
