#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "otmap/io.hpp"

using namespace otmap;

namespace {

DiscreteMeasure parse(const std::string& text) {
  std::istringstream in(text);
  return parse_point_cloud(in, "cloud.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("point clouds: header, weights, comments") {
  const auto plain = parse("0,1\n2,3\n4,5\n");
  CHECK(plain.dim() == 2);
  CHECK(plain.size() == 3);
  CHECK(plain.weight(1) == doctest::Approx(1.0 / 3));

  const auto weighted = parse("# two atoms\nx1, weight\n\n0.5, 1\n1.5, 3\n");
  CHECK(weighted.dim() == 1);
  CHECK(weighted.weight(0) == doctest::Approx(0.25));
  CHECK(weighted.points()[1][0] == 1.5);

  // Weight column first.
  const auto first = parse("w,x,y\n2,0,0\n2,1,1\n");
  CHECK(first.dim() == 2);
  CHECK(first.weight(1) == doctest::Approx(0.5));
  CHECK(first.points()[1][1] == 1.0);

  const auto header_only_coords = parse("x1,x2\n1,2\n");
  CHECK(header_only_coords.dim() == 2);
}

TEST_CASE("point clouds: errors name the line") {
  CHECK(error_of("x\n1\nabc\n").find("cloud.csv:3:") == 0);
  CHECK(error_of("1,2\n3\n").find("cloud.csv:2: expected 2 columns") == 0);
  CHECK(error_of("x,weight\n1,0\n").find("cloud.csv:2: weight must be positive") == 0);
  CHECK(error_of("x,weight,w\n1,1,1\n").find("more than one weight") != std::string::npos);
  CHECK(error_of("# nothing\n").find("no atoms") != std::string::npos);
  CHECK(error_of("1,nan\n").find("not a finite number") != std::string::npos);
  CHECK_THROWS_AS(read_point_cloud("/nonexistent/file.csv"), Error);
}

TEST_CASE("point clouds round trip through CSV") {
  PointSet pts(std::vector<double>{0.1, -2.0 / 3, 1e-17, 5.0}, 2);
  std::vector<double> w{0.3, 0.7};
  const auto text = point_cloud_csv(pts, &w);
  CHECK(text.rfind("x1,x2,weight\n", 0) == 0);
  const auto back = parse(text);
  CHECK(back.points()[0][1] == -2.0 / 3);
  CHECK(back.points()[1][0] == 1e-17);
  CHECK(back.weight(1) == doctest::Approx(0.7).epsilon(1e-15));

  const auto dir = std::filesystem::temp_directory_path() / "otmap_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_text_file((dir / "a.csv").string(), text);
  CHECK(read_point_cloud((dir / "a.csv").string()).size() == 2);
  std::filesystem::remove_all(dir.parent_path());
}

TEST_CASE("plan and potential writers") {
  auto src = DiscreteMeasure::uniform(PointSet(std::vector<double>{0.0, 1.0}, 1));
  auto tgt = DiscreteMeasure::uniform(PointSet(std::vector<double>{0.0, 2.0}, 1));
  const auto plan = solve_ot(src, tgt);
  const auto p = plan_csv(plan);
  CHECK(p.rfind("i,j,mass\n", 0) == 0);
  CHECK(p.find("1,1,0.5") != std::string::npos);
  const auto d = potentials_csv(plan);
  CHECK(d.find("source,0,0\n") != std::string::npos);
  CHECK(std::count(d.begin(), d.end(), '\n') == 5);
}
