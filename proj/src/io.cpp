#include "otmap/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace otmap {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

enum class Cell { number, non_finite, text };

Cell parse_cell(const std::string& s, double& out) {
  if (s.empty()) return Cell::text;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  if (ptr != s.data() + s.size() || (ec != std::errc() && ec != std::errc::result_out_of_range))
    return Cell::text;
  return ec == std::errc() && std::isfinite(out) ? Cell::number : Cell::non_finite;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

DiscreteMeasure parse_point_cloud(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::ptrdiff_t weight_col = -1;
  bool header_seen = false;
  std::vector<double> coords, weights;
  auto fail = [&](const std::string& what) {
    throw Error(name + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t);
    std::vector<double> values(cells.size());
    bool numeric = true, text = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto kind = parse_cell(cells[c], values[c]);
      numeric = numeric && kind == Cell::number;
      text = text || kind == Cell::text;
    }

    if (text && !header_seen && columns == 0) {
      header_seen = true;
      columns = cells.size();
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto h = lower(cells[c]);
        if (h == "weight" || h == "w") {
          if (weight_col >= 0) fail("more than one weight column");
          weight_col = static_cast<std::ptrdiff_t>(c);
        }
      }
      continue;
    }
    if (columns == 0) columns = cells.size();
    if (cells.size() != columns)
      fail("expected " + std::to_string(columns) + " columns, found " + std::to_string(cells.size()));
    if (!numeric) {
      for (std::size_t c = 0; c < cells.size(); ++c)
        if (parse_cell(cells[c], values[c]) != Cell::number) fail("column " + std::to_string(c + 1) + ": '" + cells[c] + "' is not a finite number");
    }
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == weight_col) {
        if (!(values[c] > 0.0)) fail("weight must be positive");
        weights.push_back(values[c]);
      } else {
        coords.push_back(values[c]);
      }
    }
  }
  const std::size_t dim = columns - (weight_col >= 0 ? 1 : 0);
  if (columns == 0 || coords.empty()) throw Error(name + ": no atoms found");
  if (dim == 0) throw Error(name + ": no coordinate columns");
  PointSet points(std::move(coords), dim);
  if (weight_col < 0) return DiscreteMeasure::uniform(std::move(points));
  return DiscreteMeasure::normalized(std::move(points), std::move(weights));
}

DiscreteMeasure read_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_point_cloud(in, path);
}

std::string point_cloud_csv(const PointSet& points, const std::vector<double>* weights) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t k = 0; k < points.dim(); ++k) out << (k ? "," : "") << 'x' << (k + 1);
  if (weights) out << ",weight";
  out << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < points.dim(); ++k) out << (k ? "," : "") << points[i][k];
    if (weights) out << ',' << (*weights)[i];
    out << '\n';
  }
  return out.str();
}

std::string plan_csv(const TransportPlan& plan) {
  std::ostringstream out;
  out.precision(17);
  out << "i,j,mass\n";
  for (const auto& e : plan.entries) out << e.source << ',' << e.target << ',' << e.mass << '\n';
  return out.str();
}

std::string potentials_csv(const TransportPlan& plan) {
  std::ostringstream out;
  out.precision(17);
  out << "side,index,value\n";
  for (std::size_t i = 0; i < plan.duals.psi.size(); ++i) out << "source," << i << ',' << plan.duals.psi[i] << '\n';
  for (std::size_t j = 0; j < plan.duals.psi_star.size(); ++j)
    out << "target," << j << ',' << plan.duals.psi_star[j] << '\n';
  return out.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace otmap
