#pragma once

#include <iosfwd>
#include <string>

#include "otmap/measure.hpp"
#include "otmap/ot_core.hpp"

namespace otmap {

/// Point cloud CSV: one row per atom, columns x1..xd and optionally a weight.
///
/// A first row that does not parse as numbers is a header; a header column
/// named "weight" (or "w") marks the weight column, otherwise all columns are
/// coordinates and the weights are uniform. Blank lines and lines starting
/// with '#' are skipped. Errors name the offending line.
DiscreteMeasure parse_point_cloud(std::istream& in, const std::string& name = "<input>");
DiscreteMeasure read_point_cloud(const std::string& path);

/// Header x1..xd[,weight], full precision.
std::string point_cloud_csv(const PointSet& points, const std::vector<double>* weights = nullptr);

/// i,j,mass per plan entry.
std::string plan_csv(const TransportPlan& plan);
/// side,index,value with side in {source, target}.
std::string potentials_csv(const TransportPlan& plan);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace otmap
