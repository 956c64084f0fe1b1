#pragma once

#include "kbi/filter.hpp"
#include "kbi/linalg.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kbi {

struct ResultRow {
  std::uint64_t replicate = 0;
  std::string axis;
  double axis_value = 0.0;
  std::string metric;
  double value = 0.0;
};

/// Shortest text that round-trips the double exactly.
std::string format_double(double x);

/// Header config_hash,replicate,axis,axis_value,metric,value.
void write_experiment_csv(std::ostream& out, const std::string& config_hash,
                          const std::vector<ResultRow>& rows);

/// Columns t, true_0.., estimate_0.., sq_error.
void write_filter_csv(std::ostream& out, const PointSet& truth, const std::vector<FilterStep>& steps);

/// Path of the manifest written next to a CSV: "<csv>.manifest.json".
std::string manifest_path(const std::string& csv_path);

}  // namespace kbi
