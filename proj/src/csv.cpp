#include "kbi/csv.hpp"

#include "kbi/errors.hpp"

#include <charconv>
#include <ostream>

namespace kbi {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_experiment_csv(std::ostream& out, const std::string& config_hash,
                          const std::vector<ResultRow>& rows) {
  out << "config_hash,replicate,axis,axis_value,metric,value\n";
  for (const auto& r : rows) {
    out << config_hash << ',' << r.replicate << ',' << r.axis << ',' << format_double(r.axis_value)
        << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

void write_filter_csv(std::ostream& out, const PointSet& truth, const std::vector<FilterStep>& steps) {
  if (static_cast<std::size_t>(truth.rows()) < steps.size()) {
    throw InputError("write_filter_csv: fewer true states than filter steps");
  }
  const Eigen::Index d = truth.cols();
  out << "t";
  for (Eigen::Index k = 0; k < d; ++k) out << ",true_" << k;
  for (Eigen::Index k = 0; k < d; ++k) out << ",estimate_" << k;
  out << ",sq_error\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Point& est = steps[i].estimate;
    out << steps[i].state.t;
    for (Eigen::Index k = 0; k < d; ++k) out << ',' << format_double(truth(row, k));
    for (Eigen::Index k = 0; k < d; ++k) out << ',' << format_double(est(k));
    out << ',' << format_double((truth.row(row).transpose() - est).squaredNorm()) << '\n';
  }
}

std::string manifest_path(const std::string& csv_path) { return csv_path + ".manifest.json"; }

}  // namespace kbi
