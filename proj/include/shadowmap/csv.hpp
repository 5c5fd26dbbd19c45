#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace shadowmap::csv {

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

// Writes header + one row per matrix row, 17 significant digits (%.17g),
// enough to round-trip doubles exactly.
void write(const std::string& path, const std::vector<std::string>& header,
           const Eigen::MatrixXd& values);

Table read(const std::string& path);

} // namespace shadowmap::csv
