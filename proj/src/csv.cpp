#include "shadowmap/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace shadowmap::csv {

void write(const std::string& path, const std::vector<std::string>& header,
           const Eigen::MatrixXd& values) {
    if (header.size() != static_cast<std::size_t>(values.cols()))
        throw std::invalid_argument("csv::write: header width != column count");
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("csv::write: cannot open " + path);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out << ',';
        out << header[c];
    }
    out << '\n';
    char buf[64];
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", values(r, c));
            if (c) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("csv::write: write failed for " + path);
}

Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("csv::read: cannot open " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("csv::read: empty file " + path);
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ','))
        t.header.push_back(cell);

    std::vector<double> data;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::size_t cols = 0;
        while (std::getline(ls, cell, ',')) {
            data.push_back(std::strtod(cell.c_str(), nullptr));
            ++cols;
        }
        if (cols != t.header.size())
            throw std::runtime_error("csv::read: ragged row in " + path);
        ++rows;
    }
    t.values.resize(rows, t.header.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < t.header.size(); ++c)
            t.values(r, c) = data[r * t.header.size() + c];
    return t;
}

} // namespace shadowmap::csv
