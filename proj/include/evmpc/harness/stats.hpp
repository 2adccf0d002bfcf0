#pragma once

// Set point tracking statistics and the CSV column reader behind them.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmpc::harness {

struct TrackingStats {
    std::size_t samples = 0;
    double mean_abs_dev = 0.0;
    double max_dev = 0.0;
    double mse = 0.0;
};

/// Deviation statistics over paired samples; `active`, when given, selects
/// the slots that count.
inline TrackingStats compute_tracking_stats(const std::vector<double>& commanded, const std::vector<double>& applied,
                                            const std::vector<bool>& active = {})
{
    if (commanded.size() != applied.size()) {
        throw std::invalid_argument("tracking series differ in length");
    }
    if (!active.empty() && active.size() != commanded.size()) {
        throw std::invalid_argument("activity mask differs in length");
    }
    TrackingStats s;
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < commanded.size(); ++i) {
        if (!active.empty() && !active[i]) {
            continue;
        }
        const double d = std::abs(commanded[i] - applied[i]);
        abs_sum += d;
        sq_sum += d * d;
        s.max_dev = std::max(s.max_dev, d);
        ++s.samples;
    }
    if (s.samples > 0) {
        s.mean_abs_dev = abs_sum / static_cast<double>(s.samples);
        s.mse = sq_sum / static_cast<double>(s.samples);
    }
    return s;
}

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reads one numeric column from a CSV file with a header row. An empty
/// column name takes the only column, or the last one.
inline std::vector<double> read_csv_column(const std::string& path, const std::string& column)
{
    std::ifstream in(path);
    if (!in) {
        throw CsvError(path + ": cannot open file");
    }
    const auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) {
        throw CsvError(path + ": empty file");
    }
    const auto header = split(line);
    std::size_t idx = header.size() - 1;
    if (!column.empty()) {
        const auto it = std::find(header.begin(), header.end(), column);
        if (it == header.end()) {
            throw CsvError(path + ": no column named " + column);
        }
        idx = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<double> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line);
        if (idx >= cells.size()) {
            throw CsvError(path + ":" + std::to_string(row) + ": missing column " + header[idx]);
        }
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cells[idx], &used));
            if (used != cells[idx].size()) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception&) {
            throw CsvError(path + ":" + std::to_string(row) + ": not a number: " + cells[idx]);
        }
    }
    return out;
}

} // namespace evmpc::harness
