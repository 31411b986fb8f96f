#ifndef TAILPROB_CSV_HPP
#define TAILPROB_CSV_HPP

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tailprob/mvn.hpp"

namespace tailprob {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ') ++start;
        cells.push_back(cell.substr(start));
    }
    return cells;
}

inline double parse_cell(const std::string& cell, const std::string& path, std::size_t row,
                         std::size_t col) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw CsvError(path + ": non-numeric cell at row " + std::to_string(row) + ", column " +
                       std::to_string(col));
    }
}

// Headered CSV of reals: header row, then uniform numeric rows.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> load_table(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError(path + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw CsvError(path + ": empty file");
    const auto header = split_csv_line(line);
    std::vector<std::vector<double>> rows;
    std::size_t row_index = 1;
    while (std::getline(in, line)) {
        ++row_index;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw CsvError(path + ": row " + std::to_string(row_index) + " has " +
                           std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(header.size()));
        std::vector<double> vals(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c)
            vals[c] = parse_cell(cells[c], path, row_index, c + 1);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw CsvError(path + ": no data rows");
    return {header, rows};
}

}  // namespace detail

struct EigenvalueFile {
    Vector lambdas;
    std::optional<double> q_obs;
};

// CSV with a "lambda" column of positive eigenvalues; an optional "q"
// column supplies the observed statistic on its first row.
inline EigenvalueFile load_eigenvalues_csv(const std::string& path) {
    const auto [header, rows] = detail::load_table(path);
    std::size_t lambda_col = header.size();
    std::optional<std::size_t> q_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "lambda") lambda_col = c;
        if (header[c] == "q") q_col = c;
    }
    if (lambda_col == header.size())
        throw CsvError(path + ": missing required column \"lambda\"");

    EigenvalueFile out;
    out.lambdas.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double v = rows[r][lambda_col];
        if (!(v > 0.0))
            throw CsvError(path + ": non-positive eigenvalue at row " + std::to_string(r + 2));
        out.lambdas[static_cast<Eigen::Index>(r)] = v;
    }
    if (q_col) out.q_obs = rows[0][*q_col];
    return out;
}

struct MatricesFile {
    Matrix features;  // n x k
    Vector residual;  // n
    std::optional<Vector> weights;
};

// Feature matrix, residual vector, and optional per-column weights, each
// as a headered CSV; row/column counts must be mutually consistent.
inline MatricesFile load_matrices_csv(const std::string& features_path,
                                      const std::string& residual_path,
                                      const std::optional<std::string>& weights_path = {}) {
    const auto [fh, frows] = detail::load_table(features_path);
    MatricesFile out;
    out.features.resize(static_cast<Eigen::Index>(frows.size()),
                        static_cast<Eigen::Index>(fh.size()));
    for (std::size_t r = 0; r < frows.size(); ++r)
        for (std::size_t c = 0; c < fh.size(); ++c)
            out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = frows[r][c];

    const auto [rh, rrows] = detail::load_table(residual_path);
    if (rh.size() != 1)
        throw CsvError(residual_path + ": expected a single column");
    if (rrows.size() != frows.size())
        throw CsvError(residual_path + ": row count " + std::to_string(rrows.size()) +
                       " does not match feature rows " + std::to_string(frows.size()));
    out.residual.resize(static_cast<Eigen::Index>(rrows.size()));
    for (std::size_t r = 0; r < rrows.size(); ++r)
        out.residual[static_cast<Eigen::Index>(r)] = rrows[r][0];

    if (weights_path) {
        const auto [wh, wrows] = detail::load_table(*weights_path);
        if (wh.size() != 1) throw CsvError(*weights_path + ": expected a single column");
        if (wrows.size() != static_cast<std::size_t>(out.features.cols()))
            throw CsvError(*weights_path + ": row count does not match feature columns");
        Vector w(static_cast<Eigen::Index>(wrows.size()));
        for (std::size_t r = 0; r < wrows.size(); ++r)
            w[static_cast<Eigen::Index>(r)] = wrows[r][0];
        out.weights = std::move(w);
    }
    return out;
}

}  // namespace tailprob

#endif
