#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace pufatt {

// Dense row-major matrix of doubles. Deliberately minimal; the network code
// writes its own loops over raw rows.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    bool empty() const { return rows == 0 || cols == 0; }

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    void fill(double value) { std::fill(data.begin(), data.end(), value); }

    bool operator==(const Matrix&) const = default;
};

}  // namespace pufatt
