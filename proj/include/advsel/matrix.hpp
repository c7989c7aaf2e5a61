#ifndef ADVSEL_MATRIX_HPP
#define ADVSEL_MATRIX_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "advsel/errors.hpp"

namespace advsel {

/// Dense row-major matrix of doubles. Row vectors are the sample layout
/// throughout: a batch of b samples with n features is a b x n matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }

    /// Throws value_error if any entry is NaN or infinite. `context` names the
    /// operation for the error message.
    void ensure_finite(const std::string& context) const;
};

/// a[r x k] * b[k x c]
Matrix matmul(const Matrix& a, const Matrix& b);

/// Elementwise maximum absolute difference; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

} // namespace advsel

#endif
