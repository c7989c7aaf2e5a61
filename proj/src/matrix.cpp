#include "advsel/matrix.hpp"

#include <cmath>
#include <utility>

namespace advsel {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
        throw dimension_error("matrix: got " + std::to_string(data.size()) +
                              " values for shape " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
}

void Matrix::ensure_finite(const std::string& context) const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw value_error(context + ": non-finite value in result");
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw dimension_error("matmul: " + std::to_string(a.rows) + "x" +
                              std::to_string(a.cols) + " * " + std::to_string(b.rows) +
                              "x" + std::to_string(b.cols));
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            double av = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw dimension_error("max_abs_diff: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
    }
    return worst;
}

} // namespace advsel
