#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dialopre/rng.hpp"

namespace dialopre {

// Row-major dense matrix of doubles. Everything model-side runs in double
// precision so finite-difference gradient checks are meaningful.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
        assert(rows >= 0 && cols >= 0);
    }

    static Matrix randn(int rows, int cols, double stddev, Rng& rng) {
        Matrix m(rows, cols);
        for (double& x : m.data_) x = rng.normal(0.0, stddev);
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

    void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double x : data_) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

private:
    int rows_;
    int cols_;
    std::vector<double> data_;
};

}  // namespace dialopre
