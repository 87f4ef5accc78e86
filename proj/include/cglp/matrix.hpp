#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cglp/errors.hpp"
#include "cglp/kernels.hpp"
#include "cglp/rng.hpp"

namespace cglp {

// Dense row-major matrix. A 1xN matrix doubles as a row vector, 1x1 as a
// scalar. All heavy loops go through the kernel layer.
template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix zeros_like(const Matrix& other) { return Matrix(other.rows_, other.cols_); }

    static Matrix uniform(size_t rows, size_t cols, T bound, Rng& rng) {
        Matrix m(rows, cols);
        for (auto& x : m.data_) x = static_cast<T>(rng.next_uniform(static_cast<double>(bound)));
        return m;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T* row(size_t r) { return data_.data() + r * cols_; }
    const T* row(size_t r) const { return data_.data() + r * cols_; }

    T& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    void fill(T v) { data_.assign(data_.size(), v); }

    void add_inplace(const Matrix& other) {
        check_same_shape(other, "add");
        kernels::add(data(), other.data(), data(), size());
    }

    void axpy_inplace(T alpha, const Matrix& other) {
        check_same_shape(other, "axpy");
        kernels::axpy(alpha, other.data(), data(), size());
    }

    void scale_inplace(T alpha) { kernels::scale(alpha, data(), size()); }

    // this (r x k) times other (k x c).
    Matrix matmul(const Matrix& other) const {
        if (cols_ != other.rows_)
            throw ShapeError("matmul: " + shape_str() + " x " + other.shape_str());
        Matrix out(rows_, other.cols_);
        for (size_t i = 0; i < rows_; ++i) {
            const T* a = row(i);
            T* dst = out.row(i);
            for (size_t k = 0; k < cols_; ++k)
                if (a[k] != T(0)) kernels::axpy(a[k], other.row(k), dst, other.cols_);
        }
        return out;
    }

    Matrix transposed() const {
        Matrix out(cols_, rows_);
        for (size_t i = 0; i < rows_; ++i)
            for (size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
        return out;
    }

    bool all_finite() const {
        for (T x : data_)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    template <class U>
    Matrix<U> cast() const {
        Matrix<U> out(rows_, cols_);
        for (size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    void check_same_shape(const Matrix& other, const char* what) const {
        if (!same_shape(other))
            throw ShapeError(std::string(what) + ": " + shape_str() + " vs " + other.shape_str());
    }

    size_t rows_ = 0, cols_ = 0;
    std::vector<T> data_;
};

}  // namespace cglp
