#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace lsi {

// Dense row-major matrix of doubles. Immutable by convention once handed to
// the tape; the raw kernels below never mutate their inputs.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data; // rows * cols, row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
        if (r <= 0 || c <= 0) fail(ErrorCode::invalid_argument, "matrix dims must be positive");
    }

    static Matrix zeros(int r, int c) { return Matrix(r, c); }
    static Matrix full(int r, int c, double v);
    static Matrix identity(int n);
    static Matrix gaussian(int r, int c, double mean, double stddev, Rng &rng);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    double &at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    const double *row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    double *row(int r) { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }
    bool same_shape(const Matrix &other) const { return rows == other.rows && cols == other.cols; }
    bool empty() const { return rows == 0; }
    std::string shape_str() const;

    bool all_finite() const;
    double max_abs_diff(const Matrix &other) const;
    bool operator==(const Matrix &other) const {
        return rows == other.rows && cols == other.cols && data == other.data;
    }
};

// ---- raw kernels (no autodiff) ----

Matrix matmul(const Matrix &a, const Matrix &b);    // a[m,k] * b[k,n]
Matrix matmul_nt(const Matrix &a, const Matrix &b); // a[m,k] * b[n,k]^T
Matrix matmul_tn(const Matrix &a, const Matrix &b); // a[k,m]^T * b[k,n]
Matrix transpose(const Matrix &a);

Matrix add(const Matrix &a, const Matrix &b);
Matrix sub(const Matrix &a, const Matrix &b);
Matrix mul(const Matrix &a, const Matrix &b); // elementwise
Matrix scale(const Matrix &a, double s);
Matrix add_rowvec(const Matrix &a, const Matrix &v); // v is 1 x cols, added to every row
Matrix mul_rowvec(const Matrix &a, const Matrix &v);

Matrix gelu(const Matrix &a);
Matrix gelu_grad(const Matrix &a); // d gelu / d a, elementwise

// Row softmax with max-subtraction stabilization. With causal=true, entry
// (i, j) for j > i is forced to zero and row i normalizes over j <= i
// (requires a square input).
Matrix softmax_rows(const Matrix &a, bool causal = false);

// Rows normalized to mean 0, variance 1 (no affine part).
Matrix layernorm_rows(const Matrix &a, double eps = 1e-5);

// Zero each element with probability p, scale survivors by 1/(1-p). The mask
// is a pure function of (rng, counter_base + element index), so training
// steps replay bit-identically. Returns the already-scaled mask.
Matrix dropout_mask(int rows, int cols, double p, const StatelessRng &rng, uint64_t counter_base);

Matrix colsum(const Matrix &a); // 1 x cols
double sum(const Matrix &a);

} // namespace lsi
