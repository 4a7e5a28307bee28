#include "matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lsi {

namespace {

void check_same_shape(const Matrix &a, const Matrix &b, const char *op) {
    if (!a.same_shape(b)) {
        fail(ErrorCode::invalid_argument,
             std::string(op) + ": shape " + a.shape_str() + " vs " + b.shape_str());
    }
}

void check_rowvec(const Matrix &a, const Matrix &v, const char *op) {
    if (v.rows != 1 || v.cols != a.cols) {
        fail(ErrorCode::invalid_argument, std::string(op) + ": row vector " + v.shape_str() +
                                              " does not match " + a.shape_str());
    }
}

} // namespace

std::string Matrix::shape_str() const {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
}

Matrix Matrix::full(int r, int c, double v) {
    Matrix m(r, c);
    std::fill(m.data.begin(), m.data.end(), v);
    return m;
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; i++) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::gaussian(int r, int c, double mean, double stddev, Rng &rng) {
    Matrix m(r, c);
    for (double &x : m.data) x = rng.gaussian(mean, stddev);
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    int r = static_cast<int>(rows_init.size());
    int c = static_cast<int>(rows_init.begin()->size());
    Matrix m(r, c);
    int i = 0;
    for (const auto &row : rows_init) {
        if (static_cast<int>(row.size()) != c) {
            fail(ErrorCode::invalid_argument, "from_rows: ragged rows");
        }
        int j = 0;
        for (double v : row) m.at(i, j++) = v;
        i++;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Matrix::max_abs_diff(const Matrix &other) const {
    check_same_shape(*this, other, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < data.size(); i++) {
        m = std::max(m, std::fabs(data[i] - other.data[i]));
    }
    return m;
}

Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols != b.rows) {
        fail(ErrorCode::invalid_argument,
             "matmul: " + a.shape_str() + " incompatible with " + b.shape_str());
    }
    Matrix out(a.rows, b.cols);
    // i-k-j order keeps the inner loop contiguous in b and out
    for (int i = 0; i < a.rows; i++) {
        const double *arow = a.row(i);
        double *orow = out.row(i);
        for (int k = 0; k < a.cols; k++) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double *brow = b.row(k);
            for (int j = 0; j < b.cols; j++) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix &a, const Matrix &b) {
    if (a.cols != b.cols) {
        fail(ErrorCode::invalid_argument,
             "matmul_nt: " + a.shape_str() + " incompatible with " + b.shape_str() + "^T");
    }
    Matrix out(a.rows, b.rows);
    for (int i = 0; i < a.rows; i++) {
        const double *arow = a.row(i);
        double *orow = out.row(i);
        for (int j = 0; j < b.rows; j++) {
            const double *brow = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; k++) acc += arow[k] * brow[k];
            orow[j] = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix &a, const Matrix &b) {
    if (a.rows != b.rows) {
        fail(ErrorCode::invalid_argument,
             "matmul_tn: " + a.shape_str() + "^T incompatible with " + b.shape_str());
    }
    Matrix out(a.cols, b.cols);
    for (int k = 0; k < a.rows; k++) {
        const double *arow = a.row(k);
        const double *brow = b.row(k);
        for (int i = 0; i < a.cols; i++) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double *orow = out.row(i);
            for (int j = 0; j < b.cols; j++) {
                orow[j] += aki * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix &a) {
    Matrix out(a.cols, a.rows);
    for (int i = 0; i < a.rows; i++) {
        for (int j = 0; j < a.cols; j++) out.at(j, i) = a.at(i, j);
    }
    return out;
}

Matrix add(const Matrix &a, const Matrix &b) {
    check_same_shape(a, b, "add");
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] += b.data[i];
    return out;
}

Matrix sub(const Matrix &a, const Matrix &b) {
    check_same_shape(a, b, "sub");
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] -= b.data[i];
    return out;
}

Matrix mul(const Matrix &a, const Matrix &b) {
    check_same_shape(a, b, "mul");
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] *= b.data[i];
    return out;
}

Matrix scale(const Matrix &a, double s) {
    Matrix out = a;
    for (double &v : out.data) v *= s;
    return out;
}

Matrix add_rowvec(const Matrix &a, const Matrix &v) {
    check_rowvec(a, v, "add_rowvec");
    Matrix out = a;
    for (int i = 0; i < out.rows; i++) {
        double *orow = out.row(i);
        for (int j = 0; j < out.cols; j++) orow[j] += v.data[j];
    }
    return out;
}

Matrix mul_rowvec(const Matrix &a, const Matrix &v) {
    check_rowvec(a, v, "mul_rowvec");
    Matrix out = a;
    for (int i = 0; i < out.rows; i++) {
        double *orow = out.row(i);
        for (int j = 0; j < out.cols; j++) orow[j] *= v.data[j];
    }
    return out;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
} // namespace

Matrix gelu(const Matrix &a) {
    Matrix out = a;
    for (double &x : out.data) {
        x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    return out;
}

Matrix gelu_grad(const Matrix &a) {
    Matrix out = a;
    for (double &x : out.data) {
        double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        x = phi + x * pdf;
    }
    return out;
}

Matrix softmax_rows(const Matrix &a, bool causal) {
    if (causal && a.rows != a.cols) {
        fail(ErrorCode::invalid_argument, "causal softmax requires a square matrix, got " + a.shape_str());
    }
    Matrix out(a.rows, a.cols);
    for (int i = 0; i < a.rows; i++) {
        int limit = causal ? i + 1 : a.cols;
        const double *arow = a.row(i);
        double *orow = out.row(i);
        double mx = arow[0];
        for (int j = 1; j < limit; j++) mx = std::max(mx, arow[j]);
        double total = 0.0;
        for (int j = 0; j < limit; j++) {
            double e = std::exp(arow[j] - mx);
            orow[j] = e;
            total += e;
        }
        for (int j = 0; j < limit; j++) orow[j] /= total;
    }
    return out;
}

Matrix layernorm_rows(const Matrix &a, double eps) {
    Matrix out(a.rows, a.cols);
    for (int i = 0; i < a.rows; i++) {
        const double *arow = a.row(i);
        double *orow = out.row(i);
        double mean = 0.0;
        for (int j = 0; j < a.cols; j++) mean += arow[j];
        mean /= a.cols;
        double var = 0.0;
        for (int j = 0; j < a.cols; j++) {
            double d = arow[j] - mean;
            var += d * d;
        }
        var /= a.cols;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < a.cols; j++) orow[j] = (arow[j] - mean) * inv;
    }
    return out;
}

Matrix dropout_mask(int rows, int cols, double p, const StatelessRng &rng, uint64_t counter_base) {
    if (p < 0.0 || p >= 1.0) {
        fail(ErrorCode::invalid_argument, "dropout rate must be in [0, 1), got " + std::to_string(p));
    }
    Matrix mask = Matrix::full(rows, cols, 1.0 / (1.0 - p));
    if (p == 0.0) return mask; // exact identity, no rng draws
    for (size_t i = 0; i < mask.data.size(); i++) {
        if (rng.uniform(counter_base + i) < p) mask.data[i] = 0.0;
    }
    return mask;
}

Matrix colsum(const Matrix &a) {
    Matrix out(1, a.cols);
    for (int i = 0; i < a.rows; i++) {
        const double *arow = a.row(i);
        for (int j = 0; j < a.cols; j++) out.data[j] += arow[j];
    }
    return out;
}

double sum(const Matrix &a) {
    double acc = 0.0;
    for (double v : a.data) acc += v;
    return acc;
}

} // namespace lsi
