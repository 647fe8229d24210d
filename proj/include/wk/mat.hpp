#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "wk/common.hpp"
#include "wk/rng.hpp"

namespace wk {

// Dense row-major matrix of doubles. Desk-scale sizes only; all loops are
// plain and deterministic.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, double fill) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    static Mat from_vec(const Vec& v) {
        Mat m(1, static_cast<int>(v.size()));
        m.a = v;
        return m;
    }
    Vec to_vec() const { return a; }

    static Mat randn(int r, int c, double std, Rng& rng) {
        Mat m(r, c);
        for (auto& x : m.a) x = std * rng.normal();
        return m;
    }
};

// C = A * B
inline Mat matmul(const Mat& A, const Mat& B) {
    assert(A.cols == B.rows);
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
        double* c = C.row(i);
        const double* a = A.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double av = a[k];
            if (av == 0.0) continue;
            const double* b = B.row(k);
            for (int j = 0; j < B.cols; ++j) c[j] += av * b[j];
        }
    }
    return C;
}

// C = A * B^T
inline Mat matmul_nt(const Mat& A, const Mat& B) {
    assert(A.cols == B.cols);
    Mat C(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* a = A.row(i);
        double* c = C.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* b = B.row(j);
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += a[k] * b[k];
            c[j] = s;
        }
    }
    return C;
}

// C = A^T * B
inline Mat matmul_tn(const Mat& A, const Mat& B) {
    assert(A.rows == B.rows);
    Mat C(A.cols, B.cols);
    for (int k = 0; k < A.rows; ++k) {
        const double* a = A.row(k);
        const double* b = B.row(k);
        for (int i = 0; i < A.cols; ++i) {
            const double av = a[i];
            if (av == 0.0) continue;
            double* c = C.row(i);
            for (int j = 0; j < B.cols; ++j) c[j] += av * b[j];
        }
    }
    return C;
}

inline void add_inplace(Mat& A, const Mat& B) {
    assert(A.same_shape(B));
    for (size_t i = 0; i < A.a.size(); ++i) A.a[i] += B.a[i];
}

inline Mat transpose(const Mat& A) {
    Mat T(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) T.at(j, i) = A.at(i, j);
    return T;
}

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline uint64_t mat_checksum(const Mat& m, uint64_t h = kFnvOffset) {
    h = fnv1a_u64(static_cast<uint64_t>(m.rows), h);
    h = fnv1a_u64(static_cast<uint64_t>(m.cols), h);
    return fnv1a_doubles(m.a.data(), m.a.size(), h);
}

// Largest singular value estimate via power iteration on A^T A.
inline double spectral_norm(const Mat& A, int iters = 60) {
    Mat v(A.cols, 1);
    Rng rng(0x5eed);
    for (auto& x : v.a) x = rng.normal();
    double s = 0.0;
    for (int it = 0; it < iters; ++it) {
        Mat av = matmul(A, v);
        Mat atav = matmul_tn(A, av);
        double n = 0.0;
        for (double x : atav.a) n += x * x;
        n = std::sqrt(n);
        if (n < 1e-300) return 0.0;
        for (auto& x : atav.a) x /= n;
        v = atav;
        s = std::sqrt(n);
    }
    return s;
}

}  // namespace wk
