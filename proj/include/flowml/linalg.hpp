#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "flowml/errors.hpp"

namespace flowml {

// row-major dense matrix of doubles
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), d(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return d[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return d[r * cols + c]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

// C = A * B
inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

// C = A * B^T
inline Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw ShapeError("matmul_nt: inner dimensions differ");
    Mat c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(j, k);
            c.at(i, j) = s;
        }
    return c;
}

// C = A^T * B
inline Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw ShapeError("matmul_tn: inner dimensions differ");
    Mat c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k)
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a.at(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += aki * b.at(k, j);
        }
    return c;
}

struct EigenDecomposition {
    std::vector<double> values; // descending
    Mat vectors;                // row i = unit eigenvector for values[i]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps rotate
// away off-diagonal mass until its Frobenius norm falls below
// 1e-12 * max(1, ||A||_F). Eigenpairs come back sorted descending with each
// vector's largest-magnitude entry made positive.
inline EigenDecomposition jacobi_eigen_symmetric(Mat a) {
    if (a.rows != a.cols) throw ShapeError("jacobi: matrix must be square");
    const std::size_t n = a.rows;
    Mat v = Mat::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a.at(i, j) * a.at(i, j);
        return std::sqrt(s);
    };
    double frob = 0.0;
    for (double x : a.d) frob += x * x;
    const double tol = 1e-12 * std::max(1.0, std::sqrt(frob));

    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p);
                    const double vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a.at(x, x) > a.at(y, y); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[i];
        out.values[i] = a.at(src, src);
        // column src of v is the eigenvector; fix sign on its largest entry
        std::size_t imax = 0;
        double vmax = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double mag = std::fabs(v.at(k, src));
            if (mag > vmax) {
                vmax = mag;
                imax = k;
            }
        }
        const double sign = v.at(imax, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k) out.vectors.at(i, k) = sign * v.at(k, src);
    }
    return out;
}

} // namespace flowml
