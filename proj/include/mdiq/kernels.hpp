#pragma once

#include <cstddef>

// Dense double-precision kernels used by the network training loops.
// A scalar reference implementation is always available; an AVX2+FMA
// variant is selected at runtime when the CPU supports it. The variants
// are interchangeable up to rounding (see tests/test_kernels.cpp).
//
// Selection override: environment variable MDIQ_KERNELS=scalar|avx2|auto.

namespace mdiq::kernels {

struct KernelTable {
    const char* name;
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // out[i] = exp(in[i]); finite inputs, saturates past +-709
    void (*exp_v)(const double* in, double* out, std::size_t n);
    // out[i] = 1 / (1 + exp(-in[i]))
    void (*sigmoid_v)(const double* in, double* out, std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when this build or CPU has no AVX2+FMA.
const KernelTable* avx2_table();

// Runtime-selected table (resolved once, MDIQ_KERNELS honored).
const KernelTable& active();

// Compositions over the active table. W is row-major (rows x cols).

// y(rows) = W x(cols)
inline void matvec(const KernelTable& k, const double* W, std::size_t rows,
                   std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i)
        y[i] = k.dot(W + i * cols, x, cols);
}

// y(cols) += W^T x(rows)
inline void matvec_t_acc(const KernelTable& k, const double* W, std::size_t rows,
                         std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i)
        k.axpy(x[i], W + i * cols, y, cols);
}

// W += a * u v^T, u(rows), v(cols)
inline void ger(const KernelTable& k, double* W, std::size_t rows,
                std::size_t cols, double a, const double* u, const double* v) {
    for (std::size_t i = 0; i < rows; ++i)
        k.axpy(a * u[i], v, W + i * cols, cols);
}

} // namespace mdiq::kernels
