#include "mdiq/kernels.hpp"

#include <cmath>

namespace mdiq::kernels {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void exp_scalar(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

void sigmoid_scalar(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{"scalar", dot_scalar, axpy_scalar, exp_scalar,
                               sigmoid_scalar};
    return t;
}

} // namespace mdiq::kernels
