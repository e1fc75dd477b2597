#include "mdiq/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace mdiq::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo,
                               double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// |a-b| <= atol + rtol * max(|a|,|b|)
bool close(double a, double b, double rtol, double atol) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

std::vector<const KernelTable*> all_tables() {
    std::vector<const KernelTable*> out{&scalar_table()};
    if (const KernelTable* t = avx2_table()) out.push_back(t);
    return out;
}

} // namespace

TEST_CASE("active table is one of the known backends") {
    const KernelTable& t = active();
    const bool known = std::string(t.name) == "scalar" || std::string(t.name) == "avx2";
    CHECK(known);
}

TEST_CASE("dot matches sequential reference on all backends") {
    std::mt19937_64 rng(11);
    for (const KernelTable* t : all_tables()) {
        for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 33, 64, 67}) {
            const auto x = random_vec(rng, n, -2.0, 2.0);
            const auto y = random_vec(rng, n, -2.0, 2.0);
            double ref = 0, abs_sum = 0;
            for (std::size_t i = 0; i < n; ++i) {
                ref += x[i] * y[i];
                abs_sum += std::abs(x[i] * y[i]);
            }
            const double got = t->dot(x.data(), y.data(), n);
            CHECK(std::abs(got - ref) <= 1e-13 * (abs_sum + 1.0));
        }
    }
}

TEST_CASE("axpy matches reference on all backends") {
    std::mt19937_64 rng(12);
    for (const KernelTable* t : all_tables()) {
        for (std::size_t n : {1, 3, 4, 6, 17, 40}) {
            const auto x = random_vec(rng, n, -1.0, 1.0);
            auto y = random_vec(rng, n, -1.0, 1.0);
            auto ref = y;
            const double a = 0.37;
            for (std::size_t i = 0; i < n; ++i) ref[i] += a * x[i];
            t->axpy(a, x.data(), y.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(close(y[i], ref[i], 1e-14, 1e-300));
        }
    }
}

TEST_CASE("exp_v matches std::exp including saturation edges") {
    std::vector<double> xs = {0.0,   -0.0,  1.0,    -1.0,  10.5,  -10.5,
                              100.0, -100.0, 700.0, -700.0, 709.0, -709.0,
                              710.0, -745.0, -746.0, -800.0, 800.0, 0.5};
    std::mt19937_64 rng(13);
    auto extra = random_vec(rng, 101, -30.0, 30.0);
    xs.insert(xs.end(), extra.begin(), extra.end());

    for (const KernelTable* t : all_tables()) {
        std::vector<double> out(xs.size());
        t->exp_v(xs.data(), out.data(), xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double ref = std::exp(xs[i]);
            if (std::isinf(ref)) {
                CHECK(std::isinf(out[i]));
            } else {
                CHECK(close(out[i], ref, 5e-15, 1e-300));
            }
        }
    }
}

TEST_CASE("sigmoid_v matches reference everywhere") {
    std::mt19937_64 rng(14);
    auto xs = random_vec(rng, 257, -40.0, 40.0);
    xs.push_back(800.0);
    xs.push_back(-800.0);
    xs.push_back(0.0);
    for (const KernelTable* t : all_tables()) {
        std::vector<double> out(xs.size());
        t->sigmoid_v(xs.data(), out.data(), xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double ref = 1.0 / (1.0 + std::exp(-xs[i]));
            CHECK(close(out[i], ref, 1e-13, 1e-300));
        }
    }
}

TEST_CASE("scalar and avx2 paths agree on random batches") {
    const KernelTable* v = avx2_table();
    if (!v) return; // nothing to compare on this machine
    const KernelTable& s = scalar_table();
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng() % 70;
        const auto x = random_vec(rng, n, -5.0, 5.0);
        const auto y = random_vec(rng, n, -5.0, 5.0);
        double abs_sum = 0;
        for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(x[i] * y[i]);
        CHECK(std::abs(s.dot(x.data(), y.data(), n) - v->dot(x.data(), y.data(), n)) <=
              1e-13 * (abs_sum + 1.0));

        std::vector<double> es(n), ev(n), ss(n), sv(n);
        s.exp_v(x.data(), es.data(), n);
        v->exp_v(x.data(), ev.data(), n);
        s.sigmoid_v(x.data(), ss.data(), n);
        v->sigmoid_v(x.data(), sv.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(close(es[i], ev[i], 5e-15, 1e-300));
            CHECK(close(ss[i], sv[i], 1e-13, 1e-300));
        }
    }
}

TEST_CASE("matvec compositions match naive loops") {
    std::mt19937_64 rng(16);
    for (const KernelTable* t : all_tables()) {
        const std::size_t rows = 7, cols = 5;
        const auto W = random_vec(rng, rows * cols, -1.0, 1.0);
        const auto x = random_vec(rng, cols, -1.0, 1.0);
        const auto u = random_vec(rng, rows, -1.0, 1.0);

        std::vector<double> y(rows);
        matvec(*t, W.data(), rows, cols, x.data(), y.data());
        for (std::size_t i = 0; i < rows; ++i) {
            double ref = 0;
            for (std::size_t j = 0; j < cols; ++j) ref += W[i * cols + j] * x[j];
            CHECK(close(y[i], ref, 1e-13, 1e-300));
        }

        std::vector<double> z(cols, 0.0);
        matvec_t_acc(*t, W.data(), rows, cols, u.data(), z.data());
        for (std::size_t j = 0; j < cols; ++j) {
            double ref = 0;
            for (std::size_t i = 0; i < rows; ++i) ref += W[i * cols + j] * u[i];
            CHECK(close(z[j], ref, 1e-13, 1e-300));
        }

        auto Wg = W;
        ger(*t, Wg.data(), rows, cols, 0.7, u.data(), x.data());
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                CHECK(close(Wg[i * cols + j], W[i * cols + j] + 0.7 * u[i] * x[j],
                            1e-13, 1e-300));
    }
}
