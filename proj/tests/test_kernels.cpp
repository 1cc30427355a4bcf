#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mogen/kernels.hpp"
#include "mogen/rng.hpp"

using namespace mogen;

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed, double lo = -2.0, double hi = 2.0) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// max |a-b| scaled by the reference magnitude; per-element relative error is
// meaningless where sums cancel to ~0
double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double md = 0.0, mag = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        md = std::max(md, std::fabs(a[i] - b[i]));
        mag = std::max(mag, std::fabs(a[i]));
    }
    return md / (mag + 1.0);
}

struct MatmulCase {
    size_t m, k, n;
};

const MatmulCase kCases[] = {{1, 1, 1}, {2, 3, 5},  {4, 8, 8},   {5, 7, 3},
                             {8, 64, 64}, {64, 64, 64}, {13, 17, 9}, {64, 256, 64},
                             {3, 1, 11},  {7, 5, 1}};

}  // namespace

TEST_CASE("simd backend matches scalar reference on all matmul variants") {
    const kern::Kernels& ref = kern::scalar_kernels();
    const kern::Kernels* simd = kern::avx2_kernels();
    if (!simd) return;  // nothing to compare on this machine

    uint64_t seed = 42;
    for (const auto& c : kCases) {
        auto a = random_vec(c.m * c.k, seed++);
        auto b = random_vec(c.k * c.n, seed++);
        auto at = random_vec(c.k * c.m, seed++);   // for tn: a is [k x m]
        auto bt = random_vec(c.n * c.k, seed++);   // for nt: b is [n x k]
        auto init = random_vec(c.m * c.n, seed++);

        std::vector<double> r1(c.m * c.n), r2(c.m * c.n);

        ref.matmul_nn(a.data(), b.data(), r1.data(), c.m, c.k, c.n);
        simd->matmul_nn(a.data(), b.data(), r2.data(), c.m, c.k, c.n);
        CHECK(max_rel_diff(r1, r2) < 1e-13);

        ref.matmul_nt(a.data(), bt.data(), r1.data(), c.m, c.k, c.n);
        simd->matmul_nt(a.data(), bt.data(), r2.data(), c.m, c.k, c.n);
        CHECK(max_rel_diff(r1, r2) < 1e-13);

        ref.matmul_tn(at.data(), b.data(), r1.data(), c.m, c.k, c.n);
        simd->matmul_tn(at.data(), b.data(), r2.data(), c.m, c.k, c.n);
        CHECK(max_rel_diff(r1, r2) < 1e-13);

        r1 = init;
        r2 = init;
        ref.matmul_nn_acc(a.data(), b.data(), r1.data(), c.m, c.k, c.n);
        simd->matmul_nn_acc(a.data(), b.data(), r2.data(), c.m, c.k, c.n);
        CHECK(max_rel_diff(r1, r2) < 1e-12);

        r1 = init;
        r2 = init;
        ref.matmul_nt_acc(a.data(), bt.data(), r1.data(), c.m, c.k, c.n);
        simd->matmul_nt_acc(a.data(), bt.data(), r2.data(), c.m, c.k, c.n);
        CHECK(max_rel_diff(r1, r2) < 1e-12);

        r1 = init;
        r2 = init;
        ref.matmul_tn_acc(at.data(), b.data(), r1.data(), c.m, c.k, c.n);
        simd->matmul_tn_acc(at.data(), b.data(), r2.data(), c.m, c.k, c.n);
        CHECK(max_rel_diff(r1, r2) < 1e-12);
    }
}

TEST_CASE("vexp matches std::exp and handles extremes") {
    for (const kern::Kernels* k : {&kern::scalar_kernels(), kern::avx2_kernels()}) {
        if (!k) continue;
        auto x = random_vec(1001, 7, -700.0, 700.0);
        x[0] = 0.0;
        x[1] = -745.0;   // underflow to 0
        x[2] = -1000.0;  // clamp path
        x[3] = 1.0;
        std::vector<double> y(x.size());
        k->vexp(x.data(), y.data(), x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            const double e = std::exp(x[i]);
            if (e < 1e-300) {
                // below the normal range the kernel flushes to zero
                CHECK(y[i] <= 1e-300);
            } else {
                CHECK(std::fabs(y[i] - e) / e < 1e-13);
            }
        }
        CHECK(y[0] == 1.0);
    }
}

TEST_CASE("vtanh matches std::tanh") {
    for (const kern::Kernels* k : {&kern::scalar_kernels(), kern::avx2_kernels()}) {
        if (!k) continue;
        auto x = random_vec(517, 9, -25.0, 25.0);
        x[0] = 0.0;
        std::vector<double> y(x.size());
        k->vtanh(x.data(), y.data(), x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            CHECK(std::fabs(y[i] - std::tanh(x[i])) < 1e-12);
        }
        CHECK(y[0] == 0.0);
    }
}

TEST_CASE("gelu forward/backward agree across backends") {
    const kern::Kernels& ref = kern::scalar_kernels();
    const kern::Kernels* simd = kern::avx2_kernels();
    if (!simd) return;
    auto x = random_vec(333, 11, -6.0, 6.0);
    auto dy = random_vec(333, 12);
    std::vector<double> y1(x.size()), y2(x.size()), t1(x.size()), t2(x.size());
    ref.gelu_fwd(x.data(), y1.data(), t1.data(), x.size());
    simd->gelu_fwd(x.data(), y2.data(), t2.data(), x.size());
    CHECK(max_rel_diff(y1, y2) < 1e-11);
    std::vector<double> dx1(x.size(), 0.5), dx2(x.size(), 0.5);
    ref.gelu_bwd(x.data(), t1.data(), dy.data(), dx1.data(), x.size());
    simd->gelu_bwd(x.data(), t2.data(), dy.data(), dx2.data(), x.size());
    CHECK(max_rel_diff(dx1, dx2) < 1e-11);
}

TEST_CASE("softmax_rows equivalence and normalization") {
    for (const kern::Kernels* k : {&kern::scalar_kernels(), kern::avx2_kernels()}) {
        if (!k) continue;
        const size_t rows = 17, cols = 23;
        auto x = random_vec(rows * cols, 5, -30.0, 30.0);
        std::vector<double> y(rows * cols);
        k->softmax_rows(x.data(), y.data(), rows, cols);
        for (size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (size_t c = 0; c < cols; ++c) {
                CHECK(y[r * cols + c] >= 0.0);
                s += y[r * cols + c];
            }
            CHECK(std::fabs(s - 1.0) < 1e-9);
        }
    }
    const kern::Kernels* simd = kern::avx2_kernels();
    if (simd) {
        const size_t rows = 9, cols = 31;
        auto x = random_vec(rows * cols, 6, -5.0, 5.0);
        std::vector<double> y1(x.size()), y2(x.size());
        kern::scalar_kernels().softmax_rows(x.data(), y1.data(), rows, cols);
        simd->softmax_rows(x.data(), y2.data(), rows, cols);
        CHECK(max_rel_diff(y1, y2) < 1e-12);
    }
}

TEST_CASE("all_finite catches NaN and Inf anywhere, including the tail") {
    for (const kern::Kernels* k : {&kern::scalar_kernels(), kern::avx2_kernels()}) {
        if (!k) continue;
        auto x = random_vec(103, 21);
        CHECK(k->all_finite(x.data(), x.size()));
        for (size_t pos : {size_t(0), size_t(50), x.size() - 1}) {
            auto bad = x;
            bad[pos] = std::nan("");
            CHECK_FALSE(k->all_finite(bad.data(), bad.size()));
            bad[pos] = HUGE_VAL;
            CHECK_FALSE(k->all_finite(bad.data(), bad.size()));
            bad[pos] = -HUGE_VAL;
            CHECK_FALSE(k->all_finite(bad.data(), bad.size()));
        }
    }
}

TEST_CASE("elementwise kernels equivalence") {
    const kern::Kernels& ref = kern::scalar_kernels();
    const kern::Kernels* simd = kern::avx2_kernels();
    if (!simd) return;
    auto a = random_vec(257, 31);
    auto b = random_vec(257, 32);
    std::vector<double> r1(a.size()), r2(a.size());
    ref.add(a.data(), b.data(), r1.data(), a.size());
    simd->add(a.data(), b.data(), r2.data(), a.size());
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * 8) == 0);
    ref.sub(a.data(), b.data(), r1.data(), a.size());
    simd->sub(a.data(), b.data(), r2.data(), a.size());
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * 8) == 0);
    ref.mul(a.data(), b.data(), r1.data(), a.size());
    simd->mul(a.data(), b.data(), r2.data(), a.size());
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * 8) == 0);
    ref.scale(a.data(), 1.7, r1.data(), a.size());
    simd->scale(a.data(), 1.7, r2.data(), a.size());
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * 8) == 0);
    r1 = b;
    r2 = b;
    ref.axpy(-0.3, a.data(), r1.data(), a.size());
    simd->axpy(-0.3, a.data(), r2.data(), a.size());
    CHECK(max_rel_diff(r1, r2) < 1e-14);
}

TEST_CASE("backend selection honors overrides") {
    CHECK(kern::set_active("scalar"));
    CHECK(std::string(kern::active().name) == "scalar");
    if (kern::avx2_kernels()) {
        // on AVX2 hardware the auto pick must be the SIMD table
        CHECK(kern::set_active("auto"));
    }
    CHECK_FALSE(kern::set_active("no-such-backend"));
    kern::set_active("auto");
}

TEST_CASE("kernels are deterministic") {
    const kern::Kernels& k = kern::active();
    auto a = random_vec(64 * 64, 77);
    auto b = random_vec(64 * 64, 78);
    std::vector<double> r1(64 * 64), r2(64 * 64);
    k.matmul_nn(a.data(), b.data(), r1.data(), 64, 64, 64);
    k.matmul_nn(a.data(), b.data(), r2.data(), 64, 64, 64);
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * 8) == 0);
}
