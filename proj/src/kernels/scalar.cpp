#include "mogen/kernels.hpp"

#include <cmath>

#include "exp_poly.hpp"

// Scalar reference backend. Plain loops, no intrinsics; this is the
// implementation the SIMD backends are equivalence-tested against.
namespace mogen::kern {
namespace {

void matmul_nn_(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + i * k;
        for (size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nn_acc_(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt_(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_nt_acc_(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

void matmul_tn_(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) ci[j] = 0.0;
        for (size_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_tn_acc_(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void vexp_(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = detail::exp_scalar(x[i]);
}

void vtanh_(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = detail::tanh_scalar(x[i]);
}

void add_(const double* a, const double* b, double* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void sub_(const double* a, const double* b, double* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void mul_(const double* a, const double* b, double* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void scale_(const double* x, double alpha, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

void axpy_(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gelu_fwd_(const double* x, double* y, double* t, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        const double ti = detail::tanh_scalar(detail::gelu_u(x[i]));
        t[i] = ti;
        y[i] = detail::gelu_value(x[i], ti);
    }
}

void gelu_bwd_(const double* x, const double* t, const double* dy, double* dx, size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] += dy[i] * detail::gelu_deriv(x[i], t[i]);
}

void softmax_rows_(const double* x, double* y, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        double* yr = y + r * cols;
        double mx = xr[0];
        for (size_t j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
        double sum = 0.0;
        for (size_t j = 0; j < cols; ++j) {
            yr[j] = detail::exp_scalar(xr[j] - mx);
            sum += yr[j];
        }
        const double inv = 1.0 / sum;
        for (size_t j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

bool all_finite_(const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        "scalar",
        matmul_nn_, matmul_nn_acc_,
        matmul_nt_, matmul_nt_acc_,
        matmul_tn_, matmul_tn_acc_,
        vexp_, vtanh_,
        add_, sub_, mul_, scale_, axpy_,
        gelu_fwd_, gelu_bwd_,
        softmax_rows_,
        all_finite_,
    };
    return k;
}

}  // namespace mogen::kern
