#pragma once

#include <cstddef>
#include <string_view>

namespace mogen::kern {

// Dense double-precision kernels behind the tensor engine. Every entry has a
// scalar reference implementation; SIMD variants are selected at runtime and
// equivalence-tested against the reference. All matrices are row-major.
struct Kernels {
    const char* name;

    // c[m,n] = a[m,k] * b[k,n]
    void (*matmul_nn)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
    void (*matmul_nn_acc)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
    // c[m,n] = a[m,k] * b[n,k]^T
    void (*matmul_nt)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
    void (*matmul_nt_acc)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
    // c[m,n] = a[k,m]^T * b[k,n]
    void (*matmul_tn)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
    void (*matmul_tn_acc)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);

    void (*vexp)(const double* x, double* y, size_t n);
    void (*vtanh)(const double* x, double* y, size_t n);

    void (*add)(const double* a, const double* b, double* c, size_t n);
    void (*sub)(const double* a, const double* b, double* c, size_t n);
    void (*mul)(const double* a, const double* b, double* c, size_t n);
    void (*scale)(const double* x, double alpha, double* y, size_t n);
    void (*axpy)(double alpha, const double* x, double* y, size_t n);  // y += alpha * x

    // y = gelu(x); t caches tanh(u) for the backward pass
    void (*gelu_fwd)(const double* x, double* y, double* t, size_t n);
    // dx += dgelu(x) * dy, with t from the forward pass
    void (*gelu_bwd)(const double* x, const double* t, const double* dy, double* dx, size_t n);

    // row-wise softmax with per-row max subtraction
    void (*softmax_rows)(const double* x, double* y, size_t rows, size_t cols);

    bool (*all_finite)(const double* x, size_t n);
};

const Kernels& scalar_kernels();
const Kernels* avx2_kernels();  // nullptr when unavailable on this build/CPU

// Runtime-selected table. Honors MOGEN_SIMD=scalar|avx2|auto on first use.
const Kernels& active();

// Force a backend by name ("scalar", "avx2", "auto"). Returns false if the
// backend is unavailable; the previous selection is kept in that case.
bool set_active(std::string_view name);

}  // namespace mogen::kern
