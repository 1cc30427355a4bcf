#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace mogen {

// Error taxonomy: shape problems, non-finite values, contract misuse.
class MogenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class DimensionError : public MogenError {
public:
    using MogenError::MogenError;
};
class NumericError : public MogenError {
public:
    using MogenError::MogenError;
};
class ContractError : public MogenError {
public:
    using MogenError::MogenError;
};

namespace detail {
struct Node {
    std::vector<size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool tracked = false;  // part of a backward graph
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    std::vector<double> aux;  // op-specific forward caches

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};
}  // namespace detail

// Dense double-precision tensor participating in a reverse-mode tape. The
// handle has shared-pointer semantics: copies alias the same storage, which
// is also how parameter sharing (e.g. a query projection reused by several
// attention paths) is expressed and tested.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<size_t> shape, double v, bool requires_grad = false);
    static Tensor from_data(std::vector<size_t> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar_value(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<size_t>& shape() const;
    size_t size() const;
    size_t rows() const;  // first dim (2-D use)
    size_t cols() const;  // second dim (2-D use)
    double item() const;  // scalar tensors
    double at(size_t flat) const;
    double at(size_t r, size_t c) const;

    const double* data() const;
    double* mutable_data();  // in-place edits of leaf values (weights, inputs)
    const std::vector<double>& values() const;

    bool requires_grad() const;
    void set_requires_grad(bool rg);
    const double* grad_data() const;  // nullptr when never accumulated
    std::vector<double> grad() const;  // zeros when never accumulated
    void zero_grad();

    bool same_storage(const Tensor& o) const { return node_ == o.node_; }
    Tensor detach() const;
    Tensor clone() const;  // deep value copy, detached

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Thread-local grad-mode switch. Ops run outside a graph while disabled.
bool grad_enabled();
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// --------------------------------------------------------------------------
// primitives (differentiable unless noted)
// --------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);      // [m,k]x[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);   // [m,k]x[n,k]^T
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double alpha);
Tensor add_rowvec(const Tensor& x, const Tensor& v);  // broadcast [c] over rows
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor gelu(const Tensor& x);
Tensor slice_cols(const Tensor& x, size_t c0, size_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, size_t r0, size_t r1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& table, const std::vector<size_t>& ids);
// bijective element shuffle: out.flat[i] = x.flat[(*map)[i]]
Tensor reindex(const Tensor& x, std::shared_ptr<const std::vector<size_t>> map,
               std::vector<size_t> out_shape);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// custom node hook (test fault injection, probes)
Tensor make_op(std::vector<size_t> shape, std::vector<double> value,
               std::vector<Tensor> parents, std::function<void(detail::Node&)> backward_fn,
               std::vector<double> aux = {});

// Reverse-mode sweep from a scalar loss. Accumulates into .grad of every
// reachable tensor with requires_grad set; leaves everything else untouched.
void backward(const Tensor& loss);

// --------------------------------------------------------------------------
// gradient checking
// --------------------------------------------------------------------------

struct ParamCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    size_t samples = 0;
};

struct CheckReport {
    std::vector<ParamCheckResult> params;
    double max_rel_err() const {
        double m = 0.0;
        for (const auto& p : params) m = p.max_rel_err > m ? p.max_rel_err : m;
        return m;
    }
};

// Central-difference check of d(f)/d(param) for a sample of entries per
// parameter. f must be a deterministic closure over the given params.
CheckReport grad_check(const std::function<Tensor()>& f,
                       const std::vector<std::pair<std::string, Tensor>>& params,
                       double h = 1e-5, size_t samples_per_param = 8, uint64_t seed = 0);

}  // namespace mogen
