#include "mogen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mogen/kernels.hpp"
#include "mogen/rng.hpp"

namespace mogen {

namespace {

thread_local bool g_grad_enabled = true;

size_t numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<size_t>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

void check_finite(const char* op, const std::vector<double>& v) {
    if (!kern::active().all_finite(v.data(), v.size()))
        throw NumericError(std::string(op) + ": non-finite values in result");
}

std::shared_ptr<detail::Node> new_node(std::vector<size_t> shape, std::vector<double> value) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

bool wants_graph(std::initializer_list<const Tensor*> inputs) {
    if (!g_grad_enabled) return false;
    for (const Tensor* t : inputs) {
        const auto& n = t->node();
        if (n && (n->requires_grad || n->tracked)) return true;
    }
    return false;
}

void attach(const std::shared_ptr<detail::Node>& out, std::vector<Tensor> parents,
            std::function<void(detail::Node&)> bw, std::vector<double> aux = {}) {
    out->tracked = true;
    out->parents.reserve(parents.size());
    for (auto& p : parents) out->parents.push_back(p.node());
    out->backward_fn = std::move(bw);
    out->aux = std::move(aux);
}

void require_2d(const char* op, const Tensor& t) {
    if (t.shape().size() != 2)
        throw DimensionError(std::string(op) + ": expected 2-D tensor, got " + shape_str(t.shape()));
}

}  // namespace

// --------------------------------------------------------------------------
// Tensor basics
// --------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
    auto n = new_node(shape, std::vector<double>(numel(shape), 0.0));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<size_t> shape, double v, bool requires_grad) {
    auto n = new_node(shape, std::vector<double>(numel(shape), v));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> data, bool requires_grad) {
    if (numel(shape) != data.size())
        throw DimensionError("from_data: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    auto n = new_node(std::move(shape), std::move(data));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar_value(double v) { return from_data({1}, {v}); }

const std::vector<size_t>& Tensor::shape() const { return node_->shape; }
size_t Tensor::size() const { return node_->value.size(); }
size_t Tensor::rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
size_t Tensor::cols() const { return node_->shape.size() < 2 ? 1 : node_->shape[1]; }

double Tensor::item() const {
    if (size() != 1) throw ContractError("item: tensor is not scalar");
    return node_->value[0];
}

double Tensor::at(size_t flat) const { return node_->value.at(flat); }
double Tensor::at(size_t r, size_t c) const { return node_->value.at(r * cols() + c); }

const double* Tensor::data() const { return node_->value.data(); }
double* Tensor::mutable_data() { return node_->value.data(); }
const std::vector<double>& Tensor::values() const { return node_->value; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool rg) { node_->requires_grad = rg; }

const double* Tensor::grad_data() const {
    return node_->grad.empty() ? nullptr : node_->grad.data();
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
    auto n = new_node(node_->shape, node_->value);
    return Tensor(std::move(n));
}

Tensor Tensor::clone() const { return detach(); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// --------------------------------------------------------------------------
// ops
// --------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::vector<double> out(m * n);
    kern::active().matmul_nn(a.data(), b.data(), out.data(), m, k, n);
    check_finite("matmul", out);
    auto node = new_node({m, n}, std::move(out));
    if (wants_graph({&a, &b})) {
        attach(node, {a, b}, [m, k, n](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad || pa.tracked) {
                pa.ensure_grad();
                kern::active().matmul_nt_acc(self.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
            }
            if (pb.requires_grad || pb.tracked) {
                pb.ensure_grad();
                kern::active().matmul_tn_acc(pa.value.data(), self.grad.data(), pb.grad.data(), k, m, n);
            }
        });
    }
    return Tensor(std::move(node));
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d("matmul_nt", a);
    require_2d("matmul_nt", b);
    const size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k)
        throw DimensionError("matmul_nt: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::vector<double> out(m * n);
    kern::active().matmul_nt(a.data(), b.data(), out.data(), m, k, n);
    check_finite("matmul_nt", out);
    auto node = new_node({m, n}, std::move(out));
    if (wants_graph({&a, &b})) {
        attach(node, {a, b}, [m, k, n](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad || pa.tracked) {
                pa.ensure_grad();
                kern::active().matmul_nn_acc(self.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
            }
            if (pb.requires_grad || pb.tracked) {
                pb.ensure_grad();
                kern::active().matmul_tn_acc(self.grad.data(), pa.value.data(), pb.grad.data(), n, m, k);
            }
        });
    }
    return Tensor(std::move(node));
}

namespace {

enum class EwKind { add, sub, mul };

Tensor elementwise(const char* name, EwKind kind, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const size_t n = a.size();
    std::vector<double> out(n);
    const auto& k = kern::active();
    switch (kind) {
        case EwKind::add: k.add(a.data(), b.data(), out.data(), n); break;
        case EwKind::sub: k.sub(a.data(), b.data(), out.data(), n); break;
        case EwKind::mul: k.mul(a.data(), b.data(), out.data(), n); break;
    }
    check_finite(name, out);
    auto node = new_node(a.shape(), std::move(out));
    if (wants_graph({&a, &b})) {
        attach(node, {a, b}, [kind, n](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            const auto& k = kern::active();
            if (pa.requires_grad || pa.tracked) {
                pa.ensure_grad();
                if (kind == EwKind::mul) {
                    for (size_t i = 0; i < n; ++i) pa.grad[i] += self.grad[i] * pb.value[i];
                } else {
                    k.axpy(1.0, self.grad.data(), pa.grad.data(), n);
                }
            }
            if (pb.requires_grad || pb.tracked) {
                pb.ensure_grad();
                if (kind == EwKind::mul) {
                    for (size_t i = 0; i < n; ++i) pb.grad[i] += self.grad[i] * pa.value[i];
                } else {
                    k.axpy(kind == EwKind::sub ? -1.0 : 1.0, self.grad.data(), pb.grad.data(), n);
                }
            }
        });
    }
    return Tensor(std::move(node));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise("add", EwKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise("sub", EwKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise("mul", EwKind::mul, a, b); }

Tensor scale(const Tensor& a, double alpha) {
    const size_t n = a.size();
    std::vector<double> out(n);
    kern::active().scale(a.data(), alpha, out.data(), n);
    check_finite("scale", out);
    auto node = new_node(a.shape(), std::move(out));
    if (wants_graph({&a})) {
        attach(node, {a}, [alpha, n](detail::Node& self) {
            auto& pa = *self.parents[0];
            if (pa.requires_grad || pa.tracked) {
                pa.ensure_grad();
                kern::active().axpy(alpha, self.grad.data(), pa.grad.data(), n);
            }
        });
    }
    return Tensor(std::move(node));
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    require_2d("add_rowvec", x);
    const size_t r = x.rows(), c = x.cols();
    if (v.size() != c)
        throw DimensionError("add_rowvec: vector length " + std::to_string(v.size()) +
                             " does not match column count " + std::to_string(c));
    std::vector<double> out(r * c);
    for (size_t i = 0; i < r; ++i)
        kern::active().add(x.data() + i * c, v.data(), out.data() + i * c, c);
    check_finite("add_rowvec", out);
    auto node = new_node(x.shape(), std::move(out));
    if (wants_graph({&x, &v})) {
        attach(node, {x, v}, [r, c](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pv = *self.parents[1];
            if (px.requires_grad || px.tracked) {
                px.ensure_grad();
                kern::active().axpy(1.0, self.grad.data(), px.grad.data(), r * c);
            }
            if (pv.requires_grad || pv.tracked) {
                pv.ensure_grad();
                for (size_t i = 0; i < r; ++i)
                    kern::active().axpy(1.0, self.grad.data() + i * c, pv.grad.data(), c);
            }
        });
    }
    return Tensor(std::move(node));
}

Tensor softmax_rows(const Tensor& x) {
    require_2d("softmax_rows", x);
    const size_t r = x.rows(), c = x.cols();
    if (r < 1 || c < 1) throw DimensionError("softmax_rows: empty input");
    if (!kern::active().all_finite(x.data(), x.size()))
        throw NumericError("softmax_rows: non-finite input");
    std::vector<double> out(r * c);
    kern::active().softmax_rows(x.data(), out.data(), r, c);
    check_finite("softmax_rows", out);
    auto node = new_node(x.shape(), std::move(out));
    if (wants_graph({&x})) {
        attach(node, {x}, [r, c](detail::Node& self) {
            auto& px = *self.parents[0];
            if (!(px.requires_grad || px.tracked)) return;
            px.ensure_grad();
            for (size_t i = 0; i < r; ++i) {
                const double* y = self.value.data() + i * c;
                const double* dy = self.grad.data() + i * c;
                double dot = 0.0;
                for (size_t j = 0; j < c; ++j) dot += dy[j] * y[j];
                double* dx = px.grad.data() + i * c;
                for (size_t j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
            }
        });
    }
    return Tensor(std::move(node));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_2d("layer_norm", x);
    const size_t r = x.rows(), c = x.cols();
    if (gamma.size() != c || beta.size() != c)
        throw DimensionError("layer_norm: gamma/beta length must equal feature width");
    std::vector<double> out(r * c);
    std::vector<double> aux(r * c + r);  // xhat rows then inv_std per row
    for (size_t i = 0; i < r; ++i) {
        const double* xr = x.data() + i * c;
        double mean = 0.0;
        for (size_t j = 0; j < c; ++j) mean += xr[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (size_t j = 0; j < c; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        aux[r * c + i] = inv;
        double* xh = aux.data() + i * c;
        double* o = out.data() + i * c;
        for (size_t j = 0; j < c; ++j) {
            xh[j] = (xr[j] - mean) * inv;
            o[j] = xh[j] * gamma.data()[j] + beta.data()[j];
        }
    }
    check_finite("layer_norm", out);
    auto node = new_node(x.shape(), std::move(out));
    if (wants_graph({&x, &gamma, &beta})) {
        attach(node, {x, gamma, beta},
               [r, c](detail::Node& self) {
                   auto& px = *self.parents[0];
                   auto& pg = *self.parents[1];
                   auto& pb = *self.parents[2];
                   const double* xhat = self.aux.data();
                   const double* inv_std = self.aux.data() + r * c;
                   const bool need_x = px.requires_grad || px.tracked;
                   const bool need_g = pg.requires_grad || pg.tracked;
                   const bool need_b = pb.requires_grad || pb.tracked;
                   if (need_x) px.ensure_grad();
                   if (need_g) pg.ensure_grad();
                   if (need_b) pb.ensure_grad();
                   for (size_t i = 0; i < r; ++i) {
                       const double* dy = self.grad.data() + i * c;
                       const double* xh = xhat + i * c;
                       if (need_g)
                           for (size_t j = 0; j < c; ++j) pg.grad[j] += dy[j] * xh[j];
                       if (need_b)
                           for (size_t j = 0; j < c; ++j) pb.grad[j] += dy[j];
                       if (need_x) {
                           double mg = 0.0, mgx = 0.0;
                           for (size_t j = 0; j < c; ++j) {
                               const double g = dy[j] * pg.value[j];
                               mg += g;
                               mgx += g * xh[j];
                           }
                           mg /= static_cast<double>(c);
                           mgx /= static_cast<double>(c);
                           double* dx = px.grad.data() + i * c;
                           for (size_t j = 0; j < c; ++j) {
                               const double g = dy[j] * pg.value[j];
                               dx[j] += (g - mg - xh[j] * mgx) * inv_std[i];
                           }
                       }
                   }
               },
               std::move(aux));
    }
    return Tensor(std::move(node));
}

Tensor gelu(const Tensor& x) {
    const size_t n = x.size();
    std::vector<double> out(n);
    std::vector<double> tcache(n);
    kern::active().gelu_fwd(x.data(), out.data(), tcache.data(), n);
    check_finite("gelu", out);
    auto node = new_node(x.shape(), std::move(out));
    if (wants_graph({&x})) {
        attach(node, {x},
               [n](detail::Node& self) {
                   auto& px = *self.parents[0];
                   if (!(px.requires_grad || px.tracked)) return;
                   px.ensure_grad();
                   kern::active().gelu_bwd(px.value.data(), self.aux.data(), self.grad.data(),
                                           px.grad.data(), n);
               },
               std::move(tcache));
    }
    return Tensor(std::move(node));
}

Tensor slice_cols(const Tensor& x, size_t c0, size_t c1) {
    require_2d("slice_cols", x);
    const size_t r = x.rows(), c = x.cols();
    if (c0 >= c1 || c1 > c) throw DimensionError("slice_cols: bad column range");
    const size_t w = c1 - c0;
    std::vector<double> out(r * w);
    for (size_t i = 0; i < r; ++i)
        std::copy(x.data() + i * c + c0, x.data() + i * c + c1, out.data() + i * w);
    auto node = new_node({r, w}, std::move(out));
    if (wants_graph({&x})) {
        attach(node, {x}, [r, c, c0, w](detail::Node& self) {
            auto& px = *self.parents[0];
            if (!(px.requires_grad || px.tracked)) return;
            px.ensure_grad();
            for (size_t i = 0; i < r; ++i)
                kern::active().axpy(1.0, self.grad.data() + i * w, px.grad.data() + i * c + c0, w);
        });
    }
    return Tensor(std::move(node));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    const size_t r = parts[0].rows();
    size_t total = 0;
    for (const auto& p : parts) {
        require_2d("concat_cols", p);
        if (p.rows() != r) throw DimensionError("concat_cols: row count mismatch");
        total += p.cols();
    }
    std::vector<double> out(r * total);
    size_t off = 0;
    for (const auto& p : parts) {
        const size_t w = p.cols();
        for (size_t i = 0; i < r; ++i)
            std::copy(p.data() + i * w, p.data() + (i + 1) * w, out.data() + i * total + off);
        off += w;
    }
    auto node = new_node({r, total}, std::move(out));
    bool track = false;
    for (const auto& p : parts)
        if (g_grad_enabled && (p.requires_grad() || p.node()->tracked)) track = true;
    if (track) {
        std::vector<size_t> widths;
        for (const auto& p : parts) widths.push_back(p.cols());
        attach(node, parts, [r, total, widths](detail::Node& self) {
            size_t off = 0;
            for (size_t pi = 0; pi < self.parents.size(); ++pi) {
                auto& pp = *self.parents[pi];
                const size_t w = widths[pi];
                if (pp.requires_grad || pp.tracked) {
                    pp.ensure_grad();
                    for (size_t i = 0; i < r; ++i)
                        kern::active().axpy(1.0, self.grad.data() + i * total + off,
                                            pp.grad.data() + i * w, w);
                }
                off += w;
            }
        });
    }
    return Tensor(std::move(node));
}

Tensor slice_rows(const Tensor& x, size_t r0, size_t r1) {
    require_2d("slice_rows", x);
    const size_t c = x.cols();
    if (r0 >= r1 || r1 > x.rows()) throw DimensionError("slice_rows: bad row range");
    const size_t h = r1 - r0;
    std::vector<double> out(x.data() + r0 * c, x.data() + r1 * c);
    auto node = new_node({h, c}, std::move(out));
    if (wants_graph({&x})) {
        attach(node, {x}, [r0, h, c](detail::Node& self) {
            auto& px = *self.parents[0];
            if (!(px.requires_grad || px.tracked)) return;
            px.ensure_grad();
            kern::active().axpy(1.0, self.grad.data(), px.grad.data() + r0 * c, h * c);
        });
    }
    return Tensor(std::move(node));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no parts");
    const size_t c = parts[0].cols();
    size_t total = 0;
    for (const auto& p : parts) {
        require_2d("concat_rows", p);
        if (p.cols() != c) throw DimensionError("concat_rows: column count mismatch");
        total += p.rows();
    }
    std::vector<double> out;
    out.reserve(total * c);
    for (const auto& p : parts) out.insert(out.end(), p.data(), p.data() + p.size());
    auto node = new_node({total, c}, std::move(out));
    bool track = false;
    for (const auto& p : parts)
        if (g_grad_enabled && (p.requires_grad() || p.node()->tracked)) track = true;
    if (track) {
        std::vector<size_t> heights;
        for (const auto& p : parts) heights.push_back(p.rows());
        attach(node, parts, [c, heights](detail::Node& self) {
            size_t off = 0;
            for (size_t pi = 0; pi < self.parents.size(); ++pi) {
                auto& pp = *self.parents[pi];
                const size_t h = heights[pi];
                if (pp.requires_grad || pp.tracked) {
                    pp.ensure_grad();
                    kern::active().axpy(1.0, self.grad.data() + off * c, pp.grad.data(), h * c);
                }
                off += h;
            }
        });
    }
    return Tensor(std::move(node));
}

Tensor gather_rows(const Tensor& table, const std::vector<size_t>& ids) {
    require_2d("gather_rows", table);
    const size_t c = table.cols();
    std::vector<double> out(ids.size() * c);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= table.rows()) throw DimensionError("gather_rows: id out of range");
        std::copy(table.data() + ids[i] * c, table.data() + (ids[i] + 1) * c, out.data() + i * c);
    }
    auto node = new_node({ids.size(), c}, std::move(out));
    if (wants_graph({&table})) {
        auto ids_copy = ids;
        attach(node, {table}, [c, ids_copy](detail::Node& self) {
            auto& pt = *self.parents[0];
            if (!(pt.requires_grad || pt.tracked)) return;
            pt.ensure_grad();
            for (size_t i = 0; i < ids_copy.size(); ++i)
                kern::active().axpy(1.0, self.grad.data() + i * c, pt.grad.data() + ids_copy[i] * c, c);
        });
    }
    return Tensor(std::move(node));
}

Tensor reindex(const Tensor& x, std::shared_ptr<const std::vector<size_t>> map,
               std::vector<size_t> out_shape) {
    const size_t n = numel(out_shape);
    if (map->size() != n) throw DimensionError("reindex: map size does not match output shape");
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = x.at((*map)[i]);
    auto node = new_node(std::move(out_shape), std::move(out));
    if (wants_graph({&x})) {
        attach(node, {x}, [map, n](detail::Node& self) {
            auto& px = *self.parents[0];
            if (!(px.requires_grad || px.tracked)) return;
            px.ensure_grad();
            for (size_t i = 0; i < n; ++i) px.grad[(*map)[i]] += self.grad[i];
        });
    }
    return Tensor(std::move(node));
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    const double* d = x.data();
    for (size_t i = 0; i < x.size(); ++i) s += d[i];
    if (!std::isfinite(s)) throw NumericError("sum_all: non-finite result");
    auto node = new_node({1}, {s});
    if (wants_graph({&x})) {
        const size_t n = x.size();
        attach(node, {x}, [n](detail::Node& self) {
            auto& px = *self.parents[0];
            if (!(px.requires_grad || px.tracked)) return;
            px.ensure_grad();
            const double g = self.grad[0];
            for (size_t i = 0; i < n; ++i) px.grad[i] += g;
        });
    }
    return Tensor(std::move(node));
}

Tensor mean_all(const Tensor& x) {
    const size_t n = x.size();
    double s = 0.0;
    const double* d = x.data();
    for (size_t i = 0; i < n; ++i) s += d[i];
    s /= static_cast<double>(n);
    if (!std::isfinite(s)) throw NumericError("mean_all: non-finite result");
    auto node = new_node({1}, {s});
    if (wants_graph({&x})) {
        attach(node, {x}, [n](detail::Node& self) {
            auto& px = *self.parents[0];
            if (!(px.requires_grad || px.tracked)) return;
            px.ensure_grad();
            const double g = self.grad[0] / static_cast<double>(n);
            for (size_t i = 0; i < n; ++i) px.grad[i] += g;
        });
    }
    return Tensor(std::move(node));
}

Tensor make_op(std::vector<size_t> shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn, std::vector<double> aux) {
    auto node = new_node(std::move(shape), std::move(value));
    bool track = false;
    for (const auto& p : parents)
        if (g_grad_enabled && (p.requires_grad() || p.node()->tracked)) track = true;
    if (track) attach(node, std::move(parents), std::move(backward_fn), std::move(aux));
    return Tensor(std::move(node));
}

// --------------------------------------------------------------------------
// backward
// --------------------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward: loss must be a scalar tensor");
    auto root = loss.node();
    if (!root->tracked && !root->requires_grad) {
        // constant loss: nothing reachable
        return;
    }

    // iterative DFS topological order over tracked nodes
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            detail::Node* p = node->parents[idx].get();
            ++idx;
            if (p->tracked && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

// --------------------------------------------------------------------------
// grad_check
// --------------------------------------------------------------------------

CheckReport grad_check(const std::function<Tensor()>& f,
                       const std::vector<std::pair<std::string, Tensor>>& params, double h,
                       size_t samples_per_param, uint64_t seed) {
    CheckReport report;
    if (params.empty()) return report;

    for (auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();
    Tensor loss = f();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, t] : params) analytic.push_back(t.grad());

    for (size_t pi = 0; pi < params.size(); ++pi) {
        const auto& name = params[pi].first;
        Tensor t = params[pi].second;
        const size_t n = t.size();
        // Entries are checked in descending analytic-gradient magnitude: the
        // comparison must stay above the central-difference noise floor, and
        // a wrong backward formula distorts large entries as much as small
        // ones. Ties (e.g. all-zero gradients) fall back to index order.
        std::vector<size_t> idxs;
        if (n <= samples_per_param) {
            for (size_t i = 0; i < n; ++i) idxs.push_back(i);
        } else {
            std::vector<size_t> ranked(n);
            for (size_t i = 0; i < n; ++i) ranked[i] = i;
            const std::vector<double>& g = analytic[pi];
            std::stable_sort(ranked.begin(), ranked.end(), [&](size_t a, size_t b) {
                return std::fabs(g[a]) > std::fabs(g[b]);
            });
            idxs.assign(ranked.begin(), ranked.begin() + samples_per_param);
        }
        (void)seed;
        ParamCheckResult res;
        res.name = name;
        res.samples = idxs.size();
        for (size_t idx : idxs) {
            double* w = t.mutable_data();
            const double saved = w[idx];
            double lp, lm;
            {
                NoGradGuard ng;
                w[idx] = saved + h;
                lp = f().item();
                w[idx] = saved - h;
                lm = f().item();
                w[idx] = saved;
            }
            const double cd = (lp - lm) / (2.0 * h);
            const double an = analytic[pi][idx];
            const double denom = std::max({std::fabs(an), std::fabs(cd), 1e-8});
            const double rel = std::fabs(an - cd) / denom;
            if (rel > res.max_rel_err) res.max_rel_err = rel;
        }
        report.params.push_back(std::move(res));
    }
    return report;
}

}  // namespace mogen
