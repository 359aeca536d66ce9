#include "sadga/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sadga/errors.hpp"

namespace sadga::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw InvalidShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
    }
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidShapeError(msg);
}

Shape mat_shape(std::size_t r, std::size_t c) { return {r, c}; }

// Gradient buffer of parent k, or nullptr if it does not take gradients.
double* pgrad(Node& self, std::size_t k) {
    Node& p = *self.parents[k];
    if (!p.requires_grad) return nullptr;
    return p.grad_buffer().data();
}

const std::vector<double>& pval(Node& self, std::size_t k) { return self.parents[k]->value; }

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx_from_xy) {
    std::vector<double> out(a.numel());
    auto x = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
    return make_result(a.shape(), std::move(out), {a}, [dfdx_from_xy](Node& self) {
        double* ga = pgrad(self, 0);
        if (!ga) return;
        const auto& x = pval(self, 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            ga[i] += self.grad[i] * dfdx_from_xy(x[i], self.value[i]);
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    auto x = a.values(), y = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (double* g = pgrad(self, k)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    auto x = a.values(), y = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    auto x = a.values(), y = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& x = pval(self, 0);
        const auto& y = pval(self, 1);
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * y[i];
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x[i];
        }
    });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    const std::size_t r = a.rows(), c = a.cols();
    require(row.numel() == c, "add_row: row length " + std::to_string(row.numel()) +
                                  " does not match " + std::to_string(c) + " columns");
    std::vector<double> out(a.numel());
    auto x = a.values(), b = row.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + b[j];
    return make_result(a.shape(), std::move(out), {a, row}, [r, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r * c; ++i) g[i] += self.grad[i];
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
        }
    });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
    const std::size_t r = a.rows(), c = a.cols();
    require(row.numel() == c, "mul_row: row length mismatch");
    std::vector<double> out(a.numel());
    auto x = a.values(), b = row.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] * b[j];
    return make_result(a.shape(), std::move(out), {a, row}, [r, c](Node& self) {
        const auto& x = pval(self, 0);
        const auto& b = pval(self, 1);
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j] * b[j];
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j] * x[i * c + j];
        }
    });
}

Tensor mul_col(const Tensor& a, const Tensor& s) {
    const std::size_t r = a.rows(), c = a.cols();
    require(s.numel() == r, "mul_col: scale length " + std::to_string(s.numel()) +
                                " does not match " + std::to_string(r) + " rows");
    std::vector<double> out(a.numel());
    auto x = a.values(), k = s.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] * k[i];
    return make_result(a.shape(), std::move(out), {a, s}, [r, c](Node& self) {
        const auto& x = pval(self, 0);
        const auto& k = pval(self, 1);
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j] * k[i];
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) acc += self.grad[i * c + j] * x[i * c + j];
                g[i] += acc;
            }
        }
    });
}

Tensor scale(const Tensor& a, double k) {
    return unary(a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Tensor add_scalar(const Tensor& a, double k) {
    return unary(a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Tensor one_minus(const Tensor& a) {
    return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        a,
        [](double x) {
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; },
                 [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    require(b.rows() == k, "matmul: inner dimensions " + shape_str(a.shape()) + " x " +
                               shape_str(b.shape()));
    std::vector<double> out(m * n);
    Map(out.data(), m, n).noalias() = MapC(a.values().data(), m, k) * MapC(b.values().data(), k, n);
    return make_result(mat_shape(m, n), std::move(out), {a, b}, [m, k, n](Node& self) {
        MapC g(self.grad.data(), m, n);
        if (double* ga = pgrad(self, 0)) {
            Map(ga, m, k).noalias() += g * MapC(pval(self, 1).data(), k, n).transpose();
        }
        if (double* gb = pgrad(self, 1)) {
            Map(gb, k, n).noalias() += MapC(pval(self, 0).data(), m, k).transpose() * g;
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    require(b.cols() == k, "matmul_nt: inner dimensions " + shape_str(a.shape()) + " x " +
                               shape_str(b.shape()) + "^T");
    std::vector<double> out(m * n);
    Map(out.data(), m, n).noalias() =
        MapC(a.values().data(), m, k) * MapC(b.values().data(), n, k).transpose();
    return make_result(mat_shape(m, n), std::move(out), {a, b}, [m, k, n](Node& self) {
        MapC g(self.grad.data(), m, n);
        if (double* ga = pgrad(self, 0)) {
            Map(ga, m, k).noalias() += g * MapC(pval(self, 1).data(), n, k);
        }
        if (double* gb = pgrad(self, 1)) {
            Map(gb, n, k).noalias() += g.transpose() * MapC(pval(self, 0).data(), m, k);
        }
    });
}

Tensor transpose(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.numel());
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    return make_result(mat_shape(c, r), std::move(out), {a}, [r, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
        }
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_result({1}, {s}, {a}, [](Node& self) {
        if (double* g = pgrad(self, 0)) {
            const std::size_t n = self.parents[0]->value.size();
            for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
        }
    });
}

Tensor sum_rows(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(c, 0.0);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += x[i * c + j];
    return make_result(mat_shape(1, c), std::move(out), {a}, [r, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j];
        }
    });
}

Tensor mean_rows(const Tensor& a) { return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows())); }

Tensor softmax_rows(const Tensor& a, std::span<const std::uint8_t> mask, bool allow_empty_rows) {
    const std::size_t r = a.rows(), c = a.cols();
    require(mask.empty() || mask.size() == a.numel(), "softmax: mask shape mismatch");
    std::vector<double> out(a.numel(), 0.0);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            if (mask.empty() || mask[i * c + j]) mx = std::max(mx, x[i * c + j]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            if (!allow_empty_rows) {
                throw DegenerateSliceError("softmax: row " + std::to_string(i) +
                                           " has every position masked");
            }
            continue;
        }
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (mask.empty() || mask[i * c + j]) {
                double e = std::exp(x[i * c + j] - mx);
                out[i * c + j] = e;
                z += e;
            }
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
    }
    return make_result(a.shape(), std::move(out), {a}, [r, c](Node& self) {
        double* g = pgrad(self, 0);
        if (!g) return;
        const auto& y = self.value;
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j) {
                g[i * c + j] += y[i * c + j] * (self.grad[i * c + j] - dot);
            }
        }
    });
}

Tensor log_softmax_rows(const Tensor& a, std::span<const std::uint8_t> mask) {
    const std::size_t r = a.rows(), c = a.cols();
    require(mask.empty() || mask.size() == a.numel(), "log_softmax: mask shape mismatch");
    std::vector<double> out(a.numel(), -std::numeric_limits<double>::infinity());
    std::vector<double> probs(a.numel(), 0.0);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            if (mask.empty() || mask[i * c + j]) mx = std::max(mx, x[i * c + j]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            throw DegenerateSliceError("log_softmax: row " + std::to_string(i) +
                                       " has every position masked");
        }
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (mask.empty() || mask[i * c + j]) z += std::exp(x[i * c + j] - mx);
        }
        const double lz = mx + std::log(z);
        for (std::size_t j = 0; j < c; ++j) {
            if (mask.empty() || mask[i * c + j]) {
                out[i * c + j] = x[i * c + j] - lz;
                probs[i * c + j] = std::exp(out[i * c + j]);
            }
        }
    }
    return make_result(a.shape(), std::move(out), {a},
                       [r, c, probs = std::move(probs)](Node& self) {
                           double* g = pgrad(self, 0);
                           if (!g) return;
                           for (std::size_t i = 0; i < r; ++i) {
                               double total = 0.0;
                               for (std::size_t j = 0; j < c; ++j) {
                                   if (std::isfinite(self.value[i * c + j])) total += self.grad[i * c + j];
                               }
                               for (std::size_t j = 0; j < c; ++j) {
                                   if (!std::isfinite(self.value[i * c + j])) continue;
                                   g[i * c + j] += self.grad[i * c + j] - probs[i * c + j] * total;
                               }
                           }
                       });
}

Tensor softmax(const Tensor& a, std::size_t axis, std::span<const std::uint8_t> mask) {
    const Shape& shape = a.shape();
    if (axis >= shape.size()) {
        throw ContractError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                            shape_str(shape));
    }
    if (axis + 1 == shape.size()) return softmax_rows(a, mask);
    // Move the axis last, normalize, move it back.
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t len = shape[axis];
    Index perm(a.numel());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in)
            for (std::size_t l = 0; l < len; ++l)
                perm[(o * inner + in) * len + l] = (o * len + l) * inner + in;
    std::vector<std::uint8_t> pmask;
    if (!mask.empty()) {
        require(mask.size() == a.numel(), "softmax: mask shape mismatch");
        pmask.resize(mask.size());
        for (std::size_t i = 0; i < perm.size(); ++i) pmask[i] = mask[perm[i]];
    }
    Tensor flat = reshape(a, {a.numel(), 1});
    Tensor moved = reshape(gather_rows(flat, perm), {outer * inner, len});
    Tensor normed = reshape(softmax_rows(moved, pmask), {a.numel(), 1});
    return reshape(scatter_add_rows(normed, perm, a.numel()), shape);
}

Tensor gather_rows(const Tensor& a, const Index& idx) {
    const std::size_t r = a.rows(), c = a.cols();
    if (idx.empty()) throw InvalidShapeError("gather_rows: empty index list");
    std::vector<double> out(idx.size() * c);
    auto x = a.values();
    for (std::size_t e = 0; e < idx.size(); ++e) {
        if (idx[e] >= r) throw ContractError("gather_rows: index out of range");
        std::copy_n(x.begin() + idx[e] * c, c, out.begin() + e * c);
    }
    return make_result(mat_shape(idx.size(), c), std::move(out), {a}, [idx, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t e = 0; e < idx.size(); ++e)
                for (std::size_t j = 0; j < c; ++j) g[idx[e] * c + j] += self.grad[e * c + j];
        }
    });
}

Tensor scatter_add_rows(const Tensor& a, const Index& idx, std::size_t n) {
    const std::size_t e_count = a.rows(), c = a.cols();
    require(idx.size() == e_count, "scatter_add_rows: index length mismatch");
    std::vector<double> out(n * c, 0.0);
    auto x = a.values();
    for (std::size_t e = 0; e < e_count; ++e) {
        if (idx[e] >= n) throw ContractError("scatter_add_rows: index out of range");
        for (std::size_t j = 0; j < c; ++j) out[idx[e] * c + j] += x[e * c + j];
    }
    return make_result(mat_shape(n, c), std::move(out), {a}, [idx, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t e = 0; e < idx.size(); ++e)
                for (std::size_t j = 0; j < c; ++j) g[e * c + j] += self.grad[idx[e] * c + j];
        }
    });
}

Tensor gather_cols_per_row(const Tensor& a, const Index& idx, std::size_t m) {
    const std::size_t r = a.rows(), k = a.cols();
    require(idx.size() == r * m, "gather_cols_per_row: index length mismatch");
    std::vector<double> out(r * m);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (idx[i * m + j] >= k) throw ContractError("gather_cols_per_row: index out of range");
            out[i * m + j] = x[i * k + idx[i * m + j]];
        }
    return make_result(mat_shape(r, m), std::move(out), {a}, [idx, r, m, k](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < m; ++j) g[i * k + idx[i * m + j]] += self.grad[i * m + j];
        }
    });
}

Tensor scatter_cols_per_row(const Tensor& a, const Index& idx, std::size_t k) {
    const std::size_t r = a.rows(), m = a.cols();
    require(idx.size() == r * m, "scatter_cols_per_row: index length mismatch");
    std::vector<double> out(r * k, 0.0);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (idx[i * m + j] >= k) throw ContractError("scatter_cols_per_row: index out of range");
            out[i * k + idx[i * m + j]] += x[i * m + j];
        }
    return make_result(mat_shape(r, k), std::move(out), {a}, [idx, r, m, k](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[i * k + idx[i * m + j]];
        }
    });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len) {
    const std::size_t c = a.cols();
    require(len > 0 && start + len <= a.rows(), "slice_rows: range out of bounds");
    auto x = a.values();
    std::vector<double> out(x.begin() + start * c, x.begin() + (start + len) * c);
    return make_result(mat_shape(len, c), std::move(out), {a}, [start, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * c + i] += self.grad[i];
        }
    });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
    const std::size_t r = a.rows(), c = a.cols();
    require(len > 0 && start + len <= c, "slice_cols: range out of bounds");
    std::vector<double> out(r * len);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < len; ++j) out[i * len + j] = x[i * c + start + j];
    return make_result(mat_shape(r, len), std::move(out), {a}, [r, c, start, len](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < len; ++j) g[i * c + start + j] += self.grad[i * len + j];
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    const std::size_t c = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.cols() == c, "concat_rows: column mismatch");
        total += p.rows();
    }
    std::vector<double> out;
    out.reserve(total * c);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return make_result(mat_shape(total, c), std::move(out), parts, [](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const std::size_t n = self.parents[k]->value.size();
            if (double* g = pgrad(self, k)) {
                for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
            }
            offset += n;
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.rows() == r, "concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                                   shape_str(p.shape()));
        total += p.cols();
    }
    std::vector<double> out(r * total);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t c = p.cols();
        auto x = p.values();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i * total + offset + j] = x[i * c + j];
        offset += c;
    }
    return make_result(mat_shape(r, total), std::move(out), parts, [r, total](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const std::size_t c = self.parents[k]->shape.back();
            if (double* g = pgrad(self, k)) {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * total + offset + j];
            }
            offset += c;
        }
    });
}

Tensor tile_rows(const Tensor& a, std::size_t times) {
    const std::size_t n = a.rows(), c = a.cols();
    require(times > 0, "tile_rows: zero repetitions");
    std::vector<double> out;
    out.reserve(times * a.numel());
    for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), a.values().begin(), a.values().end());
    return make_result(mat_shape(times * n, c), std::move(out), {a}, [times, n, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t t = 0; t < times; ++t)
                for (std::size_t i = 0; i < n * c; ++i) g[i] += self.grad[t * n * c + i];
        }
    });
}

Tensor repeat_rows(const Tensor& a, std::size_t each) {
    const std::size_t m = a.rows(), c = a.cols();
    require(each > 0, "repeat_rows: zero repetitions");
    std::vector<double> out(m * each * c);
    auto x = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < each; ++t)
            std::copy_n(x.begin() + i * c, c, out.begin() + (i * each + t) * c);
    return make_result(mat_shape(m * each, c), std::move(out), {a}, [m, each, c](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < each; ++t)
                    for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[(i * each + t) * c + j];
        }
    });
}

Tensor block_weighted_sum(const Tensor& w, const Tensor& x) {
    const std::size_t m = w.rows(), n = w.cols(), c = x.cols();
    require(x.rows() == m * n, "block_weighted_sum: expected " + std::to_string(m * n) + " rows, got " +
                                   std::to_string(x.rows()));
    std::vector<double> out(m * c, 0.0);
    auto wv = w.values(), xv = x.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double a = wv[i * n + j];
            const double* row = xv.data() + (i * n + j) * c;
            for (std::size_t k = 0; k < c; ++k) out[i * c + k] += a * row[k];
        }
    return make_result(mat_shape(m, c), std::move(out), {w, x}, [m, n, c](Node& self) {
        const auto& wv = pval(self, 0);
        const auto& xv = pval(self, 1);
        if (double* gw = pgrad(self, 0)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < c; ++k) acc += self.grad[i * c + k] * xv[(i * n + j) * c + k];
                    gw[i * n + j] += acc;
                }
        }
        if (double* gx = pgrad(self, 1)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t k = 0; k < c; ++k)
                        gx[(i * n + j) * c + k] += wv[i * n + j] * self.grad[i * c + k];
        }
    });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_numel(shape) != a.numel()) {
        throw InvalidShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    std::vector<double> out(a.values().begin(), a.values().end());
    return make_result(shape, std::move(out), {a}, [](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor pick(const Tensor& a, std::size_t flat_index) {
    if (flat_index >= a.numel()) throw ContractError("pick: index out of range");
    return make_result({1}, {a.values()[flat_index]}, {a}, [flat_index](Node& self) {
        if (double* g = pgrad(self, 0)) g[flat_index] += self.grad[0];
    });
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.numel());
    std::vector<double> inv_std(r);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += x[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = x[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (x[i * c + j] - mu) * inv_std[i];
    }
    return make_result(a.shape(), std::move(out), {a}, [r, c, inv_std = std::move(inv_std)](Node& self) {
        double* g = pgrad(self, 0);
        if (!g) return;
        const auto& y = self.value;
        const double n = static_cast<double>(c);
        for (std::size_t i = 0; i < r; ++i) {
            double mean_g = 0.0, mean_gy = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                mean_g += self.grad[i * c + j];
                mean_gy += self.grad[i * c + j] * y[i * c + j];
            }
            mean_g /= n;
            mean_gy /= n;
            for (std::size_t j = 0; j < c; ++j) {
                g[i * c + j] += inv_std[i] * (self.grad[i * c + j] - mean_g - y[i * c + j] * mean_gy);
            }
        }
    });
}

Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng, bool train) {
    if (!train || p <= 0.0) return a;
    if (p >= 1.0) throw ContractError("dropout probability must be < 1");
    std::bernoulli_distribution keep(1.0 - p);
    const double k = 1.0 / (1.0 - p);
    std::vector<double> m(a.numel());
    for (auto& v : m) v = keep(rng) ? k : 0.0;
    std::vector<double> out(a.numel());
    auto x = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * m[i];
    return make_result(a.shape(), std::move(out), {a}, [m = std::move(m)](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < m.size(); ++i) g[i] += self.grad[i] * m[i];
        }
    });
}

}  // namespace sadga::ad
