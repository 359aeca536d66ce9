#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sadga/tensor.hpp"

namespace sadga::ad {

using Index = std::vector<std::size_t>;

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// a[r×c] + row[c] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
// a[r×c] ⊙ row[c] broadcast over rows.
Tensor mul_row(const Tensor& a, const Tensor& row);
// a[r×c] scaled row-wise by s[r×1].
Tensor mul_col(const Tensor& a, const Tensor& s);

Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);
// 1 - a
Tensor one_minus(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
// a · bᵀ
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor sum_rows(const Tensor& a);
Tensor mean_rows(const Tensor& a);

// Row-wise softmax over the last axis. A mask entry of 0 excludes a position
// (output exactly 0). A fully masked row raises DegenerateSliceError unless
// allow_empty_rows is set, in which case the row is all zeros.
Tensor softmax_rows(const Tensor& a, std::span<const std::uint8_t> mask = {},
                    bool allow_empty_rows = false);
Tensor log_softmax_rows(const Tensor& a, std::span<const std::uint8_t> mask = {});

// Generic softmax along an axis of an N-d tensor (axis counted from 0).
Tensor softmax(const Tensor& a, std::size_t axis, std::span<const std::uint8_t> mask = {});

Tensor gather_rows(const Tensor& a, const Index& idx);
// Sum rows of a[E×c] into n output rows at positions idx[e].
Tensor scatter_add_rows(const Tensor& a, const Index& idx, std::size_t n);
// out[i,j] = a[i, idx[i*m + j]] for a[r×k], result r×m.
Tensor gather_cols_per_row(const Tensor& a, const Index& idx, std::size_t m);
// Adjoint of gather_cols_per_row: out[i, idx[i*m+j]] += a[i,j], result r×k.
Tensor scatter_cols_per_row(const Tensor& a, const Index& idx, std::size_t k);

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
// [n×c] → [times·n × c], block repeated.
Tensor tile_rows(const Tensor& a, std::size_t times);
// [m×c] → [m·each × c], each row repeated consecutively.
Tensor repeat_rows(const Tensor& a, std::size_t each);
// out[i,:] = Σ_j w[i,j] · x[i·n + j, :] for w[m×n], x[m·n × c].
Tensor block_weighted_sum(const Tensor& w, const Tensor& x);
Tensor reshape(const Tensor& a, const Shape& shape);
// Scalar at flat position.
Tensor pick(const Tensor& a, std::size_t flat_index);

// Per-row standardization (no affine), population variance.
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-5);

// Inverted dropout; identity when !train or p == 0.
Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng, bool train);

}  // namespace sadga::ad
