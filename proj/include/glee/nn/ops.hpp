#pragma once

#include <span>
#include <vector>

#include "glee/nn/tape.hpp"

namespace glee::nn {

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, float s);
Var relu(Var a);
Var sigmoid(Var a);

// x[n, d] + b[d] broadcast over rows.
Var add_row_bias(Var x, Var b);
// x[c, ...] + b[c] broadcast over trailing dims.
Var add_channel_bias(Var x, Var b);

// a[m, k] * b[k, n]
Var matmul(Var a, Var b);
// a[m, k] * b[n, k]^T
Var matmul_nt(Var a, Var b);
// a[k, m]^T * b[k, n]
Var matmul_tn(Var a, Var b);

// x[n, in] (or [in]) * W[out, in]^T + bias[out]; bias may be invalid (no bias).
Var linear(Var x, Var weight, Var bias = {});

// x[C, H, W] convolved with weight[O, C, k, k] (+ bias[O]), zero padding.
Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad);

// Mean over every axis after the first: [C, ...] -> [C].
Var mean_trailing(Var x);

// Row-wise softmax of [m, n].
Var softmax_rows(Var x);

// Row-wise layer normalization of [n, d] with affine gamma/beta [d].
Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-5f);

Var transpose(Var x);
Var reshape(Var x, Shape shape);

// Flattens and concatenates.
Var concat(const std::vector<Var>& parts);

// Stacks equal-length vectors into [n, d].
Var stack_rows(const std::vector<Var>& rows);

// Row i of [n, d] as [d].
Var row(Var x, std::size_t i);

// Columns [c0, c1) of [n, d].
Var slice_cols(Var x, std::size_t c0, std::size_t c1);

// Concatenates [n, d_i] blocks along columns.
Var concat_cols(const std::vector<Var>& blocks);

// Sum of all elements as shape [1].
Var sum(Var x);

}  // namespace glee::nn
