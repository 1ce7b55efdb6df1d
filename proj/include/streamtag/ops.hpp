#ifndef STREAMTAG_OPS_HPP_
#define STREAMTAG_OPS_HPP_

#include <span>
#include <vector>

#include "streamtag/autodiff.hpp"

// Differentiable operations on rank <= 2 tensors. Rank-1 inputs are read as a
// single row. Shape mismatches throw ShapeError naming the op and the shapes.
namespace streamtag::num {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// a: N x M, bias: M (or 1 x M), added to every row.
Var add_bias(Var a, Var bias);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
// Along the last axis; every input must have the same row count.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var softmax(Var a);
// Rank 2: axis 0 reduces rows (result has `cols` entries), axis 1 reduces
// columns (result has `rows` entries). Rank 1 accepts axis 0 only and yields a
// scalar.
Var log_sum_exp(Var a, int axis);
Var sum(Var a);
// Gathers rows of `table`; result is indices.size() x cols(table).
Var embedding_lookup(Var table, std::span<const int> indices);
Var embedding_lookup(Var table, int index);
Var stack_rows(std::span<const Var> rows);
Var row(Var a, std::size_t index);
Var repeat_rows(Var a, std::size_t count);
Var select(Var a, std::size_t flat_index);

/// Full-sequence LSTM layer. `inputs` is T x D, `w_ih` D x 4H, `w_hh` H x 4H,
/// `bias` 4H with gate order (input, forget, cell, output). Starts from zero
/// state. Row t of the T x H result is the hidden state at position t; with
/// `reverse` the recurrence runs from position T-1 down to 0.
Var lstm(Var inputs, Var w_ih, Var w_hh, Var bias, bool reverse);

}  // namespace streamtag::num

#endif  // STREAMTAG_OPS_HPP_
