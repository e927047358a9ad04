#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtalk/numerics/matrix.hpp"
#include "mtalk/numerics/tape.hpp"

namespace mtalk::numerics {

// Tracked counterparts of the kernels in matrix.hpp. All operands must live on
// the same tape; the result is recorded there.

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
// x + bias, with a 1xC bias added to every row.
Var add_row_bias(Var x, Var bias);
Var sigmoid(Var x);
Var gelu(Var x);
Var row_softmax(Var x);
// Softmax restricted to entries where visible(i, j) != 0; masked entries are 0.
// Every row must expose at least one entry.
Var masked_row_softmax(Var x, const Matrix& visible);
Var mean_rows(Var x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var gather_rows(Var x, std::span<const std::size_t> indices);
Var gather_cols(Var x, std::span<const std::size_t> indices);
// 1xC row of per-column maxima. The gradient routes to the first maximal row.
Var column_max(Var x);
// Row i of x multiplied by weights[i]; weights is 1xR or Rx1.
Var scale_rows(Var x, Var weights);
// v / sum(v)
Var normalize_sum(Var v);
Var sum(Var x);
// Mean over positions with targets[t] != ignore_id of -log softmax(logits_t)[targets[t]].
Var cross_entropy(Var logits, std::span<const std::size_t> targets, std::size_t ignore_id);

struct Attention {
  Var output;
  Var weights;
};

// weights = softmax(q k^T / sqrt(d)) with d = q.cols(); output = weights v.
// `visible`, when given, masks the score matrix (1 = attend).
Attention scaled_dot_attention(Var q, Var k, Var v, const Matrix* visible = nullptr);

}  // namespace mtalk::numerics
