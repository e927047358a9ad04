#include "mtalk/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mtalk/errors.hpp"

namespace mtalk::numerics {

namespace {

Tape& tape_of(Var v) {
  if (!v.valid()) throw StateError("operation on an unbound Var");
  return *v.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw StateError("operands recorded on different tapes");
  return t;
}

Matrix softmax_backward(const Matrix& y, const Matrix& g) {
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (g(i, j) - dot);
  }
  return dx;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  Matrix out = matmul(a.value(), b.value());
  t.macs().add(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, matmul_nt(g, b.value()));
    if (tp.needs_grad(b)) tp.accumulate(b, matmul_tn(a.value(), g));
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = common_tape(a, b);
  Matrix out = matmul_nt(a.value(), b.value());
  t.macs().add(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.rows());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, matmul(g, b.value()));
    if (tp.needs_grad(b)) tp.accumulate(b, matmul_tn(g, a.value()));
  });
}

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  return t.record(add(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var subtract(Var a, Var b) {
  Tape& t = common_tape(a, b);
  return t.record(subtract(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, scale(g, -1.0));
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("hadamard: " + a.value().shape_string() + " vs " +
                         b.value().shape_string());
  }
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) {
      Matrix da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] *= b.value().data()[i];
      tp.accumulate(a, da);
    }
    if (tp.needs_grad(b)) {
      Matrix db = g;
      for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] *= a.value().data()[i];
      tp.accumulate(b, db);
    }
  });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  return t.record(scale(a.value(), factor), {a}, [a, factor](Tape& tp, const Matrix& g) {
    tp.accumulate(a, scale(g, factor));
  });
}

Var add_row_bias(Var x, Var bias) {
  Tape& t = common_tape(x, bias);
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw DimensionError("add_row_bias: bias " + bv.shape_string() + " for " + xv.shape_string());
  }
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
  return t.record(std::move(out), {x, bias}, [x, bias](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g);
    if (tp.needs_grad(bias)) {
      Matrix db(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) db(0, j) += g(i, j);
      tp.accumulate(bias, db);
    }
  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  Matrix out = sigmoid(x.value());
  const Matrix y = out;
  return t.record(std::move(out), {x}, [x, y](Tape& tp, const Matrix& g) {
    Matrix dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double s = y.data()[i];
      dx.data()[i] *= s * (1.0 - s);
    }
    tp.accumulate(x, dx);
  });
}

Var gelu(Var x) {
  Tape& t = tape_of(x);
  return t.record(gelu(x.value()), {x}, [x](Tape& tp, const Matrix& g) {
    Matrix dx = g;
    const Matrix& xv = x.value();
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= gelu_derivative(xv.data()[i]);
    tp.accumulate(x, dx);
  });
}

Var row_softmax(Var x) {
  Tape& t = tape_of(x);
  Matrix out = row_softmax(x.value());
  t.macs().add(static_cast<std::uint64_t>(out.rows()) * out.cols());
  const Matrix y = out;
  return t.record(std::move(out), {x}, [x, y](Tape& tp, const Matrix& g) {
    tp.accumulate(x, softmax_backward(y, g));
  });
}

Var masked_row_softmax(Var x, const Matrix& visible) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  if (!visible.same_shape(xv)) {
    throw DimensionError("masked_row_softmax: mask " + visible.shape_string() + " for " +
                         xv.shape_string());
  }
  Matrix out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < xv.cols(); ++j)
      if (visible(i, j) != 0.0) mx = std::max(mx, xv(i, j));
    if (mx == -INFINITY) throw DomainError("masked_row_softmax: row " + std::to_string(i) +
                                           " has no visible entries");
    double total = 0.0;
    for (std::size_t j = 0; j < xv.cols(); ++j) {
      if (visible(i, j) == 0.0) continue;
      out(i, j) = std::exp(xv(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < xv.cols(); ++j) out(i, j) /= total;
  }
  t.macs().add(static_cast<std::uint64_t>(out.rows()) * out.cols());
  const Matrix y = out;
  return t.record(std::move(out), {x}, [x, y](Tape& tp, const Matrix& g) {
    tp.accumulate(x, softmax_backward(y, g));
  });
}

Var mean_rows(Var x, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(x);
  return t.record(mean_rows(x.value(), begin, end), {x},
                  [x, begin, end](Tape& tp, const Matrix& g) {
                    Matrix dx(x.rows(), x.cols());
                    const double inv = 1.0 / static_cast<double>(end - begin);
                    for (std::size_t i = begin; i < end; ++i)
                      for (std::size_t j = 0; j < dx.cols(); ++j) dx(i, j) = g(0, j) * inv;
                    tp.accumulate(x, dx);
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  Tape& t = tape_of(parts.front());
  std::vector<Matrix> values;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (const Var& p : parts) {
    if (p.tape() != &t) throw StateError("operands recorded on different tapes");
    values.push_back(p.value());
  }
  return t.record(concat_rows(values), inputs, [inputs](Tape& tp, const Matrix& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t r = p.rows();
      if (tp.needs_grad(p)) tp.accumulate(p, slice_rows(g, offset, offset + r));
      offset += r;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  Tape& t = tape_of(parts.front());
  std::vector<Matrix> values;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (const Var& p : parts) {
    if (p.tape() != &t) throw StateError("operands recorded on different tapes");
    values.push_back(p.value());
  }
  return t.record(concat_cols(values), inputs, [inputs](Tape& tp, const Matrix& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t c = p.cols();
      if (tp.needs_grad(p)) {
        Matrix part(g.rows(), c);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) part(i, j) = g(i, offset + j);
        tp.accumulate(p, part);
      }
      offset += c;
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(x);
  return t.record(slice_rows(x.value(), begin, end), {x},
                  [x, begin](Tape& tp, const Matrix& g) {
                    Matrix dx(x.rows(), x.cols());
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) dx(begin + i, j) = g(i, j);
                    tp.accumulate(x, dx);
                  });
}

Var gather_rows(Var x, std::span<const std::size_t> indices) {
  Tape& t = tape_of(x);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return t.record(gather_rows(x.value(), idx), {x}, [x, idx](Tape& tp, const Matrix& g) {
    Matrix dx(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) dx(idx[i], j) += g(i, j);
    tp.accumulate(x, dx);
  });
}

Var gather_cols(Var x, std::span<const std::size_t> indices) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Matrix out(xv.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= xv.cols()) throw DimensionError("gather_cols: index out of range");
    for (std::size_t i = 0; i < xv.rows(); ++i) out(i, j) = xv(i, idx[j]);
  }
  return t.record(std::move(out), {x}, [x, idx](Tape& tp, const Matrix& g) {
    Matrix dx(x.rows(), x.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) dx(i, idx[j]) += g(i, j);
    tp.accumulate(x, dx);
  });
}

Var column_max(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  if (xv.rows() == 0) throw DomainError("column_max: no rows");
  Matrix out(1, xv.cols());
  std::vector<std::size_t> arg(xv.cols(), 0);
  for (std::size_t j = 0; j < xv.cols(); ++j) {
    out(0, j) = xv(0, j);
    for (std::size_t i = 1; i < xv.rows(); ++i) {
      if (xv(i, j) > out(0, j)) {
        out(0, j) = xv(i, j);
        arg[j] = i;
      }
    }
  }
  return t.record(std::move(out), {x}, [x, arg](Tape& tp, const Matrix& g) {
    Matrix dx(x.rows(), x.cols());
    for (std::size_t j = 0; j < arg.size(); ++j) dx(arg[j], j) = g(0, j);
    tp.accumulate(x, dx);
  });
}

Var scale_rows(Var x, Var weights) {
  Tape& t = common_tape(x, weights);
  const Matrix& xv = x.value();
  const Matrix& wv = weights.value();
  if (wv.size() != xv.rows() || (wv.rows() != 1 && wv.cols() != 1)) {
    throw DimensionError("scale_rows: weights " + wv.shape_string() + " for " +
                         xv.shape_string());
  }
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= wv.data()[i];
  return t.record(std::move(out), {x, weights}, [x, weights](Tape& tp, const Matrix& g) {
    const Matrix& xv = x.value();
    const Matrix& wv = weights.value();
    if (tp.needs_grad(x)) {
      Matrix dx = g;
      for (std::size_t i = 0; i < dx.rows(); ++i)
        for (std::size_t j = 0; j < dx.cols(); ++j) dx(i, j) *= wv.data()[i];
      tp.accumulate(x, dx);
    }
    if (tp.needs_grad(weights)) {
      Matrix dw(wv.rows(), wv.cols());
      for (std::size_t i = 0; i < xv.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < xv.cols(); ++j) acc += g(i, j) * xv(i, j);
        dw.data()[i] = acc;
      }
      tp.accumulate(weights, dw);
    }
  });
}

Var normalize_sum(Var v) {
  Tape& t = tape_of(v);
  const Matrix& vv = v.value();
  double total = 0.0;
  for (double x : vv.data()) total += x;
  if (total == 0.0) throw DomainError("normalize_sum: zero total");
  Matrix out = scale(vv, 1.0 / total);
  const Matrix y = out;
  return t.record(std::move(out), {v}, [v, y, total](Tape& tp, const Matrix& g) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g.data()[i] * y.data()[i];
    Matrix dv(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i) dv.data()[i] = (g.data()[i] - dot) / total;
    tp.accumulate(v, dv);
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return t.record(Matrix(1, 1, total), {x}, [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix(x.rows(), x.cols(), g(0, 0)));
  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets, std::size_t ignore_id) {
  Tape& t = tape_of(logits);
  const Matrix& lv = logits.value();
  if (targets.size() != lv.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         lv.shape_string() + " logits");
  }
  const Matrix probs = row_softmax(lv);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  std::size_t counted = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < tg.size(); ++i) {
    if (tg[i] == ignore_id) continue;
    if (tg[i] >= lv.cols()) throw DomainError("cross_entropy: target id out of vocabulary");
    const auto row = lv.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    total += mx + std::log(z) - row[tg[i]];
    ++counted;
  }
  if (counted == 0) throw DomainError("cross_entropy: every target is padding");
  const double n = static_cast<double>(counted);
  return t.record(Matrix(1, 1, total / n), {logits},
                  [logits, probs, tg, ignore_id, n](Tape& tp, const Matrix& g) {
                    Matrix dl(probs.rows(), probs.cols());
                    for (std::size_t i = 0; i < tg.size(); ++i) {
                      if (tg[i] == ignore_id) continue;
                      for (std::size_t j = 0; j < probs.cols(); ++j)
                        dl(i, j) = probs(i, j) * g(0, 0) / n;
                      dl(i, tg[i]) -= g(0, 0) / n;
                    }
                    tp.accumulate(logits, dl);
                  });
}

Attention scaled_dot_attention(Var q, Var k, Var v, const Matrix* visible) {
  if (q.cols() != k.cols()) {
    throw DimensionError("attention: query width " + std::to_string(q.cols()) +
                         " vs key width " + std::to_string(k.cols()));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("attention: " + std::to_string(k.rows()) + " keys vs " +
                         std::to_string(v.rows()) + " values");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var scores = scale(matmul_nt(q, k), inv_sqrt_d);
  Var weights = visible ? masked_row_softmax(scores, *visible) : row_softmax(scores);
  return {matmul(weights, v), weights};
}

}  // namespace mtalk::numerics
