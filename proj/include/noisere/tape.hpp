#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "noisere/errors.hpp"
#include "noisere/tensor.hpp"

namespace noisere {

struct Parameter;

// Reverse-mode differentiation record. The tape is rebuilt per training
// step (define-by-run): nodes are appended in evaluation order, which is
// already topological, and backward() sweeps them once in reverse.
//
// A tape and the parameters bound to it are confined to one worker;
// read-only tensors may be shared across workers.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  static constexpr double kLogClamp = 1e-12;

  Var leaf(Tensor v) { return push(std::move(v)); }

  Var param(Parameter& p);  // leaf bound to a Parameter; defined in params.hpp

  const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  const Tensor& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

  // Number of times log_clamped saw an input below the clamp floor.
  long clamp_hits() const { return clamp_hits_; }

  size_t node_count() const { return nodes_.size(); }
  size_t binding_count() const { return bindings_.size(); }

  // ---- elementwise / scalar ----

  Var add(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    require(x.same_shape(y), "add", x, y);
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += y[i];
    return push(std::move(out), [a, b](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      t.accumulate(a.id, g);
      t.accumulate(b.id, g);
    });
  }

  Var add_n(const std::vector<Var>& vs) {
    if (vs.empty()) throw UsageError("add_n: empty operand list");
    Tensor out = value(vs[0]);
    for (size_t k = 1; k < vs.size(); ++k) {
      const Tensor& y = value(vs[k]);
      require(out.same_shape(y), "add_n", out, y);
      for (int64_t i = 0; i < out.size(); ++i) out[i] += y[i];
    }
    std::vector<int> ids;
    ids.reserve(vs.size());
    for (Var v : vs) ids.push_back(v.id);
    return push(std::move(out), [ids = std::move(ids)](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      for (int id : ids) t.accumulate(id, g);
    });
  }

  Var scale(Var a, double c) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= c;
    return push(std::move(out), [a, c](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& ga = t.nodes_[a.id].grad;
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
  }

  Var tanh(Var a) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return push(std::move(out), [a](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& y = t.nodes_[self].value;
      Tensor& ga = t.nodes_[a.id].grad;
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
  }

  // log with the input clamped at 1e-12; inputs at or below the floor get
  // zero gradient (the clamped branch is constant).
  Var log_clamped(Var a) {
    const Tensor& x = value(a);
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) {
      if (out[i] < kLogClamp) {
        out[i] = std::log(kLogClamp);
        ++clamp_hits_;
      } else {
        out[i] = std::log(out[i]);
      }
    }
    return push(std::move(out), [a](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& x = t.nodes_[a.id].value;
      Tensor& ga = t.nodes_[a.id].grad;
      for (int64_t i = 0; i < g.size(); ++i) {
        if (x[i] >= kLogClamp) ga[i] += g[i] / x[i];
      }
    });
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.ndim() != 2 || y.ndim() != 2 || x.cols() != y.rows()) {
      throw DimensionError("matmul: incompatible shapes " + shape_str(x.shape()) + " vs " +
                           shape_str(y.shape()));
    }
    const int m = x.rows(), k = x.cols(), n = y.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        const double xv = x.at(i, l);
        if (xv == 0.0) continue;
        for (int j = 0; j < n; ++j) out.at(i, j) += xv * y.at(l, j);
      }
    return push(std::move(out), [a, b, m, k, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& x = t.nodes_[a.id].value;
      const Tensor& y = t.nodes_[b.id].value;
      Tensor& ga = t.nodes_[a.id].grad;
      Tensor& gb = t.nodes_[b.id].grad;
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += g.at(i, j) * y.at(l, j);
          ga.at(i, l) += acc;
        }
      for (int l = 0; l < k; ++l)
        for (int i = 0; i < m; ++i) {
          const double xv = x.at(i, l);
          if (xv == 0.0) continue;
          for (int j = 0; j < n; ++j) gb.at(l, j) += xv * g.at(i, j);
        }
    });
  }

  Var matvec(Var a, Var x) {
    const Tensor& A = value(a);
    const Tensor& v = value(x);
    if (A.ndim() != 2 || v.ndim() != 1 || A.cols() != v.cols()) {
      throw DimensionError("matvec: incompatible shapes " + shape_str(A.shape()) + " vs " +
                           shape_str(v.shape()));
    }
    const int m = A.rows(), n = A.cols();
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* row = A.data() + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) acc += row[j] * v[j];
      out[i] = acc;
    }
    return push(std::move(out), [a, x, m, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& A = t.nodes_[a.id].value;
      const Tensor& v = t.nodes_[x.id].value;
      Tensor& gA = t.nodes_[a.id].grad;
      Tensor& gv = t.nodes_[x.id].grad;
      for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* row = A.data() + static_cast<int64_t>(i) * n;
        double* grow = gA.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          grow[j] += gi * v[j];
          gv[j] += gi * row[j];
        }
      }
    });
  }

  // A^T y for A[m x n], y[m] -> [n].
  Var matvec_t(Var a, Var y) {
    const Tensor& A = value(a);
    const Tensor& v = value(y);
    if (A.ndim() != 2 || v.ndim() != 1 || A.rows() != v.cols()) {
      throw DimensionError("matvec_t: incompatible shapes " + shape_str(A.shape()) + " vs " +
                           shape_str(v.shape()));
    }
    const int m = A.rows(), n = A.cols();
    Tensor out({n});
    for (int i = 0; i < m; ++i) {
      const double vi = v[i];
      if (vi == 0.0) continue;
      const double* row = A.data() + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) out[j] += vi * row[j];
    }
    return push(std::move(out), [a, y, m, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& A = t.nodes_[a.id].value;
      const Tensor& v = t.nodes_[y.id].value;
      Tensor& gA = t.nodes_[a.id].grad;
      Tensor& gv = t.nodes_[y.id].grad;
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* row = A.data() + static_cast<int64_t>(i) * n;
        double* grow = gA.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          grow[j] += v[i] * g[j];
          acc += row[j] * g[j];
        }
        gv[i] += acc;
      }
    });
  }

  // A B^T for A[m x k], B[n x k] -> [m x n].
  Var matmul_nt(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.ndim() != 2 || B.ndim() != 2 || A.cols() != B.cols()) {
      throw DimensionError("matmul_nt: incompatible shapes " + shape_str(A.shape()) + " vs " +
                           shape_str(B.shape()));
    }
    const int m = A.rows(), k = A.cols(), n = B.rows();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < k; ++l) acc += A.at(i, l) * B.at(j, l);
        out.at(i, j) = acc;
      }
    return push(std::move(out), [a, b, m, k, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& A = t.nodes_[a.id].value;
      const Tensor& B = t.nodes_[b.id].value;
      Tensor& gA = t.nodes_[a.id].grad;
      Tensor& gB = t.nodes_[b.id].grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double gij = g.at(i, j);
          if (gij == 0.0) continue;
          for (int l = 0; l < k; ++l) {
            gA.at(i, l) += gij * B.at(j, l);
            gB.at(j, l) += gij * A.at(i, l);
          }
        }
    });
  }

  // Row-wise dot product of two [m x n] matrices -> [m].
  Var rowwise_dot(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    require(x.same_shape(y) && x.ndim() == 2, "rowwise_dot", x, y);
    const int m = x.rows(), n = x.cols();
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += x.at(i, j) * y.at(i, j);
      out[i] = acc;
    }
    return push(std::move(out), [a, b, m, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& x = t.nodes_[a.id].value;
      const Tensor& y = t.nodes_[b.id].value;
      Tensor& ga = t.nodes_[a.id].grad;
      Tensor& gb = t.nodes_[b.id].grad;
      for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        for (int j = 0; j < n; ++j) {
          ga.at(i, j) += gi * y.at(i, j);
          gb.at(i, j) += gi * x.at(i, j);
        }
      }
    });
  }

  Var dot(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    require(x.same_shape(y), "dot", x, y);
    double acc = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return push(Tensor::scalar(acc), [a, b](Tape& t, int self) {
      const double g = t.nodes_[self].grad[0];
      const Tensor& x = t.nodes_[a.id].value;
      const Tensor& y = t.nodes_[b.id].value;
      Tensor& ga = t.nodes_[a.id].grad;
      Tensor& gb = t.nodes_[b.id].grad;
      for (int64_t i = 0; i < x.size(); ++i) {
        ga[i] += g * y[i];
        gb[i] += g * x[i];
      }
    });
  }

  // ---- softmax and normalization ----

  // Softmax over each row (a 1-D input is one row). Max-subtraction keeps
  // large logits from overflowing.
  Var row_softmax(Var a) {
    const Tensor& x = value(a);
    const int m = x.rows(), n = x.cols();
    Tensor out = x;
    for (int r = 0; r < m; ++r) {
      double* row = out.data() + static_cast<int64_t>(r) * n;
      double mx = row[0];
      for (int c = 1; c < n; ++c) mx = std::max(mx, row[c]);
      double sum = 0.0;
      for (int c = 0; c < n; ++c) {
        row[c] = std::exp(row[c] - mx);
        sum += row[c];
      }
      for (int c = 0; c < n; ++c) row[c] /= sum;
    }
    return push(std::move(out), [a, m, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& y = t.nodes_[self].value;
      Tensor& ga = t.nodes_[a.id].grad;
      for (int r = 0; r < m; ++r) {
        const int64_t off = static_cast<int64_t>(r) * n;
        double gy = 0.0;
        for (int c = 0; c < n; ++c) gy += g[off + c] * y[off + c];
        for (int c = 0; c < n; ++c) ga[off + c] += y[off + c] * (g[off + c] - gy);
      }
    });
  }

  // x / sum(x). Numerical safeguard used by the observed distribution;
  // analytically the input already sums to 1.
  Var normalize_sum(Var a) {
    const Tensor& x = value(a);
    const double s = x.sum();
    if (s < 1e-12) {
      throw NumericError("normalize_sum: degenerate input, sum=" + std::to_string(s));
    }
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out[i] /= s;
    return push(std::move(out), [a, s](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& y = t.nodes_[self].value;
      Tensor& ga = t.nodes_[a.id].grad;
      double gy = 0.0;
      for (int64_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += (g[i] - gy) / s;
    });
  }

  // ---- convolution and pooling ----

  // Valid 1-D convolution over an [L x D] input with K filters of width w
  // (filter layout [K x w*D]) and per-filter bias -> [K x (L - w + 1)].
  Var conv1d_valid(Var input, Var filters, Var bias, int window) {
    const Tensor& in = value(input);
    const Tensor& f = value(filters);
    const Tensor& b = value(bias);
    if (in.ndim() != 2 || f.ndim() != 2) {
      throw DimensionError("conv1d: expected 2-D input/filters, got " + shape_str(in.shape()) +
                           " and " + shape_str(f.shape()));
    }
    const int L = in.rows(), D = in.cols(), K = f.rows();
    if (f.cols() != window * D || b.cols() != K) {
      throw DimensionError("conv1d: filters " + shape_str(f.shape()) + " do not match window " +
                           std::to_string(window) + " x input " + shape_str(in.shape()));
    }
    const int Lout = L - window + 1;
    if (Lout < 1) {
      throw DataError("conv1d: input length " + std::to_string(L) + " shorter than window " +
                      std::to_string(window) + "; pad the sentence");
    }
    Tensor out({K, Lout});
    for (int k = 0; k < K; ++k) {
      const double* fk = f.data() + static_cast<int64_t>(k) * window * D;
      for (int t = 0; t < Lout; ++t) {
        double acc = b[k];
        const double* inp = in.data() + static_cast<int64_t>(t) * D;
        for (int u = 0; u < window * D; ++u) acc += fk[u] * inp[u];
        out.at(k, t) = acc;
      }
    }
    return push(std::move(out), [input, filters, bias, window](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& in = t.nodes_[input.id].value;
      const Tensor& f = t.nodes_[filters.id].value;
      Tensor& gin = t.nodes_[input.id].grad;
      Tensor& gf = t.nodes_[filters.id].grad;
      Tensor& gb = t.nodes_[bias.id].grad;
      const int D = in.cols(), K = f.rows(), Lout = g.cols();
      for (int k = 0; k < K; ++k) {
        const double* fk = f.data() + static_cast<int64_t>(k) * window * D;
        double* gfk = gf.data() + static_cast<int64_t>(k) * window * D;
        for (int tt = 0; tt < Lout; ++tt) {
          const double gkt = g.at(k, tt);
          if (gkt == 0.0) continue;
          gb[k] += gkt;
          const double* inp = in.data() + static_cast<int64_t>(tt) * D;
          double* ginp = gin.data() + static_cast<int64_t>(tt) * D;
          for (int u = 0; u < window * D; ++u) {
            gfk[u] += gkt * inp[u];
            ginp[u] += gkt * fk[u];
          }
        }
      }
    });
  }

  // Per-filter max over the three segments [0..b1], [b1+1..b2], [b2+1..L-1].
  // Gradient routes to the first maximizing position of each segment.
  Var segment_max_pool(Var fm, int b1, int b2) {
    const Tensor& x = value(fm);
    if (x.ndim() != 2) {
      throw DimensionError("segment_max_pool: expected 2-D feature map, got " +
                           shape_str(x.shape()));
    }
    const int K = x.rows(), L = x.cols();
    if (!(0 <= b1 && b1 <= b2 && b2 < L)) {
      throw DataError("segment_max_pool: boundaries (" + std::to_string(b1) + "," +
                      std::to_string(b2) + ") invalid for length " + std::to_string(L));
    }
    const int starts[3] = {0, b1 + 1, b2 + 1};
    const int ends[3] = {b1, b2, L - 1};  // inclusive
    for (int s = 0; s < 3; ++s) {
      if (starts[s] > ends[s]) {
        throw DataError("segment_max_pool: segment " + std::to_string(s) +
                        " is empty; pad the sentence so every segment has a token");
      }
    }
    Tensor out({K, 3});
    std::vector<int> argmax(static_cast<size_t>(K) * 3);
    for (int k = 0; k < K; ++k) {
      for (int s = 0; s < 3; ++s) {
        int best = starts[s];
        double bv = x.at(k, best);
        for (int c = starts[s] + 1; c <= ends[s]; ++c) {
          if (x.at(k, c) > bv) {
            bv = x.at(k, c);
            best = c;
          }
        }
        out.at(k, s) = bv;
        argmax[static_cast<size_t>(k) * 3 + s] = best;
      }
    }
    return push(std::move(out), [fm, argmax = std::move(argmax), K](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& gx = t.nodes_[fm.id].grad;
      for (int k = 0; k < K; ++k)
        for (int s = 0; s < 3; ++s)
          gx.at(k, argmax[static_cast<size_t>(k) * 3 + s]) += g.at(k, s);
    });
  }

  // ---- structure ----

  Var reshape(Var a, Shape shape) {
    const Tensor& x = value(a);
    if (shape_size(shape) != x.size()) {
      throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                           shape_str(shape));
    }
    Tensor out(std::move(shape), x.values());
    return push(std::move(out), [a](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& ga = t.nodes_[a.id].grad;
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  Var flatten(Var a) { return reshape(a, {static_cast<int>(value(a).size())}); }

  Var concat(const std::vector<Var>& vs) {
    if (vs.empty()) throw UsageError("concat: empty operand list");
    std::vector<double> vals;
    std::vector<int> ids;
    ids.reserve(vs.size());
    for (Var v : vs) {
      const Tensor& x = value(v);
      vals.insert(vals.end(), x.values().begin(), x.values().end());
      ids.push_back(v.id);
    }
    const int total = static_cast<int>(vals.size());
    Tensor out({total}, std::move(vals));
    return push(std::move(out), [ids = std::move(ids)](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      int64_t off = 0;
      for (int id : ids) {
        Tensor& gi = t.nodes_[id].grad;
        for (int64_t i = 0; i < gi.size(); ++i) gi[i] += g[off + i];
        off += gi.size();
      }
    });
  }

  Var pick(Var a, int64_t index) {
    const Tensor& x = value(a);
    if (index < 0 || index >= x.size()) {
      throw DimensionError("pick: index " + std::to_string(index) + " out of range for " +
                           shape_str(x.shape()));
    }
    return push(Tensor::scalar(x[index]), [a, index](Tape& t, int self) {
      t.nodes_[a.id].grad[index] += t.nodes_[self].grad[0];
    });
  }

  Var trace(Var a) {
    const Tensor& x = value(a);
    if (x.ndim() != 2 || x.rows() != x.cols()) {
      throw DimensionError("trace: expected square matrix, got " + shape_str(x.shape()));
    }
    const int n = x.rows();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += x.at(i, i);
    return push(Tensor::scalar(acc), [a, n](Tape& t, int self) {
      const double g = t.nodes_[self].grad[0];
      Tensor& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < n; ++i) ga.at(i, i) += g;
    });
  }

  Var mean_rows(Var a) {
    const Tensor& x = value(a);
    if (x.ndim() != 2) {
      throw DimensionError("mean_rows: expected 2-D, got " + shape_str(x.shape()));
    }
    const int m = x.rows(), n = x.cols();
    Tensor out({n});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out[j] += x.at(i, j);
    for (int j = 0; j < n; ++j) out[j] /= m;
    return push(std::move(out), [a, m, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) ga.at(i, j) += g[j] / m;
    });
  }

  Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw UsageError("stack_rows: empty operand list");
    const int n = value(rows[0]).cols();
    std::vector<double> vals;
    std::vector<int> ids;
    ids.reserve(rows.size());
    for (Var r : rows) {
      const Tensor& x = value(r);
      if (x.ndim() != 1 || x.cols() != n) {
        throw DimensionError("stack_rows: row shape " + shape_str(x.shape()) +
                             " does not match width " + std::to_string(n));
      }
      vals.insert(vals.end(), x.values().begin(), x.values().end());
      ids.push_back(r.id);
    }
    Tensor out({static_cast<int>(rows.size()), n}, std::move(vals));
    return push(std::move(out), [ids = std::move(ids), n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      for (size_t r = 0; r < ids.size(); ++r) {
        Tensor& gr = t.nodes_[ids[r]].grad;
        for (int j = 0; j < n; ++j) gr[j] += g[static_cast<int64_t>(r) * n + j];
      }
    });
  }

  Var add_scalar_broadcast(Var a, Var s) {
    const Tensor& x = value(a);
    const Tensor& sv = value(s);
    if (sv.size() != 1) {
      throw DimensionError("add_scalar_broadcast: bias must be scalar, got " +
                           shape_str(sv.shape()));
    }
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += sv[0];
    return push(std::move(out), [a, s](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& ga = t.nodes_[a.id].grad;
      Tensor& gs = t.nodes_[s.id].grad;
      double acc = 0.0;
      for (int64_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        acc += g[i];
      }
      gs[0] += acc;
    });
  }

  // M[i][j] + v[i] for M[m x n], v[m].
  Var add_col_broadcast(Var a, Var v) {
    const Tensor& x = value(a);
    const Tensor& b = value(v);
    if (x.ndim() != 2 || b.ndim() != 1 || b.cols() != x.rows()) {
      throw DimensionError("add_col_broadcast: incompatible shapes " + shape_str(x.shape()) +
                           " vs " + shape_str(b.shape()));
    }
    const int m = x.rows(), n = x.cols();
    Tensor out = x;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.at(i, j) += b[i];
    return push(std::move(out), [a, v, m, n](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& ga = t.nodes_[a.id].grad;
      Tensor& gv = t.nodes_[v.id].grad;
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
          ga.at(i, j) += g.at(i, j);
          acc += g.at(i, j);
        }
        gv[i] += acc;
      }
    });
  }

  // Row t of the output concatenates word_table[word_ids[t]],
  // pos1_table[d1_ids[t]], pos2_table[d2_ids[t]]. Gradients scatter back
  // into the tables.
  Var embed_concat(Var word_table, Var pos1_table, Var pos2_table, std::vector<int> word_ids,
                   std::vector<int> d1_ids, std::vector<int> d2_ids) {
    const Tensor& wt = value(word_table);
    const Tensor& p1 = value(pos1_table);
    const Tensor& p2 = value(pos2_table);
    const int L = static_cast<int>(word_ids.size());
    if (d1_ids.size() != word_ids.size() || d2_ids.size() != word_ids.size()) {
      throw DimensionError("embed_concat: id list lengths disagree");
    }
    const int dw = wt.cols(), dp1 = p1.cols(), dp2 = p2.cols();
    Tensor out({L, dw + dp1 + dp2});
    for (int t = 0; t < L; ++t) {
      double* row = out.data() + static_cast<int64_t>(t) * (dw + dp1 + dp2);
      const double* w = wt.data() + static_cast<int64_t>(word_ids[t]) * dw;
      const double* a = p1.data() + static_cast<int64_t>(d1_ids[t]) * dp1;
      const double* b = p2.data() + static_cast<int64_t>(d2_ids[t]) * dp2;
      std::copy(w, w + dw, row);
      std::copy(a, a + dp1, row + dw);
      std::copy(b, b + dp2, row + dw + dp1);
    }
    return push(std::move(out),
                [word_table, pos1_table, pos2_table, word_ids = std::move(word_ids),
                 d1_ids = std::move(d1_ids), d2_ids = std::move(d2_ids)](Tape& t, int self) {
                  const Tensor& g = t.nodes_[self].grad;
                  Tensor& gw = t.nodes_[word_table.id].grad;
                  Tensor& g1 = t.nodes_[pos1_table.id].grad;
                  Tensor& g2 = t.nodes_[pos2_table.id].grad;
                  const int dw = gw.cols(), dp1 = g1.cols(), dp2 = g2.cols();
                  const int L = static_cast<int>(word_ids.size());
                  for (int r = 0; r < L; ++r) {
                    const double* grow = g.data() + static_cast<int64_t>(r) * (dw + dp1 + dp2);
                    double* w = gw.data() + static_cast<int64_t>(word_ids[r]) * dw;
                    double* a = g1.data() + static_cast<int64_t>(d1_ids[r]) * dp1;
                    double* b = g2.data() + static_cast<int64_t>(d2_ids[r]) * dp2;
                    for (int i = 0; i < dw; ++i) w[i] += grow[i];
                    for (int i = 0; i < dp1; ++i) a[i] += grow[dw + i];
                    for (int i = 0; i < dp2; ++i) b[i] += grow[dw + dp1 + i];
                  }
                });
  }

  // ---- backward ----

  // Reverse accumulation from a scalar loss. Visits each node exactly once
  // in reverse creation order (creation order is topological), then adds
  // leaf gradients into the bound Parameters. Deterministic: repeated calls
  // on the same values produce bit-identical gradients.
  void backward(Var loss);  // defined in params.hpp

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, int)> back;
  };

  Var push(Tensor value, std::function<void(Tape&, int)> back = nullptr) {
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(int id, const Tensor& g) {
    Tensor& dst = nodes_[static_cast<size_t>(id)].grad;
    for (int64_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }

  static void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
    if (!ok) {
      throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                           " vs " + shape_str(b.shape()));
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Parameter*>> bindings_;
  long clamp_hits_ = 0;
};

using Var = Tape::Var;

}  // namespace noisere
