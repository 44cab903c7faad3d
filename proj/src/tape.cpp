#include "gae/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "gae/params.hpp"

namespace gae {

namespace {

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Tape& tape_of(Tensor t, const char* op) {
  if (!t.defined()) throw Error(std::string(op) + ": undefined tensor");
  return *t.tape;
}

Tape& same_tape(Tensor a, Tensor b, const char* op) {
  Tape& t = tape_of(a, op);
  if (b.tape != &t) throw Error(std::string(op) + ": tensors on different tapes");
  return t;
}

}  // namespace

const Mat& Tensor::val() const { return tape->value(id); }

double Tensor::scalar() const {
  const Mat& v = val();
  if (v.rows != 1 || v.cols != 1)
    throw Error("scalar(): tensor is " + shape_str(v) + ", expected 1x1");
  return v(0, 0);
}

int Tensor::rows() const { return val().rows; }
int Tensor::cols() const { return val().cols; }

int Tape::emplace(const char* op, Mat val, bool requires_grad,
                  std::function<void(Tape&)> back) {
  if (!all_finite(val))
    throw FiniteCheckError(std::string(op) + " produced a non-finite value");
  Node n;
  n.val = std::move(val);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::ensure_grad(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty()) n.grad = Mat(n.val.rows, n.val.cols);
  return n.grad;
}

Tensor Tape::input(Mat v) {
  return {this, emplace("input", std::move(v), false)};
}

Tensor Tape::param(const std::string& name, Mat v) {
  for (const auto& [existing, _] : params_)
    if (existing == name) throw Error("param '" + name + "' leased twice");
  int id = emplace("param", std::move(v), true);
  params_.emplace_back(name, id);
  return {this, id};
}

GradMap Tape::backward(Tensor scalar) {
  if (scalar.tape != this) throw Error("backward: tensor from another tape");
  const Mat& v = value(scalar.id);
  if (v.rows != 1 || v.cols != 1)
    throw Error("backward: root is " + shape_str(v) + ", expected 1x1");
  ensure_grad(scalar.id)(0, 0) = 1.0;
  for (int id = scalar.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    // Nodes with no accumulated gradient contributed nothing to the root.
    if (n.back && n.requires_grad && !n.grad.empty()) n.back(*this);
  }
  GradMap out;
  for (const auto& [name, id] : params_) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    out[name] = n.grad.empty() ? Mat(n.val.rows, n.val.cols) : n.grad;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b, "matmul");
  const Mat& av = a.val();
  const Mat& bv = b.val();
  if (av.cols != bv.rows)
    throw Error("matmul: " + shape_str(av) + " * " + shape_str(bv));
  Mat out;
  kern::gemm_nn(av, bv, out);
  bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  int id = t.emplace("matmul", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, idb = b.id, id](Tape& tp) {
      const Mat& g = tp.grad(id);
      if (tp.requires_grad(ida))
        kern::gemm_nt(g, tp.value(idb), tp.ensure_grad(ida), true);
      if (tp.requires_grad(idb))
        kern::gemm_tn(tp.value(ida), g, tp.ensure_grad(idb), true);
    });
  }
  return {&t, id};
}

namespace {

enum class Bcast { kElem, kRow, kCol };

Bcast bcast_mode(const Mat& a, const Mat& b, const char* op, bool allow_col) {
  if (a.same_shape(b)) return Bcast::kElem;
  if (b.rows == 1 && b.cols == a.cols) return Bcast::kRow;
  if (allow_col && b.cols == 1 && b.rows == a.rows) return Bcast::kCol;
  throw Error(std::string(op) + ": incompatible shapes " + shape_str(a) +
              " vs " + shape_str(b));
}

// Shared forward/backward for add and sub (sign = -1 for sub's b side).
Tensor add_like(Tensor a, Tensor b, double sign, const char* op) {
  Tape& t = same_tape(a, b, op);
  const Mat& av = a.val();
  const Mat& bv = b.val();
  Bcast mode = bcast_mode(av, bv, op, /*allow_col=*/false);
  Mat out(av.rows, av.cols);
  if (mode == Bcast::kElem) {
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] = av.a[i] + sign * bv.a[i];
  } else {
    for (int r = 0; r < av.rows; ++r)
      for (int c = 0; c < av.cols; ++c)
        out(r, c) = av(r, c) + sign * bv(0, c);
  }
  bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  int id = t.emplace(op, std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, idb = b.id, id, sign, mode](Tape& tp) {
      const Mat& g = tp.grad(id);
      if (tp.requires_grad(ida)) {
        Mat& ga = tp.ensure_grad(ida);
        for (size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i];
      }
      if (tp.requires_grad(idb)) {
        Mat& gb = tp.ensure_grad(idb);
        if (mode == Bcast::kElem) {
          for (size_t i = 0; i < g.a.size(); ++i) gb.a[i] += sign * g.a[i];
        } else {
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gb(0, c) += sign * g(r, c);
        }
      }
    });
  }
  return {&t, id};
}

}  // namespace

Tensor add(Tensor a, Tensor b) { return add_like(a, b, 1.0, "add"); }
Tensor sub(Tensor a, Tensor b) { return add_like(a, b, -1.0, "sub"); }

Tensor mul(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b, "mul");
  const Mat& av = a.val();
  const Mat& bv = b.val();
  Bcast mode = bcast_mode(av, bv, "mul", /*allow_col=*/true);
  Mat out(av.rows, av.cols);
  switch (mode) {
    case Bcast::kElem:
      for (size_t i = 0; i < out.a.size(); ++i) out.a[i] = av.a[i] * bv.a[i];
      break;
    case Bcast::kRow:
      for (int r = 0; r < av.rows; ++r)
        for (int c = 0; c < av.cols; ++c) out(r, c) = av(r, c) * bv(0, c);
      break;
    case Bcast::kCol:
      for (int r = 0; r < av.rows; ++r)
        for (int c = 0; c < av.cols; ++c) out(r, c) = av(r, c) * bv(r, 0);
      break;
  }
  bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  int id = t.emplace("mul", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, idb = b.id, id, mode](Tape& tp) {
      const Mat& g = tp.grad(id);
      const Mat& av2 = tp.value(ida);
      const Mat& bv2 = tp.value(idb);
      if (tp.requires_grad(ida)) {
        Mat& ga = tp.ensure_grad(ida);
        switch (mode) {
          case Bcast::kElem:
            for (size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i] * bv2.a[i];
            break;
          case Bcast::kRow:
            for (int r = 0; r < g.rows; ++r)
              for (int c = 0; c < g.cols; ++c) ga(r, c) += g(r, c) * bv2(0, c);
            break;
          case Bcast::kCol:
            for (int r = 0; r < g.rows; ++r)
              for (int c = 0; c < g.cols; ++c) ga(r, c) += g(r, c) * bv2(r, 0);
            break;
        }
      }
      if (tp.requires_grad(idb)) {
        Mat& gb = tp.ensure_grad(idb);
        switch (mode) {
          case Bcast::kElem:
            for (size_t i = 0; i < g.a.size(); ++i) gb.a[i] += g.a[i] * av2.a[i];
            break;
          case Bcast::kRow:
            for (int r = 0; r < g.rows; ++r)
              for (int c = 0; c < g.cols; ++c) gb(0, c) += g(r, c) * av2(r, c);
            break;
          case Bcast::kCol:
            for (int r = 0; r < g.rows; ++r) {
              double s = 0.0;
              for (int c = 0; c < g.cols; ++c) s += g(r, c) * av2(r, c);
              gb(r, 0) += s;
            }
            break;
        }
      }
    });
  }
  return {&t, id};
}

Tensor scale(Tensor a, double c) {
  Tape& t = tape_of(a, "scale");
  Mat out = a.val();
  for (double& x : out.a) x *= c;
  bool rg = t.requires_grad(a.id);
  int id = t.emplace("scale", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, id, c](Tape& tp) {
      const Mat& g = tp.grad(id);
      Mat& ga = tp.ensure_grad(ida);
      for (size_t i = 0; i < g.a.size(); ++i) ga.a[i] += c * g.a[i];
    });
  }
  return {&t, id};
}

Tensor square(Tensor a) {
  Tape& t = tape_of(a, "square");
  Mat out = a.val();
  for (double& x : out.a) x *= x;
  bool rg = t.requires_grad(a.id);
  int id = t.emplace("square", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, id](Tape& tp) {
      const Mat& g = tp.grad(id);
      const Mat& av = tp.value(ida);
      Mat& ga = tp.ensure_grad(ida);
      for (size_t i = 0; i < g.a.size(); ++i) ga.a[i] += 2.0 * av.a[i] * g.a[i];
    });
  }
  return {&t, id};
}

Tensor sum(Tensor a) {
  Tape& t = tape_of(a, "sum");
  Mat out(1, 1);
  out(0, 0) = kern::reduce_sum(a.val().a);
  bool rg = t.requires_grad(a.id);
  int id = t.emplace("sum", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, id](Tape& tp) {
      double g = tp.grad(id)(0, 0);
      Mat& ga = tp.ensure_grad(ida);
      for (double& x : ga.a) x += g;
    });
  }
  return {&t, id};
}

Tensor mean_over(Tensor a, std::vector<int> row_ids) {
  Tape& t = tape_of(a, "mean_over");
  const Mat& av = a.val();
  if (av.cols != 1)
    throw Error("mean_over: expected Nx1 input, got " + shape_str(av));
  if (row_ids.empty()) throw Error("mean_over: empty row set");
  for (int r : row_ids)
    if (r < 0 || r >= av.rows) throw Error("mean_over: row index out of range");
  Mat out(1, 1);
  double s = 0.0;
  for (int r : row_ids) s += av(r, 0);
  out(0, 0) = s / static_cast<double>(row_ids.size());
  bool rg = t.requires_grad(a.id);
  int id = t.emplace("mean_over", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, id, rows = std::move(row_ids)](Tape& tp) {
      double g = tp.grad(id)(0, 0) / static_cast<double>(rows.size());
      Mat& ga = tp.ensure_grad(ida);
      for (int r : rows) ga(r, 0) += g;
    });
  }
  return {&t, id};
}

Tensor leaky_relu(Tensor a, double negative_slope) {
  Tape& t = tape_of(a, "leaky_relu");
  const Mat& av = a.val();
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < out.a.size(); ++i)
    out.a[i] = av.a[i] >= 0.0 ? av.a[i] : negative_slope * av.a[i];
  bool rg = t.requires_grad(a.id);
  int id = t.emplace("leaky_relu", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, id, negative_slope](Tape& tp) {
      const Mat& g = tp.grad(id);
      const Mat& av2 = tp.value(ida);
      Mat& ga = tp.ensure_grad(ida);
      for (size_t i = 0; i < g.a.size(); ++i)
        ga.a[i] += g.a[i] * (av2.a[i] >= 0.0 ? 1.0 : negative_slope);
    });
  }
  return {&t, id};
}

Tensor prelu(Tensor a, Tensor slope) {
  Tape& t = same_tape(a, slope, "prelu");
  const Mat& av = a.val();
  const Mat& sv = slope.val();
  if (sv.rows != 1 || sv.cols != 1)
    throw Error("prelu: slope is " + shape_str(sv) + ", expected 1x1");
  double s = sv(0, 0);
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < out.a.size(); ++i)
    out.a[i] = av.a[i] >= 0.0 ? av.a[i] : s * av.a[i];
  bool rg = t.requires_grad(a.id) || t.requires_grad(slope.id);
  int id = t.emplace("prelu", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, ids = slope.id, id](Tape& tp) {
      const Mat& g = tp.grad(id);
      const Mat& av2 = tp.value(ida);
      double s2 = tp.value(ids)(0, 0);
      if (tp.requires_grad(ida)) {
        Mat& ga = tp.ensure_grad(ida);
        for (size_t i = 0; i < g.a.size(); ++i)
          ga.a[i] += g.a[i] * (av2.a[i] >= 0.0 ? 1.0 : s2);
      }
      if (tp.requires_grad(ids)) {
        double acc = 0.0;
        for (size_t i = 0; i < g.a.size(); ++i)
          if (av2.a[i] < 0.0) acc += g.a[i] * av2.a[i];
        tp.ensure_grad(ids)(0, 0) += acc;
      }
    });
  }
  return {&t, id};
}

Tensor segment_softmax(Tensor logits, std::vector<int> offsets) {
  Tape& t = tape_of(logits, "segment_softmax");
  const Mat& lv = logits.val();
  if (lv.cols != 1)
    throw Error("segment_softmax: expected Ex1 logits, got " + shape_str(lv));
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != lv.rows)
    throw Error("segment_softmax: offsets must span [0, rows]");
  Mat out(lv.rows, 1);
  kern::segment_softmax(lv.a, offsets, out.a);
  bool rg = t.requires_grad(logits.id);
  int id = t.emplace("segment_softmax", std::move(out), rg);
  if (rg) {
    t.set_back(id, [idl = logits.id, id, offs = std::move(offsets)](Tape& tp) {
      const Mat& g = tp.grad(id);
      const Mat& p = tp.value(id);
      Mat& gl = tp.ensure_grad(idl);
      Mat dl(g.rows, 1);
      kern::segment_softmax_backward(p.a, g.a, offs, dl.a);
      for (size_t i = 0; i < dl.a.size(); ++i) gl.a[i] += dl.a[i];
    });
  }
  return {&t, id};
}

Tensor gather_rows(Tensor x, const kern::GatherPlan& plan) {
  Tape& t = tape_of(x, "gather_rows");
  const Mat& xv = x.val();
  if (plan.n_src != xv.rows)
    throw Error("gather_rows: plan built for " + std::to_string(plan.n_src) +
                " rows, input has " + std::to_string(xv.rows));
  Mat out;
  kern::gather_rows(xv, plan.idx, out);
  bool rg = t.requires_grad(x.id);
  int id = t.emplace("gather_rows", std::move(out), rg);
  if (rg) {
    t.set_back(id, [idx = x.id, id, pl = &plan](Tape& tp) {
      // d x.row(i) accumulates the output gradients of every e with idx[e]==i,
      // which is exactly a scatter-add through the same plan.
      kern::scatter_add_rows(tp.grad(id), *pl, tp.ensure_grad(idx), true);
    });
  }
  return {&t, id};
}

Tensor scatter_add_rows(Tensor x, const kern::GatherPlan& plan) {
  Tape& t = tape_of(x, "scatter_add_rows");
  const Mat& xv = x.val();
  if (static_cast<int>(plan.idx.size()) != xv.rows)
    throw Error("scatter_add_rows: plan has " + std::to_string(plan.idx.size()) +
                " entries, input has " + std::to_string(xv.rows) + " rows");
  Mat out;
  kern::scatter_add_rows(xv, plan, out, false);
  bool rg = t.requires_grad(x.id);
  int id = t.emplace("scatter_add_rows", std::move(out), rg);
  if (rg) {
    t.set_back(id, [idx = x.id, id, pl = &plan](Tape& tp) {
      // Each input row e contributed once to output row idx[e]; its gradient
      // is the gather of the output gradient.
      Mat gin;
      kern::gather_rows(tp.grad(id), pl->idx, gin);
      Mat& gx = tp.ensure_grad(idx);
      for (size_t i = 0; i < gin.a.size(); ++i) gx.a[i] += gin.a[i];
    });
  }
  return {&t, id};
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  Tape& t = tape_of(parts[0], "concat_cols");
  int rows = parts[0].rows();
  int total_cols = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.tape != &t) throw Error("concat_cols: tensors on different tapes");
    if (p.rows() != rows) throw Error("concat_cols: row count mismatch");
    total_cols += p.cols();
    rg = rg || t.requires_grad(p.id);
  }
  Mat out(rows, total_cols);
  int col0 = 0;
  std::vector<int> ids;
  std::vector<int> col_starts;
  ids.reserve(parts.size());
  col_starts.reserve(parts.size());
  for (const Tensor& p : parts) {
    const Mat& pv = p.val();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < pv.cols; ++c) out(r, col0 + c) = pv(r, c);
    ids.push_back(p.id);
    col_starts.push_back(col0);
    col0 += pv.cols;
  }
  int id = t.emplace("concat_cols", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ids = std::move(ids), col_starts = std::move(col_starts),
                    id](Tape& tp) {
      const Mat& g = tp.grad(id);
      for (size_t k = 0; k < ids.size(); ++k) {
        if (!tp.requires_grad(ids[k])) continue;
        Mat& gp = tp.ensure_grad(ids[k]);
        int c0 = col_starts[k];
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < gp.cols; ++c) gp(r, c) += g(r, c0 + c);
      }
    });
  }
  return {&t, id};
}

Tensor slice_rows(Tensor x, int row_begin, int row_end) {
  Tape& t = tape_of(x, "slice_rows");
  const Mat& xv = x.val();
  if (row_begin < 0 || row_end > xv.rows || row_begin >= row_end)
    throw Error("slice_rows: bad range [" + std::to_string(row_begin) + ", " +
                std::to_string(row_end) + ") for " + shape_str(xv));
  Mat out(row_end - row_begin, xv.cols);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) = xv(row_begin + r, c);
  bool rg = t.requires_grad(x.id);
  int id = t.emplace("slice_rows", std::move(out), rg);
  if (rg) {
    t.set_back(id, [idx = x.id, id, row_begin](Tape& tp) {
      const Mat& g = tp.grad(id);
      Mat& gx = tp.ensure_grad(idx);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) gx(row_begin + r, c) += g(r, c);
    });
  }
  return {&t, id};
}

Tensor row_cosine(Tensor a, Tensor b) {
  constexpr double kNormFloor = 1e-12;
  Tape& t = same_tape(a, b, "row_cosine");
  const Mat& av = a.val();
  const Mat& bv = b.val();
  if (!av.same_shape(bv))
    throw Error("row_cosine: shapes " + shape_str(av) + " vs " + shape_str(bv));
  Mat out(av.rows, 1);
  for (int r = 0; r < av.rows; ++r) {
    double na = 0.0, nb = 0.0, dot = 0.0;
    for (int c = 0; c < av.cols; ++c) {
      na += av(r, c) * av(r, c);
      nb += bv(r, c) * bv(r, c);
      dot += av(r, c) * bv(r, c);
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    // Degenerate rows are defined to have cosine 0 and carry no gradient.
    out(r, 0) = (na < kNormFloor || nb < kNormFloor) ? 0.0 : dot / (na * nb);
  }
  bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  int id = t.emplace("row_cosine", std::move(out), rg);
  if (rg) {
    t.set_back(id, [ida = a.id, idb = b.id, id](Tape& tp) {
      const Mat& g = tp.grad(id);
      const Mat& av2 = tp.value(ida);
      const Mat& bv2 = tp.value(idb);
      const Mat& cosv = tp.value(id);
      bool wa = tp.requires_grad(ida);
      bool wb = tp.requires_grad(idb);
      Mat* ga = wa ? &tp.ensure_grad(ida) : nullptr;
      Mat* gb = wb ? &tp.ensure_grad(idb) : nullptr;
      for (int r = 0; r < av2.rows; ++r) {
        double na = 0.0, nb = 0.0;
        for (int c = 0; c < av2.cols; ++c) {
          na += av2(r, c) * av2(r, c);
          nb += bv2(r, c) * bv2(r, c);
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        if (na < kNormFloor || nb < kNormFloor) continue;
        double gr = g(r, 0);
        if (gr == 0.0) continue;
        double cr = cosv(r, 0);
        double inv = 1.0 / (na * nb);
        // d cos / d a = b/(|a||b|) - cos * a/|a|^2, and symmetrically for b.
        if (wa)
          for (int c = 0; c < av2.cols; ++c)
            (*ga)(r, c) += gr * (bv2(r, c) * inv - cr * av2(r, c) / (na * na));
        if (wb)
          for (int c = 0; c < av2.cols; ++c)
            (*gb)(r, c) += gr * (av2(r, c) * inv - cr * bv2(r, c) / (nb * nb));
      }
    });
  }
  return {&t, id};
}

Tensor zero_rows(Tensor x, std::vector<std::uint8_t> flags) {
  Tape& t = tape_of(x, "zero_rows");
  const Mat& xv = x.val();
  if (static_cast<int>(flags.size()) != xv.rows)
    throw Error("zero_rows: flag count " + std::to_string(flags.size()) +
                " != rows " + std::to_string(xv.rows));
  Mat out = xv;
  for (int r = 0; r < out.rows; ++r)
    if (flags[static_cast<size_t>(r)])
      for (int c = 0; c < out.cols; ++c) out(r, c) = 0.0;
  bool rg = t.requires_grad(x.id);
  int id = t.emplace("zero_rows", std::move(out), rg);
  if (rg) {
    t.set_back(id, [idx = x.id, id, fl = std::move(flags)](Tape& tp) {
      const Mat& g = tp.grad(id);
      Mat& gx = tp.ensure_grad(idx);
      for (int r = 0; r < g.rows; ++r) {
        if (fl[static_cast<size_t>(r)]) continue;
        for (int c = 0; c < g.cols; ++c) gx(r, c) += g(r, c);
      }
    });
  }
  return {&t, id};
}

Tensor add_rows_where(Tensor x, Tensor w, std::vector<std::uint8_t> flags) {
  Tape& t = same_tape(x, w, "add_rows_where");
  const Mat& xv = x.val();
  const Mat& wv = w.val();
  if (wv.rows != 1 || wv.cols != xv.cols)
    throw Error("add_rows_where: w is " + shape_str(wv) + ", expected 1x" +
                std::to_string(xv.cols));
  if (static_cast<int>(flags.size()) != xv.rows)
    throw Error("add_rows_where: flag count mismatch");
  Mat out = xv;
  for (int r = 0; r < out.rows; ++r)
    if (flags[static_cast<size_t>(r)])
      for (int c = 0; c < out.cols; ++c) out(r, c) += wv(0, c);
  bool rg = t.requires_grad(x.id) || t.requires_grad(w.id);
  int id = t.emplace("add_rows_where", std::move(out), rg);
  if (rg) {
    t.set_back(id, [idx = x.id, idw = w.id, id, fl = std::move(flags)](Tape& tp) {
      const Mat& g = tp.grad(id);
      if (tp.requires_grad(idx)) {
        Mat& gx = tp.ensure_grad(idx);
        for (size_t i = 0; i < g.a.size(); ++i) gx.a[i] += g.a[i];
      }
      if (tp.requires_grad(idw)) {
        Mat& gw = tp.ensure_grad(idw);
        for (int r = 0; r < g.rows; ++r) {
          if (!fl[static_cast<size_t>(r)]) continue;
          for (int c = 0; c < g.cols; ++c) gw(0, c) += g(r, c);
        }
      }
    });
  }
  return {&t, id};
}

Tensor detach(Tensor x) {
  Tape& t = tape_of(x, "detach");
  return {&t, t.emplace("detach", x.val(), false)};
}

// ---------------------------------------------------------------------------
// Gradient checker
// ---------------------------------------------------------------------------

double grad_check(ParamStore& params, const BuildFn& build_fn, double eps) {
  auto eval = [&]() {
    Tape t;
    Tensor s = build_fn(t, params);
    return s.scalar();
  };
  // The checker's algebra assumes the objective is a pure function of the
  // parameters; re-evaluating must reproduce the value bitwise.
  double base0 = eval();
  double base1 = eval();
  if (!(base0 == base1))
    throw Error("grad_check: build_fn is not deterministic (" +
                std::to_string(base0) + " vs " + std::to_string(base1) + ")");

  Tape t;
  Tensor loss = build_fn(t, params);
  GradMap grads = t.backward(loss);

  double max_rel = 0.0;
  for (const std::string& name : params.names()) {
    Mat& p = params.get(name);
    auto it = grads.find(name);
    for (size_t i = 0; i < p.a.size(); ++i) {
      double keep = p.a[i];
      p.a[i] = keep + eps;
      double fp = eval();
      p.a[i] = keep - eps;
      double fm = eval();
      p.a[i] = keep;
      double fd = (fp - fm) / (2.0 * eps);
      double an = it == grads.end() ? 0.0 : it->second.a[i];
      double rel = std::abs(an - fd) /
                   std::max({1.0, std::abs(an), std::abs(fd)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace gae
