#include "aglv/autodiff.hpp"

#include <cmath>
#include <cstring>

namespace aglv {

const DenseMatrix& Var::value() const { return tape->value(*this); }

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  backward_done_ = false;
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw Error("tape: foreign or stale variable handle");
}

Var Tape::input(const std::string& name, DenseMatrix value, bool requires_grad) {
  if (inputs_.count(name)) throw Error("tape: duplicate input name " + name);
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  const int id = push(std::move(n));
  inputs_[name] = id;
  return wrap(id);
}

Var Tape::constant(DenseMatrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return wrap(push(std::move(n)));
}

#define AGLV_BINARY(fname, opname, forward_expr)                           \
  Var Tape::fname(Var a, Var b) {                                          \
    check_owned(a);                                                        \
    check_owned(b);                                                        \
    Node n;                                                                \
    n.op = Op::opname;                                                     \
    n.a = a.id;                                                            \
    n.b = b.id;                                                            \
    n.value = forward_expr(nodes_[a.id].value, nodes_[b.id].value);        \
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;     \
    return wrap(push(std::move(n)));                                       \
  }

AGLV_BINARY(add, Add, aglv::add)
AGLV_BINARY(sub, Sub, aglv::sub)
AGLV_BINARY(cwise_mul, CwiseMul, aglv::cwise_mul)
AGLV_BINARY(cwise_div, CwiseDiv, aglv::cwise_div)
AGLV_BINARY(matmul, MatMul, aglv::matmul)
#undef AGLV_BINARY

#define AGLV_UNARY(fname, opname, forward_expr)         \
  Var Tape::fname(Var a) {                              \
    check_owned(a);                                     \
    Node n;                                             \
    n.op = Op::opname;                                  \
    n.a = a.id;                                         \
    n.value = forward_expr(nodes_[a.id].value);         \
    n.needs_grad = nodes_[a.id].needs_grad;             \
    return wrap(push(std::move(n)));                    \
  }

AGLV_UNARY(neg, Neg, aglv::neg)
AGLV_UNARY(cwise_exp, Exp, aglv::cwise_exp)
AGLV_UNARY(cwise_log, Log, aglv::cwise_log)
AGLV_UNARY(cwise_sqrt, Sqrt, aglv::cwise_sqrt)
AGLV_UNARY(cwise_sin, Sin, aglv::cwise_sin)
AGLV_UNARY(cwise_cos, Cos, aglv::cwise_cos)
AGLV_UNARY(cwise_square, Square, aglv::cwise_square)
AGLV_UNARY(transpose, Transpose, aglv::transpose)
#undef AGLV_UNARY

Var Tape::scale(Var a, double c) {
  check_owned(a);
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.aux = c;
  n.value = aglv::scale(nodes_[a.id].value, c);
  n.needs_grad = nodes_[a.id].needs_grad;
  return wrap(push(std::move(n)));
}

Var Tape::add_constant(Var a, double c) {
  check_owned(a);
  Node n;
  n.op = Op::AddConstant;
  n.a = a.id;
  n.aux = c;
  n.value = aglv::add_constant(nodes_[a.id].value, c);
  n.needs_grad = nodes_[a.id].needs_grad;
  return wrap(push(std::move(n)));
}

Var Tape::mul_scalar(Var a, Var s) {
  check_owned(a);
  check_owned(s);
  if (!nodes_[s.id].value.is_scalar())
    throw ShapeMismatch("mul_scalar: second operand must be 1x1");
  Node n;
  n.op = Op::MulScalar;
  n.a = a.id;
  n.b = s.id;
  n.value = aglv::scale(nodes_[a.id].value, nodes_[s.id].value.scalar_value());
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[s.id].needs_grad;
  return wrap(push(std::move(n)));
}

Var Tape::sum(Var a) {
  check_owned(a);
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  n.value = DenseMatrix::scalar(aglv::sum(nodes_[a.id].value));
  n.needs_grad = nodes_[a.id].needs_grad;
  return wrap(push(std::move(n)));
}

Var Tape::trace(Var a) {
  check_owned(a);
  Node n;
  n.op = Op::Trace;
  n.a = a.id;
  n.value = DenseMatrix::scalar(aglv::trace(nodes_[a.id].value));
  n.needs_grad = nodes_[a.id].needs_grad;
  return wrap(push(std::move(n)));
}

Var Tape::slice_rows(Var a, std::size_t row0, std::size_t count) {
  check_owned(a);
  Node n;
  n.op = Op::SliceRows;
  n.a = a.id;
  n.row0 = row0;
  n.nrows = count;
  n.value = slice_rows_copy(nodes_[a.id].value, row0, count);
  n.needs_grad = nodes_[a.id].needs_grad;
  return wrap(push(std::move(n)));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no operands");
  Node n;
  n.op = Op::ConcatCols;
  std::vector<const DenseMatrix*> blocks;
  bool needs = false;
  for (Var p : parts) {
    check_owned(p);
    n.operands.push_back(p.id);
    blocks.push_back(&nodes_[p.id].value);
    needs = needs || nodes_[p.id].needs_grad;
  }
  n.value = hcat(blocks);
  n.needs_grad = needs;
  return wrap(push(std::move(n)));
}

Var Tape::lowrank_loglik(Var phi, Var sigma2, std::shared_ptr<const LoglikBatch> batch) {
  check_owned(phi);
  check_owned(sigma2);
  if (!nodes_[sigma2.id].value.is_scalar())
    throw ShapeMismatch("lowrank_loglik: sigma2 must be 1x1");
  Node n;
  n.op = Op::LowrankLoglik;
  n.a = phi.id;
  n.b = sigma2.id;
  n.batch = std::move(batch);
  const bool needs = nodes_[phi.id].needs_grad || nodes_[sigma2.id].needs_grad;
  auto fwd = std::make_shared<LowrankBatchResult>(lowrank_loglik_batch(
      nodes_[phi.id].value, nodes_[sigma2.id].value.scalar_value(), *n.batch, needs));
  n.value = DenseMatrix::scalar(fwd->total);
  n.lowrank_fwd = std::move(fwd);
  n.needs_grad = needs;
  return wrap(push(std::move(n)));
}

Var Tape::diag_kl(Var mu, Var log_s) {
  check_owned(mu);
  check_owned(log_s);
  Node n;
  n.op = Op::DiagKl;
  n.a = mu.id;
  n.b = log_s.id;
  n.value = DenseMatrix::scalar(diag_kl_value(nodes_[mu.id].value, nodes_[log_s.id].value));
  n.needs_grad = nodes_[mu.id].needs_grad || nodes_[log_s.id].needs_grad;
  return wrap(push(std::move(n)));
}

void Tape::accumulate(int id, const DenseMatrix& delta) {
  DenseMatrix& slot = adjoint_[id];
  if (slot.empty() && !nodes_[id].value.empty()) {
    slot = DenseMatrix(nodes_[id].value.rows(), nodes_[id].value.cols());
  }
  require_same_shape(slot, delta, "adjoint accumulate");
  double* p = slot.data();
  const double* q = delta.data();
  for (std::size_t i = 0; i < slot.size(); ++i) p[i] += q[i];
}

void Tape::backward(Var output) {
  check_owned(output);
  if (!nodes_[output.id].value.is_scalar())
    throw NonScalarOutput("backward: output must be a scalar");
  adjoint_.assign(nodes_.size(), DenseMatrix());
  adjoint_[output.id] = DenseMatrix::scalar(1.0);

  for (int i = output.id; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (!n.needs_grad || adjoint_[i].empty()) continue;
    const DenseMatrix& bar = adjoint_[i];
    const bool a_grad = n.a >= 0 && nodes_[n.a].needs_grad;
    const bool b_grad = n.b >= 0 && nodes_[n.b].needs_grad;

    switch (n.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::Add:
        if (a_grad) accumulate(n.a, bar);
        if (b_grad) accumulate(n.b, bar);
        break;
      case Op::Sub:
        if (a_grad) accumulate(n.a, bar);
        if (b_grad) accumulate(n.b, aglv::neg(bar));
        break;
      case Op::Neg:
        if (a_grad) accumulate(n.a, aglv::neg(bar));
        break;
      case Op::CwiseMul:
        if (a_grad) accumulate(n.a, aglv::cwise_mul(bar, nodes_[n.b].value));
        if (b_grad) accumulate(n.b, aglv::cwise_mul(bar, nodes_[n.a].value));
        break;
      case Op::CwiseDiv: {
        const DenseMatrix& bv = nodes_[n.b].value;
        if (a_grad) accumulate(n.a, aglv::cwise_div(bar, bv));
        if (b_grad)
          accumulate(n.b, aglv::neg(aglv::cwise_div(aglv::cwise_mul(bar, n.value), bv)));
        break;
      }
      case Op::Scale:
        if (a_grad) accumulate(n.a, aglv::scale(bar, n.aux));
        break;
      case Op::AddConstant:
        if (a_grad) accumulate(n.a, bar);
        break;
      case Op::MulScalar: {
        if (a_grad) accumulate(n.a, aglv::scale(bar, nodes_[n.b].value.scalar_value()));
        if (b_grad)
          accumulate(n.b, DenseMatrix::scalar(aglv::sum(aglv::cwise_mul(bar, nodes_[n.a].value))));
        break;
      }
      case Op::Exp:
        if (a_grad) accumulate(n.a, aglv::cwise_mul(bar, n.value));
        break;
      case Op::Log:
        if (a_grad) accumulate(n.a, aglv::cwise_div(bar, nodes_[n.a].value));
        break;
      case Op::Sqrt:
        if (a_grad) accumulate(n.a, aglv::cwise_div(aglv::scale(bar, 0.5), n.value));
        break;
      case Op::Sin:
        if (a_grad) accumulate(n.a, aglv::cwise_mul(bar, aglv::cwise_cos(nodes_[n.a].value)));
        break;
      case Op::Cos:
        if (a_grad)
          accumulate(n.a, aglv::neg(aglv::cwise_mul(bar, aglv::cwise_sin(nodes_[n.a].value))));
        break;
      case Op::Square:
        if (a_grad) accumulate(n.a, aglv::cwise_mul(aglv::scale(bar, 2.0), nodes_[n.a].value));
        break;
      case Op::MatMul:
        if (a_grad) accumulate(n.a, aglv::matmul(bar, aglv::transpose(nodes_[n.b].value)));
        if (b_grad) accumulate(n.b, aglv::matmul(aglv::transpose(nodes_[n.a].value), bar));
        break;
      case Op::Transpose:
        if (a_grad) accumulate(n.a, aglv::transpose(bar));
        break;
      case Op::Sum: {
        if (a_grad) {
          const DenseMatrix& av = nodes_[n.a].value;
          accumulate(n.a, DenseMatrix(av.rows(), av.cols(), bar.scalar_value()));
        }
        break;
      }
      case Op::Trace: {
        if (a_grad) {
          const DenseMatrix& av = nodes_[n.a].value;
          DenseMatrix d(av.rows(), av.cols());
          for (std::size_t k = 0; k < av.rows(); ++k) d(k, k) = bar.scalar_value();
          accumulate(n.a, d);
        }
        break;
      }
      case Op::SliceRows: {
        if (a_grad) {
          const DenseMatrix& av = nodes_[n.a].value;
          DenseMatrix d(av.rows(), av.cols());
          for (std::size_t r = 0; r < n.nrows; ++r)
            std::memcpy(d.row_ptr(n.row0 + r), bar.row_ptr(r), av.cols() * sizeof(double));
          accumulate(n.a, d);
        }
        break;
      }
      case Op::ConcatCols: {
        std::size_t c0 = 0;
        for (int pid : n.operands) {
          const DenseMatrix& pv = nodes_[pid].value;
          if (nodes_[pid].needs_grad) {
            DenseMatrix d(pv.rows(), pv.cols());
            for (std::size_t r = 0; r < pv.rows(); ++r)
              std::memcpy(d.row_ptr(r), bar.row_ptr(r) + c0, pv.cols() * sizeof(double));
            accumulate(pid, d);
          }
          c0 += pv.cols();
        }
        break;
      }
      case Op::LowrankLoglik: {
        const double bv = bar.scalar_value();
        const DenseMatrix& phi = nodes_[n.a].value;
        const double s2 = nodes_[n.b].value.scalar_value();
        DenseMatrix dphi(phi.rows(), phi.cols());
        double ds2 = 0.0;
        lowrank_loglik_batch_adjoint(phi, s2, *n.batch, *n.lowrank_fwd, bv, dphi, ds2);
        if (a_grad) accumulate(n.a, dphi);
        if (b_grad) accumulate(n.b, DenseMatrix::scalar(ds2));
        break;
      }
      case Op::DiagKl: {
        const double bv = bar.scalar_value();
        if (a_grad) accumulate(n.a, aglv::scale(nodes_[n.a].value, bv));
        if (b_grad) {
          const DenseMatrix& ls = nodes_[n.b].value;
          DenseMatrix d(ls.rows(), ls.cols());
          for (std::size_t k = 0; k < ls.size(); ++k)
            d.data()[k] = bv * 0.5 * (std::exp(ls.data()[k]) - 1.0);
          accumulate(n.b, d);
        }
        break;
      }
      default:
        throw UnsupportedPrimitive("backward: unknown op");
    }
  }
  backward_done_ = true;
}

bool Tape::has_grad(const std::string& name) const {
  auto it = inputs_.find(name);
  if (it == inputs_.end()) return false;
  return backward_done_ && !adjoint_[it->second].empty();
}

const DenseMatrix& Tape::grad(Var v) const {
  check_owned(v);
  if (!backward_done_) throw Error("grad: backward has not run");
  if (adjoint_[v.id].empty()) throw Error("grad: no adjoint for this variable");
  return adjoint_[v.id];
}

const DenseMatrix& Tape::grad(const std::string& input_name) const {
  auto it = inputs_.find(input_name);
  if (it == inputs_.end()) throw Error("grad: unknown input " + input_name);
  if (!backward_done_) throw Error("grad: backward has not run");
  if (adjoint_[it->second].empty()) throw Error("grad: no adjoint for input " + input_name);
  return adjoint_[it->second];
}

double gradcheck(const GraphBuilder& build, const std::map<std::string, DenseMatrix>& inputs,
                 double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw Error("gradcheck: h outside [1e-7, 1e-3]");

  Tape tape;
  Var out = build(tape, inputs);
  tape.backward(out);

  double worst = 0.0;
  for (const auto& [name, base] : inputs) {
    if (!tape.has_grad(name)) continue;  // input not differentiable in this graph
    const DenseMatrix analytic = tape.grad(name);
    for (std::size_t k = 0; k < base.size(); ++k) {
      std::map<std::string, DenseMatrix> shifted = inputs;
      shifted[name].data()[k] = base.data()[k] + h;
      Tape tp;
      const double fp = build(tp, shifted).value().scalar_value();
      shifted[name].data()[k] = base.data()[k] - h;
      Tape tm;
      const double fm = build(tm, shifted).value().scalar_value();
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic.data()[k];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace aglv
