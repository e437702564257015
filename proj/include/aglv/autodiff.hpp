#pragma once
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aglv/lowrank.hpp"
#include "aglv/matrix.hpp"

namespace aglv {

class Tape;

// Handle to a recorded value. Cheap to copy; the tape owns all storage.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
  const DenseMatrix& value() const;
};

// Define-by-run reverse-mode tape over dense matrices. Forward values are
// computed eagerly with the same free functions used by the direct evaluation
// path, so recording is bit-transparent. One backward pass accumulates an
// adjoint for every reachable differentiable input.
class Tape {
 public:
  enum class Op {
    Input,
    Constant,
    Add,
    Sub,
    Neg,
    CwiseMul,
    CwiseDiv,
    Scale,        // by compile-time constant
    AddConstant,  // by compile-time constant
    MulScalar,    // broadcast multiply by a 1x1 variable
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Square,
    MatMul,
    Transpose,
    Sum,
    Trace,
    SliceRows,
    ConcatCols,
    LowrankLoglik,
    DiagKl,
  };

  Var input(const std::string& name, DenseMatrix value, bool requires_grad = true);
  Var constant(DenseMatrix value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var cwise_mul(Var a, Var b);
  Var cwise_div(Var a, Var b);
  Var scale(Var a, double c);
  Var add_constant(Var a, double c);
  Var mul_scalar(Var a, Var s);
  Var cwise_exp(Var a);
  Var cwise_log(Var a);
  Var cwise_sqrt(Var a);
  Var cwise_sin(Var a);
  Var cwise_cos(Var a);
  Var cwise_square(Var a);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var sum(Var a);
  Var trace(Var a);
  Var slice_rows(Var a, std::size_t row0, std::size_t count);
  Var concat_cols(std::span<const Var> parts);

  // sum_j log N(y_j | 0, Phi_j Phi_j^T + sigma2 I) over the batch's column
  // groups; sigma2 is a 1x1 variable. Hand-derived adjoint through the
  // Woodbury factorization.
  Var lowrank_loglik(Var phi, Var sigma2, std::shared_ptr<const LoglikBatch> batch);

  // Closed-form KL from N(mu_i, diag exp(log_s_i)) to the standard normal,
  // summed over rows.
  Var diag_kl(Var mu, Var log_s);

  // Populate adjoints of every requires_grad input reachable from output.
  void backward(Var output);

  const DenseMatrix& value(Var v) const { return nodes_[v.id].value; }
  bool has_grad(const std::string& name) const;
  const DenseMatrix& grad(Var v) const;
  const DenseMatrix& grad(const std::string& input_name) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    std::vector<int> operands;  // ConcatCols
    DenseMatrix value;
    double aux = 0.0;        // Scale/AddConstant constant
    std::size_t row0 = 0;    // SliceRows
    std::size_t nrows = 0;   // SliceRows
    bool needs_grad = false;
    std::shared_ptr<const LoglikBatch> batch;          // LowrankLoglik
    std::shared_ptr<LowrankBatchResult> lowrank_fwd;   // LowrankLoglik
  };

  int push(Node n);
  Var wrap(int id) { return Var{id, this}; }
  void check_owned(Var v) const;
  void accumulate(int id, const DenseMatrix& delta);

  std::vector<Node> nodes_;
  std::vector<DenseMatrix> adjoint_;
  std::map<std::string, int> inputs_;
  bool backward_done_ = false;
};

// Worst relative gradient error of a recorded scalar function against central
// finite differences, over every entry of every differentiable input.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
using GraphBuilder = std::function<Var(Tape&, const std::map<std::string, DenseMatrix>&)>;

double gradcheck(const GraphBuilder& build, const std::map<std::string, DenseMatrix>& inputs,
                 double h);

}  // namespace aglv
