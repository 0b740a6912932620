// ============================================================================
// Minimal reverse-mode automatic differentiation over dense real tensors.
//
// Tensors are dense row-major double arrays with an explicit shape. Ops are
// free functions that take an optional Tape*; when a tape is supplied the op
// records a backward closure on it. Tape::backward(loss) seeds d(loss)/d(loss)
// = 1 and walks the recorded list in reverse, accumulating gradients into
// every tensor reachable from the loss (leaves keep theirs in Tensor::grad).
//
// Broadcasting follows trailing-axis alignment: shapes are right-aligned,
// size-1 axes stretch, and missing leading axes are treated as size 1. No
// other implicit axis insertion happens.
// ============================================================================
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace numerion {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;   // row-major, length == product(shape)
  bool requires_grad = false;
  std::vector<double> grad;   // empty until backward() touches this tensor

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
  }

  // Factories validate the shape/data length invariant.
  static TensorPtr make(std::vector<std::int64_t> shape,
                        std::vector<double> data, bool requires_grad = false);
  static TensorPtr zeros(std::vector<std::int64_t> shape,
                         bool requires_grad = false);
  static TensorPtr full(std::vector<std::int64_t> shape, double value,
                        bool requires_grad = false);
  static TensorPtr randn(std::vector<std::int64_t> shape, std::mt19937_64& rng,
                         double stddev = 1.0, bool requires_grad = false);
};

// Ordered list of recorded operations (a Wengert list). One tape per thread
// of execution; tensors not being differentiated are immutable and shareable.
class Tape {
 public:
  // `backward` reads output->grad and accumulates into the inputs' grads.
  void record(TensorPtr output, std::vector<TensorPtr> inputs,
              std::function<void()> backward);

  // Seeds the scalar loss with gradient 1 and replays the tape in reverse.
  // Throws std::invalid_argument if `loss` is not scalar.
  void backward(const TensorPtr& loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorPtr output;
    std::vector<TensorPtr> inputs;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

// Ensures t->grad is allocated (zero-filled) at data length. Used by backward
// closures, including custom ones registered by higher-level modules.
void ensure_grad(const TensorPtr& t);

// --- elementwise / broadcasting ---------------------------------------------
TensorPtr op_add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr op_sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr op_mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr op_scale(Tape* tape, const TensorPtr& a, double c);
TensorPtr op_tanh(Tape* tape, const TensorPtr& a);
TensorPtr op_gelu(Tape* tape, const TensorPtr& a); // exact erf form
TensorPtr op_abs(Tape* tape, const TensorPtr& a);

// Zeroes entries with probability `rate` during training and rescales
// survivors by 1/(1-rate); identity in evaluation mode. When group_size > 1,
// one Bernoulli draw covers each run of group_size consecutive entries (the
// flat array length must be divisible by group_size).
TensorPtr op_dropout(Tape* tape, const TensorPtr& a, double rate,
                     bool training, std::mt19937_64& rng,
                     std::int64_t group_size = 1);

// --- structural --------------------------------------------------------------
TensorPtr op_reshape(Tape* tape, const TensorPtr& a,
                     std::vector<std::int64_t> new_shape);
TensorPtr op_permute(Tape* tape, const TensorPtr& a,
                     const std::vector<int>& axes);
TensorPtr op_narrow(Tape* tape, const TensorPtr& a, int axis,
                    std::int64_t start, std::int64_t length);
TensorPtr op_concat(Tape* tape, const std::vector<TensorPtr>& parts, int axis);
TensorPtr op_gather(Tape* tape, const TensorPtr& a,
                    const std::vector<std::int64_t>& indices, int axis);

// --- reductions ---------------------------------------------------------------
TensorPtr op_mean(Tape* tape, const TensorPtr& a, int axis,
                  bool keepdim = false);
TensorPtr op_sum(Tape* tape, const TensorPtr& a, int axis,
                 bool keepdim = false);
TensorPtr op_mean_all(Tape* tape, const TensorPtr& a);
TensorPtr op_sum_all(Tape* tape, const TensorPtr& a);
TensorPtr op_softmax(Tape* tape, const TensorPtr& a, int axis);

// --- linear algebra -----------------------------------------------------------
// Last two axes form the matrix; leading batch axes broadcast.
TensorPtr op_matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);

// --- gradient verification ----------------------------------------------------
// Compares the analytic gradient of the scalar-valued f against central
// differences per coordinate and returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-8). `f` must be deterministic
// across calls (reseed any internal RNG inside the closure).
double grad_check(const std::function<TensorPtr(Tape&, const TensorPtr&)>& f,
                  const TensorPtr& x, double h = 1e-5);

} // namespace numerion
