#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "severitas/autodiff.hpp"
#include "severitas/rng.hpp"

namespace severitas {

// Differentiable primitives. Every op accepts tracked or constant vars and
// records itself on the inputs' tape when at least one input is tracked.

/// [m x k] * [k x n] -> [m x n].
Var matmul(const Var& a, const Var& b);
/// Batched product: [b x m x k] * [b x k x n] -> [b x m x n].
Var bmm(const Var& a, const Var& b);
/// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

// Elementwise binary ops with numpy-style broadcasting.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
/// Natural log; the caller keeps inputs strictly positive.
Var log(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);

/// Concatenates along the last axis; leading dims must agree.
Var concat(const std::vector<Var>& parts);
/// Columns [offset, offset+len) of the last axis.
Var slice_last(const Var& a, std::size_t offset, std::size_t len);

/// Sparsemax over the last axis of every row.
Var sparsemax(const Var& z);

/// Cross-correlation with zero padding.
/// x: [c_in x len] or [batch x c_in x len]; kernel: [c_out x c_in x k].
/// Output keeps x's rank with length len + 2*padding - k + 1.
Var conv1d(const Var& x, const Var& kernel, std::size_t padding);

enum class Mode { train, eval };

/// Inverted dropout. Eval mode (or rate 0) returns `x` itself.
Var dropout(const Var& x, double rate, Mode mode, Rng& rng);

/// Mean over the batch of -log softmax(logits)[label], log-sum-exp stabilised.
Var cross_entropy(const Var& logits, std::span<const int> labels);

struct LstmParams {
  Var w_input;      // [input x 4*hidden], gate blocks ordered i, f, g, o
  Var w_recurrent;  // [hidden x 4*hidden]
  Var bias;         // [4*hidden]
};

struct LstmState {
  Var h;  // [batch x hidden]
  Var c;  // [batch x hidden]
};

/// One LSTM step over a batch of inputs x: [batch x input].
LstmState lstm_cell(const Var& x, const LstmState& state, const LstmParams& params);

// Piecewise ops (relu, sparsemax) append a digest of which outputs are
// positive to the installed trace. Gradient checkers compare traces at
// x+h and x-h to spot finite-difference stencils that straddle a kink.
struct KinkTrace {
  std::vector<std::uint64_t> patterns;
};
/// Thread-local; pass nullptr to stop tracing.
void set_kink_trace(KinkTrace* trace);

// Plain (untracked) helpers shared by oracles-independent callers.

/// Row-wise sparsemax on a raw vector.
std::vector<double> sparsemax(std::span<const double> z);
/// Row-wise softmax of a [rows x classes] tensor.
Tensor softmax_rows(const Tensor& logits);

}  // namespace severitas
