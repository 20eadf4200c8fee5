#pragma once

// Exact F_p Transformer interpreter. Per query token i and head h, in this
// order:
//   s_ij = dot(row_i W^QK, row_j)      both products left to right
//   s_ij = s_ij + mask_ij              mask = -B_p for j > i when causal
//   e_ij = exp(s_ij)
//   Z_i  = sum_j e_ij                  ascending j
//   w_ij = e_ij / Z_i
//   head = sum_j w_ij * row_j          ascending j, per channel
//   out  = row_i + W^V head            residual first, then heads in order
// The FFN computes each layer as act(dot(W_r, x) + b_r) and adds the final
// output to the residual.
//
// Two kernels share these semantics. The reference kernel is the dense,
// serial transcription above. The parallel kernel skips exact zeros, caches
// attention weights while the score channels are unchanged, and spreads
// tokens over OpenMP threads; its results are bit-identical.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pausecc/model.hpp"

namespace pausecc::vm {

using fp::Fp;
using fp::Precision;
using Row = std::vector<Fp>;

enum class Kernel { Reference, Parallel };

struct ResidualState {
  std::size_t layer_index = 0;
  std::vector<Row> tokens;
};

struct WeightEntry {
  std::uint32_t key;
  Fp weight;
};

// Nonzero attention weights a_ij of one head, indexed by query i.
struct AttentionWeights {
  std::vector<std::vector<WeightEntry>> rows;
};

struct Trace {
  // snapshots[0] is the embedding, snapshots[l] the state after layer l.
  std::vector<ResidualState> snapshots;
  // attention[l - 1][h] for layer l.
  std::vector<std::vector<AttentionWeights>> attention;
};

class VmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The readout was not exactly 0 or 1.
class ModelMalfunction : public VmError {
 public:
  ModelMalfunction(const std::string& what, std::string value, Trace trace)
      : VmError(what), value_(std::move(value)), trace_(std::move(trace)) {}
  const std::string& value() const noexcept { return value_; }
  const Trace& trace() const noexcept { return trace_; }

 private:
  std::string value_;
  Trace trace_;
};

ResidualState embed(const model::Model& m, std::span<const std::uint8_t> x);

ResidualState attention_layer(const ResidualState& in, const model::AttentionSpec& spec, Precision p,
                              Kernel kernel = Kernel::Parallel, std::vector<AttentionWeights>* weights = nullptr);
ResidualState ffn_layer(const ResidualState& in, const model::FfnSpec& spec, Precision p,
                        Kernel kernel = Kernel::Parallel);

struct ForwardResult {
  std::uint8_t bit = 0;
  std::optional<Trace> trace;
};

// Runs many inputs through one model. Attention weights are cached per layer
// and reused whenever the channels they read are unchanged, which for
// compiled models is every run after the first. Not thread-safe; use one
// session per thread.
class Session {
 public:
  explicit Session(const model::Model& m, Kernel kernel = Kernel::Parallel);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  ForwardResult forward(std::span<const std::uint8_t> x, bool trace = false);
  // Same as forward but returns the raw readout value without the 0/1 check.
  Fp readout(std::span<const std::uint8_t> x);

  const model::Model& model() const noexcept { return model_; }

 private:
  struct Impl;

  ResidualState run(std::span<const std::uint8_t> x, Trace* trace);

  const model::Model& model_;
  Kernel kernel_;
  std::unique_ptr<Impl> impl_;
};

ForwardResult forward(const model::Model& m, std::span<const std::uint8_t> x, bool trace = false,
                      Kernel kernel = Kernel::Parallel);

// Per-layer token table of exact decimals plus the nonzero attention weights.
std::string dump_trace(const model::Model& m, const Trace& t);

}  // namespace pausecc::vm
