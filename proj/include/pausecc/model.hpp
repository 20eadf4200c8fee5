#pragma once

// Compiled Transformer: token table with positional encodings, per-layer
// attention heads and feedforward networks, all over F_p, plus the readout
// location. Stored on disk as a JSON document with exact decimal numbers.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pausecc/circuit.hpp"
#include "pausecc/encoder.hpp"
#include "pausecc/fixedpoint.hpp"

namespace pausecc::model {

using fp::Fp;
using fp::Precision;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kFormatName = "pausecc-model";

struct Entry {
  std::uint32_t row;
  std::uint32_t col;
  Fp value;
};

// Row-major sparse matrix; entries are kept sorted by (row, col) with no
// explicit zeros.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<Entry>& entries() const { return entries_; }

  // Inserts, overwrites or (for zero) erases.
  void set(std::size_t r, std::size_t c, const Fp& v);
  std::optional<Fp> get(std::size_t r, std::size_t c) const;

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Entry> entries_;
};

enum class Activation { Relu, Identity };

struct DenseLayer {
  SparseMatrix weight;
  std::vector<Fp> bias;
  Activation activation = Activation::Relu;
};

enum class FfnRole { CopyNegate, GateResolve, SignedCopy, ThresholdResolve, Custom };

std::string_view to_string(FfnRole r);
FfnRole parse_ffn_role(std::string_view s);

struct FfnSpec {
  FfnRole role = FfnRole::Custom;
  std::vector<DenseLayer> layers;
};

struct AttentionHead {
  SparseMatrix wqk;
  SparseMatrix wv;
};

struct AttentionSpec {
  std::vector<AttentionHead> heads;
  bool causal = true;
};

struct ModelLayer {
  AttentionSpec attention;
  FfnSpec ffn;
};

struct TokenInfo {
  encoder::TokenKind kind = encoder::TokenKind::Input;
  circuit::VertexId vertex = 0;
  circuit::VertexId source = 0;
  std::uint32_t arg_index = 0;
  std::vector<Fp> embedding;
};

struct Model {
  circuit::Family family = circuit::Family::AC0;
  Precision precision{8};
  std::size_t dim = 0;
  int index_width = 1;
  std::uint32_t n_inputs = 0;
  std::vector<TokenInfo> tokens;
  std::vector<ModelLayer> layers;
  std::size_t readout_position = 0;
  std::size_t readout_channel = 0;
  std::uint64_t circuit_hash = 0;
  std::size_t pause_token_count = 0;
  bool compat_g = false;
  bool clear_gate_values = true;
};

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize_model(const Model& m);
// Throws ModelFormatError on malformed documents, wrong format name or
// unsupported format_version. Values off the F_p grid are errors unless
// round is set, in which case they are rounded to nearest.
Model parse_model(std::string_view text, bool round = false);

// Structural checks (dimensions, readout in range, token count) so the VM can
// trust any model that passes. Empty iff well-formed.
std::vector<std::string> check_model(const Model& m);

// Non-empty warning when the model was not compiled from c.
std::optional<std::string> hash_warning(const Model& m, const circuit::Circuit& c);

std::string hash_hex(std::uint64_t h);

}  // namespace pausecc::model
