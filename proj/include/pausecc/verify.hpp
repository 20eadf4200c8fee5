#pragma once

// Equivalence harness: compiled model vs. circuit::evaluate, precision
// sweeps, and seeded random campaigns. Reports carry no timings, so the same
// configuration always renders the same bytes.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pausecc/circuit.hpp"
#include "pausecc/compiler.hpp"
#include "pausecc/model.hpp"

namespace pausecc::verify {

struct CoverageConfig {
  std::size_t exhaustive_limit = 14;
  std::size_t samples = 4096;
  std::uint64_t seed = 0;
};

// Inputs to check: all 2^n when n <= exhaustive_limit, otherwise `samples`
// draws from CounterRng(seed), bit i of a sample being bit (i mod 64) of
// draw floor(i / 64) of that sample.
std::vector<circuit::Bits> coverage_inputs(std::uint32_t n, const CoverageConfig& cfg, bool* exhaustive = nullptr);

struct Mismatch {
  circuit::Bits input;
  std::uint8_t expected = 0;
  std::string got;
  std::optional<std::size_t> divergent_layer;
  std::string detail;
};

struct VerifyReport {
  circuit::Family family = circuit::Family::AC0;
  circuit::DescStats stats;
  std::uint32_t n_inputs = 0;
  int precision = 0;
  std::size_t layers = 0;
  std::size_t tokens = 0;
  std::size_t pause_token_count = 0;
  bool exhaustive = true;
  std::size_t checked = 0;
  std::uint64_t seed = 0;
  std::size_t mismatch_count = 0;
  // The first few mismatches, localized and replayable.
  std::vector<Mismatch> mismatches;
  // Filled when there are mismatches.
  std::string circuit_text;
  std::string model_text;

  bool pass() const { return mismatch_count == 0; }
};

class HashMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws HashMismatch when m was not compiled from c, unless force is set.
VerifyReport check_equivalence(const circuit::Circuit& c, const model::Model& m, const CoverageConfig& cov = {},
                               bool force = false, std::size_t max_recorded = 8);

std::string to_text(const VerifyReport& r);
nlohmann::json to_json(const VerifyReport& r);

struct SweepEntry {
  int precision = 0;
  bool compiled = false;
  bool pass = false;
  // exp(-B_p) rounds to 0, so masked positions get weight exactly 0.
  bool mask_effective = false;
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  std::optional<std::size_t> divergent_layer;
  std::string note;
};

struct SweepReport {
  std::vector<SweepEntry> entries;
  std::optional<int> minimal_passing;
  bool monotone = true;
  std::vector<std::string> findings;
};

// Compiles c at every p in [lo, hi] with the minimum-precision check off and
// verifies each model. A failure above a passing p is a finding, not an error.
SweepReport precision_sweep(const circuit::Circuit& c, int lo, int hi, const CoverageConfig& cov = {},
                            compiler::CompileOptions options = {});

std::string to_text(const SweepReport& r);
nlohmann::json to_json(const SweepReport& r);

struct CampaignConfig {
  circuit::Family family = circuit::Family::AC0;
  std::uint32_t n_min = 2;
  std::uint32_t n_max = 8;
  std::uint32_t depth_min = 1;
  std::uint32_t depth_max = 3;
  std::uint32_t max_fanin = 4;
  // Upper bound on gates per circuit.
  std::uint32_t size_budget = 40;
  std::size_t count = 200;
  std::uint64_t seed = 0;
  CoverageConfig coverage;
  // Fixed precision; the default policy when absent.
  std::optional<int> precision;
  compiler::CompileOptions options;
  int jobs = 1;
};

struct CampaignItem {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  circuit::RandomCircuitParams params;
  circuit::DescStats stats;
  int precision = 0;
  bool pass = false;
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  std::string error;
  std::optional<VerifyReport> failure;
};

struct CampaignReport {
  CampaignConfig config;
  std::vector<CampaignItem> items;

  std::size_t passed() const;
  bool pass() const { return passed() == items.size(); }
};

// Item i uses seed derive_seed(config.seed, i) for both its shape parameters
// and its circuit, so any item can be regenerated on its own.
CampaignItem campaign_item(const CampaignConfig& cfg, std::size_t index);
CampaignReport campaign(const CampaignConfig& cfg);

std::string to_text(const CampaignReport& r);
nlohmann::json to_json(const CampaignReport& r);

}  // namespace pausecc::verify
