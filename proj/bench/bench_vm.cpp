// Reference (dense, serial) vs parallel (sparse, OpenMP) VM kernels.

#include <benchmark/benchmark.h>

#include "pausecc/compiler.hpp"
#include "pausecc/verify.hpp"
#include "pausecc/vm.hpp"

using namespace pausecc;

namespace {

template <vm::Kernel K>
void forward_parity(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto m = compiler::compile(circuit::build_parity_circuit(n));
  verify::CoverageConfig cov;
  cov.exhaustive_limit = 0;
  cov.samples = 64;
  const auto inputs = verify::coverage_inputs(n, cov);
  std::size_t i = 0;
  for (auto _ : state) {
    // Fresh session each time so the attention cache does not hide the work.
    vm::Session s(m, K);
    benchmark::DoNotOptimize(s.forward(inputs[i++ % inputs.size()]).bit);
  }
  state.counters["tokens"] = static_cast<double>(m.tokens.size());
}

template <vm::Kernel K>
void verify_or_tree(benchmark::State& state) {
  const auto c = circuit::build_or_tree(static_cast<std::uint32_t>(state.range(0)));
  const auto m = compiler::compile(c, fp::Precision(8));
  for (auto _ : state) {
    vm::Session s(m, K);
    std::size_t ones = 0;
    for (const auto& x : verify::coverage_inputs(c.n_inputs, {})) ones += s.forward(x).bit;
    benchmark::DoNotOptimize(ones);
  }
}

void campaign_jobs(benchmark::State& state) {
  verify::CampaignConfig cfg;
  cfg.count = 24;
  cfg.seed = 11;
  cfg.jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(verify::campaign(cfg).passed());
}

}  // namespace

BENCHMARK(forward_parity<vm::Kernel::Reference>)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(forward_parity<vm::Kernel::Parallel>)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(verify_or_tree<vm::Kernel::Reference>)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(verify_or_tree<vm::Kernel::Parallel>)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(campaign_jobs)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
