#include "pausecc/vm.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

namespace pausecc::vm {

using model::AttentionSpec;
using model::FfnSpec;
using model::SparseMatrix;

namespace {

using Dense = std::vector<Row>;

Dense to_dense(const SparseMatrix& m, Precision p) {
  Dense out(m.rows(), Row(m.cols(), Fp::zero(p)));
  for (const auto& e : m.entries()) out[e.row][e.col] = e.value;
  return out;
}

void require_width(const ResidualState& s, std::size_t d) {
  for (const Row& r : s.tokens) {
    if (r.size() != d) {
      throw VmError("dimension mismatch: token has " + std::to_string(r.size()) + " channels, layer expects " +
                    std::to_string(d));
    }
  }
}

[[noreturn]] void zero_normalizer(std::size_t i) {
  throw VmError("attention normalizer Z is zero for query token " + std::to_string(i));
}

// ---------------------------------------------------------------- reference

void attention_reference(const ResidualState& in, const AttentionSpec& spec, Precision p, ResidualState& out,
                         std::vector<AttentionWeights>* weights) {
  const std::size_t n = in.tokens.size();
  const Fp mask = fp::neg(Fp::max(p));
  for (const auto& head : spec.heads) {
    require_width(in, head.wqk.rows());
    const std::size_t d = head.wqk.rows();
    const Dense wqk = to_dense(head.wqk, p);
    const Dense wv = to_dense(head.wv, p);
    Dense cols(d, Row(d, Fp::zero(p)));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) cols[c][r] = wqk[r][c];
    AttentionWeights aw;
    aw.rows.resize(n);
    std::vector<Row> proj(n);
    for (std::size_t i = 0; i < n; ++i) {
      Row q(d, Fp::zero(p));
      for (std::size_t c = 0; c < d; ++c) q[c] = fp::dot(p, in.tokens[i], cols[c]);
      Row e(n, Fp::zero(p));
      for (std::size_t j = 0; j < n; ++j) {
        Fp s = fp::dot(p, q, in.tokens[j]);
        if (spec.causal && j > i) s = fp::add(s, mask);
        e[j] = fp::exp(s);
      }
      const Fp z = fp::iterated_sum(p, e);
      if (z.is_zero()) zero_normalizer(i);
      Row headv(d, Fp::zero(p));
      for (std::size_t j = 0; j < n; ++j) {
        const Fp w = fp::div(e[j], z);
        if (!w.is_zero()) aw.rows[i].push_back({static_cast<std::uint32_t>(j), w});
        for (std::size_t c = 0; c < d; ++c) headv[c] = fp::add(headv[c], fp::mul(w, in.tokens[j][c]));
      }
      proj[i].resize(d, Fp::zero(p));
      for (std::size_t r = 0; r < d; ++r) proj[i][r] = fp::dot(p, wv[r], headv);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < d; ++r) out.tokens[i][r] = fp::add(out.tokens[i][r], proj[i][r]);
    if (weights) weights->push_back(std::move(aw));
  }
}

Row ffn_reference_token(const Row& x, const std::vector<Dense>& ws, const FfnSpec& spec, Precision p) {
  Row cur = x;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const auto& layer = spec.layers[k];
    Row next(layer.weight.rows(), Fp::zero(p));
    for (std::size_t r = 0; r < next.size(); ++r) {
      Fp y = fp::add(fp::dot(p, ws[k][r], cur), layer.bias[r]);
      next[r] = layer.activation == model::Activation::Relu ? fp::relu(y) : y;
    }
    cur = std::move(next);
  }
  return cur;
}

void ffn_reference(const ResidualState& in, const FfnSpec& spec, Precision p, ResidualState& out) {
  if (spec.layers.empty()) return;
  std::vector<Dense> ws;
  for (const auto& l : spec.layers) ws.push_back(to_dense(l.weight, p));
  require_width(in, spec.layers.front().weight.cols());
  for (std::size_t i = 0; i < in.tokens.size(); ++i) {
    const Row o = ffn_reference_token(in.tokens[i], ws, spec, p);
    for (std::size_t c = 0; c < o.size(); ++c) out.tokens[i][c] = fp::add(out.tokens[i][c], o[c]);
  }
}

// ----------------------------------------------------------------- parallel
//
// Every sum below runs over ascending indices with the zero terms dropped.
// Adding an exact zero to an in-range accumulator is the identity, so this
// matches the reference bit for bit.

using SparseRow = std::vector<std::pair<std::uint32_t, Fp>>;

struct HeadPlan {
  // Columns of W^QK with their nonzero (row, weight) entries.
  std::vector<std::pair<std::uint32_t, SparseRow>> qk_cols;
  // Channels the scores read, for the cache key.
  std::vector<std::uint32_t> score_channels;
  // Nonzero columns of W^V and its rows over those columns (by position).
  std::vector<std::uint32_t> v_channels;
  std::vector<std::pair<std::uint32_t, SparseRow>> v_rows;
  std::size_t dim = 0;
};

HeadPlan plan_head(const model::AttentionHead& h) {
  HeadPlan plan;
  plan.dim = h.wqk.rows();
  std::vector<std::uint32_t> channels;
  std::vector<std::pair<std::uint32_t, SparseRow>> cols;
  for (const auto& e : h.wqk.entries()) {
    auto it = std::find_if(cols.begin(), cols.end(), [&](const auto& c) { return c.first == e.col; });
    if (it == cols.end()) {
      cols.push_back({e.col, {}});
      it = cols.end() - 1;
    }
    it->second.push_back({e.row, e.value});  // entries are row-major, so rows ascend
    channels.push_back(e.row);
    channels.push_back(e.col);
  }
  std::sort(cols.begin(), cols.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::sort(channels.begin(), channels.end());
  channels.erase(std::unique(channels.begin(), channels.end()), channels.end());
  plan.qk_cols = std::move(cols);
  plan.score_channels = std::move(channels);

  for (const auto& e : h.wv.entries()) plan.v_channels.push_back(e.col);
  std::sort(plan.v_channels.begin(), plan.v_channels.end());
  plan.v_channels.erase(std::unique(plan.v_channels.begin(), plan.v_channels.end()), plan.v_channels.end());
  for (const auto& e : h.wv.entries()) {
    if (plan.v_rows.empty() || plan.v_rows.back().first != e.row) plan.v_rows.push_back({e.row, {}});
    const auto pos = std::lower_bound(plan.v_channels.begin(), plan.v_channels.end(), e.col) - plan.v_channels.begin();
    plan.v_rows.back().second.push_back({static_cast<std::uint32_t>(pos), e.value});
  }
  return plan;
}

AttentionWeights compute_weights(const ResidualState& in, const HeadPlan& plan, bool causal, Precision p) {
  const std::size_t n = in.tokens.size();
  const Fp mask = fp::neg(Fp::max(p));
  AttentionWeights aw;
  aw.rows.resize(n);
  std::atomic<std::int64_t> bad{-1};
#pragma omp parallel for schedule(dynamic, 16) if (n > 64)
  for (std::size_t i = 0; i < n; ++i) {
    const Row& xi = in.tokens[i];
    SparseRow q;
    for (const auto& [c, entries] : plan.qk_cols) {
      Fp acc = Fp::zero(p);
      for (const auto& [r, w] : entries)
        if (!xi[r].is_zero()) acc = fp::add(acc, fp::mul(xi[r], w));
      if (!acc.is_zero()) q.push_back({c, acc});
    }
    SparseRow e;
    Fp z = Fp::zero(p);
    for (std::size_t j = 0; j < n; ++j) {
      const Row& xj = in.tokens[j];
      Fp s = Fp::zero(p);
      for (const auto& [c, qc] : q)
        if (!xj[c].is_zero()) s = fp::add(s, fp::mul(qc, xj[c]));
      if (causal && j > i) s = fp::add(s, mask);
      const Fp ej = fp::exp(s);
      if (!ej.is_zero()) {
        e.push_back({static_cast<std::uint32_t>(j), ej});
        z = fp::add(z, ej);
      }
    }
    if (z.is_zero()) {
      std::int64_t expected = -1;
      bad.compare_exchange_strong(expected, static_cast<std::int64_t>(i));
      continue;
    }
    auto& row = aw.rows[i];
    for (const auto& [j, ej] : e) {
      const Fp w = fp::div(ej, z);
      if (!w.is_zero()) row.push_back({j, w});
    }
  }
  if (bad.load() >= 0) zero_normalizer(static_cast<std::size_t>(bad.load()));
  return aw;
}

void apply_head(const ResidualState& in, const HeadPlan& plan, const AttentionWeights& aw, Precision p,
                ResidualState& out) {
  const std::size_t n = in.tokens.size();
  const std::size_t nv = plan.v_channels.size();
#pragma omp parallel for schedule(static) if (n > 64)
  for (std::size_t i = 0; i < n; ++i) {
    Row head(nv, Fp::zero(p));
    for (const auto& [j, w] : aw.rows[i]) {
      const Row& xj = in.tokens[j];
      for (std::size_t k = 0; k < nv; ++k) {
        const Fp& v = xj[plan.v_channels[k]];
        if (!v.is_zero()) head[k] = fp::add(head[k], fp::mul(w, v));
      }
    }
    for (const auto& [r, entries] : plan.v_rows) {
      Fp acc = Fp::zero(p);
      for (const auto& [k, wv] : entries)
        if (!head[k].is_zero()) acc = fp::add(acc, fp::mul(wv, head[k]));
      out.tokens[i][r] = fp::add(out.tokens[i][r], acc);
    }
  }
}

struct FfnPlan {
  struct Layer {
    std::vector<SparseRow> rows;
    std::vector<Fp> bias;
    bool relu;
  };
  std::vector<Layer> layers;
  std::size_t in_width = 0;
};

FfnPlan plan_ffn(const FfnSpec& spec) {
  FfnPlan plan;
  if (!spec.layers.empty()) plan.in_width = spec.layers.front().weight.cols();
  for (const auto& l : spec.layers) {
    FfnPlan::Layer pl;
    pl.rows.resize(l.weight.rows());
    for (const auto& e : l.weight.entries()) pl.rows[e.row].push_back({e.col, e.value});
    pl.bias = l.bias;
    pl.relu = l.activation == model::Activation::Relu;
    plan.layers.push_back(std::move(pl));
  }
  return plan;
}

void ffn_parallel(const ResidualState& in, const FfnPlan& plan, Precision p, ResidualState& out) {
  if (plan.layers.empty()) return;
  require_width(in, plan.in_width);
  const std::size_t n = in.tokens.size();
#pragma omp parallel for schedule(static) if (n > 64)
  for (std::size_t i = 0; i < n; ++i) {
    Row cur = in.tokens[i];
    Row next;
    for (const auto& layer : plan.layers) {
      next.assign(layer.rows.size(), Fp::zero(p));
      for (std::size_t r = 0; r < layer.rows.size(); ++r) {
        Fp acc = Fp::zero(p);
        for (const auto& [c, w] : layer.rows[r])
          if (!cur[c].is_zero()) acc = fp::add(acc, fp::mul(w, cur[c]));
        acc = fp::add(acc, layer.bias[r]);
        next[r] = layer.relu ? fp::relu(acc) : acc;
      }
      std::swap(cur, next);
    }
    Row& o = out.tokens[i];
    for (std::size_t c = 0; c < cur.size(); ++c)
      if (!cur[c].is_zero()) o[c] = fp::add(o[c], cur[c]);
  }
}

ResidualState next_state(const ResidualState& in) {
  ResidualState out = in;
  out.layer_index = in.layer_index + 1;
  return out;
}

}  // namespace

ResidualState embed(const model::Model& m, std::span<const std::uint8_t> x) {
  if (x.size() != m.n_inputs) {
    throw VmError("input has " + std::to_string(x.size()) + " bits, model expects " + std::to_string(m.n_inputs));
  }
  ResidualState s;
  s.tokens.reserve(m.tokens.size());
  std::size_t k = 0;
  for (const auto& t : m.tokens) {
    Row row = t.embedding;
    if (t.kind == encoder::TokenKind::Input) {
      if (x[k] > 1) throw VmError("input bit " + std::to_string(k) + " is not 0 or 1");
      row[0] = x[k] ? Fp::one(m.precision) : Fp::zero(m.precision);
      ++k;
    }
    s.tokens.push_back(std::move(row));
  }
  return s;
}

ResidualState attention_layer(const ResidualState& in, const AttentionSpec& spec, Precision p, Kernel kernel,
                              std::vector<AttentionWeights>* weights) {
  ResidualState out = in;
  if (kernel == Kernel::Reference) {
    attention_reference(in, spec, p, out, weights);
    return out;
  }
  for (const auto& h : spec.heads) {
    require_width(in, h.wqk.rows());
    const HeadPlan plan = plan_head(h);
    AttentionWeights aw = compute_weights(in, plan, spec.causal, p);
    apply_head(in, plan, aw, p, out);
    if (weights) weights->push_back(std::move(aw));
  }
  return out;
}

ResidualState ffn_layer(const ResidualState& in, const FfnSpec& spec, Precision p, Kernel kernel) {
  ResidualState out = in;
  if (kernel == Kernel::Reference) {
    ffn_reference(in, spec, p, out);
  } else {
    ffn_parallel(in, plan_ffn(spec), p, out);
  }
  return out;
}

// ------------------------------------------------------------------ session

struct Session::Impl {
  struct Cache {
    bool valid = false;
    std::vector<std::int64_t> key;
    AttentionWeights weights;
  };
  std::vector<std::vector<HeadPlan>> heads;
  std::vector<std::vector<Cache>> caches;
  std::vector<FfnPlan> ffns;
};

Session::Session(const model::Model& m, Kernel kernel) : model_(m), kernel_(kernel), impl_(new Impl) {
  if (const auto problems = model::check_model(m); !problems.empty()) {
    throw VmError("malformed model: " + problems.front());
  }
  for (const auto& layer : m.layers) {
    std::vector<HeadPlan> hs;
    for (const auto& h : layer.attention.heads) hs.push_back(plan_head(h));
    impl_->caches.emplace_back(hs.size());
    impl_->heads.push_back(std::move(hs));
    impl_->ffns.push_back(plan_ffn(layer.ffn));
  }
}

Session::~Session() = default;

ResidualState Session::run(std::span<const std::uint8_t> x, Trace* trace) {
  const Precision p = model_.precision;
  ResidualState state = embed(model_, x);
  if (trace) trace->snapshots.push_back(state);
  for (std::size_t l = 0; l < model_.layers.size(); ++l) {
    const auto& layer = model_.layers[l];
    std::vector<AttentionWeights> ws;
    ResidualState mid = next_state(state);
    if (kernel_ == Kernel::Reference) {
      attention_reference(state, layer.attention, p, mid, trace ? &ws : nullptr);
      ResidualState after = mid;
      ffn_reference(mid, layer.ffn, p, after);
      state = std::move(after);
    } else {
      for (std::size_t h = 0; h < impl_->heads[l].size(); ++h) {
        const HeadPlan& plan = impl_->heads[l][h];
        require_width(state, plan.dim);
        Impl::Cache& cache = impl_->caches[l][h];
        std::vector<std::int64_t> key;
        key.reserve(state.tokens.size() * plan.score_channels.size() + 1);
        key.push_back(static_cast<std::int64_t>(state.tokens.size()));
        for (const Row& r : state.tokens)
          for (std::uint32_t c : plan.score_channels) key.push_back(r[c].raw());
        if (!cache.valid || cache.key != key) {
          cache.weights = compute_weights(state, plan, layer.attention.causal, p);
          cache.key = std::move(key);
          cache.valid = true;
        }
        apply_head(state, plan, cache.weights, p, mid);
        if (trace) ws.push_back(cache.weights);
      }
      ResidualState after = mid;
      ffn_parallel(mid, impl_->ffns[l], p, after);
      state = std::move(after);
    }
    if (trace) {
      trace->snapshots.push_back(state);
      trace->attention.push_back(std::move(ws));
    }
  }
  return state;
}

Fp Session::readout(std::span<const std::uint8_t> x) {
  const ResidualState s = run(x, nullptr);
  return s.tokens[model_.readout_position][model_.readout_channel];
}

ForwardResult Session::forward(std::span<const std::uint8_t> x, bool trace) {
  ForwardResult res;
  Trace t;
  const ResidualState s = run(x, trace ? &t : nullptr);
  const Fp v = s.tokens[model_.readout_position][model_.readout_channel];
  const Precision p = model_.precision;
  if (v != Fp::zero(p) && v != Fp::one(p)) {
    if (!trace) run(x, &t);
    throw ModelMalfunction("model malfunction: readout value " + fp::to_string(v) + " is not 0 or 1",
                           fp::to_string(v), std::move(t));
  }
  res.bit = v.is_zero() ? 0 : 1;
  if (trace) res.trace = std::move(t);
  return res;
}

ForwardResult forward(const model::Model& m, std::span<const std::uint8_t> x, bool trace, Kernel kernel) {
  Session s(m, kernel);
  return s.forward(x, trace);
}

std::string dump_trace(const model::Model& m, const Trace& t) {
  std::ostringstream out;
  for (std::size_t l = 0; l < t.snapshots.size(); ++l) {
    out << "layer " << l << (l == 0 ? " embedding" : "") << "\n";
    if (l > 0 && l - 1 < t.attention.size()) {
      const auto& heads = t.attention[l - 1];
      for (std::size_t h = 0; h < heads.size(); ++h) {
        out << "  attention head " << h << "\n";
        for (std::size_t i = 0; i < heads[h].rows.size(); ++i) {
          out << "    " << i << " <-";
          for (const auto& [j, w] : heads[h].rows[i]) out << ' ' << j << ':' << fp::to_string(w);
          out << "\n";
        }
      }
    }
    const auto& tokens = t.snapshots[l].tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& info = m.tokens[i];
      out << "  " << i << ' ' << encoder::to_string(info.kind) << '(' << info.vertex;
      if (info.kind == encoder::TokenKind::Arg) out << ',' << info.source;
      out << "):";
      for (const Fp& v : tokens[i]) out << ' ' << fp::to_string(v);
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace pausecc::vm
