#include <algorithm>
#include <stdexcept>

#include "pausecc/circuit.hpp"
#include "pausecc/rng.hpp"

namespace pausecc::circuit {

namespace {

Circuit with_inputs(Family family, std::uint32_t n) {
  Circuit c;
  c.family = family;
  c.n_inputs = n;
  for (VertexId id = 1; id <= n; ++id) {
    Vertex v;
    v.id = id;
    v.is_input = true;
    c.vertices.push_back(std::move(v));
  }
  return c;
}

}  // namespace

Circuit build_parity_circuit(std::uint32_t n) {
  if (n < 1) throw std::invalid_argument("parity circuit needs n >= 1");
  Circuit c = with_inputs(Family::TC0, n);
  // G_k = [sum x_i >= k], written as the strict form [sum x_i > k - 1].
  for (std::uint32_t k = 1; k <= n; ++k) {
    Vertex g;
    g.id = n + k;
    g.type = GateType::Thresh;
    g.direction = Direction::GT;
    g.theta = static_cast<std::int64_t>(k) - 1;
    for (VertexId i = 1; i <= n; ++i) g.args.push_back({i, +1});
    c.vertices.push_back(std::move(g));
  }
  // F = [sum (-1)^(k+1) G_k >= 1] = [... > 0].
  Vertex f;
  f.id = 2 * n + 1;
  f.type = GateType::Thresh;
  f.direction = Direction::GT;
  f.theta = 0;
  for (std::uint32_t k = 1; k <= n; ++k) f.args.push_back({n + k, (k % 2 == 1) ? +1 : -1});
  c.vertices.push_back(std::move(f));
  c.output_id = 2 * n + 1;
  return c;
}

Circuit build_or_tree(std::uint32_t n) {
  if (n < 1) throw std::invalid_argument("OR tree needs n >= 1");
  Circuit c = with_inputs(Family::AC0, n);
  std::vector<VertexId> frontier;
  for (VertexId id = 1; id <= n; ++id) frontier.push_back(id);
  VertexId next = n + 1;
  while (frontier.size() > 1) {
    std::vector<VertexId> up;
    for (std::size_t k = 0; k + 1 < frontier.size(); k += 2) {
      Vertex g;
      g.id = next++;
      g.type = GateType::Or;
      g.args = {{frontier[k], +1}, {frontier[k + 1], +1}};
      c.vertices.push_back(std::move(g));
      up.push_back(c.vertices.back().id);
    }
    if (frontier.size() % 2 == 1) up.push_back(frontier.back());
    frontier = std::move(up);
  }
  c.output_id = frontier.front();
  return c;
}

Circuit random_circuit(const RandomCircuitParams& prm) {
  if (prm.n_inputs < 1 || prm.depth < 1 || prm.max_fanin < 1) {
    throw std::invalid_argument("random_circuit: n_inputs, depth and max_fanin must be positive");
  }
  if (prm.size_budget < prm.depth) {
    throw std::invalid_argument("random_circuit: size budget " + std::to_string(prm.size_budget) +
                                " is smaller than depth " + std::to_string(prm.depth));
  }
  CounterRng rng(prm.seed);
  const bool tc0 = prm.family == Family::TC0;
  Circuit c = with_inputs(prm.family, prm.n_inputs);

  std::vector<std::uint32_t> counts(prm.depth + 1, 1);
  std::uint32_t total = prm.depth + static_cast<std::uint32_t>(rng.below(prm.size_budget - prm.depth + 1));
  if (prm.depth == 1) total = 1;
  for (std::uint32_t extra = total - prm.depth; extra > 0; --extra) {
    counts[1 + rng.below(prm.depth - 1)] += 1;
  }

  std::vector<std::vector<VertexId>> by_layer(prm.depth + 1);
  std::vector<std::size_t> layer_of(prm.n_inputs + total + 1, 0);
  std::vector<std::uint8_t> used(prm.n_inputs + total + 1, 0);
  for (VertexId id = 1; id <= prm.n_inputs; ++id) by_layer[0].push_back(id);

  auto pick = [&](std::size_t layer, bool prefer_unused) -> VertexId {
    const auto& pool = by_layer[layer];
    if (prefer_unused) {
      std::vector<VertexId> fresh;
      for (VertexId id : pool)
        if (!used[id]) fresh.push_back(id);
      if (!fresh.empty()) return fresh[rng.below(fresh.size())];
    }
    return pool[rng.below(pool.size())];
  };
  auto has_source = [](const Vertex& v, VertexId id) {
    return std::any_of(v.args.begin(), v.args.end(), [&](const Edge& e) { return e.source == id; });
  };
  auto add_edge = [&](Vertex& v, VertexId src) {
    v.args.push_back({src, tc0 && rng.coin() ? -1 : +1});
    used[src] = 1;
  };

  VertexId next = prm.n_inputs + 1;
  for (std::uint32_t l = 1; l <= prm.depth; ++l) {
    for (std::uint32_t g = 0; g < counts[l]; ++g) {
      Vertex v;
      v.id = next++;
      const bool is_output = l == prm.depth;
      if (tc0) {
        v.type = GateType::Thresh;
      } else if (!is_output && rng.below(5) == 0) {
        v.type = GateType::Not;
      } else {
        v.type = rng.coin() ? GateType::And : GateType::Or;
      }
      const std::uint32_t fanin =
          v.type == GateType::Not ? 1 : 1 + static_cast<std::uint32_t>(rng.below(prm.max_fanin));
      add_edge(v, pick(l - 1, true));
      for (std::uint32_t k = 1; k < fanin; ++k) {
        const std::size_t src_layer = rng.below(l);
        const VertexId src = pick(src_layer, rng.coin());
        if (!tc0 && has_source(v, src)) continue;
        add_edge(v, src);
      }
      layer_of[v.id] = l;
      by_layer[l].push_back(v.id);
      c.vertices.push_back(std::move(v));
    }
  }
  c.output_id = c.vertices.back().id;

  // Every gate except the output must feed something above it.
  for (std::size_t k = prm.n_inputs; k < c.vertices.size(); ++k) {
    const VertexId id = c.vertices[k].id;
    if (id == c.output_id || used[id]) continue;
    std::vector<std::size_t> candidates;
    for (std::size_t t = k + 1; t < c.vertices.size(); ++t) {
      const Vertex& u = c.vertices[t];
      if (layer_of[u.id] > layer_of[id] && u.type != GateType::Not && u.args.size() < prm.max_fanin) {
        candidates.push_back(t);
      }
    }
    const std::size_t target = candidates.empty() ? c.vertices.size() - 1 : candidates[rng.below(candidates.size())];
    add_edge(c.vertices[target], id);
  }

  if (tc0) {
    for (std::size_t k = prm.n_inputs; k < c.vertices.size(); ++k) {
      Vertex& v = c.vertices[k];
      const auto m = static_cast<std::int64_t>(v.args.size());
      v.direction = rng.coin() ? Direction::GT : Direction::LT;
      v.theta = v.direction == Direction::GT ? rng.range(-m, m - 1) : rng.range(-m + 1, m);
    }
  }
  return c;
}

}  // namespace pausecc::circuit
