#include "pausecc/circuit.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

namespace pausecc::circuit {

std::size_t Circuit::index_of(VertexId id) const {
  auto it = std::lower_bound(vertices.begin(), vertices.end(), id,
                             [](const Vertex& v, VertexId key) { return v.id < key; });
  if (it == vertices.end() || it->id != id) {
    throw std::out_of_range("no vertex with id " + std::to_string(id));
  }
  return static_cast<std::size_t>(it - vertices.begin());
}

std::string_view to_string(Family f) { return f == Family::AC0 ? "AC0" : "TC0"; }

std::string_view to_string(GateType t) {
  switch (t) {
    case GateType::And: return "AND";
    case GateType::Or: return "OR";
    case GateType::Not: return "NOT";
    case GateType::Thresh: return "THRESH";
  }
  return "?";
}

std::string_view to_string(Direction d) { return d == Direction::GT ? "GT" : "LT"; }

Family parse_family(std::string_view s) {
  if (s == "AC0") return Family::AC0;
  if (s == "TC0") return Family::TC0;
  throw std::invalid_argument("unknown circuit family \"" + std::string(s) + "\" (expected AC0 or TC0)");
}

namespace {

struct Token {
  std::string text;
  std::size_t line;
  std::size_t column;
};

// Splits text into directives: one per line, or per ';'-separated segment.
std::vector<std::vector<Token>> lex(std::string_view text) {
  std::vector<std::vector<Token>> directives;
  std::vector<Token> current;
  std::size_t line = 1, column = 1;
  std::size_t i = 0;
  auto flush = [&] {
    if (!current.empty()) directives.push_back(std::move(current));
    current.clear();
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      flush();
      ++line;
      column = 1;
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == ';') {
      flush();
      ++i;
      ++column;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      ++column;
    } else {
      Token tok{"", line, column};
      while (i < text.size() && text[i] != '\n' && text[i] != ' ' && text[i] != '\t' && text[i] != '\r' &&
             text[i] != ';' && text[i] != '#') {
        tok.text += text[i++];
        ++column;
      }
      current.push_back(std::move(tok));
    }
  }
  flush();
  return directives;
}

[[noreturn]] void syntax_error(const Token& tok, const std::string& what) {
  throw CircuitError("line " + std::to_string(tok.line) + ", column " + std::to_string(tok.column) + ": " + what,
                     tok.line, tok.column);
}

template <typename Int>
Int parse_int(const Token& tok, const char* what) {
  Int v{};
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  if (!tok.text.empty() && tok.text[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    syntax_error(tok, std::string("expected ") + what + ", got \"" + tok.text + "\"");
  }
  return v;
}

}  // namespace

Circuit parse_circuit(std::string_view text) {
  Circuit c;
  bool have_family = false, have_inputs = false, have_output = false;
  bool any_directive = false;

  for (const auto& d : lex(text)) {
    const Token& head = d[0];
    const bool first_directive = !any_directive;
    any_directive = true;
    if (have_output) syntax_error(head, "no directives may follow 'output'");

    if (head.text == "circuit") {
      if (!first_directive) syntax_error(head, "'circuit' must be the first directive");
      if (d.size() != 2) syntax_error(head, "expected 'circuit <AC0|TC0>'");
      if (d[1].text != "AC0" && d[1].text != "TC0") syntax_error(d[1], "unknown family \"" + d[1].text + "\"");
      c.family = parse_family(d[1].text);
      have_family = true;
    } else if (head.text == "inputs") {
      if (have_inputs) syntax_error(head, "duplicate 'inputs' directive");
      if (d.size() != 2) syntax_error(head, "expected 'inputs <n>'");
      const auto n = parse_int<std::uint32_t>(d[1], "input count");
      if (n == 0) syntax_error(d[1], "circuit needs at least one input");
      c.n_inputs = n;
      for (VertexId id = 1; id <= n; ++id) {
        Vertex v;
        v.id = id;
        v.is_input = true;
        c.vertices.push_back(std::move(v));
      }
      have_inputs = true;
    } else if (head.text == "gate") {
      if (!have_inputs) syntax_error(head, "'gate' before 'inputs'");
      if (d.size() < 3) syntax_error(head, "expected 'gate <id> <type> ...'");
      Vertex v;
      v.id = parse_int<VertexId>(d[1], "vertex id");
      const VertexId last = c.vertices.back().id;
      if (v.id == 0) syntax_error(d[1], "vertex ids start at 1");
      if (v.id <= last) {
        const bool dup = std::any_of(c.vertices.begin(), c.vertices.end(),
                                     [&](const Vertex& u) { return u.id == v.id; });
        throw CircuitError("line " + std::to_string(d[1].line) + ": " +
                               (dup ? "duplicate vertex id " : "vertex ids must be strictly increasing at id ") +
                               std::to_string(v.id),
                           d[1].line, d[1].column, v.id);
      }
      const std::string& type = d[2].text;
      std::size_t arg_start = 3;
      if (type == "AND") {
        v.type = GateType::And;
      } else if (type == "OR") {
        v.type = GateType::Or;
      } else if (type == "NOT") {
        v.type = GateType::Not;
      } else if (type == "THRESH") {
        v.type = GateType::Thresh;
        if (d.size() < 5) syntax_error(head, "expected 'gate <id> THRESH <GT|LT> <theta> (+|-<src>)+'");
        if (d[3].text == "GT") {
          v.direction = Direction::GT;
        } else if (d[3].text == "LT") {
          v.direction = Direction::LT;
        } else {
          syntax_error(d[3], "expected GT or LT, got \"" + d[3].text + "\"");
        }
        v.theta = parse_int<std::int64_t>(d[4], "integer threshold");
        arg_start = 5;
      } else {
        syntax_error(d[2], "unknown gate type \"" + type + "\"");
      }
      for (std::size_t k = arg_start; k < d.size(); ++k) {
        Edge e;
        Token tok = d[k];
        if (v.type == GateType::Thresh) {
          if (tok.text.empty() || (tok.text[0] != '+' && tok.text[0] != '-')) {
            syntax_error(tok, "THRESH arguments need an explicit sign, e.g. +3 or -3");
          }
          e.sign = tok.text[0] == '-' ? -1 : +1;
          tok.text.erase(0, 1);
        }
        e.source = parse_int<VertexId>(tok, "source id");
        if (e.source >= v.id) {
          throw CircuitError("line " + std::to_string(tok.line) + ": gate " + std::to_string(v.id) +
                                 " references vertex " + std::to_string(e.source) +
                                 " which does not precede it (forward reference)",
                             tok.line, tok.column, v.id);
        }
        try {
          c.index_of(e.source);
        } catch (const std::out_of_range&) {
          throw CircuitError("line " + std::to_string(tok.line) + ": gate " + std::to_string(v.id) +
                                 " references unknown vertex " + std::to_string(e.source),
                             tok.line, tok.column, v.id);
        }
        v.args.push_back(e);
      }
      if (v.args.empty() || (v.type == GateType::Not && v.args.size() != 1)) {
        throw CircuitError("line " + std::to_string(head.line) + ": arity violation at gate " +
                               std::to_string(v.id) + " (" + std::string(to_string(v.type)) + " with " +
                               std::to_string(v.args.size()) + " arguments)",
                           head.line, head.column, v.id);
      }
      c.vertices.push_back(std::move(v));
    } else if (head.text == "output") {
      if (!have_inputs) syntax_error(head, "'output' before 'inputs'");
      if (d.size() != 2) syntax_error(head, "expected 'output <id>'");
      c.output_id = parse_int<VertexId>(d[1], "vertex id");
      have_output = true;
    } else {
      syntax_error(head, "unknown directive \"" + head.text + "\"");
    }
  }

  if (!have_inputs) throw CircuitError("missing 'inputs' directive");
  if (!have_output) throw CircuitError("missing 'output' directive");
  if (!have_family) {
    const bool thresh = std::any_of(c.vertices.begin(), c.vertices.end(),
                                    [](const Vertex& v) { return !v.is_input && v.type == GateType::Thresh; });
    c.family = thresh ? Family::TC0 : Family::AC0;
  }

  const auto problems = validate(c);
  if (!problems.empty()) {
    std::string msg = "invalid circuit: " + problems.front();
    for (std::size_t k = 1; k < problems.size(); ++k) msg += "; " + problems[k];
    throw CircuitError(msg);
  }
  return c;
}

std::string serialize_circuit(const Circuit& c) {
  std::ostringstream out;
  out << "circuit " << to_string(c.family) << '\n';
  out << "inputs " << c.n_inputs << '\n';
  for (const Vertex& v : c.vertices) {
    if (v.is_input) continue;
    out << "gate " << v.id << ' ' << to_string(v.type);
    if (v.type == GateType::Thresh) {
      out << ' ' << to_string(v.direction) << ' ' << v.theta;
      for (const Edge& e : v.args) out << ' ' << (e.sign < 0 ? '-' : '+') << e.source;
    } else {
      for (const Edge& e : v.args) out << ' ' << e.source;
    }
    out << '\n';
  }
  out << "output " << c.output_id << '\n';
  return out.str();
}

std::vector<std::string> validate(const Circuit& c) {
  std::vector<std::string> out;
  auto at = [](VertexId id) { return "vertex " + std::to_string(id) + ": "; };

  if (c.n_inputs == 0) out.push_back("circuit needs at least one input");
  if (c.vertices.size() < c.n_inputs) {
    out.push_back("fewer vertices than declared inputs");
    return out;
  }
  for (std::size_t k = 0; k < c.vertices.size(); ++k) {
    const Vertex& v = c.vertices[k];
    if (k < c.n_inputs) {
      if (!v.is_input || v.id != k + 1) out.push_back("vertices 1.." + std::to_string(c.n_inputs) + " must be inputs");
      if (!v.args.empty()) out.push_back(at(v.id) + "input vertices take no arguments");
      continue;
    }
    if (v.is_input) out.push_back(at(v.id) + "inputs must precede all gates");
    if (v.id <= c.vertices[k - 1].id) out.push_back(at(v.id) + "ids must be strictly increasing");
    if (v.args.empty()) out.push_back(at(v.id) + "gates with zero fan-in are not allowed");
    if (v.type == GateType::Not && v.args.size() != 1) out.push_back(at(v.id) + "NOT takes exactly one argument");
    if (c.family == Family::AC0 && v.type == GateType::Thresh) out.push_back(at(v.id) + "THRESH gate in an AC0 circuit");
    if (c.family == Family::TC0 && v.type != GateType::Thresh) {
      out.push_back(at(v.id) + std::string(to_string(v.type)) + " gate in a TC0 circuit");
    }
    std::set<VertexId> seen;
    for (const Edge& e : v.args) {
      if (e.source >= v.id) out.push_back(at(v.id) + "forward reference to " + std::to_string(e.source));
      bool exists = true;
      try {
        c.index_of(e.source);
      } catch (const std::out_of_range&) {
        exists = false;
      }
      if (!exists) out.push_back(at(v.id) + "unknown source " + std::to_string(e.source));
      if (e.sign != 1 && e.sign != -1) out.push_back(at(v.id) + "edge sign must be +1 or -1");
      if (v.type != GateType::Thresh && e.sign != 1) out.push_back(at(v.id) + "signed edges are only allowed on THRESH");
      if (c.family == Family::AC0 && !seen.insert(e.source).second) {
        out.push_back(at(v.id) + "duplicate edge from " + std::to_string(e.source) + " in AC0 circuit");
      }
    }
  }

  bool output_known = true;
  try {
    c.index_of(c.output_id);
  } catch (const std::out_of_range&) {
    output_known = false;
    out.push_back("output " + std::to_string(c.output_id) + " is not a vertex");
  }
  if (output_known) {
    if (c.gate_count() == 0) {
      if (c.output_id > c.n_inputs) out.push_back("output must be an input when there are no gates");
    } else {
      if (c.output_id != c.max_id()) out.push_back("output must be the last vertex");
      std::set<VertexId> used;
      for (const Vertex& v : c.vertices)
        for (const Edge& e : v.args) used.insert(e.source);
      for (std::size_t k = c.n_inputs; k < c.vertices.size(); ++k) {
        const VertexId id = c.vertices[k].id;
        if (id != c.output_id && !used.count(id)) out.push_back(at(id) + "gate is a second sink");
      }
      if (used.count(c.output_id)) out.push_back("output " + std::to_string(c.output_id) + " feeds another gate");
    }
  }
  return out;
}

Bits evaluate_all(const Circuit& c, std::span<const std::uint8_t> x) {
  if (x.size() != c.n_inputs) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " bits, circuit expects " +
                                std::to_string(c.n_inputs));
  }
  Bits values(c.vertices.size(), 0);
  std::vector<std::size_t> pos(c.max_id() + 1, 0);
  for (std::size_t k = 0; k < c.vertices.size(); ++k) pos[c.vertices[k].id] = k;
  for (std::size_t k = 0; k < c.vertices.size(); ++k) {
    const Vertex& v = c.vertices[k];
    if (v.is_input) {
      values[k] = x[k] ? 1 : 0;
      continue;
    }
    switch (v.type) {
      case GateType::And: {
        std::uint8_t r = 1;
        for (const Edge& e : v.args) r &= values[pos[e.source]];
        values[k] = r;
        break;
      }
      case GateType::Or: {
        std::uint8_t r = 0;
        for (const Edge& e : v.args) r |= values[pos[e.source]];
        values[k] = r;
        break;
      }
      case GateType::Not:
        values[k] = values[pos[v.args[0].source]] ^ 1;
        break;
      case GateType::Thresh: {
        std::int64_t sum = 0;
        for (const Edge& e : v.args) sum += e.sign * static_cast<std::int64_t>(values[pos[e.source]]);
        values[k] = v.direction == Direction::GT ? (sum > v.theta) : (sum < v.theta);
        break;
      }
    }
  }
  return values;
}

std::uint8_t evaluate(const Circuit& c, std::span<const std::uint8_t> x) {
  return evaluate_all(c, x)[c.index_of(c.output_id)];
}

std::vector<std::size_t> layerize(const Circuit& c) {
  std::vector<std::size_t> layer(c.vertices.size(), 0);
  std::vector<std::size_t> pos(c.max_id() + 1, 0);
  for (std::size_t k = 0; k < c.vertices.size(); ++k) pos[c.vertices[k].id] = k;
  for (std::size_t k = 0; k < c.vertices.size(); ++k) {
    const Vertex& v = c.vertices[k];
    if (v.is_input) continue;
    std::size_t m = 0;
    for (const Edge& e : v.args) m = std::max(m, layer[pos[e.source]]);
    layer[k] = m + 1;
  }
  return layer;
}

DescStats desc_stats(const Circuit& c) {
  DescStats s;
  s.size = c.gate_count();
  s.desc_length = c.n_inputs + s.size;
  for (const Vertex& v : c.vertices) s.desc_length += v.args.size();
  for (std::size_t l : layerize(c)) s.depth = std::max(s.depth, l);
  return s;
}

std::uint64_t circuit_hash(const Circuit& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : serialize_circuit(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

Circuit normalize_thresholds(const Circuit& c) {
  Circuit out = c;
  for (Vertex& v : out.vertices) {
    if (v.is_input || v.type != GateType::Thresh || v.direction == Direction::GT) continue;
    v.direction = Direction::GT;
    v.theta = -v.theta;
    for (Edge& e : v.args) e.sign = -e.sign;
  }
  return out;
}

Bits parse_bits(std::string_view text) {
  Bits bits;
  for (char ch : text) {
    if (ch == '0' || ch == '1') {
      bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    } else if (ch != ',' && ch != ' ' && ch != '_') {
      throw std::invalid_argument("input bits must be 0/1, got '" + std::string(1, ch) + "'");
    }
  }
  return bits;
}

std::string bits_to_string(std::span<const std::uint8_t> bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s += b ? '1' : '0';
  return s;
}

}  // namespace pausecc::circuit
