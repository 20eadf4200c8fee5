#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "pausecc/model.hpp"

namespace pausecc::model {

using nlohmann::json;

void SparseMatrix::set(std::size_t r, std::size_t c, const Fp& v) {
  if (r >= rows_ || c >= cols_) {
    throw std::out_of_range("matrix index (" + std::to_string(r) + ", " + std::to_string(c) + ") outside " +
                            std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{r, c}, [](const Entry& e, auto key) {
    return std::pair<std::size_t, std::size_t>{e.row, e.col} < key;
  });
  const bool present = it != entries_.end() && it->row == r && it->col == c;
  if (v.is_zero()) {
    if (present) entries_.erase(it);
  } else if (present) {
    it->value = v;
  } else {
    entries_.insert(it, Entry{static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c), v});
  }
}

std::optional<Fp> SparseMatrix::get(std::size_t r, std::size_t c) const {
  for (const Entry& e : entries_)
    if (e.row == r && e.col == c) return e.value;
  return std::nullopt;
}

bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t k = 0; k < a.entries_.size(); ++k) {
    const Entry& x = a.entries_[k];
    const Entry& y = b.entries_[k];
    if (x.row != y.row || x.col != y.col || x.value != y.value) return false;
  }
  return true;
}

std::string_view to_string(FfnRole r) {
  switch (r) {
    case FfnRole::CopyNegate: return "copy_negate";
    case FfnRole::GateResolve: return "gate_resolve";
    case FfnRole::SignedCopy: return "signed_copy";
    case FfnRole::ThresholdResolve: return "threshold_resolve";
    case FfnRole::Custom: return "custom";
  }
  return "?";
}

FfnRole parse_ffn_role(std::string_view s) {
  for (FfnRole r : {FfnRole::CopyNegate, FfnRole::GateResolve, FfnRole::SignedCopy, FfnRole::ThresholdResolve,
                    FfnRole::Custom}) {
    if (to_string(r) == s) return r;
  }
  throw ModelFormatError("unknown ffn role \"" + std::string(s) + "\"");
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string join(const std::vector<Fp>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ' ';
    out += fp::to_string(xs[k]);
  }
  return out;
}

std::vector<Fp> split(Precision p, const std::string& s, bool round) {
  std::vector<Fp> out;
  std::istringstream in(s);
  std::string word;
  while (in >> word) out.push_back(fp::parse_decimal(p, word, round));
  return out;
}

json matrix_to_json(const SparseMatrix& m) {
  json entries = json::array();
  for (const Entry& e : m.entries()) entries.push_back(json::array({e.row, e.col, fp::to_string(e.value)}));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", std::move(entries)}};
}

SparseMatrix matrix_from_json(Precision p, const json& j, bool round) {
  SparseMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  for (const json& e : j.at("entries")) {
    if (!e.is_array() || e.size() != 3) throw ModelFormatError("matrix entry must be [row, col, value]");
    m.set(e[0].get<std::size_t>(), e[1].get<std::size_t>(), fp::parse_decimal(p, e[2].get<std::string>(), round));
  }
  return m;
}

}  // namespace

std::string serialize_model(const Model& m) {
  json doc;
  doc["format"] = kFormatName;
  doc["format_version"] = kFormatVersion;
  doc["family"] = std::string(circuit::to_string(m.family));
  doc["precision"] = m.precision.bits();
  doc["dims"] = {{"d", m.dim},
                 {"index_width", m.index_width},
                 {"n_inputs", m.n_inputs},
                 {"tokens", m.tokens.size()},
                 {"layers", m.layers.size()}};
  doc["circuit_hash"] = hash_hex(m.circuit_hash);
  doc["pause_token_count"] = m.pause_token_count;
  doc["options"] = {{"compat_g", m.compat_g}, {"clear_gate_values", m.clear_gate_values}};

  json tokens = json::array();
  for (const TokenInfo& t : m.tokens) {
    tokens.push_back({{"kind", std::string(encoder::to_string(t.kind))},
                      {"vertex", t.vertex},
                      {"source", t.source},
                      {"arg_index", t.arg_index},
                      {"embedding", join(t.embedding)}});
  }
  doc["tokens"] = std::move(tokens);

  json layers = json::array();
  for (const ModelLayer& l : m.layers) {
    json heads = json::array();
    for (const AttentionHead& h : l.attention.heads) {
      heads.push_back({{"wqk", matrix_to_json(h.wqk)}, {"wv", matrix_to_json(h.wv)}});
    }
    json dense = json::array();
    for (const DenseLayer& d : l.ffn.layers) {
      dense.push_back({{"activation", d.activation == Activation::Relu ? "relu" : "identity"},
                       {"weight", matrix_to_json(d.weight)},
                       {"bias", join(d.bias)}});
    }
    layers.push_back({{"attention", {{"causal", l.attention.causal}, {"heads", std::move(heads)}}},
                      {"ffn", {{"role", std::string(to_string(l.ffn.role))}, {"layers", std::move(dense)}}}});
  }
  doc["layers"] = std::move(layers);
  doc["readout"] = {{"position", m.readout_position}, {"channel", m.readout_channel}};
  return doc.dump(1) + "\n";
}

Model parse_model(std::string_view text, bool round) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(std::string("model is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatName) {
      throw ModelFormatError("not a " + std::string(kFormatName) + " document");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw ModelFormatError("unsupported format_version " + std::to_string(version) + " (expected " +
                             std::to_string(kFormatVersion) + ")");
    }
    Model m;
    m.family = circuit::parse_family(doc.at("family").get<std::string>());
    m.precision = Precision(doc.at("precision").get<int>());
    const Precision p = m.precision;
    const json& dims = doc.at("dims");
    m.dim = dims.at("d").get<std::size_t>();
    m.index_width = dims.at("index_width").get<int>();
    m.n_inputs = dims.at("n_inputs").get<std::uint32_t>();
    m.circuit_hash = std::stoull(doc.at("circuit_hash").get<std::string>(), nullptr, 16);
    m.pause_token_count = doc.at("pause_token_count").get<std::size_t>();
    if (doc.contains("options")) {
      m.compat_g = doc["options"].value("compat_g", false);
      m.clear_gate_values = doc["options"].value("clear_gate_values", true);
    }
    for (const json& t : doc.at("tokens")) {
      TokenInfo info;
      info.kind = encoder::parse_token_kind(t.at("kind").get<std::string>());
      info.vertex = t.at("vertex").get<circuit::VertexId>();
      info.source = t.value("source", circuit::VertexId{0});
      info.arg_index = t.value("arg_index", std::uint32_t{0});
      info.embedding = split(p, t.at("embedding").get<std::string>(), round);
      m.tokens.push_back(std::move(info));
    }
    for (const json& l : doc.at("layers")) {
      ModelLayer layer;
      const json& att = l.at("attention");
      layer.attention.causal = att.at("causal").get<bool>();
      for (const json& h : att.at("heads")) {
        layer.attention.heads.push_back(
            {matrix_from_json(p, h.at("wqk"), round), matrix_from_json(p, h.at("wv"), round)});
      }
      const json& ffn = l.at("ffn");
      layer.ffn.role = parse_ffn_role(ffn.at("role").get<std::string>());
      for (const json& d : ffn.at("layers")) {
        DenseLayer dl;
        const std::string act = d.at("activation").get<std::string>();
        if (act != "relu" && act != "identity") throw ModelFormatError("unknown activation \"" + act + "\"");
        dl.activation = act == "relu" ? Activation::Relu : Activation::Identity;
        dl.weight = matrix_from_json(p, d.at("weight"), round);
        dl.bias = split(p, d.at("bias").get<std::string>(), round);
        layer.ffn.layers.push_back(std::move(dl));
      }
      m.layers.push_back(std::move(layer));
    }
    m.readout_position = doc.at("readout").at("position").get<std::size_t>();
    m.readout_channel = doc.at("readout").at("channel").get<std::size_t>();
    if (const auto problems = check_model(m); !problems.empty()) throw ModelFormatError(problems.front());
    return m;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  }
}

std::vector<std::string> check_model(const Model& m) {
  std::vector<std::string> out;
  const std::size_t d = m.dim;
  if (m.tokens.empty()) out.push_back("model has no tokens");
  std::size_t inputs = 0;
  for (std::size_t t = 0; t < m.tokens.size(); ++t) {
    if (m.tokens[t].embedding.size() != d) {
      out.push_back("token " + std::to_string(t) + " has embedding size " +
                    std::to_string(m.tokens[t].embedding.size()) + ", expected " + std::to_string(d));
    }
    for (const Fp& v : m.tokens[t].embedding) {
      if (v.bits() != m.precision.bits()) {
        out.push_back("token " + std::to_string(t) + " has an entry at the wrong precision");
        break;
      }
    }
    if (m.tokens[t].kind == encoder::TokenKind::Input) ++inputs;
  }
  if (inputs != m.n_inputs) {
    out.push_back("model declares " + std::to_string(m.n_inputs) + " inputs but has " + std::to_string(inputs) +
                  " input tokens");
  }
  if (m.readout_position >= m.tokens.size()) out.push_back("readout position out of range");
  if (m.readout_channel >= d) out.push_back("readout channel out of range");
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const std::string where = "layer " + std::to_string(l + 1);
    const ModelLayer& layer = m.layers[l];
    if (layer.attention.heads.empty()) out.push_back(where + ": attention has no heads");
    for (const AttentionHead& h : layer.attention.heads) {
      if (h.wqk.rows() != d || h.wqk.cols() != d || h.wv.rows() != d || h.wv.cols() != d) {
        out.push_back(where + ": attention matrices must be " + std::to_string(d) + "x" + std::to_string(d));
      }
    }
    std::size_t width = d;
    for (std::size_t k = 0; k < layer.ffn.layers.size(); ++k) {
      const DenseLayer& dl = layer.ffn.layers[k];
      if (dl.weight.cols() != width) {
        out.push_back(where + ": ffn layer " + std::to_string(k + 1) + " expects input width " +
                      std::to_string(dl.weight.cols()) + ", got " + std::to_string(width));
      }
      if (dl.bias.size() != dl.weight.rows()) {
        out.push_back(where + ": ffn layer " + std::to_string(k + 1) + " bias size mismatch");
      }
      width = dl.weight.rows();
    }
    if (!layer.ffn.layers.empty() && width != d) out.push_back(where + ": ffn output width must equal d");
  }
  return out;
}

std::optional<std::string> hash_warning(const Model& m, const circuit::Circuit& c) {
  const std::uint64_t h = circuit::circuit_hash(c);
  if (h == m.circuit_hash) return std::nullopt;
  return "model circuit_hash " + hash_hex(m.circuit_hash) + " does not match circuit hash " + hash_hex(h);
}

}  // namespace pausecc::model
