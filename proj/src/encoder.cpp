// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/encoder.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <fstream>
#include <istream>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {

Mlp Mlp::zeros(std::span<const std::size_t> widths) {
  if (widths.size() < 2) throw DomainError("Mlp needs at least two widths");
  Mlp m;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    if (widths[k] == 0 || widths[k + 1] == 0) {
      throw DomainError("Mlp widths must be positive");
    }
    m.layers.push_back({Matrix(widths[k], widths[k + 1]),
                        Vector(widths[k + 1], 0.0)});
  }
  return m;
}

Mlp Mlp::random(std::span<const std::size_t> widths, std::uint64_t seed,
                double gain) {
  Mlp m = zeros(widths);
  Rng rng(seed, "mlp-init");
  for (auto& layer : m.layers) {
    const double sd = gain / std::sqrt(static_cast<double>(layer.w.rows()));
    for (double& v : layer.w.data()) v = rng.normal(0.0, sd);
  }
  return m;
}

std::size_t Mlp::in_dim() const { return layers.front().w.rows(); }
std::size_t Mlp::out_dim() const { return layers.back().w.cols(); }

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

Vector Mlp::forward(std::span<const double> x) const {
  Cache unused;
  return forward(x, unused);
}

Vector Mlp::forward(std::span<const double> x, Cache& cache) const {
  if (layers.empty()) throw DomainError("Mlp has no layers");
  if (x.size() != in_dim()) {
    throw ShapeError("Mlp input length " + std::to_string(x.size()) +
                     ", expected " + std::to_string(in_dim()));
  }
  cache.inputs.clear();
  cache.pre.clear();
  Vector h(x.begin(), x.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    cache.inputs.push_back(h);
    Vector z = vecmat(h, layers[k].w);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += layers[k].b[j];
    cache.pre.push_back(z);
    if (k + 1 < layers.size()) {
      for (double& v : z) v = v > 0 ? v : 0.0;
    }
    h = std::move(z);
  }
  return h;
}

Vector Mlp::backward(std::span<const double> dout, const Cache& cache,
                     std::span<double> dparams) const {
  if (dparams.size() != param_count()) {
    throw ShapeError("Mlp backward: gradient buffer of wrong length");
  }
  if (dout.size() != out_dim()) throw ShapeError("Mlp backward: bad dout");
  // Offsets of each layer in the flat layout.
  std::vector<std::size_t> offset(layers.size());
  std::size_t pos = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    offset[k] = pos;
    pos += layers[k].w.size() + layers[k].b.size();
  }
  Vector dz(dout.begin(), dout.end());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    if (k + 1 < layers.size()) {
      for (std::size_t j = 0; j < dz.size(); ++j)
        if (cache.pre[k][j] <= 0) dz[j] = 0.0;
    }
    const Vector& in = cache.inputs[k];
    const std::size_t rows = layer.w.rows(), cols = layer.w.cols();
    double* dw = dparams.data() + offset[k];
    for (std::size_t r = 0; r < rows; ++r) {
      if (in[r] == 0.0) continue;
      for (std::size_t c = 0; c < cols; ++c) dw[r * cols + c] += in[r] * dz[c];
    }
    double* db = dw + rows * cols;
    for (std::size_t c = 0; c < cols; ++c) db[c] += dz[c];
    Vector din(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      din[r] = dot(layer.w.row(r), dz);
    dz = std::move(din);
  }
  return dz;
}

Vector Mlp::flatten() const {
  Vector out;
  out.reserve(param_count());
  for (const auto& l : layers) {
    out.insert(out.end(), l.w.data().begin(), l.w.data().end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
  return out;
}

void Mlp::assign(std::span<const double> flat) {
  if (flat.size() != param_count()) {
    throw ShapeError("Mlp assign: expected " + std::to_string(param_count()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  for (auto& l : layers) {
    for (double& v : l.w.data()) v = flat[pos++];
    for (double& v : l.b) v = flat[pos++];
  }
}

void Mlp::step(std::span<const double> grad, double lr) {
  if (grad.size() != param_count()) throw ShapeError("Mlp step: bad gradient");
  std::size_t pos = 0;
  for (auto& l : layers) {
    for (double& v : l.w.data()) v -= lr * grad[pos++];
    for (double& v : l.b) v -= lr * grad[pos++];
  }
}

AdapterParams make_adapter(std::size_t f_enc, std::size_t d, std::size_t e,
                           std::size_t layers, std::uint64_t seed) {
  if (d == 0) throw DomainError("adapter bottleneck d must be >= 1");
  if (d > f_enc) throw DomainError("adapter bottleneck d exceeds f_enc");
  if (layers == 0) throw DomainError("adapter needs at least one layer");
  std::vector<std::size_t> widths{f_enc};
  for (std::size_t k = 1; k < layers; ++k) widths.push_back(d);
  widths.push_back(e);
  return Mlp::random(widths, seed);
}

HeadParams make_identity_head(std::size_t e) {
  const std::size_t widths[] = {e, 2 * e, e};
  Mlp h = Mlp::zeros(widths);
  for (std::size_t j = 0; j < e; ++j) {
    h.layers[0].w(j, j) = 1.0;
    h.layers[0].w(j, e + j) = -1.0;
    h.layers[1].w(j, j) = 1.0;
    h.layers[1].w(e + j, j) = -1.0;
  }
  return h;
}

std::size_t adapter_param_count(const AdapterParams& a) {
  return a.param_count();
}

Vector adapter_forward(const AdapterParams& a, std::span<const double> x) {
  return a.forward(x);
}

Vector head_forward(const std::optional<HeadParams>& h,
                    std::span<const double> g_out) {
  if (!h) return Vector(g_out.begin(), g_out.end());
  return h->forward(g_out);
}

double predict(std::span<const double> p_u, std::span<const double> q_i) {
  return sigmoid(dot(p_u, q_i));
}

std::map<std::string, std::string> parse_item_texts(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError(lineno, "expected item_id<TAB>title");
    }
    std::string id = line.substr(0, tab);
    std::string text = line.substr(tab + 1);
    if (split_whitespace(text).empty()) throw ParseError(lineno, "empty title");
    if (!out.emplace(id, std::move(text)).second) {
      throw ParseError(lineno, "duplicate item id '" + id + "'");
    }
  }
  return out;
}

std::map<std::string, std::string> read_item_texts(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open item manifest " + path.string());
  return parse_item_texts(in);
}

FrozenEncoder FrozenEncoder::from_table(EmbeddingTable table) {
  FrozenEncoder e;
  e.impl_ = TableBacked{std::move(table)};
  return e;
}

FrozenEncoder FrozenEncoder::from_transformer(
    ToyTransformer model, Vocabulary vocab,
    std::map<std::string, std::string> texts) {
  if (vocab.size() > model.shape().vocab) {
    throw ShapeError("vocabulary larger than the transformer's embedding table");
  }
  FrozenEncoder e;
  e.impl_ = TransformerBacked{std::move(model), std::move(vocab),
                              std::move(texts)};
  return e;
}

std::size_t FrozenEncoder::dim() const {
  if (const auto* t = std::get_if<TableBacked>(&impl_)) return t->table.dim();
  return std::get<TransformerBacked>(impl_).model.shape().dim;
}

bool FrozenEncoder::contains(std::string_view item_id) const {
  if (const auto* t = std::get_if<TableBacked>(&impl_)) {
    return t->table.contains(item_id);
  }
  return std::get<TransformerBacked>(impl_).texts.contains(std::string(item_id));
}

Vector FrozenEncoder::encode_item(std::string_view item_id) const {
  if (const auto* t = std::get_if<TableBacked>(&impl_)) {
    return t->table.at(item_id);
  }
  const auto& tb = std::get<TransformerBacked>(impl_);
  auto it = tb.texts.find(std::string(item_id));
  if (it == tb.texts.end()) {
    throw MissingItemError("item '" + std::string(item_id) +
                           "' has no text in the manifest");
  }
  return mean_pool(forward(tb.model, tb.vocab.encode(it->second)));
}

EmbeddingTable FrozenEncoder::materialize(
    std::span<const std::string> ids) const {
  EmbeddingTable table(dim());
  for (const auto& id : ids) table.add(id, encode_item(id));
  return table;
}

namespace {

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : text_(text) {}

  std::string_view next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    start_ = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start_ == pos_) throw FormatError(start_, "mlp: unexpected end of input");
    return text_.substr(start_, pos_ - start_);
  }

  template <typename T>
  T number() {
    const std::string_view tok = next();
    T v{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) {
      throw FormatError(start_, "mlp: bad number '" + std::string(tok) + "'");
    }
    return v;
  }

  bool at_end() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return pos_ == text_.size();
  }
  std::size_t offset() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

}  // namespace

std::string encode_mlp(const Mlp& m) {
  std::string out = "mlp " + std::to_string(m.layers.size()) + "\n";
  char buf[40];
  for (const auto& l : m.layers) {
    out += std::to_string(l.w.rows()) + " " + std::to_string(l.w.cols()) + "\n";
    for (double v : l.w.data()) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", v);
      out += buf;
    }
    for (double v : l.b) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", v);
      out += buf;
    }
  }
  return out;
}

Mlp decode_mlp(std::string_view text) {
  TokenReader r(text);
  if (r.next() != "mlp") throw FormatError(0, "mlp: bad magic");
  const auto depth = r.number<std::size_t>();
  Mlp m;
  std::size_t prev_out = 0;
  for (std::size_t k = 0; k < depth; ++k) {
    const auto in = r.number<std::size_t>();
    const auto out = r.number<std::size_t>();
    if (in == 0 || out == 0 || (k > 0 && in != prev_out)) {
      throw FormatError(r.offset(), "mlp: inconsistent layer widths");
    }
    Mlp::Dense l{Matrix(in, out), Vector(out)};
    for (double& v : l.w.data()) v = r.number<double>();
    for (double& v : l.b) v = r.number<double>();
    m.layers.push_back(std::move(l));
    prev_out = out;
  }
  if (!r.at_end()) throw FormatError(r.offset(), "mlp: trailing data");
  return m;
}

void store_mlp(const Mlp& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << encode_mlp(m);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_mlp(text);
}

}  // namespace transfr
