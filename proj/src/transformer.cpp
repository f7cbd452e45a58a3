// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/transformer.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {

namespace {

void fill_normal(Matrix& m, Rng& rng, double stddev) {
  for (double& v : m.data()) v = rng.normal(0.0, stddev);
}

// Copies head h's column block out of an L x dim matrix.
Matrix head_block(const Matrix& m, std::size_t h, std::size_t dk) {
  Matrix out(m.rows(), dk);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < dk; ++c) out(r, c) = m(r, h * dk + c);
  return out;
}

void add_head_block(Matrix& m, const Matrix& block, std::size_t h,
                    std::size_t dk) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < dk; ++c) m(r, h * dk + c) += block(r, c);
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

void add_bias(Matrix& m, const Vector& b) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += b[c];
}

void add_colsum(Vector& dst, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] += m(r, c);
}

template <typename Visit>
void visit_params(ToyTransformer& m, Visit&& visit) {
  visit(m.token_embedding.data());
  for (auto& l : m.layers) {
    visit(l.wq.data());
    visit(l.wk.data());
    visit(l.wv.data());
    visit(l.wo.data());
    visit(l.w1.data());
    visit(l.b1);
    visit(l.w2.data());
    visit(l.b2);
  }
}

}  // namespace

ToyTransformer::ToyTransformer(const TransformerShape& shape) : shape_(shape) {
  if (shape.dim == 0 || shape.heads == 0 || shape.dim % shape.heads != 0) {
    throw DomainError("transformer dim must be a positive multiple of heads");
  }
  token_embedding = Matrix(shape.vocab, shape.dim);
  layers.resize(shape.layers);
  for (auto& l : layers) {
    l.wq = l.wk = l.wv = l.wo = Matrix(shape.dim, shape.dim);
    l.w1 = Matrix(shape.dim, shape.ffn_dim);
    l.b1 = Vector(shape.ffn_dim, 0.0);
    l.w2 = Matrix(shape.ffn_dim, shape.dim);
    l.b2 = Vector(shape.dim, 0.0);
  }
}

ToyTransformer ToyTransformer::random(const TransformerShape& shape,
                                      std::uint64_t seed,
                                      const TransformerInit& init) {
  ToyTransformer m(shape);
  Rng rng(seed, "transformer-init");
  const double inv_dim = 1.0 / std::sqrt(static_cast<double>(shape.dim));
  fill_normal(m.token_embedding, rng, init.embedding);
  for (auto& l : m.layers) {
    fill_normal(l.wq, rng, init.query_key * inv_dim);
    fill_normal(l.wk, rng, init.query_key * inv_dim);
    fill_normal(l.wv, rng, init.value * inv_dim);
    fill_normal(l.wo, rng, init.output * inv_dim);
    fill_normal(l.w1, rng, init.ffn * inv_dim);
    if (shape.ffn_dim > 0) {
      fill_normal(l.w2, rng,
                  init.ffn / std::sqrt(static_cast<double>(shape.ffn_dim)));
    }
  }
  return m;
}

std::size_t ToyTransformer::param_count() const {
  std::size_t n = token_embedding.size();
  for (const auto& l : layers) {
    n += l.wq.size() + l.wk.size() + l.wv.size() + l.wo.size() + l.w1.size() +
         l.b1.size() + l.w2.size() + l.b2.size();
  }
  return n;
}

Vector ToyTransformer::flatten() const {
  Vector out;
  out.reserve(param_count());
  visit_params(const_cast<ToyTransformer&>(*this), [&](std::vector<double>& v) {
    out.insert(out.end(), v.begin(), v.end());
  });
  return out;
}

void ToyTransformer::assign(std::span<const double> flat) {
  if (flat.size() != param_count()) {
    throw ShapeError("transformer assign: expected " +
                     std::to_string(param_count()) + " values, got " +
                     std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  visit_params(*this, [&](std::vector<double>& v) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + v.size()),
              v.begin());
    pos += v.size();
  });
}

ToyTransformer ToyTransformer::truncated(std::size_t depth) const {
  if (depth > layers.size()) throw DomainError("truncate beyond model depth");
  ToyTransformer out = *this;
  out.layers.resize(depth);
  out.shape_.layers = depth;
  return out;
}

ForwardTrace forward(const ToyTransformer& model,
                     std::span<const std::size_t> tokens) {
  const auto& shape = model.shape();
  if (tokens.empty()) throw DomainError("forward: empty token sequence");
  const std::size_t len = tokens.size();
  const std::size_t dk = model.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  ForwardTrace t;
  t.tokens.assign(tokens.begin(), tokens.end());
  Matrix x(len, shape.dim);
  for (std::size_t i = 0; i < len; ++i) {
    if (tokens[i] >= shape.vocab) {
      throw MissingItemError("token index " + std::to_string(tokens[i]) +
                             " outside vocabulary of " +
                             std::to_string(shape.vocab));
    }
    auto src = model.token_embedding.row(tokens[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  t.states.push_back(x);

  for (const auto& layer : model.layers) {
    const Matrix& in = t.states.back();
    Matrix q = matmul(in, layer.wq);
    Matrix k = matmul(in, layer.wk);
    Matrix v = matmul(in, layer.wv);
    Matrix o(len, shape.dim);
    std::vector<Matrix> heads;
    for (std::size_t h = 0; h < shape.heads; ++h) {
      Matrix scores = matmul_nt(head_block(q, h, dk), head_block(k, h, dk));
      for (double& s : scores.data()) s *= scale;
      Matrix a = softmax_rows(scores);
      add_head_block(o, matmul(a, head_block(v, h, dk)), h, dk);
      heads.push_back(std::move(a));
    }
    Matrix mid = in;
    add_into(mid, matmul(o, layer.wo));
    Matrix pre = matmul(mid, layer.w1);
    add_bias(pre, layer.b1);
    Matrix act = pre;
    for (double& a : act.data()) a = a > 0 ? a : 0.0;
    Matrix out = mid;
    add_into(out, matmul(act, layer.w2));
    add_bias(out, layer.b2);
    if (!all_finite(out.data())) throw NumericError("forward: non-finite state");

    t.attention.push_back(std::move(heads));
    t.q.push_back(std::move(q));
    t.k.push_back(std::move(k));
    t.v.push_back(std::move(v));
    t.attn_out.push_back(std::move(o));
    t.mid.push_back(std::move(mid));
    t.ffn_pre.push_back(std::move(pre));
    t.states.push_back(std::move(out));
  }
  return t;
}

std::vector<std::vector<Matrix>> attention_matrices(
    const ToyTransformer& model, std::span<const std::size_t> tokens) {
  return forward(model, tokens).attention;
}

ToyTransformer backward(const ToyTransformer& model, const ForwardTrace& trace,
                        const BackwardSeeds& seeds) {
  const auto& shape = model.shape();
  const std::size_t len = trace.tokens.size();
  const std::size_t dk = model.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  ToyTransformer grad(shape);

  Matrix dx = seeds.d_final_state.size() ? seeds.d_final_state
                                         : Matrix(len, shape.dim);
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const auto& layer = model.layers[li];
    auto& g = grad.layers[li];
    const Matrix& in = trace.states[li];

    // Feed-forward block: out = mid + relu(pre) W2 + b2.
    Matrix act = trace.ffn_pre[li];
    for (double& a : act.data()) a = a > 0 ? a : 0.0;
    add_into(g.w2, matmul_tn(act, dx));
    add_colsum(g.b2, dx);
    Matrix dpre = matmul_nt(dx, layer.w2);
    for (std::size_t i = 0; i < dpre.size(); ++i)
      if (trace.ffn_pre[li].data()[i] <= 0) dpre.data()[i] = 0.0;
    add_into(g.w1, matmul_tn(trace.mid[li], dpre));
    add_colsum(g.b1, dpre);
    Matrix dmid = dx;
    add_into(dmid, matmul_nt(dpre, layer.w1));

    // Attention block: mid = in + O Wo.
    add_into(g.wo, matmul_tn(trace.attn_out[li], dmid));
    const Matrix d_o = matmul_nt(dmid, layer.wo);
    Matrix dq(len, shape.dim), dk_all(len, shape.dim), dv(len, shape.dim);
    for (std::size_t h = 0; h < shape.heads; ++h) {
      const Matrix& a = trace.attention[li][h];
      const Matrix d_oh = head_block(d_o, h, dk);
      const Matrix vh = head_block(trace.v[li], h, dk);
      Matrix da = matmul_nt(d_oh, vh);
      if (li < seeds.d_attention.size() && !seeds.d_attention[li].empty()) {
        add_into(da, seeds.d_attention[li][h]);
      }
      add_head_block(dv, matmul_tn(a, d_oh), h, dk);
      // Softmax backward, row by row.
      Matrix ds(len, len);
      for (std::size_t r = 0; r < len; ++r) {
        double inner = 0.0;
        for (std::size_t c = 0; c < len; ++c) inner += da(r, c) * a(r, c);
        for (std::size_t c = 0; c < len; ++c)
          ds(r, c) = a(r, c) * (da(r, c) - inner) * scale;
      }
      add_head_block(dq, matmul(ds, head_block(trace.k[li], h, dk)), h, dk);
      add_head_block(dk_all, matmul_tn(ds, head_block(trace.q[li], h, dk)), h,
                     dk);
    }
    add_into(g.wq, matmul_tn(in, dq));
    add_into(g.wk, matmul_tn(in, dk_all));
    add_into(g.wv, matmul_tn(in, dv));
    Matrix din = dmid;
    add_into(din, matmul_nt(dq, layer.wq));
    add_into(din, matmul_nt(dk_all, layer.wk));
    add_into(din, matmul_nt(dv, layer.wv));
    dx = std::move(din);
  }

  if (seeds.d_embedding_state.size()) add_into(dx, seeds.d_embedding_state);
  for (std::size_t i = 0; i < len; ++i) {
    auto dst = grad.token_embedding.row(trace.tokens[i]);
    auto src = dx.row(i);
    for (std::size_t c = 0; c < shape.dim; ++c) dst[c] += src[c];
  }
  return grad;
}

Vector mean_pool(const ForwardTrace& trace) {
  const Matrix& top = trace.states.back();
  Vector out(top.cols(), 0.0);
  for (std::size_t r = 0; r < top.rows(); ++r)
    for (std::size_t c = 0; c < top.cols(); ++c) out[c] += top(r, c);
  for (double& v : out) v /= static_cast<double>(top.rows());
  return out;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

Vocabulary::Vocabulary() { add(std::string(kUnknown)); }

void Vocabulary::add(std::string word) {
  if (index_.contains(word)) return;
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
}

Vocabulary Vocabulary::build(std::span<const std::string> lines) {
  Vocabulary v;
  for (const auto& line : lines)
    for (auto& w : split_whitespace(line)) v.add(std::move(w));
  return v;
}

std::size_t Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? 0 : it->second;
}

std::vector<std::size_t> Vocabulary::encode(std::string_view line) const {
  std::vector<std::size_t> out;
  for (const auto& w : split_whitespace(line)) out.push_back(id(w));
  return out;
}

namespace {

constexpr std::uint32_t kTransformerVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

std::uint64_t get_le(std::string_view bytes, std::size_t& pos, int width) {
  if (bytes.size() - pos < static_cast<std::size_t>(width)) {
    throw FormatError(pos, "truncated transformer file");
  }
  std::uint64_t v = 0;
  for (int k = width - 1; k >= 0; --k)
    v = (v << 8) | static_cast<unsigned char>(bytes[pos + k]);
  pos += width;
  return v;
}

}  // namespace

std::string encode_transformer(const ToyTransformer& model) {
  std::string out = "TFTT";
  put_u32(out, kTransformerVersion);
  const auto& s = model.shape();
  for (std::size_t v : {s.vocab, s.dim, s.heads, s.layers, s.ffn_dim})
    put_u32(out, static_cast<std::uint32_t>(v));
  for (double v : model.flatten()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

ToyTransformer decode_transformer(std::string_view bytes) {
  if (bytes.substr(0, 4) != "TFTT") throw FormatError(0, "bad magic");
  std::size_t pos = 4;
  if (get_le(bytes, pos, 4) != kTransformerVersion) {
    throw FormatError(4, "unsupported version");
  }
  TransformerShape s;
  s.vocab = get_le(bytes, pos, 4);
  s.dim = get_le(bytes, pos, 4);
  s.heads = get_le(bytes, pos, 4);
  s.layers = get_le(bytes, pos, 4);
  s.ffn_dim = get_le(bytes, pos, 4);
  ToyTransformer m(s);
  Vector flat(m.param_count());
  for (double& v : flat) v = std::bit_cast<double>(get_le(bytes, pos, 8));
  if (pos != bytes.size()) throw FormatError(pos, "trailing bytes");
  m.assign(flat);
  return m;
}

void store_transformer(const ToyTransformer& model,
                       const std::filesystem::path& path) {
  const std::string bytes = encode_transformer(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ToyTransformer load_transformer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_transformer(buf.str());
}

}  // namespace transfr
