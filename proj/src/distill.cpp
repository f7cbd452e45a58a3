// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/distill.hpp"

#include <cmath>
#include <string>

#include "transfr/errors.hpp"
#include "transfr/parallel.hpp"

namespace transfr {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(Vector& params, const Vector& grad, double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  Vector m_, v_;
  int t_ = 0;
};

}  // namespace

std::size_t layer_map(std::size_t z, std::size_t teacher_layers,
                      std::size_t stride) {
  const std::size_t mapped = stride * z;
  if (mapped > teacher_layers) {
    throw ConfigError("layer map: student layer " + std::to_string(z) +
                      " maps to teacher layer " + std::to_string(mapped) +
                      " but the teacher has " + std::to_string(teacher_layers));
  }
  return mapped;
}

double attn_loss(std::span<const Matrix> student,
                 std::span<const Matrix> teacher) {
  if (student.size() != teacher.size() || student.empty()) {
    throw ShapeError("attn_loss: head counts " +
                     std::to_string(student.size()) + " vs " +
                     std::to_string(teacher.size()));
  }
  double total = 0.0;
  for (std::size_t h = 0; h < student.size(); ++h) {
    const Matrix& a = student[h];
    const Matrix& b = teacher[h];
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw ShapeError("attn_loss: head " + std::to_string(h) + " " + dims(a) +
                       " vs " + dims(b));
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a.data()[i] - b.data()[i];
      sq += d * d;
    }
    total += sq / static_cast<double>(a.size());
  }
  return total / static_cast<double>(student.size());
}

double embed_loss(const Matrix& student_embed, const Matrix& projection,
                  const Matrix& teacher_embed) {
  const Matrix proj = matmul(student_embed, projection);
  if (proj.rows() != teacher_embed.rows() ||
      proj.cols() != teacher_embed.cols()) {
    throw ShapeError("embed_loss: projected " + dims(proj) + " vs teacher " +
                     dims(teacher_embed));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    const double d = proj.data()[i] - teacher_embed.data()[i];
    sq += d * d;
  }
  return sq / static_cast<double>(proj.size());
}

namespace {

// d embed_loss / d (E_stu W), an L x f' matrix.
Matrix embed_residual_grad(const Matrix& student_embed,
                           const Matrix& projection,
                           const Matrix& teacher_embed) {
  Matrix r = matmul(student_embed, projection);
  if (r.rows() != teacher_embed.rows() || r.cols() != teacher_embed.cols()) {
    throw ShapeError("embed_loss: projected " + dims(r) + " vs teacher " +
                     dims(teacher_embed));
  }
  const double scale = 2.0 / static_cast<double>(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    r.data()[i] = scale * (r.data()[i] - teacher_embed.data()[i]);
  return r;
}

}  // namespace

Matrix embed_loss_grad_projection(const Matrix& student_embed,
                                  const Matrix& projection,
                                  const Matrix& teacher_embed) {
  return matmul_tn(student_embed, embed_residual_grad(student_embed, projection,
                                                      teacher_embed));
}

void validate_pair(const ToyTransformer& student, const ToyTransformer& teacher,
                   const Matrix& projection, const HkdConfig& cfg) {
  for (std::size_t z = 0; z <= student.layers.size(); ++z) {
    layer_map(z, teacher.layers.size(), cfg.layer_stride);
  }
  if (student.shape().heads != teacher.shape().heads) {
    throw ShapeError("student and teacher head counts differ");
  }
  if (projection.rows() != student.shape().dim ||
      projection.cols() != teacher.shape().dim) {
    throw ShapeError("projection must be " +
                     std::to_string(student.shape().dim) + "x" +
                     std::to_string(teacher.shape().dim) + ", got " +
                     dims(projection));
  }
}

double hkd_loss(const ToyTransformer& student, const ToyTransformer& teacher,
                const Matrix& projection, std::span<const std::size_t> tokens,
                const HkdConfig& cfg) {
  validate_pair(student, teacher, projection, cfg);
  const ForwardTrace s = forward(student, tokens);
  const ForwardTrace t = forward(teacher, tokens);
  double loss = cfg.embed_weight * embed_loss(s.states[0], projection, t.states[0]);
  for (std::size_t z = 1; z <= student.layers.size(); ++z) {
    const std::size_t p = layer_map(z, teacher.layers.size(), cfg.layer_stride);
    loss += cfg.attn_weight * attn_loss(s.attention[z - 1], t.attention[p - 1]);
  }
  return loss;
}

HkdGradients hkd_gradients(const ToyTransformer& student,
                           const ForwardTrace& teacher_trace,
                           const Matrix& projection, const HkdConfig& cfg) {
  const ForwardTrace s = forward(student, teacher_trace.tokens);
  const std::size_t teacher_depth = teacher_trace.attention.size();
  HkdGradients out;

  const Matrix& e_tea = teacher_trace.states[0];
  out.loss = cfg.embed_weight * embed_loss(s.states[0], projection, e_tea);
  Matrix d_proj_out = embed_residual_grad(s.states[0], projection, e_tea);
  for (double& v : d_proj_out.data()) v *= cfg.embed_weight;
  out.projection = matmul_tn(s.states[0], d_proj_out);

  BackwardSeeds seeds;
  seeds.d_embedding_state = matmul_nt(d_proj_out, projection);
  seeds.d_attention.resize(student.layers.size());
  for (std::size_t z = 1; z <= student.layers.size(); ++z) {
    const std::size_t p = layer_map(z, teacher_depth, cfg.layer_stride);
    const auto& stu = s.attention[z - 1];
    const auto& tea = teacher_trace.attention[p - 1];
    out.loss += cfg.attn_weight * attn_loss(stu, tea);
    auto& seed = seeds.d_attention[z - 1];
    for (std::size_t h = 0; h < stu.size(); ++h) {
      Matrix d(stu[h].rows(), stu[h].cols());
      const double scale = cfg.attn_weight * 2.0 /
                           (static_cast<double>(stu.size()) *
                            static_cast<double>(stu[h].size()));
      for (std::size_t i = 0; i < d.size(); ++i)
        d.data()[i] = scale * (stu[h].data()[i] - tea[h].data()[i]);
      seed.push_back(std::move(d));
    }
  }
  out.student = backward(student, s, seeds);
  return out;
}

DistillResult distill_train(const ToyTransformer& teacher,
                            ToyTransformer student, Matrix projection,
                            std::span<const TokenSequence> corpus,
                            const HkdConfig& cfg) {
  if (corpus.empty()) throw PreconditionError("distill_train: empty corpus");
  if (cfg.epochs < 0) throw ConfigError("distill_train: negative epochs");
  if (cfg.learning_rate < 0) throw ConfigError("distill_train: negative lr");
  validate_pair(student, teacher, projection, cfg);

  std::vector<ForwardTrace> teacher_traces(corpus.size());
  parallel_for(corpus.size(), cfg.threads, [&](std::size_t i) {
    teacher_traces[i] = forward(teacher, corpus[i]);
  });

  const std::size_t n_student = student.param_count();
  Vector params = student.flatten();
  params.insert(params.end(), projection.data().begin(),
                projection.data().end());
  Adam adam(params.size());
  DistillResult result;

  const double inv_n = 1.0 / static_cast<double>(corpus.size());
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    std::vector<HkdGradients> per_seq(corpus.size());
    parallel_for(corpus.size(), cfg.threads, [&](std::size_t i) {
      per_seq[i] = hkd_gradients(student, teacher_traces[i], projection, cfg);
    });
    // Ordered reduction keeps the result independent of thread count.
    double loss = 0.0;
    Vector grad(params.size(), 0.0);
    for (const auto& g : per_seq) {
      loss += g.loss;
      const Vector gs = g.student.flatten();
      for (std::size_t k = 0; k < n_student; ++k) grad[k] += gs[k];
      for (std::size_t k = 0; k < g.projection.size(); ++k)
        grad[n_student + k] += g.projection.data()[k];
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) throw DivergenceError(epoch, "non-finite hkd loss");
    result.loss_trace.push_back(loss);
    if (epoch == cfg.epochs) break;
    if (cfg.learning_rate == 0.0) {
      // Parameters never move, so every later epoch sees the same loss.
      result.loss_trace.resize(static_cast<std::size_t>(cfg.epochs) + 1, loss);
      break;
    }
    for (double& g : grad) g *= inv_n;
    if (cfg.optimizer == Optimizer::kAdam) {
      adam.step(params, grad, cfg.learning_rate);
    } else {
      for (std::size_t k = 0; k < params.size(); ++k)
        params[k] -= cfg.learning_rate * grad[k];
    }
    student.assign(std::span<const double>(params).first(n_student));
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(n_student),
              params.end(), projection.data().begin());
  }
  result.student = std::move(student);
  result.projection = std::move(projection);
  return result;
}

}  // namespace transfr
