// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/theory.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "transfr/errors.hpp"
#include "transfr/parallel.hpp"
#include "transfr/rng.hpp"

namespace transfr {
namespace {

constexpr int kMaxAttempts = 10;
constexpr double kRankTolerance = 1e-8;

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal(0.0, sd);
  return m;
}

// Modified Gram-Schmidt on columns. Returns false when a column collapses.
bool orthonormalize_columns(Matrix& m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double p = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) p += m(i, k) * m(i, j);
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) -= p * m(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) norm += m(i, j) * m(i, j);
    norm = std::sqrt(norm);
    if (norm < kRankTolerance) return false;
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) /= norm;
  }
  return true;
}

bool full_column_rank(Matrix m) { return orthonormalize_columns(m); }

double frob2(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t k = 0; k < out.data().size(); ++k) out.data()[k] -= b.data()[k];
  return out;
}

void axpy(Matrix& y, double alpha, const Matrix& x) {
  for (std::size_t k = 0; k < y.data().size(); ++k) y.data()[k] += alpha * x.data()[k];
}

std::vector<Matrix> targets(const LinearInstance& inst) {
  std::vector<Matrix> t;
  for (const auto& b : inst.b_star) t.push_back(matmul(inst.a_star, b));
  return t;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

LinearInstance make_instance(std::size_t l, std::size_t f, std::size_t d,
                             std::size_t n, double tau, std::uint64_t seed) {
  if (!(l >= f && f >= d && d >= 1) || n < 1) {
    throw DomainError("make_instance: need L >= f >= d >= 1 and n >= 1");
  }
  if (!(tau >= 0)) throw DomainError("make_instance: tau must be >= 0");
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(seed + static_cast<std::uint64_t>(attempt), "linear-instance");
    LinearInstance inst;
    inst.tau = tau;
    inst.a_star = gaussian(l, f, rng);
    if (!orthonormalize_columns(inst.a_star)) continue;
    inst.b_bar = gaussian(f, d, rng);
    if (!full_column_rank(inst.b_bar)) continue;
    for (std::size_t u = 0; u < n; ++u) {
      Matrix b = inst.b_bar;
      axpy(b, tau, gaussian(f, d, rng));
      inst.b_star.push_back(std::move(b));
    }
    return inst;
  }
  throw NumericError("make_instance: rank-deficient draw in " +
                     std::to_string(kMaxAttempts) + " attempts");
}

double personalized_objective(const LinearInstance& inst, const Matrix& a,
                              std::span<const Matrix> b) {
  if (b.size() != inst.clients()) {
    throw ShapeError("personalized_objective: one B per client required");
  }
  double s = 0.0;
  for (std::size_t u = 0; u < b.size(); ++u) {
    s += frob2(sub(matmul(a, b[u]), matmul(inst.a_star, inst.b_star[u])));
  }
  return s / static_cast<double>(b.size());
}

PersonalizedFit fit_personalized(const LinearInstance& inst, int iters,
                                 double lr, std::uint64_t seed,
                                 double tolerance) {
  if (iters < 1) throw DomainError("fit_personalized: iters must be >= 1");
  if (!(lr > 0)) throw DomainError("fit_personalized: lr must be > 0");
  const std::size_t n = inst.clients();
  const std::size_t l = inst.a_star.rows(), f = inst.a_star.cols(),
                    d = inst.b_bar.cols();
  Rng rng(seed, "personalized-init");
  Matrix a = gaussian(l, f, rng, 0.1);
  std::vector<Matrix> b;
  for (std::size_t u = 0; u < n; ++u) b.push_back(gaussian(f, d, rng, 0.1));
  const auto t = targets(inst);
  const double inv_n = 1.0 / static_cast<double>(n);

  PersonalizedFit fit;
  for (int it = 0; it < iters; ++it) {
    std::vector<Matrix> r(n);
    double obj = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      r[u] = sub(matmul(a, b[u]), t[u]);
      obj += frob2(r[u]);
    }
    obj *= inv_n;
    if (!std::isfinite(obj) || (!fit.trace.empty() && obj > fit.trace.back() * (1 + 1e-12) + 1e-300)) {
      throw DivergenceError(it, "fit_personalized: objective increased; lower the step size");
    }
    fit.trace.push_back(obj);
    if (obj < tolerance) {
      fit.objective = obj;
      return fit;
    }
    Matrix ga(l, f);
    for (std::size_t u = 0; u < n; ++u) axpy(ga, 2.0 * inv_n, matmul_nt(r[u], b[u]));
    for (std::size_t u = 0; u < n; ++u) axpy(b[u], -lr * 2.0, matmul_tn(a, r[u]));
    axpy(a, -lr, ga);
  }
  fit.objective = personalized_objective(inst, a, b);
  if (!std::isfinite(fit.objective) || fit.objective > fit.trace.back()) {
    throw DivergenceError(iters, "fit_personalized: objective increased; lower the step size");
  }
  fit.trace.push_back(fit.objective);
  return fit;
}

double fit_shared(const LinearInstance& inst) {
  const std::size_t n = inst.clients();
  Matrix mean(inst.b_bar.rows(), inst.b_bar.cols());
  for (const auto& b : inst.b_star) axpy(mean, 1.0 / static_cast<double>(n), b);
  double s = 0.0;
  for (const auto& b : inst.b_star) s += frob2(matmul(inst.a_star, sub(b, mean)));
  return s / static_cast<double>(n);
}

double fit_shared_iterative(const LinearInstance& inst, int iters, double lr,
                            std::uint64_t seed) {
  const std::size_t n = inst.clients();
  Rng rng(seed, "shared-init");
  Matrix a = gaussian(inst.a_star.rows(), inst.a_star.cols(), rng, 0.1);
  Matrix b = gaussian(inst.b_bar.rows(), inst.b_bar.cols(), rng, 0.1);
  const auto t = targets(inst);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < iters; ++it) {
    Matrix r(a.rows(), b.cols());
    const Matrix ab = matmul(a, b);
    for (const auto& tu : t) axpy(r, inv_n, sub(ab, tu));
    // Gradient of the averaged objective only depends on the mean residual.
    const Matrix ga = matmul_nt(r, b);
    const Matrix gb = matmul_tn(a, r);
    axpy(a, -2.0 * lr, ga);
    axpy(b, -2.0 * lr, gb);
  }
  double s = 0.0;
  const Matrix ab = matmul(a, b);
  for (const auto& tu : t) s += frob2(sub(ab, tu));
  return s * inv_n;
}

std::vector<SweepRow> heterogeneity_sweep(const SweepConfig& cfg) {
  if (cfg.taus.empty()) throw DomainError("heterogeneity_sweep: empty tau list");
  std::vector<SweepRow> rows(cfg.taus.size());
  parallel_for(cfg.taus.size(), cfg.threads, [&](std::size_t k) {
    const auto inst = make_instance(cfg.l, cfg.f, cfg.d, cfg.n, cfg.taus[k], cfg.seed);
    rows[k].tau = cfg.taus[k];
    rows[k].personalized =
        fit_personalized(inst, cfg.iters, cfg.lr, cfg.seed, cfg.tolerance).objective;
    rows[k].shared = fit_shared(inst);
  });
  return rows;
}

std::string format_record(const SweepRow& row) {
  return "theory tau=" + fmt(row.tau) + " personalized=" + fmt(row.personalized) +
         " shared=" + fmt(row.shared);
}

std::string format_table(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "   tau   personalized         shared\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%6.2f  %13.6e  %13.6e\n", r.tau,
                  r.personalized, r.shared);
    out << line;
  }
  return out.str();
}

}  // namespace transfr
