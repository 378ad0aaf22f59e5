#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/ledger.hpp"
#include "mkv/rng.hpp"

namespace mkv {

using Vec = std::vector<double>;

// Order-insensitive accumulation: rows are sorted by value before summing, so
// permuting the atoms of an empirical measure leaves the result bit-identical.
class SymmetricSum {
 public:
  explicit SymmetricSum(std::size_t dim) : dim_(dim) {}

  void push(std::span<const double> row) {
    buffer_.insert(buffer_.end(), row.begin(), row.end());
    ++count_;
  }

  std::size_t count() const noexcept { return count_; }

  void sum(std::span<double> out) const {
    std::vector<std::size_t> order(count_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(
          buffer_.begin() + a * dim_, buffer_.begin() + (a + 1) * dim_,
          buffer_.begin() + b * dim_, buffer_.begin() + (b + 1) * dim_);
    });
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t idx : order)
      for (std::size_t c = 0; c < dim_; ++c) out[c] += buffer_[idx * dim_ + c];
  }

  void mean(std::span<double> out) const {
    if (count_ == 0) throw PreconditionError("SymmetricSum: empty mean");
    sum(out);
    for (double& v : out) v /= static_cast<double>(count_);
  }

 private:
  std::size_t dim_;
  std::size_t count_ = 0;
  std::vector<double> buffer_;
};

// View over the atoms of an empirical measure. Atoms may live in any layout
// (current particle states, history frames); the accessor returns a pointer
// to `dim` contiguous doubles.
struct EmpiricalMeasure {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::function<const double*(std::size_t)> atom;

  static EmpiricalMeasure from_flat(const double* data, std::size_t count,
                                    std::size_t dim) {
    return {count, dim, [data, dim](std::size_t i) { return data + i * dim; }};
  }
};

using PairwiseFn = std::function<void(
    std::span<const double>, std::span<const double>, std::span<double>)>;
using FeatureFn =
    std::function<void(std::span<const double>, std::span<double>)>;
using CombineFn = std::function<void(
    std::span<const double>, std::span<const double>, std::span<double>)>;

// Measure dependence of a coefficient, in one of three shapes:
//  - Pairwise: b(x, mu) = (1/m) sum_y b(x, y) over the atoms of mu (O(m)).
//  - FeatureAverage: b(x, mu) = B(x, mean of h over mu); the feature mean can
//    be shared across particles, giving an O(N) step.
//  - Constant: no measure or state dependence (additive noise and friends).
struct InteractionKernel {
  enum class Mode { Pairwise, FeatureAverage, Constant };

  Mode mode = Mode::Constant;
  std::size_t out_dim = 0;
  PairwiseFn pairwise;
  std::size_t feature_dim = 0;
  FeatureFn feature;
  CombineFn combine;
  Vec constant;

  static InteractionKernel make_pairwise(std::size_t out_dim, PairwiseFn fn) {
    InteractionKernel k;
    k.mode = Mode::Pairwise;
    k.out_dim = out_dim;
    k.pairwise = std::move(fn);
    return k;
  }

  static InteractionKernel make_feature_average(std::size_t out_dim,
                                                std::size_t feature_dim,
                                                FeatureFn h, CombineFn b) {
    InteractionKernel k;
    k.mode = Mode::FeatureAverage;
    k.out_dim = out_dim;
    k.feature_dim = feature_dim;
    k.feature = std::move(h);
    k.combine = std::move(b);
    return k;
  }

  static InteractionKernel make_constant(Vec value) {
    InteractionKernel k;
    k.mode = Mode::Constant;
    k.out_dim = value.size();
    k.constant = std::move(value);
    return k;
  }
};

// Mean of the kernel's feature map over the measure. Ledger: one evaluation
// per atom.
inline Vec feature_mean(const InteractionKernel& kernel,
                        const EmpiricalMeasure& measure,
                        CostLedger* ledger = nullptr) {
  if (measure.count == 0)
    throw PreconditionError("feature_mean: empty measure");
  SymmetricSum acc(kernel.feature_dim);
  Vec tmp(kernel.feature_dim);
  for (std::size_t i = 0; i < measure.count; ++i) {
    kernel.feature({measure.atom(i), measure.dim}, tmp);
    acc.push(tmp);
  }
  if (ledger) ledger->kernel_evals += measure.count;
  Vec out(kernel.feature_dim);
  acc.mean(out);
  return out;
}

// Combiner applied to a precomputed feature mean. Ledger: one evaluation.
inline void eval_with_feature_mean(const InteractionKernel& kernel,
                                   std::span<const double> x,
                                   std::span<const double> hbar,
                                   std::span<double> out,
                                   CostLedger* ledger = nullptr) {
  kernel.combine(x, hbar, out);
  if (ledger) ledger->kernel_evals += 1;
}

inline void eval_kernel(const InteractionKernel& kernel,
                        std::span<const double> x,
                        const EmpiricalMeasure& measure, std::span<double> out,
                        CostLedger* ledger = nullptr) {
  switch (kernel.mode) {
    case InteractionKernel::Mode::Constant:
      std::copy(kernel.constant.begin(), kernel.constant.end(), out.begin());
      return;
    case InteractionKernel::Mode::Pairwise: {
      if (measure.count == 0)
        throw PreconditionError("eval_kernel: empty measure");
      if (measure.dim != x.size())
        throw ConfigError("eval_kernel: measure/state dimension mismatch");
      SymmetricSum acc(kernel.out_dim);
      Vec tmp(kernel.out_dim);
      for (std::size_t i = 0; i < measure.count; ++i) {
        kernel.pairwise(x, {measure.atom(i), measure.dim}, tmp);
        acc.push(tmp);
      }
      if (ledger) ledger->kernel_evals += measure.count;
      acc.mean(out);
      return;
    }
    case InteractionKernel::Mode::FeatureAverage: {
      if (measure.dim != x.size())
        throw ConfigError("eval_kernel: measure/state dimension mismatch");
      const Vec hbar = feature_mean(kernel, measure, ledger);
      eval_with_feature_mean(kernel, x, hbar, out, ledger);
      return;
    }
  }
}

inline Vec eval_drift(const InteractionKernel& kernel, std::span<const double> x,
                      const EmpiricalMeasure& measure,
                      CostLedger* ledger = nullptr) {
  Vec out(kernel.out_dim);
  eval_kernel(kernel, x, measure, out, ledger);
  return out;
}

// ---------------------------------------------------------------------------
// Observables

struct Observable {
  std::string name;
  std::function<double(std::span<const double>)> f;
};

inline double eval_observable(const Observable& obs,
                              std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v))
      throw NumericError("eval_observable: non-finite input for " + obs.name);
  return obs.f(x);
}

inline Observable coordinate_observable(std::size_t j) {
  return {"coordinate(" + std::to_string(j) + ")",
          [j](std::span<const double> x) {
            if (j >= x.size())
              throw ConfigError("coordinate observable: index out of range");
            return x[j];
          }};
}

inline Observable squared_norm_observable() {
  return {"squared_norm", [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v * v;
            return s;
          }};
}

// Polynomial in the first coordinate, coefficients in increasing order.
inline Observable polynomial_observable(std::vector<double> coeffs) {
  std::string name = "poly";
  return {std::move(name), [c = std::move(coeffs)](std::span<const double> x) {
            double acc = 0.0;
            for (std::size_t i = c.size(); i-- > 0;) acc = acc * x[0] + c[i];
            return acc;
          }};
}

// ---------------------------------------------------------------------------
// Initial laws

namespace detail {

// Lower Cholesky factor, tolerating semidefinite matrices. Throws on
// asymmetry or negative pivots.
inline std::vector<double> cholesky_psd(const std::vector<double>& cov,
                                        std::size_t d) {
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(cov[i * d + j] - cov[j * d + i]) > 1e-12)
        throw ConfigError("initial law: covariance is not symmetric");
  std::vector<double> L(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i * d + k] * L[j * d + k];
      if (i == j) {
        if (s < -1e-12)
          throw ConfigError("initial law: covariance is not positive semidefinite");
        L[i * d + i] = std::sqrt(std::max(s, 0.0));
      } else {
        L[i * d + j] = L[j * d + j] > 0.0 ? s / L[j * d + j] : 0.0;
      }
    }
  }
  return L;
}

}  // namespace detail

struct InitialLaw {
  enum class Kind { PointMass, Gaussian, EmpiricalFile };

  Kind kind = Kind::PointMass;
  Vec x0;                          // PointMass
  Vec mean;                        // Gaussian
  std::vector<double> chol;        // Gaussian, lower Cholesky of covariance
  std::vector<double> samples;     // EmpiricalFile, row-major
  std::size_t dim = 0;

  static InitialLaw point_mass(Vec x) {
    InitialLaw law;
    law.kind = Kind::PointMass;
    law.dim = x.size();
    law.x0 = std::move(x);
    return law;
  }

  static InitialLaw gaussian(Vec mean, std::vector<double> covariance) {
    InitialLaw law;
    law.kind = Kind::Gaussian;
    law.dim = mean.size();
    if (covariance.size() != law.dim * law.dim)
      throw ConfigError("initial law: covariance size must be d*d");
    law.chol = detail::cholesky_psd(covariance, law.dim);
    law.mean = std::move(mean);
    return law;
  }

  static InitialLaw empirical_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("initial law: cannot read " + path);
    InitialLaw law;
    law.kind = Kind::EmpiricalFile;
    std::string line;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      std::size_t count = 0;
      double v;
      while (row >> v) {
        law.samples.push_back(v);
        ++count;
      }
      if (count == 0) continue;
      if (dim == 0) dim = count;
      if (count != dim)
        throw IoError("initial law: ragged rows in " + path);
    }
    if (law.samples.empty())
      throw IoError("initial law: no samples in " + path);
    law.dim = dim;
    return law;
  }
};

// One sample from the law, driven entirely by the given stream (draw indices
// 0..d-1, or one uniform for the empirical case).
inline Vec sample_one(const InitialLaw& law, const RngStream& rng) {
  switch (law.kind) {
    case InitialLaw::Kind::PointMass:
      return law.x0;
    case InitialLaw::Kind::Gaussian: {
      const std::size_t d = law.dim;
      Vec z(d);
      for (std::size_t c = 0; c < d; ++c) z[c] = rng.normal_at(c);
      Vec x(law.mean);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) x[i] += law.chol[i * d + j] * z[j];
      return x;
    }
    case InitialLaw::Kind::EmpiricalFile: {
      const std::size_t rows = law.samples.size() / law.dim;
      auto idx = static_cast<std::size_t>(rng.uniform_at(0) *
                                          static_cast<double>(rows));
      if (idx >= rows) idx = rows - 1;
      return Vec(law.samples.begin() + static_cast<std::ptrdiff_t>(idx * law.dim),
                 law.samples.begin() +
                     static_cast<std::ptrdiff_t>((idx + 1) * law.dim));
    }
  }
  throw ConfigError("sample_one: unknown initial law kind");
}

// i.i.d. samples, one substream per sample index.
inline std::vector<Vec> sample_initial(const InitialLaw& law, std::size_t count,
                                       std::uint64_t seed) {
  if (count < 1) throw PreconditionError("sample_initial: count must be >= 1");
  std::vector<Vec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream rng(seed, StreamDomain::InitialCondition, {0, 0, i});
    out.push_back(sample_one(law, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

struct ModelSpec {
  std::size_t dim = 1;        // d
  std::size_t noise_dim = 1;  // k
  InteractionKernel drift;
  InteractionKernel diffusion;  // maps to d x k, row-major
  // Optional confining/interaction decomposition of the drift; their sum must
  // equal the drift pointwise.
  std::optional<std::pair<InteractionKernel, InteractionKernel>>
      structural_split;
  InitialLaw initial_law = InitialLaw::point_mass({1.0});
};

enum class KernelStyle { Pairwise, FeatureAverage };

// Scalar linear mean-field model: b(x, y) = -alpha*x + beta*y, sigma = 1.
// Requires alpha > beta (and alpha > 0) for ergodicity.
inline ModelSpec linear_model(double alpha, double beta,
                              KernelStyle style = KernelStyle::Pairwise,
                              InitialLaw initial = InitialLaw::point_mass({1.0})) {
  if (!(alpha > 0.0) || !(alpha > beta))
    throw ConfigError("linear_model: requires alpha > 0 and alpha > beta");
  ModelSpec model;
  model.dim = 1;
  model.noise_dim = 1;
  if (style == KernelStyle::Pairwise) {
    model.drift = InteractionKernel::make_pairwise(
        1, [alpha, beta](std::span<const double> x, std::span<const double> y,
                         std::span<double> out) {
          out[0] = -alpha * x[0] + beta * y[0];
        });
  } else {
    model.drift = InteractionKernel::make_feature_average(
        1, 1,
        [](std::span<const double> y, std::span<double> out) { out[0] = y[0]; },
        [alpha, beta](std::span<const double> x, std::span<const double> hbar,
                      std::span<double> out) {
          out[0] = -alpha * x[0] + beta * hbar[0];
        });
  }
  model.diffusion = InteractionKernel::make_constant({1.0});
  model.structural_split = std::make_pair(
      InteractionKernel::make_pairwise(
          1, [alpha](std::span<const double> x, std::span<const double>,
                     std::span<double> out) { out[0] = -alpha * x[0]; }),
      InteractionKernel::make_pairwise(
          1, [beta](std::span<const double>, std::span<const double> y,
                    std::span<double> out) { out[0] = beta * y[0]; }));
  model.initial_law = std::move(initial);
  return model;
}

}  // namespace mkv
