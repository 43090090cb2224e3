#include "prefalign/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <omp.h>

namespace prefalign {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  require(!shape.empty(), "DenseArray: shape must have at least one axis");
  for (auto d : shape) require(d > 0, "DenseArray: every axis must be positive");
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  require(product(shape_) == data_.size(), "DenseArray: data length must equal product(shape)");
}

void DenseArray::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ParamSet zeros_like(const ParamSet& like) {
  ParamSet out;
  out.reserve(like.size());
  for (const auto& a : like) out.emplace_back(a.shape(), 0.0);
  return out;
}

void add_scaled(ParamSet& dst, const ParamSet& src, double scale) {
  require(dst.size() == src.size(), "add_scaled: parameter count mismatch");
  for (std::size_t k = 0; k < dst.size(); ++k) {
    require(dst[k].same_shape(src[k]), "add_scaled: shape mismatch");
    for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] += scale * src[k][i];
  }
}

double max_abs(const ParamSet& p) {
  double m = 0.0;
  for (const auto& a : p)
    for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  require(!logits.empty(), "log_softmax: empty axis");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_sum = std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - mx) - log_sum;
  return out;
}

DenseArray log_softmax(const DenseArray& logits) {
  require(logits.rank() >= 1, "log_softmax: rank must be >= 1");
  const std::size_t last = logits.shape().back();
  DenseArray out(logits.shape());
  for (std::size_t off = 0; off < logits.size(); off += last) {
    auto row = log_softmax(logits.row(off, last));
    std::copy(row.begin(), row.end(), out.data() + off);
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large x or underflow loss for very negative x
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double log_sigmoid(double x) { return -softplus(-x); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double lr_schedule(std::int64_t step, std::int64_t warmup, double base_lr) {
  require(warmup > 0, "lr_schedule: warmup must be positive");
  require(step >= 1, "lr_schedule: step must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return base_lr * std::min(s / w, std::sqrt(w / s));
}

OptimizerState OptimizerState::for_params(const ParamSet& params, double weight_decay) {
  OptimizerState st;
  st.first_moment = zeros_like(params);
  st.second_moment = zeros_like(params);
  st.weight_decay = weight_decay;
  return st;
}

void adamw_step(ParamSet& params, const ParamSet& grads, OptimizerState& state, double lr) {
  require(params.size() == grads.size(), "adamw_step: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    state.first_moment = zeros_like(params);
    state.second_moment = zeros_like(params);
  }
  require(state.first_moment.size() == params.size(), "adamw_step: optimizer state does not match params");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k].same_shape(grads[k]), "adamw_step: gradient shape mismatch");
    require(params[k].same_shape(state.first_moment[k]), "adamw_step: moment shape mismatch");
    require(grads[k].all_finite(), "adamw_step: non-finite gradient");
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    const auto& g = grads[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + state.epsilon) + state.weight_decay * p[i]);
    }
  }
}

NonFiniteObjective::NonFiniteObjective(std::size_t array, std::size_t coord)
    : std::runtime_error("finite_diff_grad: objective is not finite at array " + std::to_string(array) +
                         ", coordinate " + std::to_string(coord)),
      array_index(array),
      coordinate(coord) {}

namespace {

double central_difference(const Objective& f, ParamSet& work, std::size_t k, std::size_t i, double eps) {
  const double orig = work[k][i];
  work[k][i] = orig + eps;
  const double fp = f(work);
  work[k][i] = orig - eps;
  const double fm = f(work);
  work[k][i] = orig;
  if (!std::isfinite(fp) || !std::isfinite(fm)) throw NonFiniteObjective(k, i);
  return (fp - fm) / (2.0 * eps);
}

void check_eps(double eps) { require(eps >= 1e-7 && eps <= 1e-3, "finite_diff_grad: eps must lie in [1e-7, 1e-3]"); }

}  // namespace

ParamSet finite_diff_grad_serial(const Objective& f, const ParamSet& params, double eps) {
  check_eps(eps);
  ParamSet grad = zeros_like(params);
  ParamSet work = params;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k].size(); ++i) grad[k][i] = central_difference(f, work, k, i, eps);
  return grad;
}

ParamSet finite_diff_grad(const Objective& f, const ParamSet& params, double eps) {
  check_eps(eps);
  ParamSet grad = zeros_like(params);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k].size(); ++i) coords.emplace_back(k, i);

  const auto n = static_cast<std::int64_t>(coords.size());
  std::exception_ptr failure;
#pragma omp parallel
  {
    ParamSet work = params;
#pragma omp for schedule(static)
    for (std::int64_t c = 0; c < n; ++c) {
      const auto [k, i] = coords[static_cast<std::size_t>(c)];
      try {
        grad[k][i] = central_difference(f, work, k, i, eps);
      } catch (...) {
#pragma omp critical(prefalign_fd_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return grad;
}

double max_relative_error(const ParamSet& analytic, const ParamSet& numeric, double floor) {
  require(analytic.size() == numeric.size(), "max_relative_error: parameter count mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    require(analytic[k].same_shape(numeric[k]), "max_relative_error: shape mismatch");
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k][i];
      const double b = numeric[k][i];
      const double denom = std::max({std::abs(a), std::abs(b), floor});
      worst = std::max(worst, std::abs(a - b) / denom);
    }
  }
  return worst;
}

}  // namespace prefalign
