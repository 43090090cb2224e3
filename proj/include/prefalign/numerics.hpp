#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace prefalign {

/// Thrown when a caller breaks an operation's precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const char* what) {
  if (!cond) throw ContractViolation(what);
}

/// Row-major array of doubles with an explicit shape.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> shape, double fill = 0.0);
  DenseArray(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Contiguous trailing-axis slice starting at flat offset `offset`.
  std::span<double> row(std::size_t offset, std::size_t len) { return {data_.data() + offset, len}; }
  std::span<const double> row(std::size_t offset, std::size_t len) const {
    return {data_.data() + offset, len};
  }

  void fill(double v);
  bool all_finite() const noexcept;
  bool same_shape(const DenseArray& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const DenseArray&, const DenseArray&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// The parameter (or gradient) arrays of one model, in a fixed order.
using ParamSet = std::vector<DenseArray>;

/// Zero-filled arrays with the same shapes as `like`.
ParamSet zeros_like(const ParamSet& like);
void add_scaled(ParamSet& dst, const ParamSet& src, double scale);
double max_abs(const ParamSet& p);

std::vector<double> log_softmax(std::span<const double> logits);
/// Applies log_softmax independently to every slice along the last axis.
DenseArray log_softmax(const DenseArray& logits);
std::vector<double> softmax(std::span<const double> logits);

double log_sigmoid(double x);
double sigmoid(double x);
double softplus(double x);

/// Linear warmup to `base_lr` joined with inverse-square-root decay.
double lr_schedule(std::int64_t step, std::int64_t warmup, double base_lr);

struct OptimizerState {
  ParamSet first_moment;
  ParamSet second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  static OptimizerState for_params(const ParamSet& params, double weight_decay = 0.0);
};

/// One decoupled-weight-decay Adam update with bias correction.
void adamw_step(ParamSet& params, const ParamSet& grads, OptimizerState& state, double lr);

/// Raised by the finite-difference oracle when the objective stops being finite.
class NonFiniteObjective : public std::runtime_error {
 public:
  NonFiniteObjective(std::size_t array, std::size_t coord);
  std::size_t array_index;
  std::size_t coordinate;
};

using Objective = std::function<double(const ParamSet&)>;

/// Central-difference gradient. Coordinates are evaluated in parallel; `f` must be
/// safe to call concurrently on distinct parameter copies.
ParamSet finite_diff_grad(const Objective& f, const ParamSet& params, double eps = 1e-5);
/// Single-threaded reference of the same computation.
ParamSet finite_diff_grad_serial(const Objective& f, const ParamSet& params, double eps = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor); `floor` keeps near-zero entries from dominating.
double max_relative_error(const ParamSet& analytic, const ParamSet& numeric, double floor = 1e-6);

}  // namespace prefalign
