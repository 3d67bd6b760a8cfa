#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace refdepth::ad {

template <typename S>
struct TensorData {
  std::vector<int> dims;
  std::vector<S> val;
  std::vector<S> grad;
  std::string name;  // parameters and buffers only
};

/// Shared handle to a value+gradient array in the computation graph.
/// Values are the scalar type S (float in production; the test suites
/// instantiate double for finite-difference oracles).
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> dims, std::string name = {}) {
    auto data = std::make_shared<TensorData<S>>();
    int64_t n = 1;
    for (int d : dims) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
      n *= d;
    }
    data->dims = std::move(dims);
    data->val.assign(static_cast<size_t>(n), S(0));
    data->grad.assign(static_cast<size_t>(n), S(0));
    data->name = std::move(name);
    return Tensor(std::move(data));
  }

  bool defined() const { return static_cast<bool>(data_); }
  const std::vector<int>& dims() const { return data_->dims; }
  int64_t numel() const { return static_cast<int64_t>(data_->val.size()); }
  const std::string& name() const { return data_->name; }

  S* val() { return data_->val.data(); }
  const S* val() const { return data_->val.data(); }
  S* grad() { return data_->grad.data(); }
  const S* grad() const { return data_->grad.data(); }

  std::vector<S>& val_vec() { return data_->val; }
  std::vector<S>& grad_vec() { return data_->grad; }
  const std::vector<S>& val_vec() const { return data_->val; }

  // 4D accessors (batch, channels, height, width).
  int dim(int i) const { return data_->dims[i]; }
  int rank() const { return static_cast<int>(data_->dims.size()); }

  bool same_data(const Tensor& o) const { return data_ == o.data_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData<S>> data) : data_(std::move(data)) {}
  std::shared_ptr<TensorData<S>> data_;
};

inline int64_t numel_of(const std::vector<int>& dims) {
  return std::accumulate(dims.begin(), dims.end(), int64_t{1},
                         [](int64_t a, int b) { return a * b; });
}

}  // namespace refdepth::ad
