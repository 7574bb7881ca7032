#pragma once

#include "kval/types.hpp"
#include "kval/util.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace kval {

/// Named trainable tensors with parallel gradient buffers. Iteration order is
/// the lexicographic name order, which keeps optimizers and checkpoints
/// deterministic.
class ParamStore {
 public:
  Mat& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  /// Uniform in ±sqrt(6 / (fan_in + fan_out)), drawn from a seeded stream.
  Mat& create_xavier(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                     SplitMix64& rng);

  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  Mat& get(const std::string& name);
  const Mat& get(const std::string& name) const;
  Mat& grad(const std::string& name);

  void zero_grads();
  std::vector<std::string> names() const;
  std::size_t size() const { return tensors_.size(); }

  /// JSON container with named tensors, dims and a format version.
  void save(const std::filesystem::path& file) const;
  static ParamStore load(const std::filesystem::path& file);

 private:
  std::map<std::string, Mat> tensors_;
  std::map<std::string, Mat> grads_;
};

namespace ad {

class Tape;

struct Value {
  Tape* tape = nullptr;
  int index = -1;
};

/// Define-by-run reverse-mode tape over dense matrices. Forward values are
/// computed eagerly; backward() walks the nodes in reverse.
class Tape {
 public:
  explicit Tape(ParamStore* params = nullptr) : params_(params) {}

  Value constant(Mat m);
  Value scalar(double x);
  /// Leaf bound to a ParamStore tensor; backward() accumulates into its grad.
  Value param(const std::string& name);

  const Mat& value(Value v) const;
  double scalar_value(Value v) const;

  /// Seeds d(root)/d(root) = 1 and accumulates gradients; root must be 1x1.
  void backward(Value root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  friend Value apply(Tape& tape, Mat value, std::vector<Value> parents,
                     std::function<void(const Mat&, std::vector<Mat*>&)> backward);

  struct Node {
    Mat value;
    Mat grad;
    std::vector<int> parents;
    std::function<void(const Mat& upstream, std::vector<Mat*>& parent_grads)> backward;
    std::string param_name;  // non-empty for ParamStore leaves
  };

  std::vector<Node> nodes_;
  ParamStore* params_;
};

// Elementwise and matrix ops. Shapes are validated; violations raise UsageError.
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);  // elementwise
Value emax(Value a, Value b); // elementwise hard max; ties route to `a`
Value matmul(Value a, Value b);
Value scale(Value a, double c);
Value transpose(Value a);
Value rows(Value a, Eigen::Index start, Eigen::Index count);
Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const std::vector<Value>& parts);
/// Adds a column vector to every column of a matrix.
Value add_col_broadcast(Value m, Value col);
/// Adds a 1x1 value to every entry of a matrix.
Value add_scalar_broadcast(Value m, Value scalar);
Value softmax_row(Value a);  // 1xN
Value sigmoid(Value a);
Value gelu(Value a);         // exact erf form
Value sum(Value a);          // -> 1x1
Value mean(Value a);         // -> 1x1
Value mean_cols(Value a);    // RxC -> Rx1
/// Hard max over 1x1 values; the subgradient flows to the first argmax.
Value max_of(const std::vector<Value>& scalars);
/// Elementwise binary cross-entropy against constant targets; predictions
/// are clamped to [eps, 1-eps] (saturated entries get zero gradient).
Value bce(Value predictions, const Mat& targets, double eps = 1e-7);

}  // namespace ad
}  // namespace kval
