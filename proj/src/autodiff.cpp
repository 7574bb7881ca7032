#include "kval/autodiff.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace kval {

using nlohmann::json;

Mat& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (contains(name)) throw UsageError("ParamStore: duplicate tensor " + name);
  tensors_[name] = Mat::Zero(rows, cols);
  grads_[name] = Mat::Zero(rows, cols);
  return tensors_[name];
}

Mat& ParamStore::create_xavier(const std::string& name, Eigen::Index rows,
                               Eigen::Index cols, SplitMix64& rng) {
  Mat& m = create(name, rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = bound * rng.next_signed_unit();
  return m;
}

Mat& ParamStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw UsageError("ParamStore: unknown tensor " + name);
  return it->second;
}

const Mat& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw UsageError("ParamStore: unknown tensor " + name);
  return it->second;
}

Mat& ParamStore::grad(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw UsageError("ParamStore: unknown tensor " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads_) g.setZero();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

void ParamStore::save(const std::filesystem::path& file) const {
  json tensors = json::object();
  for (const auto& [name, m] : tensors_) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    tensors[name] = json{{"dims", {m.rows(), m.cols()}}, {"data", std::move(data)}};
  }
  json doc{{"format_version", 1}, {"tensors", std::move(tensors)}};
  std::ofstream out(file);
  if (!out) throw DataError("checkpoint: cannot write " + file.string());
  out << doc.dump(2) << "\n";
}

ParamStore ParamStore::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("checkpoint: cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint: invalid JSON in " + file.string() + ": " + e.what());
  }
  if (doc.value("format_version", 0) != 1)
    throw DataError("checkpoint: unsupported format_version in " + file.string());
  ParamStore store;
  for (const auto& [name, t] : doc.at("tensors").items()) {
    const auto& dims = t.at("dims");
    const auto rows = dims.at(0).get<Eigen::Index>();
    const auto cols = dims.at(1).get<Eigen::Index>();
    const auto& data = t.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw DataError("checkpoint: tensor " + name + " has wrong element count");
    Mat& m = store.create(name, rows, cols);
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data.at(idx++).get<double>();
  }
  return store;
}

namespace ad {

Value Tape::constant(Mat m) {
  Node node;
  node.value = std::move(m);
  node.grad = Mat::Zero(node.value.rows(), node.value.cols());
  nodes_.push_back(std::move(node));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::scalar(double x) { return constant(Mat::Constant(1, 1, x)); }

Value Tape::param(const std::string& name) {
  if (params_ == nullptr) throw UsageError("Tape: no ParamStore bound");
  Node node;
  node.value = params_->get(name);
  node.grad = Mat::Zero(node.value.rows(), node.value.cols());
  node.param_name = name;
  nodes_.push_back(std::move(node));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Value v) const {
  return nodes_.at(static_cast<std::size_t>(v.index)).value;
}

double Tape::scalar_value(Value v) const {
  const Mat& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw UsageError("Tape: value is not scalar");
  return m(0, 0);
}

void Tape::backward(Value root) {
  Node& r = nodes_.at(static_cast<std::size_t>(root.index));
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw UsageError("Tape: backward root must be 1x1");
  r.grad(0, 0) += 1.0;
  for (int i = root.index; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.backward) continue;
    std::vector<Mat*> parent_grads;
    parent_grads.reserve(node.parents.size());
    for (int p : node.parents)
      parent_grads.push_back(&nodes_[static_cast<std::size_t>(p)].grad);
    node.backward(node.grad, parent_grads);
  }
  if (params_ != nullptr) {
    for (const Node& node : nodes_)
      if (!node.param_name.empty()) params_->grad(node.param_name) += node.grad;
  }
}

Value apply(Tape& tape, Mat value, std::vector<Value> parents,
            std::function<void(const Mat&, std::vector<Mat*>&)> backward) {
  Tape::Node node;
  node.value = std::move(value);
  node.grad = Mat::Zero(node.value.rows(), node.value.cols());
  for (const Value& p : parents) {
    if (p.tape != &tape) throw UsageError("Tape: mixing values across tapes");
    node.parents.push_back(p.index);
  }
  node.backward = std::move(backward);
  tape.nodes_.push_back(std::move(node));
  return Value{&tape, static_cast<int>(tape.nodes_.size()) - 1};
}

namespace {

Tape& tape_of(Value v) {
  if (v.tape == nullptr) throw UsageError("ad: value has no tape");
  return *v.tape;
}

const Mat& val(Value v) { return tape_of(v).value(v); }

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw UsageError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
}

}  // namespace

Value add(Value a, Value b) {
  require_same_shape(val(a), val(b), "add");
  return apply(tape_of(a), val(a) + val(b), {a, b},
               [](const Mat& g, std::vector<Mat*>& p) {
                 *p[0] += g;
                 *p[1] += g;
               });
}

Value sub(Value a, Value b) {
  require_same_shape(val(a), val(b), "sub");
  return apply(tape_of(a), val(a) - val(b), {a, b},
               [](const Mat& g, std::vector<Mat*>& p) {
                 *p[0] += g;
                 *p[1] -= g;
               });
}

Value mul(Value a, Value b) {
  require_same_shape(val(a), val(b), "mul");
  Mat av = val(a), bv = val(b);
  return apply(tape_of(a), av.cwiseProduct(bv), {a, b},
               [av, bv](const Mat& g, std::vector<Mat*>& p) {
                 *p[0] += g.cwiseProduct(bv);
                 *p[1] += g.cwiseProduct(av);
               });
}

Value emax(Value a, Value b) {
  require_same_shape(val(a), val(b), "emax");
  Mat av = val(a), bv = val(b);
  return apply(tape_of(a), av.cwiseMax(bv), {a, b},
               [av, bv](const Mat& g, std::vector<Mat*>& p) {
                 for (Eigen::Index j = 0; j < g.cols(); ++j)
                   for (Eigen::Index i = 0; i < g.rows(); ++i) {
                     if (av(i, j) >= bv(i, j)) (*p[0])(i, j) += g(i, j);
                     else (*p[1])(i, j) += g(i, j);
                   }
               });
}

Value matmul(Value a, Value b) {
  if (val(a).cols() != val(b).rows())
    throw UsageError("matmul: inner dimensions disagree");
  Mat av = val(a), bv = val(b);
  return apply(tape_of(a), av * bv, {a, b},
               [av, bv](const Mat& g, std::vector<Mat*>& p) {
                 *p[0] += g * bv.transpose();
                 *p[1] += av.transpose() * g;
               });
}

Value scale(Value a, double c) {
  return apply(tape_of(a), val(a) * c, {a},
               [c](const Mat& g, std::vector<Mat*>& p) { *p[0] += g * c; });
}

Value transpose(Value a) {
  return apply(tape_of(a), val(a).transpose(), {a},
               [](const Mat& g, std::vector<Mat*>& p) { *p[0] += g.transpose(); });
}

Value rows(Value a, Eigen::Index start, Eigen::Index count) {
  const Mat& m = val(a);
  if (start < 0 || count < 1 || start + count > m.rows())
    throw UsageError("rows: slice out of range");
  return apply(tape_of(a), m.middleRows(start, count), {a},
               [start, count](const Mat& g, std::vector<Mat*>& p) {
                 p[0]->middleRows(start, count) += g;
               });
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: empty input");
  Eigen::Index total = 0;
  const Eigen::Index cols = val(parts[0]).cols();
  for (const Value& v : parts) {
    if (val(v).cols() != cols) throw UsageError("concat_rows: column mismatch");
    total += val(v).rows();
  }
  Mat out(total, cols);
  std::vector<Eigen::Index> row_counts;
  Eigen::Index offset = 0;
  for (const Value& v : parts) {
    out.middleRows(offset, val(v).rows()) = val(v);
    row_counts.push_back(val(v).rows());
    offset += val(v).rows();
  }
  return apply(tape_of(parts[0]), std::move(out), parts,
               [row_counts](const Mat& g, std::vector<Mat*>& p) {
                 Eigen::Index at = 0;
                 for (std::size_t i = 0; i < p.size(); ++i) {
                   *p[i] += g.middleRows(at, row_counts[i]);
                   at += row_counts[i];
                 }
               });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: empty input");
  Eigen::Index total = 0;
  const Eigen::Index nrows = val(parts[0]).rows();
  for (const Value& v : parts) {
    if (val(v).rows() != nrows) throw UsageError("concat_cols: row mismatch");
    total += val(v).cols();
  }
  Mat out(nrows, total);
  std::vector<Eigen::Index> col_counts;
  Eigen::Index offset = 0;
  for (const Value& v : parts) {
    out.middleCols(offset, val(v).cols()) = val(v);
    col_counts.push_back(val(v).cols());
    offset += val(v).cols();
  }
  return apply(tape_of(parts[0]), std::move(out), parts,
               [col_counts](const Mat& g, std::vector<Mat*>& p) {
                 Eigen::Index at = 0;
                 for (std::size_t i = 0; i < p.size(); ++i) {
                   *p[i] += g.middleCols(at, col_counts[i]);
                   at += col_counts[i];
                 }
               });
}

Value add_col_broadcast(Value m, Value col) {
  const Mat& mv = val(m);
  const Mat& cv = val(col);
  if (cv.cols() != 1 || cv.rows() != mv.rows())
    throw UsageError("add_col_broadcast: column shape mismatch");
  Mat out = mv;
  out.colwise() += cv.col(0);
  return apply(tape_of(m), std::move(out), {m, col},
               [](const Mat& g, std::vector<Mat*>& p) {
                 *p[0] += g;
                 p[1]->col(0) += g.rowwise().sum();
               });
}

Value add_scalar_broadcast(Value m, Value scalar) {
  const Mat& sv = val(scalar);
  if (sv.rows() != 1 || sv.cols() != 1)
    throw UsageError("add_scalar_broadcast: second operand must be 1x1");
  Mat out = val(m).array() + sv(0, 0);
  return apply(tape_of(m), std::move(out), {m, scalar},
               [](const Mat& g, std::vector<Mat*>& p) {
                 *p[0] += g;
                 (*p[1])(0, 0) += g.sum();
               });
}

Value softmax_row(Value a) {
  const Mat& m = val(a);
  if (m.rows() != 1) throw UsageError("softmax_row: expected a 1xN row");
  const double peak = m.maxCoeff();
  Mat e = (m.array() - peak).exp().matrix();
  const double denom = e.sum();
  Mat y = e / denom;
  return apply(tape_of(a), y, {a}, [y](const Mat& g, std::vector<Mat*>& p) {
    const double inner = (g.array() * y.array()).sum();
    *p[0] += (y.array() * (g.array() - inner)).matrix();
  });
}

Value sigmoid(Value a) {
  Mat y = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
  return apply(tape_of(a), y, {a}, [y](const Mat& g, std::vector<Mat*>& p) {
    *p[0] += (g.array() * y.array() * (1.0 - y.array())).matrix();
  });
}

Value gelu(Value a) {
  Mat x = val(a);
  Mat y = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      y(i, j) = 0.5 * x(i, j) * (1.0 + std::erf(x(i, j) * M_SQRT1_2));
  return apply(tape_of(a), std::move(y), {a},
               [x](const Mat& g, std::vector<Mat*>& p) {
                 for (Eigen::Index j = 0; j < x.cols(); ++j)
                   for (Eigen::Index i = 0; i < x.rows(); ++i) {
                     const double v = x(i, j);
                     const double phi =
                         std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
                     const double d =
                         0.5 * (1.0 + std::erf(v * M_SQRT1_2)) + v * phi;
                     (*p[0])(i, j) += g(i, j) * d;
                   }
               });
}

Value sum(Value a) {
  const Mat& m = val(a);
  return apply(tape_of(a), Mat::Constant(1, 1, m.sum()), {a},
               [](const Mat& g, std::vector<Mat*>& p) {
                 p[0]->array() += g(0, 0);
               });
}

Value mean(Value a) {
  const Mat& m = val(a);
  const double n = static_cast<double>(m.size());
  return apply(tape_of(a), Mat::Constant(1, 1, m.sum() / n), {a},
               [n](const Mat& g, std::vector<Mat*>& p) {
                 p[0]->array() += g(0, 0) / n;
               });
}

Value mean_cols(Value a) {
  const Mat& m = val(a);
  if (m.cols() < 1) throw UsageError("mean_cols: empty matrix");
  const double n = static_cast<double>(m.cols());
  Mat out = m.rowwise().sum() / n;
  return apply(tape_of(a), std::move(out), {a},
               [n](const Mat& g, std::vector<Mat*>& p) {
                 for (Eigen::Index j = 0; j < p[0]->cols(); ++j)
                   p[0]->col(j) += g.col(0) / n;
               });
}

Value max_of(const std::vector<Value>& scalars) {
  if (scalars.empty()) throw UsageError("max_of: empty input");
  int best = 0;
  double best_val = tape_of(scalars[0]).scalar_value(scalars[0]);
  for (int i = 1; i < static_cast<int>(scalars.size()); ++i) {
    const double v = tape_of(scalars[0]).scalar_value(scalars[static_cast<std::size_t>(i)]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return apply(tape_of(scalars[0]), Mat::Constant(1, 1, best_val), scalars,
               [best](const Mat& g, std::vector<Mat*>& p) {
                 (*p[static_cast<std::size_t>(best)])(0, 0) += g(0, 0);
               });
}

Value bce(Value predictions, const Mat& targets, double eps) {
  const Mat& pm = val(predictions);
  require_same_shape(pm, targets, "bce");
  if (eps <= 0.0 || eps >= 0.5) throw UsageError("bce: eps out of range");
  Mat clamped = pm.array().min(1.0 - eps).max(eps).matrix();
  Mat loss(pm.rows(), pm.cols());
  for (Eigen::Index j = 0; j < pm.cols(); ++j)
    for (Eigen::Index i = 0; i < pm.rows(); ++i) {
      const double p = clamped(i, j);
      const double t = targets(i, j);
      loss(i, j) = -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
  Mat raw = pm;
  return apply(tape_of(predictions), std::move(loss), {predictions},
               [clamped, targets, raw, eps](const Mat& g, std::vector<Mat*>& p) {
                 for (Eigen::Index j = 0; j < clamped.cols(); ++j)
                   for (Eigen::Index i = 0; i < clamped.rows(); ++i) {
                     // Saturated entries were clamped; their gradient is zero.
                     if (raw(i, j) < eps || raw(i, j) > 1.0 - eps) continue;
                     const double pv = clamped(i, j);
                     const double t = targets(i, j);
                     (*p[0])(i, j) += g(i, j) * (-(t / pv) + (1.0 - t) / (1.0 - pv));
                   }
               });
}

}  // namespace ad
}  // namespace kval
