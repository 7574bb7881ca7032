// Central finite differences against tape gradients, over every tensor in a
// ParamStore. The loss is rebuilt on a fresh tape per evaluation.
#pragma once

#include "kval/autodiff.hpp"

#include <functional>
#include <map>

namespace gradcheck {

using BuildLoss = std::function<kval::ad::Value(kval::ad::Tape&)>;

struct Report {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

inline Report compare(kval::ParamStore& store, const BuildLoss& build,
                      double eps = 1e-5) {
  store.zero_grads();
  std::map<std::string, kval::Mat> analytic;
  {
    kval::ad::Tape tape(&store);
    kval::ad::Value root = build(tape);
    tape.backward(root);
    for (const auto& name : store.names()) analytic[name] = store.grad(name);
  }

  auto eval = [&] {
    kval::ad::Tape tape(&store);
    return tape.scalar_value(build(tape));
  };

  Report report;
  for (const auto& name : store.names()) {
    kval::Mat& theta = store.get(name);
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      for (Eigen::Index i = 0; i < theta.rows(); ++i) {
        const double saved = theta(i, j);
        theta(i, j) = saved + eps;
        const double up = eval();
        theta(i, j) = saved - eps;
        const double down = eval();
        theta(i, j) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[name](i, j);
        const double rel =
            std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_tensor = name;
        }
      }
    }
  }
  return report;
}

}  // namespace gradcheck
