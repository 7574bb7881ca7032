#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kval {

using Scalar = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

template <typename S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using QuestionId = std::int64_t;

/// Caller violated a documented precondition.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input files or payloads are malformed (CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A knowledge client could not produce a result.
struct ClientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kval
