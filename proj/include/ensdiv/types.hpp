/*
 * Copyright 2026 The ensdiv Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ensdiv {

/// Row-major N x C matrix of class scores. Rows are data points.
template <typename Scalar>
using ProbMatrixT =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using ProbMatrix = ProbMatrixT<double>;
using LogitMatrix = ProbMatrixT<double>;
using LabelVector = Eigen::VectorXi;
using Eigen::VectorXd;
using Eigen::MatrixXd;

/// Failure classes map onto CLI exit codes (1 = validation, 2 = numerical).
enum class ErrorKind { kValidation, kNumerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error ValidationError(const std::string& module, const std::string& what) {
  return Error(ErrorKind::kValidation, module, what);
}

inline Error NumericalError(const std::string& module, const std::string& what) {
  return Error(ErrorKind::kNumerical, module, what);
}

/// Clamp applied to probabilities before taking logs.
inline constexpr double kLogClamp = 1e-12;

}  // namespace ensdiv
