#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace defined {

inline constexpr const char* kVersion = "0.1.0";

using cxd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Raised when a forward pass produces non-finite activations.
/// `layer` is the decoder layer index (-1 for embedding / head).
struct NumericError : std::runtime_error {
  int layer;
  NumericError(int layer_idx, const std::string& what)
      : std::runtime_error(what), layer(layer_idx) {}
};

/// Raised when an exhaustive search would exceed its configured cap.
struct ComplexityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace defined
