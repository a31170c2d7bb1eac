#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace rcmps {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

// Thrown when an algorithm fails for numerical reasons (non-convergence,
// loss of positivity, inconsistent cross-checks).  CLI maps this to exit 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two independent evaluation routes for the same quantity drifted apart
// beyond tolerance.  Subclass so callers can distinguish it if they care.
struct MethodDisagreementError : NumericalError {
  using NumericalError::NumericalError;
};

inline CMat herm(const CMat& a) { return 0.5 * (a + a.adjoint()); }

inline double frob(const CMat& a) { return a.norm(); }

}  // namespace rcmps
