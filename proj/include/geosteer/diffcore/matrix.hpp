#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace geosteer {

/// Dense row-major matrix of doubles. Every module exchanges data through this
/// type (rows are points, columns are coordinates).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Raised when a caller breaks an operation's precondition (shape mismatch,
/// out-of-range argument, malformed input).
class ContractViolation : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces a non-finite value where the contract
/// requires finite ones.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool same_shape(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

/// Copies row `r` of `m` into a column vector.
inline Vector row_vector(const Matrix& m, Index r) { return m.row(r).transpose(); }

/// Element-wise std::exp. Eigen's packet exp flushes tiny results to zero and
/// rounds differently per instruction set.
template <typename Derived>
auto exp_elementwise(const Eigen::ArrayBase<Derived>& a) {
  return a.unaryExpr([](double x) { return std::exp(x); });
}

inline Matrix rows_from(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(idx[i]));
  return out;
}

}  // namespace geosteer
