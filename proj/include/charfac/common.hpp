#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace charfac {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a file or wire format is malformed or has an unknown version.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Raised when two artifacts disagree on embedding dimension or base model.
class MismatchError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

}  // namespace charfac
