#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace wcopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind { InvalidArgument, DimensionMismatch, MissingConstant, Config, Io };

// Every failure in the library surfaces as this, with a kind callers can branch on.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) throw Error(kind, msg);
}

inline void require_arg(bool cond, const std::string& msg) { require(cond, ErrorKind::InvalidArgument, msg); }

inline void require_dim(long got, long want, const std::string& what) {
    if (got != want)
        throw Error(ErrorKind::DimensionMismatch,
                    what + ": dimension " + std::to_string(got) + " != " + std::to_string(want));
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace wcopt
