#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace switchlab {

// State spaces here are one- or two-dimensional; the fixed upper bound keeps
// every small vector and matrix on the stack.
inline constexpr int kMaxDim = 2;

template <typename Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
template <typename Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using Vec = VecT<double>;
using Mat = MatT<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Base class for every error raised by the library. `kind()` carries the
/// short error name used in reports and CLI messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define SWITCHLAB_DEFINE_ERROR(Name)                                          \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(#Name, what) {}        \
    };

SWITCHLAB_DEFINE_ERROR(InvalidArgument)
SWITCHLAB_DEFINE_ERROR(StepCountOverflow)
SWITCHLAB_DEFINE_ERROR(BoundaryExit)
SWITCHLAB_DEFINE_ERROR(Degenerate)
SWITCHLAB_DEFINE_ERROR(NoSectionCrossing)
SWITCHLAB_DEFINE_ERROR(BranchInversionFailure)
SWITCHLAB_DEFINE_ERROR(Underflow)
SWITCHLAB_DEFINE_ERROR(NotSubstochastic)
SWITCHLAB_DEFINE_ERROR(EmptyAccumulator)
SWITCHLAB_DEFINE_ERROR(RegionEmpty)
SWITCHLAB_DEFINE_ERROR(ConfigError)

#undef SWITCHLAB_DEFINE_ERROR

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace switchlab
