#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdpopt {

using Scalar = double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// The four problem families: discounted or average reward, with or without
/// the entropy regularizer.
enum class Setting { DiscStd, DiscReg, AvgStd, AvgReg };

inline bool is_regularized(Setting s) { return s == Setting::DiscReg || s == Setting::AvgReg; }
inline bool is_average(Setting s) { return s == Setting::AvgStd || s == Setting::AvgReg; }

std::string_view to_string(Setting s);
/// Accepts "disc-std", "disc-reg", "avg-std", "avg-reg".
Setting parse_setting(std::string_view text);

enum class ErrorCode {
    NonStochasticRow,
    NegativeProbability,
    NonPositiveWeight,
    BadDiscount,
    NonFiniteReward,
    ShapeMismatch,
    AllZeroInput,
    NonUniqueStationary,
    SingularSystem,
    MaxItersExceeded,
    SettingMismatch,
    Stalled,
    NotConverged,
    TooLargeToEnumerate,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace mdpopt
