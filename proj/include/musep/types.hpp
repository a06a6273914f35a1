#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>

namespace musep {

// Row-major so that a block of consecutive rows (one time step of a batch,
// one window of a sequence) is contiguous in memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using TimestampMs = std::int64_t;

/// Label grid spacing: all sequences live on a 2 Hz grid.
inline constexpr TimestampMs kStepMs = 500;

enum class Dimension { Arousal, Valence };
enum class Role { Train, Dev, Test };

std::string_view to_string(Dimension d);
std::string_view to_string(Role r);
Dimension parse_dimension(std::string_view s);
Role parse_role(std::string_view s);

}  // namespace musep
