#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kl {

using Cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Geometric tolerance for on-boundary membership tests.
inline constexpr double kEpsGeom = 1e-12;

enum class ErrorCode {
  NonpositiveHeight,
  EmptySlit,
  OverlapAtEqualHeight,
  IllConditioned,
  PointTooClose,
  EvalOnSingularity,
  LatticeTooCoarse,
  StepUnderflow,
  NotExploded,
  BackwardBlowup,
  ProbeTooClose,
  CircleCollision,
  IncrementMismatch,
  ConfigInvalid,
  UnknownSuite,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonpositiveHeight: return "NonpositiveHeight";
    case ErrorCode::EmptySlit: return "EmptySlit";
    case ErrorCode::OverlapAtEqualHeight: return "OverlapAtEqualHeight";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::PointTooClose: return "PointTooClose";
    case ErrorCode::EvalOnSingularity: return "EvalOnSingularity";
    case ErrorCode::LatticeTooCoarse: return "LatticeTooCoarse";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::NotExploded: return "NotExploded";
    case ErrorCode::BackwardBlowup: return "BackwardBlowup";
    case ErrorCode::ProbeTooClose: return "ProbeTooClose";
    case ErrorCode::CircleCollision: return "CircleCollision";
    case ErrorCode::IncrementMismatch: return "IncrementMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UnknownSuite: return "UnknownSuite";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, int i = -1, int j = -1)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code), i_(i), j_(j) {}

  ErrorCode code() const noexcept { return code_; }
  int index() const noexcept { return i_; }
  int index2() const noexcept { return j_; }

 private:
  ErrorCode code_;
  int i_, j_;
};

/// FNV-1a 64-bit, used for artifact checksums and cache keys (integrity, not crypto).
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s) { return fnv1a(s.data(), s.size()); }

/// Largest power of two not exceeding |x| (x > 0). Multiplying or dividing by the
/// result is exact in binary floating point, which keeps scale-canonicalized
/// evaluations bit-exactly homogeneous.
inline double pow2_floor(double x) {
  int e = std::ilogb(x);
  return std::ldexp(1.0, e);
}

}  // namespace kl
