#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace valpat {

using Scalar = double;

template <class S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matrix = MatrixX<Scalar>;
using Vector = VectorX<Scalar>;
using Index = Eigen::Index;

/// Read-only views accepted by the free math functions; blocks and maps
/// bind without copies.
template <class S>
using MatRef = Eigen::Ref<const MatrixX<S>>;
template <class S>
using VecRef = Eigen::Ref<const VectorX<S>>;

using IdMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using BitMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <class T, class... Ts>
void cat_into(std::ostringstream& os, T&& head, Ts&&... tail) {
  os << head;
  cat_into(os, std::forward<Ts>(tail)...);
}
}  // namespace detail

template <class... Ts>
std::string cat(Ts&&... parts) {
  std::ostringstream os;
  detail::cat_into(os, std::forward<Ts>(parts)...);
  return os.str();
}

template <class... Ts>
[[noreturn]] void raise(Ts&&... parts) {
  throw Error(cat(std::forward<Ts>(parts)...));
}

#define VALPAT_REQUIRE(cond, ...)            \
  do {                                       \
    if (!(cond)) ::valpat::raise(__VA_ARGS__); \
  } while (0)

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Process log level, initialized from VALPAT_LOG_LEVEL (error|warn|info|debug).
LogLevel log_level();
void set_log_level(LogLevel level);
void log_message(LogLevel level, const std::string& message);

template <class... Ts>
void log_warn(Ts&&... parts) {
  if (log_level() >= LogLevel::warn) log_message(LogLevel::warn, cat(std::forward<Ts>(parts)...));
}
template <class... Ts>
void log_info(Ts&&... parts) {
  if (log_level() >= LogLevel::info) log_message(LogLevel::info, cat(std::forward<Ts>(parts)...));
}
template <class... Ts>
void log_debug(Ts&&... parts) {
  if (log_level() >= LogLevel::debug) log_message(LogLevel::debug, cat(std::forward<Ts>(parts)...));
}

/// Deterministic random source. All stochastic behavior in the library flows
/// through one of these so that a run is a pure function of its seed, and so
/// that the full generator state (including the cached Box-Muller spare) can
/// be captured in a checkpoint.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Inclusive range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    VALPAT_REQUIRE(lo <= hi, "uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; the spare is part of serialized state.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::vector<std::uint32_t> permutation(std::size_t n) {
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
    // Fisher-Yates with our own draws; std::shuffle is implementation-defined.
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(perm[i - 1], perm[j]);
    }
    return perm;
  }

  std::string state_string() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << std::scientific << spare_;
    return os.str();
  }

  void restore_state(const std::string& state) {
    std::istringstream is(state);
    int spare_flag = 0;
    is >> engine_ >> spare_flag >> spare_;
    VALPAT_REQUIRE(!is.fail(), "Rng: malformed serialized state");
    has_spare_ = spare_flag != 0;
  }

 private:
  std::mt19937_64 engine_;
  double spare_{0.0};
  bool has_spare_{false};
};

}  // namespace valpat
