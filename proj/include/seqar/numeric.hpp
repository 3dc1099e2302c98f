#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace seqar {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Running sum that switches to compensated accumulation for long windows.
/// The switch is decided once, from the number of terms the caller intends to add.
class WindowSum {
 public:
  static constexpr std::size_t kCompensationThreshold = 10000;

  explicit WindowSum(std::size_t expected_terms) noexcept
      : compensated_(expected_terms > kCompensationThreshold) {}

  void add(double x) noexcept {
    if (compensated_) {
      comp_.add(x);
    } else {
      plain_ += x;
    }
  }

  [[nodiscard]] double value() const noexcept { return compensated_ ? comp_.value() : plain_; }

 private:
  bool compensated_;
  double plain_ = 0.0;
  CompensatedSum comp_;
};

/// Welford accumulator for replication-level means and standard errors.
class MeanAccumulator {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  [[nodiscard]] std::size_t count() const noexcept { return count_; }
  [[nodiscard]] double mean() const noexcept {
    return count_ == 0 ? std::numeric_limits<double>::quiet_NaN() : mean_;
  }
  /// Unbiased sample variance; NaN with fewer than two observations.
  [[nodiscard]] double variance() const noexcept {
    return count_ < 2 ? std::numeric_limits<double>::quiet_NaN()
                      : m2_ / static_cast<double>(count_ - 1);
  }
  [[nodiscard]] double std_error() const noexcept {
    return std::sqrt(variance() / static_cast<double>(count_));
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline double mean_of(std::span<const double> xs) {
  MeanAccumulator acc;
  for (double x : xs) acc.add(x);
  return acc.mean();
}

// SplitMix64 finalizer; used to derive independent per-replication seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of replication `index` in the stream family rooted at `base`.
constexpr std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(mix64(base) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace seqar
