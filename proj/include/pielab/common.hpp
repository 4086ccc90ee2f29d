#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pielab {

enum class LabelKind { Single, Multi };

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  Ok = 0,
  Failure = 1,
  Config = 2,
  MissingInput = 3,
  Numeric = 4,
};

/// Base error. The exit code tells the CLI how to terminate.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::Failure)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid configuration, invalid combination of options, malformed input record.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::Config) {}
};

/// A file or artifact that should exist does not.
class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& what) : Error(what, ExitCode::MissingInput) {}
};

/// NaN/Inf detected, or a statistic requested on an empty set.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, ExitCode::Numeric) {}
};

/// Corrupt or incompatible binary file.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what, ExitCode::MissingInput) {}
};

std::string_view to_string(LabelKind kind);
LabelKind label_kind_from_string(std::string_view s);

/// Formats a value with the shortest representation that round-trips through
/// float32. Used for every probability written to CSV.
std::string format_float(float v);

/// Fixed 10-significant-digit formatting for derived statistics in reports.
std::string format_stat(double v);

/// Formats a pruning threshold the way it appears in directory names and CSVs
/// ("0.2", "0.99").
std::string format_threshold(double t);

/// Quotes a CSV cell when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

/// Random source with platform-independent draws: mt19937_64 bits mapped through
/// fixed transforms (no std distributions, whose output is library-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller, one value per call).
  double normal();

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    std::swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
  }
}

void log_info(std::string_view msg);
void log_warning(std::string_view msg);

/// Mixes several integers into one 64-bit seed (splitmix64 chain).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace pielab
