#include "pielab/common.hpp"

#include <array>
#include <charconv>
#include <limits>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <numbers>
#include <sstream>

namespace pielab {

std::string_view to_string(LabelKind kind) {
  return kind == LabelKind::Single ? "single" : "multi";
}

LabelKind label_kind_from_string(std::string_view s) {
  if (s == "single") return LabelKind::Single;
  if (s == "multi") return LabelKind::Multi;
  throw ConfigError("unknown label kind \"" + std::string(s) + "\" (expected single|multi)");
}

std::string format_float(float v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericError("cannot format float");
  return std::string(buf.data(), end);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_stat(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.10g", v);
  return std::string(buf.data());
}

std::string format_threshold(double t) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%g", t);
  return std::string(buf.data());
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  // rejection sampling keeps the draw unbiased
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw FormatError("invalid RNG state");
}

namespace {
std::mutex log_mutex;
}

void log_info(std::string_view msg) {
  std::lock_guard lock(log_mutex);
  std::cerr << "[pielab] " << msg << '\n';
}

void log_warning(std::string_view msg) {
  std::lock_guard lock(log_mutex);
  std::cerr << "[pielab] warning: " << msg << '\n';
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(a) ^ (b + 0x632be59bd9b4e019ULL));
}

}  // namespace pielab
