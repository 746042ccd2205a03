#include "lowrate/common.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace lowrate {

namespace {

std::string parse_message(std::string_view source, std::size_t line, const std::string& message) {
  std::string out(source);
  if (line > 0) {
    out += ":" + std::to_string(line);
  }
  out += ": " + message;
  return out;
}

}  // namespace

ParseError::ParseError(std::string_view source, std::size_t line, const std::string& message)
    : Error(ErrorKind::Input, parse_message(source, line, message)), line_(line) {}

std::string fixed9(double value) {
  if (value == 0.0) {
    value = 0.0;  // no "-0.000000000"
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", value);
  return buf;
}

std::string exact_decimal(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) {
    throw InvariantError("cannot render double");
  }
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  std::string owned(text);
  char* end = nullptr;
  double v = std::strtod(owned.c_str(), &end);
  if (owned.empty() || end != owned.c_str() + owned.size()) {
    throw InputError("not a number: '" + owned + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  return text;
}

std::size_t Rng::below(std::size_t n) {
  // Lemire's nearly-divisionless bounded draw.
  std::uint64_t x = engine_();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    std::uint64_t threshold = -static_cast<std::uint64_t>(n) % n;
    while (low < threshold) {
      x = engine_();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
  // Box-Muller; the second variate is discarded to keep the stream position simple.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  // splitmix64 chaining
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t p : path) {
    h = mix(h ^ mix(p + 0x632be59bd9b4e019ULL));
  }
  return h;
}

}  // namespace lowrate
