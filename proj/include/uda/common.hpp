#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uda {

/// Bad configuration or input that violates a documented precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or file-format problem.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during optimization (NaN/Inf loss, divergence).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long step, std::string component)
      : std::runtime_error(what), step_(step), component_(std::move(component)) {}

  long step() const noexcept { return step_; }
  const std::string& component() const noexcept { return component_; }

 private:
  long step_;
  std::string component_;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// A seed component: either a number or a short tag.
class SeedPart {
 public:
  constexpr SeedPart(std::uint64_t v) noexcept : value_(v) {}              // NOLINT
  constexpr SeedPart(int v) noexcept : value_(static_cast<std::uint64_t>(v)) {}  // NOLINT
  constexpr SeedPart(std::string_view s) noexcept : value_(fnv1a(s)) {}    // NOLINT
  constexpr SeedPart(const char* s) noexcept : value_(fnv1a(s)) {}         // NOLINT
  SeedPart(const std::string& s) noexcept : value_(fnv1a(s)) {}            // NOLINT
  constexpr std::uint64_t value() const noexcept { return value_; }

 private:
  std::uint64_t value_;
};

/// Pure seed derivation: the result depends only on (base, parts) in order.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<SeedPart> parts) noexcept {
  std::uint64_t h = mix64(base);
  for (const auto& p : parts) h = mix64(h ^ mix64(p.value()));
  return h;
}

/// Fixed-point rendering used for all persisted numbers.
std::string fixed9(double v);
std::string fixed(double v, int decimals);

}  // namespace uda
