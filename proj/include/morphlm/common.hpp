#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace morphlm {

// Error taxonomy. Each maps to one failure class surfaced by the public API;
// the CLI turns any of these into exit code 1 (usage problems are exit 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PathError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---- small string / file helpers shared across modules ----

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);

// Reads a whole file as bytes; throws IoError with the path on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// UTF-8 <-> codepoints. Invalid sequences throw ValidationError.
std::vector<char32_t> utf8_decode(std::string_view s);
std::string utf8_encode(const std::vector<char32_t>& cps);

// Lowercases ASCII A-Z and the Latin-1 uppercase block. Input is expected to
// be NFC-normalized text; no further normalization is applied here.
std::string lowercase(std::string_view s);

// Stable 64-bit seed derivation: all randomness in the toolkit flows from a
// single seed through (seed, purpose, index) triples.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index);

// Compact deterministic float formatting for text outputs (%.17g-exactness is
// not needed; %.6g keeps files readable and stable).
std::string format_double(double v);

// ln with a 1e-300 floor; probabilities throughout the toolkit are logged
// through this to keep log-space arithmetic finite.
inline double safe_log(double x) {
  return x < 1e-300 ? std::log(1e-300) : std::log(x);
}

}  // namespace morphlm
