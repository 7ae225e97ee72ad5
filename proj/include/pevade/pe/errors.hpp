#pragma once

#include <stdexcept>
#include <string>

namespace pevade {

struct NotPeError : std::runtime_error {
  explicit NotPeError(const std::string& what) : std::runtime_error("not a PE file: " + what) {}
};

struct MalformedPeError : std::runtime_error {
  explicit MalformedPeError(const std::string& what) : std::runtime_error("malformed PE: " + what) {}
};

struct LayoutOverflowError : std::runtime_error {
  explicit LayoutOverflowError(const std::string& what) : std::runtime_error("layout overflow: " + what) {}
};

struct ActionUnavailableError : std::runtime_error {
  explicit ActionUnavailableError(const std::string& what) : std::runtime_error("action unavailable: " + what) {}
};

}  // namespace pevade
