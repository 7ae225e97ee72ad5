#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <string_view>

#include "pevade/pe/image.hpp"

namespace pevade {

inline constexpr std::size_t kFeatureDim = 2350;

// Fixed block layout of the feature vector:
//   byte_histogram          256   normalized byte value counts
//   byte_entropy_histogram  256   sliding-window (entropy bin, high nibble) joint counts
//   strings                 104   printable-run statistics
//   general                  10   file-level scalars
//   header                   62   COFF/optional header summary
//   sections                255   section table summary
//   imports                1279   hashed import libraries and functions
//   exports                 128   hashed export names
struct FeatureBlock {
  std::string_view name;
  std::size_t offset;
  std::size_t size;
};

const std::array<FeatureBlock, 8>& feature_blocks();
std::size_t feature_offset(std::string_view block);
const FeatureBlock& feature_block(std::string_view block);

// Index of the header flag that records whether the stored checksum matches
// the computed one (header block, position 1).
std::size_t checksum_valid_feature_index();

// Throws NotPeError/MalformedPeError when the bytes do not parse.
Eigen::VectorXd extract_features(const ByteBuf& bytes);

double shannon_entropy(const std::uint8_t* data, std::size_t len);
inline double shannon_entropy(const ByteBuf& data) {
  return shannon_entropy(data.data(), data.size());
}

}  // namespace pevade
