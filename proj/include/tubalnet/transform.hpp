#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "tubalnet/transform_matrix.hpp"

namespace tubalnet {

TransformMatrix identity_transform(std::size_t n3);

/// Orthonormal DCT-II: M(i, j) = c_i cos(pi (2j + 1) i / (2 n3)), c_0 = sqrt(1/n3), c_i = sqrt(2/n3).
TransformMatrix dct_transform(std::size_t n3);

/// Q factor of a seeded Gaussian matrix, with column signs fixed so that diag(R) > 0.
TransformMatrix random_orthogonal_transform(std::size_t n3, std::uint64_t seed);

/// Parses "dct", "identity" or "rand-orth:<seed>".
TransformMatrix make_transform(std::string_view spec, std::size_t n3);

}  // namespace tubalnet
