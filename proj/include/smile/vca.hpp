#pragma once

#include <cstdint>

#include "smile/lmm.hpp"

namespace smile {

/// Vertex component analysis endmember extraction. Selects p pixel spectra by
/// iterative projection onto directions orthogonal to the span of the
/// already-selected vertices, after an SVD reduction to p dimensions (the
/// classical projective/affine variant chosen by the SNR heuristic). Returned
/// rows are always actual pixel spectra from the cube.
///
/// Throws ConfigError when p > min(C, N) and DataError (naming the achieved
/// rank) when the data has rank < p.
EndmemberMatrix vca_extract(const HsiCube& cube, int p, std::uint64_t seed);

}  // namespace smile
