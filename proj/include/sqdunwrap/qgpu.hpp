#pragma once

#include "sqdunwrap/phase_core.hpp"

namespace sqdunwrap {

/// Per-pixel reliability, higher is better.
class QualityMap : public ImageGrid {
  public:
    using ImageGrid::ImageGrid;
};

/// Negated phase-derivative variance: for every pixel, the variance of the
/// wrapped horizontal differences plus that of the wrapped vertical
/// differences over the 3x3 window (clipped at the border), negated.
QualityMap quality_map(const WrappedImage &w);

/// Quality-guided path following. Starts at the best pixel (lowest index on
/// ties) and repeatedly integrates the best frontier pixel from its best
/// already-unwrapped 4-neighbour, so wrap(result) == w by construction.
PhaseImage qgpu_unwrap(const WrappedImage &w);
PhaseImage qgpu_unwrap(const WrappedImage &w, const QualityMap &quality);

} // namespace sqdunwrap
