#pragma once

#include <array>

#include "ehrnet/graph.hpp"
#include "ehrnet/scaling.hpp"
#include "ehrnet/weights.hpp"

namespace ehrnet {

/// High-Resolution body: three stages over up to four parallel branches of
/// constant per-branch resolution, with multi-scale fusion at each stage end.
struct BodySpec {
    ScaleConfig config;
    std::array<int, 4> tap_channels{};
    std::array<int, 4> branch_widths{};
    std::array<int, 4> branch_resolutions{}; // R / 2^(n+1)
    std::array<int, 3> blocks_per_stage{};
    bool fuse = true; // identity-only fusion when false (shape tests)
};

BodySpec build_body(const ScaleConfig& config, const std::array<int, 4>& tap_channels);

struct BodyGraphRefs {
    std::array<int, 4> branches{};
};

/// Appends transitions, stages and fusions. Tap nodes must carry the
/// backbone's four feature maps at strides 4/8/16/32.
BodyGraphRefs append_body(GraphBuilder& builder, const std::array<int, 4>& tap_nodes,
                          const BodySpec& spec);

/// Convenience forward over just the body fragment.
std::array<Tensor, 4> forward_body(const BodySpec& spec, const std::array<Tensor, 4>& taps,
                                   WeightStore& weights);

} // namespace ehrnet
