#pragma once

#include <array>
#include <vector>

#include "ehrnet/graph.hpp"
#include "ehrnet/scaling.hpp"

namespace ehrnet {

/// One MBConv stage after width/depth scaling.
struct MbStage {
    int expand = 6;
    int kernel = 3;
    int out_channels = 0;
    int repeats = 1;
    int stride = 1;
};

/// Compact-EfficientNet backbone layout for one phi. Emits four feature taps
/// at strides 4/8/16/32; optionally a classification head for parameter checks.
struct BackboneSpec {
    BackboneCoefficients coeff;
    int input_resolution = 0;
    bool with_classifier = false;
    int class_count = 0;
    bool lite = false; // drop squeeze-excite and use relu instead of swish

    int stem_channels = 0;
    std::vector<MbStage> stages;
    std::array<int, 4> tap_stage{};    // stage index feeding each tap
    std::array<int, 4> tap_channels{}; // channel count at each tap
    static constexpr std::array<int, 4> tap_strides{4, 8, 16, 32};
    int head_channels = 0; // classifier 1x1 conv width (scaled 1280)
};

/// Nearest multiple of 8 (min 8), bumped one step if rounding lost more than
/// 10% of the scaled value.
int round_channels(int base, double width_mult);

/// max(1, round(depth_mult * repeats)).
int scale_repeats(int repeats, double depth_mult);

BackboneSpec build_backbone(const BackboneCoefficients& coeff, int input_resolution,
                            bool with_classifier, int class_count, bool lite = false);

std::array<int, 4> backbone_tap_channels(const BackboneSpec& spec);

struct BackboneGraphRefs {
    std::array<int, 4> taps{};
    int logits = -1; // valid only with a classifier
};

/// Appends the backbone to an existing builder; input node must be (1, 3, R, R).
BackboneGraphRefs append_backbone(GraphBuilder& builder, int input_node,
                                  const BackboneSpec& spec);

/// Standalone graph: image input -> taps (and logits when classifier-equipped).
LayerGraph backbone_graph(const BackboneSpec& spec);

} // namespace ehrnet
