#pragma once

#include <utility>

#include "ehrnet/backbone.hpp"
#include "ehrnet/body.hpp"
#include "ehrnet/head.hpp"

namespace ehrnet {

/// The compiled end-to-end model: backbone -> high-resolution body -> head.
struct NetworkGraph {
    LayerGraph graph;
    BackboneSpec backbone;
    BodySpec body;
    HeadSpec head;
    int input_node = -1;
    std::array<int, 4> branch_nodes{};
    int first_head_node = -1;
    int refined_node = -1;
};

/// Compiles the network for one config. override_resolution (divisible by 32)
/// swaps the input size while keeping all widths, for cheap shape checks.
NetworkGraph build_network(const ScaleConfig& config, int override_resolution = 0);

/// Runs the full pipeline on a (1, 3, R, R) image.
/// Returns (first head output, refined heatmaps).
std::pair<Tensor, Tensor> forward_network(const NetworkGraph& net, const Tensor& image,
                                          WeightStore& weights);

} // namespace ehrnet
