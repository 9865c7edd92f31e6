#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "ehrnet/graph.hpp"
#include "ehrnet/scaling.hpp"
#include "ehrnet/weights.hpp"

namespace ehrnet {

inline constexpr int kJointCount = 17;

/// Heatmap prediction head: a 1x1 first head (17 heatmaps + 17 tags) at 1/4
/// resolution, a DeConv block to 1/2 resolution, and a refined 17-channel head.
struct HeadSpec {
    int joint_count = kJointCount;
    int branch_width = 0;   // W_b1
    int deconv_in = 0;      // 34 + W_b1
    int tag_size = 0;       // first head spatial size, R/4
    int heatmap_size = 0;   // refined head spatial size, R/2
};

HeadSpec build_head(const ScaleConfig& config);

struct HeadGraphRefs {
    int first_head = -1; // (1, 34, R/4, R/4): channels 0..16 heatmaps, 17..33 tags
    int refined = -1;    // (1, 17, R/2, R/2)
};

HeadGraphRefs append_head(GraphBuilder& builder, int branch1_node, const HeadSpec& spec);

std::pair<Tensor, Tensor> forward_head(const HeadSpec& spec, const Tensor& branch1_features,
                                       WeightStore& weights);

/// Per-person keypoints in input-pixel coordinates; absent joints are nullopt.
using PersonKeypoints = std::array<std::optional<std::pair<float, float>>, kJointCount>;

struct TrainingTargets {
    Tensor quarter; // (1, 17, R/4, R/4) ground-truth heatmaps
    Tensor half;    // (1, 17, R/2, R/2)
    // Per person, per joint: flat index into the quarter map, -1 when absent.
    std::vector<std::array<int, kJointCount>> keypoint_indices;
};

/// Renders unnormalized Gaussians (peak 1 at the rounded keypoint cell) at both
/// supervision resolutions; overlapping persons take the elementwise max.
/// sigma is at quarter resolution, doubled for the half-resolution map.
TrainingTargets make_targets(const std::vector<PersonKeypoints>& persons,
                             const ScaleConfig& config, float sigma = 2.0f);

/// MSE(quarter) + MSE(half), each a mean over all elements.
double heatmap_loss(const Tensor& pred_quarter, const Tensor& pred_half,
                    const TrainingTargets& targets);

/// Associative-embedding grouping loss on quarter-resolution tags: pull term
/// (mean squared deviation from each person's mean tag) plus push term
/// (mean over person pairs of exp(-(mu_i - mu_j)^2 / 2)).
double grouping_loss(const Tensor& tags,
                     const std::vector<std::array<int, kJointCount>>& keypoint_indices);

/// 1.0 * heatmap + 1e-3 * grouping.
double total_loss(double heatmap, double grouping);

} // namespace ehrnet
