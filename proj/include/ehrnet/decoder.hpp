#pragma once

#include <array>
#include <utility>
#include <vector>

#include "ehrnet/head.hpp"
#include "ehrnet/scaling.hpp"
#include "ehrnet/tensor.hpp"

namespace ehrnet {

struct Keypoint {
    int joint_id = 0;
    float x = 0.0f; // input-image pixels
    float y = 0.0f;
    float score = 0.0f;            // heatmap value clamped to [0, 1]
    std::vector<float> tag;        // one entry per aggregated scale
};

struct Person {
    std::vector<Keypoint> keypoints; // at most one per joint
    float score = 0.0f;              // mean keypoint score
};

struct PoseSet {
    std::vector<Person> persons;
};

struct Peak {
    int row = 0;
    int col = 0;
    float value = 0.0f;
    std::vector<float> tag;
};

struct DecodeParams {
    int nms_window = 5;
    int top_k = 30;
    float threshold = 0.1f;
    float tag_threshold = 1.0f;
    bool refine_subpixel = true; // quarter-offset toward the higher neighbor
};

/// Local maxima of each joint map: locations where the value equals the
/// window max and clears the threshold, sorted by descending value with
/// (row, col) tie-breaking, truncated to top_k.
std::array<std::vector<Peak>, kJointCount> extract_peaks(const Tensor& heatmaps, int nms_window,
                                                         int top_k, float threshold);

/// Greedy association, joint by joint in fixed order, peaks within a joint by
/// descending score: a peak joins the person with the nearest running mean tag
/// (if within tag_threshold and the joint is free), else starts a new person.
PoseSet group_by_tags(const std::array<std::vector<Peak>, kJointCount>& peaks,
                      float tag_threshold);

/// Nearest-upsamples every map to target_size, averages the heatmaps and
/// concatenates the tag maps channel-wise (scale-major: channel s*17 + j).
std::pair<Tensor, Tensor> aggregate_scales(const std::vector<Tensor>& heatmaps_per_scale,
                                           const std::vector<Tensor>& tags_per_scale,
                                           int target_size);

/// Full decode of one head output pair: peaks from the refined half-resolution
/// heatmaps, tags sampled from the quarter-resolution tag channels, grouped,
/// coordinates mapped back to input pixels.
PoseSet decode(const Tensor& first_head_output, const Tensor& refined_heatmaps,
               const ScaleConfig& config, const DecodeParams& params = {});

/// Decode from explicit heatmaps and a (possibly multi-scale) tag tensor with
/// tag_dim * 17 channels. to_input_scale maps heatmap pixels to input pixels.
PoseSet decode_maps(const Tensor& heatmaps, const Tensor& tagmaps, int tag_dim,
                    float to_input_scale, const DecodeParams& params = {});

} // namespace ehrnet
