#pragma once

#include <span>
#include <vector>

#include "ehrnet/tensor.hpp"

namespace ehrnet {

enum class Activation { relu, swish, sigmoid };

/// Cross-correlation convolution (no kernel flip, the deep-learning convention).
/// weights dims = (out_ch, in_ch/groups, k, k). Empty bias span means no bias.
Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const float> bias,
              int stride, int padding, int groups = 1);

/// Transposed convolution. weights dims = (in_ch, out_ch, k, k).
/// Output spatial size = (H-1)*stride - 2*padding + k.
Tensor conv2d_transposed(const Tensor& input, const Tensor& weights, int stride, int padding);

/// Per-channel inference batchnorm: gamma*(x-mean)/sqrt(var+eps) + beta.
Tensor batchnorm_inference(const Tensor& input, std::span<const float> mean,
                           std::span<const float> variance, std::span<const float> gamma,
                           std::span<const float> beta, float epsilon);

Tensor activation(const Tensor& input, Activation kind);

/// Each value replicated factor x factor times.
Tensor upsample_nearest(const Tensor& input, int factor);

/// Sliding-window max with same spatial dims; borders padded with -inf.
/// Window must be odd.
Tensor maxpool_window(const Tensor& input, int window);

Tensor elementwise_add(const Tensor& a, const Tensor& b);

/// Channel concatenation; inputs must agree on batch/height/width.
Tensor concat_channels(const std::vector<const Tensor*>& inputs);

/// Spatial mean per channel -> (n, c, 1, 1).
Tensor global_avg_pool(const Tensor& input);

/// Broadcast-multiply a (n, c, 1, 1) gate over (n, c, h, w).
Tensor multiply_channels(const Tensor& input, const Tensor& gate);

/// Fully connected layer on a (1, in, 1, 1) tensor. weights laid out (out, in) row-major.
Tensor dense(const Tensor& input, std::span<const float> weights, std::span<const float> bias,
             int out_features);

} // namespace ehrnet
