#pragma once

#include <array>
#include <string>

#include "ehrnet/error.hpp"

namespace ehrnet {

/// Compound-scaling multipliers for the backbone at a given coefficient phi.
struct BackboneCoefficients {
    double depth_mult = 1.0;      // 1.2^phi
    double width_mult = 1.0;      // 1.1^phi
    double resolution_mult = 1.0; // 1.15^phi
    int phi = 0;
};

/// Every scaling-derived constant for one phi: input size, branch widths,
/// blocks per stage, backbone multipliers and head map sizes.
struct ScaleConfig {
    int phi = 0;
    int input_resolution = 0;            // divisible by 32
    std::array<int, 4> branch_widths{};  // W_b1..W_b4
    std::array<int, 3> stage_repeats{};  // blocks per stage, stages 1..3
    BackboneCoefficients backbone;
    int tag_size = 0;     // input_resolution / 4
    int heatmap_size = 0; // input_resolution / 2
};

/// Authoritative per-phi configuration for phi in [-4, 0].
ScaleConfig config_for_phi(int phi);

/// 512 + 32*phi; throws UnsupportedCoefficient when the result drops below 32.
int input_resolution(int phi);

/// Closed-form branch width ceil(base_n * 1.25^phi) with base (32, 64, 128, 256).
/// Exposed for extrapolation outside [-4, 0]; the stored table wins in range.
int branch_width_formula(int branch, int phi);

BackboneCoefficients backbone_coefficients(int phi);

/// Blocks per stage for phi in [-4, 0].
std::array<int, 3> stage_repeats(int phi);

/// Classification input size of the scaled backbone (224 at phi = 0).
/// Stored constants for phi in [-4, 0]; ceil(224 * 1.15^phi) outside.
int classification_resolution(int phi);

std::string to_records(const ScaleConfig& config);
ScaleConfig config_from_records(const std::string& text);

} // namespace ehrnet
