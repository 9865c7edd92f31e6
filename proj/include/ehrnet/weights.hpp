#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ehrnet {

enum class WeightRole {
    conv_weight,
    conv_bias,
    bn_gamma,
    bn_beta,
    bn_mean,
    bn_var,
    dense_weight,
    dense_bias,
};

/// Supplies per-layer parameter tensors by (layer name, role). Implementations
/// must return the same values for the same key every time.
class WeightStore {
public:
    virtual ~WeightStore() = default;
    virtual std::span<const float> tensor(const std::string& name, WeightRole role,
                                          std::int64_t count) = 0;
};

/// Deterministic pseudo-random weights, uniform in [-0.05, 0.05], keyed by a
/// seed plus the layer name so values do not depend on evaluation order.
/// Batchnorm gamma and variance are offset to 1 + u to keep signals alive.
class SeededWeights : public WeightStore {
public:
    explicit SeededWeights(std::uint64_t seed) : seed_(seed) {}
    std::span<const float> tensor(const std::string& name, WeightRole role,
                                  std::int64_t count) override;

private:
    std::uint64_t seed_;
    std::unordered_map<std::string, std::vector<float>> cache_;
};

/// All-zero weights (batchnorm gamma/variance set to 1); handy for linearity tests.
class ZeroWeights : public WeightStore {
public:
    std::span<const float> tensor(const std::string& name, WeightRole role,
                                  std::int64_t count) override;

private:
    std::unordered_map<std::string, std::vector<float>> cache_;
};

} // namespace ehrnet
