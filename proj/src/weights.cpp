#include "ehrnet/weights.hpp"

#include "ehrnet/error.hpp"

namespace ehrnet {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

const char* role_tag(WeightRole role) {
    switch (role) {
    case WeightRole::conv_weight: return "weight";
    case WeightRole::conv_bias: return "bias";
    case WeightRole::bn_gamma: return "gamma";
    case WeightRole::bn_beta: return "beta";
    case WeightRole::bn_mean: return "mean";
    case WeightRole::bn_var: return "var";
    case WeightRole::dense_weight: return "weight";
    case WeightRole::dense_bias: return "bias";
    }
    return "?";
}

bool unit_offset(WeightRole role) {
    return role == WeightRole::bn_gamma || role == WeightRole::bn_var;
}

} // namespace

std::span<const float> SeededWeights::tensor(const std::string& name, WeightRole role,
                                             std::int64_t count) {
    const std::string key = name + "." + role_tag(role);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        std::vector<float> values(static_cast<size_t>(count));
        std::uint64_t state = seed_ ^ fnv1a(key);
        for (float& v : values) {
            const std::uint64_t bits = splitmix64(state);
            // 53-bit mantissa to double in [0, 1), then to [-0.05, 0.05]
            const double u = static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
            v = static_cast<float>((u - 0.5) * 0.1);
            if (unit_offset(role)) v += 1.0f;
        }
        it = cache_.emplace(key, std::move(values)).first;
    }
    if (it->second.size() != static_cast<size_t>(count))
        throw ConfigError("weight store: '" + key + "' requested with conflicting sizes " +
                          std::to_string(it->second.size()) + " vs " + std::to_string(count));
    return it->second;
}

std::span<const float> ZeroWeights::tensor(const std::string& name, WeightRole role,
                                           std::int64_t count) {
    const std::string key = name + "." + role_tag(role);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        std::vector<float> values(static_cast<size_t>(count), unit_offset(role) ? 1.0f : 0.0f);
        it = cache_.emplace(key, std::move(values)).first;
    }
    return it->second;
}

} // namespace ehrnet
