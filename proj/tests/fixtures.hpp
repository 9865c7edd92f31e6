#pragma once

// Synthetic decode fixtures (ideal gaussian heatmaps + constant per-person
// tags) and two implementation-independent grouping oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "ehrnet/decoder.hpp"
#include "ehrnet/head.hpp"

namespace fixtures {

using namespace ehrnet;

struct DecodeFixture {
    ScaleConfig config;
    std::vector<PersonKeypoints> persons;
    std::vector<float> person_tags; // scalar tag per person
    Tensor first_head;              // (1, 34, R/4, R/4)
    Tensor refined;                 // (1, 17, R/2, R/2)
};

// Keypoints are placed on a coarse grid (one per 32 px cell) so peaks stay
// separated well beyond the NMS window, and per-person tags are separated by
// more than twice the tag threshold.
inline DecodeFixture make_decode_fixture(const ScaleConfig& config, std::mt19937& rng,
                                         int person_count, float tag_base, float tag_sep) {
    DecodeFixture f;
    f.config = config;
    const int r = config.input_resolution;
    const int cells = r / 32;
    std::vector<int> cell_ids(static_cast<size_t>(cells * cells));
    std::iota(cell_ids.begin(), cell_ids.end(), 0);
    std::shuffle(cell_ids.begin(), cell_ids.end(), rng);

    std::uniform_real_distribution<float> jitter(-4.0f, 4.0f);
    std::uniform_int_distribution<int> joint_gate(0, 99);
    size_t next_cell = 0;
    for (int p = 0; p < person_count; ++p) {
        PersonKeypoints person{};
        int placed = 0;
        for (int j = 0; j < kJointCount; ++j) {
            const bool want = joint_gate(rng) < 70 || (j == kJointCount - 1 && placed == 0);
            if (!want || next_cell >= cell_ids.size()) continue;
            const int cell = cell_ids[next_cell++];
            const float cx = static_cast<float>(cell % cells) * 32.0f + 16.0f + jitter(rng);
            const float cy = static_cast<float>(cell / cells) * 32.0f + 16.0f + jitter(rng);
            person[static_cast<size_t>(j)] = {cx, cy};
            ++placed;
        }
        f.persons.push_back(person);
        f.person_tags.push_back(tag_base + static_cast<float>(p) * tag_sep);
    }

    const TrainingTargets targets = make_targets(f.persons, config);
    f.refined = targets.half;

    // First head: heatmaps in channels 0..16, tags in 17..33. Tags are written
    // as a constant patch around each keypoint's quarter-resolution cell.
    const int t = config.tag_size;
    f.first_head = Tensor(1, 2 * kJointCount, t, t);
    for (int j = 0; j < kJointCount; ++j)
        for (int y = 0; y < t; ++y)
            for (int x = 0; x < t; ++x)
                f.first_head.at(0, j, y, x) = targets.quarter.at(0, j, y, x);
    for (size_t p = 0; p < f.persons.size(); ++p)
        for (int j = 0; j < kJointCount; ++j) {
            const auto& kp = f.persons[p][static_cast<size_t>(j)];
            if (!kp) continue;
            const int qx = static_cast<int>(std::lround(kp->first / 4.0f));
            const int qy = static_cast<int>(std::lround(kp->second / 4.0f));
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const int yy = qy + dy, xx = qx + dx;
                    if (yy < 0 || yy >= t || xx < 0 || xx >= t) continue;
                    f.first_head.at(0, kJointCount + j, yy, xx) = f.person_tags[p];
                }
        }
    return f;
}

// Oracle 1: single-linkage clustering over pairwise tag distances. For
// well-separated instances this is the unique optimal grouping.
inline std::vector<std::vector<int>> cluster_grouping_oracle(const std::vector<float>& tags,
                                                             float threshold) {
    const int n = static_cast<int>(tags.size());
    std::vector<int> parent(static_cast<size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<size_t>(a)] != a) a = parent[static_cast<size_t>(a)];
        return a;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(tags[static_cast<size_t>(i)] - tags[static_cast<size_t>(j)]) <= threshold)
                parent[static_cast<size_t>(find(i))] = find(j);
    std::vector<std::vector<int>> groups;
    std::vector<int> root_to_group(static_cast<size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (root_to_group[static_cast<size_t>(r)] < 0) {
            root_to_group[static_cast<size_t>(r)] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<size_t>(root_to_group[static_cast<size_t>(r)])].push_back(i);
    }
    return groups;
}

// Oracle 2: exhaustive search over all set partitions (small instances only).
// Feasible partitions keep joints unique per group and every member within
// threshold of its group mean; the minimum group count wins, total squared
// tag deviation breaking ties.
inline std::vector<std::vector<int>> exhaustive_grouping_oracle(
    const std::vector<float>& tags, const std::vector<int>& joints, float threshold) {
    const int n = static_cast<int>(tags.size());
    std::vector<int> assign(static_cast<size_t>(n), 0);
    std::vector<std::vector<int>> best;
    int best_groups = n + 1;
    double best_cost = 0.0;

    auto evaluate = [&]() {
        const int ngroups = *std::max_element(assign.begin(), assign.end()) + 1;
        if (ngroups > best_groups) return;
        std::vector<std::vector<int>> groups(static_cast<size_t>(ngroups));
        for (int i = 0; i < n; ++i) groups[static_cast<size_t>(assign[static_cast<size_t>(i)])].push_back(i);
        double cost = 0.0;
        for (const auto& g : groups) {
            std::set<int> seen;
            double mu = 0.0;
            for (int i : g) {
                if (!seen.insert(joints[static_cast<size_t>(i)]).second) return; // joint repeated
                mu += tags[static_cast<size_t>(i)];
            }
            mu /= static_cast<double>(g.size());
            for (int i : g) {
                const double d = tags[static_cast<size_t>(i)] - mu;
                if (std::abs(d) > threshold) return;
                cost += d * d;
            }
        }
        if (ngroups < best_groups || (ngroups == best_groups && cost < best_cost)) {
            best_groups = ngroups;
            best_cost = cost;
            best = groups;
        }
    };

    // restricted growth strings enumerate every set partition exactly once
    std::function<void(int, int)> recurse = [&](int i, int maxv) {
        if (i == n) {
            evaluate();
            return;
        }
        for (int v = 0; v <= maxv + 1; ++v) {
            assign[static_cast<size_t>(i)] = v;
            recurse(i + 1, std::max(maxv, v));
        }
    };
    recurse(0, -1);
    return best;
}

// Canonical form of a grouping for comparisons: groups as sorted index sets.
inline std::set<std::vector<int>> canonical(std::vector<std::vector<int>> groups) {
    std::set<std::vector<int>> out;
    for (auto& g : groups) {
        std::sort(g.begin(), g.end());
        out.insert(g);
    }
    return out;
}

} // namespace fixtures
