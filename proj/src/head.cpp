#include "ehrnet/head.hpp"

#include <cmath>

namespace ehrnet {

namespace {

// Two-conv residual refine block used after the deconv.
int refine_block(GraphBuilder& b, const std::string& p, int x, int width) {
    const int skip = x;
    x = b.conv(p + ".conv1", x, width, 3, 1, 1);
    x = b.batchnorm(p + ".conv1.bn", x);
    x = b.act(p + ".conv1.relu", x, Activation::relu);
    x = b.conv(p + ".conv2", x, width, 3, 1, 1);
    x = b.batchnorm(p + ".conv2.bn", x);
    x = b.add(p + ".skip", x, skip);
    return b.act(p + ".relu", x, Activation::relu);
}

void render_gaussian(Tensor& map, int joint, int cx, int cy, float sigma) {
    const int h = map.height(), w = map.width();
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    for (int y = std::max(0, cy - radius); y <= std::min(h - 1, cy + radius); ++y)
        for (int x = std::max(0, cx - radius); x <= std::min(w - 1, cx + radius); ++x) {
            const float d2 = static_cast<float>((x - cx) * (x - cx) + (y - cy) * (y - cy));
            const float v = std::exp(-d2 / (2.0f * sigma * sigma));
            float& cell = map.at(0, joint, y, x);
            cell = std::max(cell, v);
        }
}

} // namespace

HeadSpec build_head(const ScaleConfig& config) {
    HeadSpec spec;
    spec.branch_width = config.branch_widths[0];
    spec.deconv_in = 2 * kJointCount + config.branch_widths[0];
    spec.tag_size = config.tag_size;
    spec.heatmap_size = config.heatmap_size;
    return spec;
}

HeadGraphRefs append_head(GraphBuilder& b, int branch1_node, const HeadSpec& spec) {
    const Shape s = b.shape_of(branch1_node);
    if (s.c != spec.branch_width || s.h != s.w)
        throw ShapeError("head expects square (1, " + std::to_string(spec.branch_width) +
                         ", R/4, R/4) features, got " + s.str());
    b.set_group("head");
    HeadGraphRefs refs;

    // First head: heatmaps in channels 0..16, tags in 17..33.
    refs.first_head = b.conv("head.first", branch1_node, 2 * kJointCount, 1, 1, 0, 1, true);

    int x = b.concat("head.concat", {refs.first_head, branch1_node});
    x = b.deconv("head.deconv", x, spec.branch_width, 4, 2, 1); // exact 2x upsample
    x = b.batchnorm("head.deconv.bn", x);
    x = b.act("head.deconv.relu", x, Activation::relu);
    x = refine_block(b, "head.refine0", x, spec.branch_width);
    x = refine_block(b, "head.refine1", x, spec.branch_width);
    refs.refined = b.conv("head.second", x, kJointCount, 1, 1, 0, 1, true);
    return refs;
}

std::pair<Tensor, Tensor> forward_head(const HeadSpec& spec, const Tensor& branch1_features,
                                       WeightStore& weights) {
    GraphBuilder b;
    const Tensor& t = branch1_features;
    const int in = b.input("branch1", {t.dims[0], t.dims[1], t.dims[2], t.dims[3]});
    const HeadGraphRefs refs = append_head(b, in, spec);
    b.mark_output(refs.first_head);
    b.mark_output(refs.refined);
    std::vector<Tensor> outs = execute(b.take(), {branch1_features}, weights);
    return {std::move(outs[0]), std::move(outs[1])};
}

TrainingTargets make_targets(const std::vector<PersonKeypoints>& persons,
                             const ScaleConfig& config, float sigma) {
    const int tsize = config.tag_size, hsize = config.heatmap_size;
    const float limit = static_cast<float>(config.input_resolution);
    TrainingTargets targets;
    targets.quarter = Tensor(1, kJointCount, tsize, tsize);
    targets.half = Tensor(1, kJointCount, hsize, hsize);

    for (size_t p = 0; p < persons.size(); ++p) {
        std::array<int, kJointCount> indices;
        indices.fill(-1);
        for (int j = 0; j < kJointCount; ++j) {
            const auto& kp = persons[p][static_cast<size_t>(j)];
            if (!kp) continue;
            const float x = kp->first, y = kp->second;
            if (x < 0.0f || y < 0.0f || x >= limit || y >= limit)
                throw ConfigError("keypoint out of bounds: person " + std::to_string(p) +
                                  " joint " + std::to_string(j) + " at (" + std::to_string(x) +
                                  ", " + std::to_string(y) + "), image size " +
                                  std::to_string(config.input_resolution));
            const int qx = std::min(tsize - 1, static_cast<int>(std::lround(x / 4.0f)));
            const int qy = std::min(tsize - 1, static_cast<int>(std::lround(y / 4.0f)));
            const int hx = std::min(hsize - 1, static_cast<int>(std::lround(x / 2.0f)));
            const int hy = std::min(hsize - 1, static_cast<int>(std::lround(y / 2.0f)));
            render_gaussian(targets.quarter, j, qx, qy, sigma);
            render_gaussian(targets.half, j, hx, hy, 2.0f * sigma);
            indices[static_cast<size_t>(j)] = qy * tsize + qx;
        }
        targets.keypoint_indices.push_back(indices);
    }
    return targets;
}

double heatmap_loss(const Tensor& pred_quarter, const Tensor& pred_half,
                    const TrainingTargets& targets) {
    if (!pred_quarter.same_shape(targets.quarter))
        throw ShapeError("heatmap_loss: quarter prediction " + pred_quarter.shape_str() +
                         " vs target " + targets.quarter.shape_str());
    if (!pred_half.same_shape(targets.half))
        throw ShapeError("heatmap_loss: half prediction " + pred_half.shape_str() +
                         " vs target " + targets.half.shape_str());
    auto mse = [](const Tensor& a, const Tensor& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.data.size(); ++i) {
            const double d = static_cast<double>(a.data[i]) - b.data[i];
            s += d * d;
        }
        return s / static_cast<double>(a.data.size());
    };
    return mse(pred_quarter, targets.quarter) + mse(pred_half, targets.half);
}

double grouping_loss(const Tensor& tags,
                     const std::vector<std::array<int, kJointCount>>& keypoint_indices) {
    if (tags.channels() != kJointCount)
        throw ShapeError("grouping_loss: expected 17 tag channels, got " + tags.shape_str());
    const std::int64_t plane = tags.count() / tags.channels();

    std::vector<double> means;
    std::vector<std::vector<double>> person_tags;
    for (const auto& joints : keypoint_indices) {
        std::vector<double> values;
        for (int j = 0; j < kJointCount; ++j) {
            const int idx = joints[static_cast<size_t>(j)];
            if (idx < 0) continue;
            if (idx >= plane)
                throw ConfigError("grouping_loss: keypoint index " + std::to_string(idx) +
                                  " outside tag map of " + std::to_string(plane) + " cells");
            values.push_back(tags.data[static_cast<size_t>(j * plane + idx)]);
        }
        if (values.empty()) continue;
        double mu = 0.0;
        for (double v : values) mu += v;
        mu /= static_cast<double>(values.size());
        means.push_back(mu);
        person_tags.push_back(std::move(values));
    }
    if (means.empty()) return 0.0;

    double pull = 0.0;
    for (size_t p = 0; p < means.size(); ++p) {
        double dev = 0.0;
        for (double v : person_tags[p]) dev += (v - means[p]) * (v - means[p]);
        pull += dev / static_cast<double>(person_tags[p].size());
    }
    pull /= static_cast<double>(means.size());

    double push = 0.0;
    if (means.size() > 1) {
        std::int64_t pairs = 0;
        for (size_t i = 0; i < means.size(); ++i)
            for (size_t j = i + 1; j < means.size(); ++j) {
                const double d = means[i] - means[j];
                push += std::exp(-d * d / 2.0);
                ++pairs;
            }
        push /= static_cast<double>(pairs);
    }
    return pull + push;
}

double total_loss(double heatmap, double grouping) {
    return 1.0 * heatmap + 1e-3 * grouping;
}

} // namespace ehrnet
