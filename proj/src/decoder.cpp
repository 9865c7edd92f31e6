#include "ehrnet/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "ehrnet/kernels.hpp"

namespace ehrnet {

namespace {

Tensor channel_slice(const Tensor& t, int from, int count) {
    Tensor out(t.batch(), count, t.height(), t.width());
    const std::int64_t plane = static_cast<std::int64_t>(t.height()) * t.width();
    for (int n = 0; n < t.batch(); ++n)
        for (int c = 0; c < count; ++c)
            std::copy_n(&t.data[t.index(n, from + c, 0, 0)], plane,
                        &out.data[out.index(n, c, 0, 0)]);
    return out;
}

double tag_distance2(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s;
}

struct OpenPerson {
    std::array<bool, kJointCount> has{};
    std::vector<Keypoint> keypoints;
    std::vector<double> tag_sum;
    std::vector<float> mean_tag;

    void absorb(const Keypoint& kp) {
        if (tag_sum.empty()) tag_sum.assign(kp.tag.size(), 0.0);
        for (size_t i = 0; i < kp.tag.size(); ++i) tag_sum[i] += kp.tag[i];
        keypoints.push_back(kp);
        has[static_cast<size_t>(kp.joint_id)] = true;
        mean_tag.resize(tag_sum.size());
        for (size_t i = 0; i < tag_sum.size(); ++i)
            mean_tag[i] = static_cast<float>(tag_sum[i] / static_cast<double>(keypoints.size()));
    }
};

} // namespace

std::array<std::vector<Peak>, kJointCount> extract_peaks(const Tensor& heatmaps, int nms_window,
                                                         int top_k, float threshold) {
    if (heatmaps.channels() != kJointCount)
        throw ShapeError("extract_peaks: expected 17 heatmap channels, got " +
                         heatmaps.shape_str());
    const Tensor pooled = maxpool_window(heatmaps, nms_window);
    const int h = heatmaps.height(), w = heatmaps.width();
    std::array<std::vector<Peak>, kJointCount> peaks;
    for (int j = 0; j < kJointCount; ++j) {
        std::vector<Peak>& list = peaks[static_cast<size_t>(j)];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float v = heatmaps.at(0, j, y, x);
                if (v >= threshold && v == pooled.at(0, j, y, x))
                    list.push_back(Peak{y, x, v, {}});
            }
        std::sort(list.begin(), list.end(), [](const Peak& a, const Peak& b) {
            if (a.value != b.value) return a.value > b.value;
            if (a.row != b.row) return a.row < b.row;
            return a.col < b.col;
        });
        if (static_cast<int>(list.size()) > top_k) list.resize(static_cast<size_t>(top_k));
    }
    return peaks;
}

PoseSet group_by_tags(const std::array<std::vector<Peak>, kJointCount>& peaks,
                      float tag_threshold) {
    std::vector<OpenPerson> persons;
    for (int j = 0; j < kJointCount; ++j) {
        std::vector<const Peak*> ordered;
        for (const Peak& p : peaks[static_cast<size_t>(j)]) ordered.push_back(&p);
        // Re-sorting makes grouping independent of the caller's peak order.
        std::sort(ordered.begin(), ordered.end(), [](const Peak* a, const Peak* b) {
            if (a->value != b->value) return a->value > b->value;
            if (a->row != b->row) return a->row < b->row;
            return a->col < b->col;
        });
        for (const Peak* p : ordered) {
            Keypoint kp;
            kp.joint_id = j;
            kp.x = static_cast<float>(p->col);
            kp.y = static_cast<float>(p->row);
            kp.score = std::clamp(p->value, 0.0f, 1.0f);
            kp.tag = p->tag;

            int best = -1;
            double best_d2 = 0.0;
            for (size_t pi = 0; pi < persons.size(); ++pi) {
                if (persons[pi].has[static_cast<size_t>(j)]) continue;
                if (persons[pi].mean_tag.size() != kp.tag.size()) continue;
                const double d2 = tag_distance2(persons[pi].mean_tag, kp.tag);
                if (best < 0 || d2 < best_d2) {
                    best = static_cast<int>(pi);
                    best_d2 = d2;
                }
            }
            if (best >= 0 &&
                best_d2 <= static_cast<double>(tag_threshold) * tag_threshold) {
                persons[static_cast<size_t>(best)].absorb(kp);
            } else {
                persons.emplace_back().absorb(kp);
            }
        }
    }

    PoseSet poses;
    for (OpenPerson& op : persons) {
        Person person;
        person.keypoints = std::move(op.keypoints);
        float s = 0.0f;
        for (const Keypoint& kp : person.keypoints) s += kp.score;
        person.score = person.keypoints.empty()
                           ? 0.0f
                           : s / static_cast<float>(person.keypoints.size());
        poses.persons.push_back(std::move(person));
    }
    return poses;
}

std::pair<Tensor, Tensor> aggregate_scales(const std::vector<Tensor>& heatmaps_per_scale,
                                           const std::vector<Tensor>& tags_per_scale,
                                           int target_size) {
    if (heatmaps_per_scale.empty())
        throw ConfigError("aggregate_scales: need at least one scale");
    if (tags_per_scale.size() != heatmaps_per_scale.size())
        throw ConfigError("aggregate_scales: " + std::to_string(heatmaps_per_scale.size()) +
                          " heatmap scales vs " + std::to_string(tags_per_scale.size()) +
                          " tag scales");
    auto to_target = [&](const Tensor& t) {
        if (t.height() == target_size && t.width() == target_size) return t;
        if (t.height() > target_size || target_size % t.height() != 0 || t.height() != t.width())
            throw ConfigError("aggregate_scales: map " + t.shape_str() +
                              " not nearest-resizable to " + std::to_string(target_size));
        return upsample_nearest(t, target_size / t.height());
    };

    Tensor avg;
    std::vector<Tensor> resized_tags;
    for (size_t s = 0; s < heatmaps_per_scale.size(); ++s) {
        Tensor h = to_target(heatmaps_per_scale[s]);
        if (s == 0) {
            avg = std::move(h);
        } else {
            if (!avg.same_shape(h))
                throw ConfigError("aggregate_scales: heatmap channel mismatch across scales");
            for (size_t i = 0; i < avg.data.size(); ++i) avg.data[i] += h.data[i];
        }
        resized_tags.push_back(to_target(tags_per_scale[s]));
    }
    const float inv = 1.0f / static_cast<float>(heatmaps_per_scale.size());
    for (float& v : avg.data) v *= inv;

    std::vector<const Tensor*> refs;
    for (const Tensor& t : resized_tags) refs.push_back(&t);
    return {std::move(avg), concat_channels(refs)};
}

PoseSet decode_maps(const Tensor& heatmaps, const Tensor& tagmaps, int tag_dim,
                    float to_input_scale, const DecodeParams& params) {
    if (tagmaps.channels() != tag_dim * kJointCount)
        throw ShapeError("decode_maps: tag tensor " + tagmaps.shape_str() + " does not hold " +
                         std::to_string(tag_dim) + " scales x 17 joints");
    auto peaks = extract_peaks(heatmaps, params.nms_window, params.top_k, params.threshold);

    const int hh = heatmaps.height(), hw = heatmaps.width();
    const int th = tagmaps.height(), tw = tagmaps.width();
    for (int j = 0; j < kJointCount; ++j) {
        for (Peak& p : peaks[static_cast<size_t>(j)]) {
            const int ty = std::min(th - 1, p.row * th / hh);
            const int tx = std::min(tw - 1, p.col * tw / hw);
            p.tag.resize(static_cast<size_t>(tag_dim));
            for (int s = 0; s < tag_dim; ++s)
                p.tag[static_cast<size_t>(s)] = tagmaps.at(0, s * kJointCount + j, ty, tx);
        }
    }

    PoseSet poses = group_by_tags(peaks, params.tag_threshold);

    const float limit_x = static_cast<float>(hw) * to_input_scale;
    const float limit_y = static_cast<float>(hh) * to_input_scale;
    for (Person& person : poses.persons) {
        for (Keypoint& kp : person.keypoints) {
            float px = kp.x, py = kp.y;
            if (params.refine_subpixel) {
                const int ix = static_cast<int>(px), iy = static_cast<int>(py);
                const int j = kp.joint_id;
                if (ix + 1 < hw || ix - 1 >= 0) {
                    const float right = ix + 1 < hw ? heatmaps.at(0, j, iy, ix + 1) : -1e30f;
                    const float left = ix - 1 >= 0 ? heatmaps.at(0, j, iy, ix - 1) : -1e30f;
                    px += right > left ? 0.25f : -0.25f;
                }
                if (iy + 1 < hh || iy - 1 >= 0) {
                    const float down = iy + 1 < hh ? heatmaps.at(0, j, iy + 1, ix) : -1e30f;
                    const float up = iy - 1 >= 0 ? heatmaps.at(0, j, iy - 1, ix) : -1e30f;
                    py += down > up ? 0.25f : -0.25f;
                }
            }
            kp.x = std::clamp(px * to_input_scale, 0.0f, std::nextafter(limit_x, 0.0f));
            kp.y = std::clamp(py * to_input_scale, 0.0f, std::nextafter(limit_y, 0.0f));
        }
    }
    return poses;
}

PoseSet decode(const Tensor& first_head_output, const Tensor& refined_heatmaps,
               const ScaleConfig& config, const DecodeParams& params) {
    if (first_head_output.channels() != 2 * kJointCount)
        throw ShapeError("decode: first head output must have 34 channels, got " +
                         first_head_output.shape_str());
    if (refined_heatmaps.channels() != kJointCount)
        throw ShapeError("decode: refined heatmaps must have 17 channels, got " +
                         refined_heatmaps.shape_str());
    const Tensor tags = channel_slice(first_head_output, kJointCount, kJointCount);
    const float scale = static_cast<float>(config.input_resolution) /
                        static_cast<float>(refined_heatmaps.height());
    return decode_maps(refined_heatmaps, tags, 1, scale, params);
}

} // namespace ehrnet
