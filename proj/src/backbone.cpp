#include "ehrnet/backbone.hpp"

#include <cmath>

namespace ehrnet {

namespace {

struct BaseStage {
    int expand, kernel, out_channels, repeats, stride;
};

// EfficientNet-B0 stage table. Taps sit on the last stage of each stride level:
// stages 1 (24ch, /4), 2 (40ch, /8), 4 (112ch, /16) and 6 (320ch, /32).
constexpr BaseStage kB0[] = {
    {1, 3, 16, 1, 1},
    {6, 3, 24, 2, 2},
    {6, 5, 40, 2, 2},
    {6, 3, 80, 3, 2},
    {6, 5, 112, 3, 1},
    {6, 5, 192, 4, 2},
    {6, 3, 320, 1, 1},
};
constexpr int kTapStages[4] = {1, 2, 4, 6};
constexpr int kStemChannels = 32;
constexpr int kHeadChannels = 1280;
constexpr double kSqueezeRatio = 0.25;

} // namespace

int round_channels(int base, double width_mult) {
    const double v = base * width_mult;
    int nv = std::max(8, static_cast<int>(v + 4.0) / 8 * 8);
    if (nv < 0.9 * v) nv += 8;
    return nv;
}

int scale_repeats(int repeats, double depth_mult) {
    return std::max(1, static_cast<int>(std::lround(repeats * depth_mult)));
}

BackboneSpec build_backbone(const BackboneCoefficients& coeff, int input_resolution,
                            bool with_classifier, int class_count, bool lite) {
    if (input_resolution % 32 != 0)
        throw ConfigError("backbone input resolution " + std::to_string(input_resolution) +
                          " must be divisible by 32 (the backbone downsamples 32x)");
    BackboneSpec spec;
    spec.coeff = coeff;
    spec.input_resolution = input_resolution;
    spec.with_classifier = with_classifier;
    spec.class_count = with_classifier ? class_count : 0;
    spec.lite = lite;
    spec.stem_channels = round_channels(kStemChannels, coeff.width_mult);
    for (const BaseStage& base : kB0) {
        MbStage s;
        s.expand = base.expand;
        s.kernel = base.kernel;
        s.out_channels = round_channels(base.out_channels, coeff.width_mult);
        s.repeats = scale_repeats(base.repeats, coeff.depth_mult);
        s.stride = base.stride;
        spec.stages.push_back(s);
    }
    for (int t = 0; t < 4; ++t) {
        spec.tap_stage[t] = kTapStages[t];
        spec.tap_channels[t] = spec.stages[static_cast<size_t>(kTapStages[t])].out_channels;
    }
    spec.head_channels = round_channels(kHeadChannels, coeff.width_mult);
    return spec;
}

std::array<int, 4> backbone_tap_channels(const BackboneSpec& spec) {
    return spec.tap_channels;
}

BackboneGraphRefs append_backbone(GraphBuilder& b, int input_node, const BackboneSpec& spec) {
    const Shape in_shape = b.shape_of(input_node);
    if (in_shape.c != 3)
        throw ShapeError("backbone expects a 3-channel image input, got " + in_shape.str());
    if (in_shape.h % 32 != 0 || in_shape.w % 32 != 0)
        throw ConfigError("backbone input " + in_shape.str() + " not divisible by 32");

    b.set_group("backbone");
    const Activation act = spec.lite ? Activation::relu : Activation::swish;
    BackboneGraphRefs refs;

    int x = b.conv("backbone.stem.conv", input_node, spec.stem_channels, 3, 2, 1);
    x = b.batchnorm("backbone.stem.bn", x);
    x = b.act("backbone.stem.act", x, act);

    int in_ch = spec.stem_channels;
    for (size_t si = 0; si < spec.stages.size(); ++si) {
        const MbStage& st = spec.stages[si];
        for (int rep = 0; rep < st.repeats; ++rep) {
            const std::string p = "backbone.stage" + std::to_string(si + 1) + ".block" +
                                  std::to_string(rep);
            const int stride = rep == 0 ? st.stride : 1;
            const int block_in = rep == 0 ? in_ch : st.out_channels;
            const int mid = block_in * st.expand;
            const int skip_from = x;

            if (st.expand != 1) {
                x = b.conv(p + ".expand.conv", x, mid, 1, 1, 0);
                x = b.batchnorm(p + ".expand.bn", x);
                x = b.act(p + ".expand.act", x, act);
            }
            x = b.conv(p + ".dw.conv", x, mid, st.kernel, stride, st.kernel / 2, mid);
            x = b.batchnorm(p + ".dw.bn", x);
            x = b.act(p + ".dw.act", x, act);
            if (!spec.lite) {
                const int squeezed = std::max(1, static_cast<int>(block_in * kSqueezeRatio));
                int se = b.global_pool(p + ".se.pool", x);
                se = b.conv(p + ".se.reduce", se, squeezed, 1, 1, 0, 1, true);
                se = b.act(p + ".se.act", se, act);
                se = b.conv(p + ".se.expand", se, mid, 1, 1, 0, 1, true);
                se = b.act(p + ".se.gate", se, Activation::sigmoid);
                x = b.channel_mul(p + ".se.scale", x, se);
            }
            x = b.conv(p + ".project.conv", x, st.out_channels, 1, 1, 0);
            x = b.batchnorm(p + ".project.bn", x);
            if (stride == 1 && block_in == st.out_channels)
                x = b.add(p + ".skip", x, skip_from);
        }
        in_ch = st.out_channels;
        for (int t = 0; t < 4; ++t)
            if (spec.tap_stage[t] == static_cast<int>(si)) refs.taps[t] = x;
    }

    if (spec.with_classifier) {
        int h = b.conv("backbone.classifier.conv", x, spec.head_channels, 1, 1, 0);
        h = b.batchnorm("backbone.classifier.bn", h);
        h = b.act("backbone.classifier.act", h, act);
        h = b.global_pool("backbone.classifier.pool", h);
        refs.logits = b.dense("backbone.classifier.fc", h, spec.class_count, true);
    }
    return refs;
}

LayerGraph backbone_graph(const BackboneSpec& spec) {
    GraphBuilder b;
    const int input = b.input("image", {1, 3, spec.input_resolution, spec.input_resolution});
    const BackboneGraphRefs refs = append_backbone(b, input, spec);
    for (int tap : refs.taps) b.mark_output(tap);
    if (refs.logits >= 0) b.mark_output(refs.logits);
    return b.take();
}

} // namespace ehrnet
