#include "ehrnet/body.hpp"

namespace ehrnet {

namespace {

// Residual block: three 3x3 convolutions at the branch width, batchnorm+relu
// between them, identity skip, relu after the join.
int residual_block(GraphBuilder& b, const std::string& p, int x, int width) {
    const int skip = x;
    for (int i = 0; i < 3; ++i) {
        const std::string c = p + ".conv" + std::to_string(i + 1);
        x = b.conv(c, x, width, 3, 1, 1);
        x = b.batchnorm(c + ".bn", x);
        if (i < 2) x = b.act(c + ".relu", x, Activation::relu);
    }
    x = b.add(p + ".skip", x, skip);
    return b.act(p + ".relu", x, Activation::relu);
}

// Full exchange unit across the branches present at a stage end. Downward:
// chained stride-2 3x3 convs, one per octave, switching to the destination
// width on the last hop. Upward: 1x1 conv at the source resolution, then
// nearest upsample. Contributions are summed and relu'd per destination.
std::array<int, 4> fuse_branches(GraphBuilder& b, const std::string& p, int nbranches,
                                 const std::array<int, 4>& branches, const BodySpec& spec) {
    std::array<int, 4> fused = branches;
    for (int dst = 0; dst < nbranches; ++dst) {
        int acc = branches[static_cast<size_t>(dst)];
        for (int src = 0; src < nbranches; ++src) {
            if (src == dst) continue;
            const std::string e = p + ".f" + std::to_string(src + 1) + "to" +
                                  std::to_string(dst + 1);
            int y = branches[static_cast<size_t>(src)];
            if (src < dst) {
                for (int step = src; step < dst; ++step) {
                    const bool last = step == dst - 1;
                    const int oc = last ? spec.branch_widths[static_cast<size_t>(dst)]
                                        : spec.branch_widths[static_cast<size_t>(src)];
                    const std::string c = e + ".down" + std::to_string(step - src);
                    y = b.conv(c, y, oc, 3, 2, 1);
                    y = b.batchnorm(c + ".bn", y);
                }
            } else {
                y = b.conv(e + ".proj", y, spec.branch_widths[static_cast<size_t>(dst)], 1, 1, 0);
                y = b.batchnorm(e + ".proj.bn", y);
                y = b.upsample(e + ".up", y, 1 << (src - dst));
            }
            acc = b.add(e + ".sum", acc, y);
        }
        fused[static_cast<size_t>(dst)] =
            b.act(p + ".out" + std::to_string(dst + 1) + ".relu", acc, Activation::relu);
    }
    return fused;
}

} // namespace

BodySpec build_body(const ScaleConfig& config, const std::array<int, 4>& tap_channels) {
    BodySpec spec;
    spec.config = config;
    spec.tap_channels = tap_channels;
    spec.branch_widths = config.branch_widths;
    spec.blocks_per_stage = config.stage_repeats;
    for (int n = 0; n < 4; ++n) {
        const int divisor = 1 << (n + 2); // branch n+1 runs at R / 2^(n+1)
        if (config.input_resolution % divisor != 0)
            throw ConfigError("branch " + std::to_string(n + 1) + " resolution " +
                              std::to_string(config.input_resolution) + "/" +
                              std::to_string(divisor) + " is not integral");
        spec.branch_resolutions[static_cast<size_t>(n)] = config.input_resolution / divisor;
    }
    return spec;
}

BodyGraphRefs append_body(GraphBuilder& b, const std::array<int, 4>& tap_nodes,
                          const BodySpec& spec) {
    b.set_group("body");
    for (int n = 0; n < 4; ++n) {
        const Shape s = b.shape_of(tap_nodes[static_cast<size_t>(n)]);
        const int res = spec.branch_resolutions[static_cast<size_t>(n)];
        if (s.c != spec.tap_channels[static_cast<size_t>(n)] || s.h != res || s.w != res)
            throw ShapeError("body tap " + std::to_string(n + 1) + " expects " +
                             std::to_string(spec.tap_channels[static_cast<size_t>(n)]) + "x" +
                             std::to_string(res) + "x" + std::to_string(res) + ", got " + s.str());
    }

    // One 3x3 adapter per branch from tap channels to the branch width.
    std::array<int, 4> branch{};
    for (int n = 0; n < 4; ++n) {
        const std::string t = "body.transition" + std::to_string(n + 1);
        int x = b.conv(t, tap_nodes[static_cast<size_t>(n)],
                       spec.branch_widths[static_cast<size_t>(n)], 3, 1, 1);
        x = b.batchnorm(t + ".bn", x);
        branch[static_cast<size_t>(n)] = b.act(t + ".relu", x, Activation::relu);
    }

    // Stage s runs s+1 branches; branches 3 and 4 join from their taps at
    // stages 2 and 3. Each branch gets M blocks of two residual blocks, then
    // the stage ends with one fusion unit.
    for (int stage = 1; stage <= 3; ++stage) {
        const int nbranches = stage + 1;
        const std::string sp = "body.stage" + std::to_string(stage);
        for (int br = 0; br < nbranches; ++br) {
            int x = branch[static_cast<size_t>(br)];
            for (int m = 0; m < spec.blocks_per_stage[static_cast<size_t>(stage - 1)]; ++m)
                for (int r = 0; r < 2; ++r)
                    x = residual_block(b,
                                       sp + ".branch" + std::to_string(br + 1) + ".block" +
                                           std::to_string(m) + ".res" + std::to_string(r),
                                       x, spec.branch_widths[static_cast<size_t>(br)]);
            branch[static_cast<size_t>(br)] = x;
        }
        if (spec.fuse) branch = fuse_branches(b, sp + ".fuse", nbranches, branch, spec);
    }

    return BodyGraphRefs{branch};
}

std::array<Tensor, 4> forward_body(const BodySpec& spec, const std::array<Tensor, 4>& taps,
                                   WeightStore& weights) {
    GraphBuilder b;
    std::array<int, 4> tap_nodes{};
    for (int n = 0; n < 4; ++n) {
        const Tensor& t = taps[static_cast<size_t>(n)];
        tap_nodes[static_cast<size_t>(n)] =
            b.input("tap" + std::to_string(n + 1), {t.dims[0], t.dims[1], t.dims[2], t.dims[3]});
    }
    const BodyGraphRefs refs = append_body(b, tap_nodes, spec);
    for (int id : refs.branches) b.mark_output(id);
    const LayerGraph g = b.take();
    std::vector<Tensor> outs =
        execute(g, {taps[0], taps[1], taps[2], taps[3]}, weights);
    return {std::move(outs[0]), std::move(outs[1]), std::move(outs[2]), std::move(outs[3])};
}

} // namespace ehrnet
