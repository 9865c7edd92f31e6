#include "ehrnet/network.hpp"

namespace ehrnet {

NetworkGraph build_network(const ScaleConfig& config, int override_resolution) {
    const int res = override_resolution > 0 ? override_resolution : config.input_resolution;
    if (res % 32 != 0)
        throw ConfigError("network input resolution " + std::to_string(res) +
                          " must be divisible by 32");

    NetworkGraph net;
    net.backbone = build_backbone(config.backbone, res, /*with_classifier=*/false, 0);

    ScaleConfig body_config = config;
    body_config.input_resolution = res;
    body_config.tag_size = res / 4;
    body_config.heatmap_size = res / 2;
    net.body = build_body(body_config, net.backbone.tap_channels);
    net.head = build_head(body_config);

    GraphBuilder b;
    net.input_node = b.input("image", {1, 3, res, res});
    const BackboneGraphRefs bb = append_backbone(b, net.input_node, net.backbone);
    const BodyGraphRefs body = append_body(b, bb.taps, net.body);
    net.branch_nodes = body.branches;
    const HeadGraphRefs head = append_head(b, body.branches[0], net.head);
    net.first_head_node = head.first_head;
    net.refined_node = head.refined;
    b.mark_output(head.first_head);
    b.mark_output(head.refined);
    for (int branch : body.branches) b.mark_output(branch);
    net.graph = b.take();
    return net;
}

std::pair<Tensor, Tensor> forward_network(const NetworkGraph& net, const Tensor& image,
                                          WeightStore& weights) {
    std::vector<Tensor> outs = execute(net.graph, {image}, weights);
    return {std::move(outs[0]), std::move(outs[1])};
}

} // namespace ehrnet
