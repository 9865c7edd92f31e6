#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ehrnet/kernels.hpp"
#include "ehrnet/tensor.hpp"

namespace ehrnet {

enum class LayerKind {
    input,
    conv,
    deconv,
    batchnorm,
    act,
    upsample,
    add,
    concat,
    global_pool,
    dense,
    channel_mul,
};

const char* layer_kind_name(LayerKind kind);

struct Shape {
    int n = 1, c = 1, h = 1, w = 1;
    bool operator==(const Shape&) const = default;
    std::int64_t count() const { return static_cast<std::int64_t>(n) * c * h * w; }
    std::int64_t spatial() const { return static_cast<std::int64_t>(h) * w; }
    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }
};

/// One layer of the compiled network, with enough geometry to infer shapes,
/// count parameters/MACs and execute.
struct Node {
    int id = -1;
    std::string name;
    std::string group; // cost-breakdown bucket: backbone / body / head
    LayerKind kind = LayerKind::input;
    std::vector<int> inputs;
    Shape out;

    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;
    int groups = 1;
    int factor = 1; // upsample
    bool bias = false;
    Activation act = Activation::relu;
};

struct LayerGraph {
    std::vector<Node> nodes; // topological order by construction
    std::vector<int> inputs;
    std::vector<int> outputs;

    const Node& node(int id) const { return nodes.at(static_cast<size_t>(id)); }
    Shape shape_of(int id) const { return node(id).out; }
};

/// Appends nodes in topological order, inferring and validating shapes as it goes.
class GraphBuilder {
public:
    int input(const std::string& name, Shape shape);
    int conv(const std::string& name, int in, int out_channels, int kernel, int stride,
             int padding, int groups = 1, bool bias = false);
    int deconv(const std::string& name, int in, int out_channels, int kernel, int stride,
               int padding);
    int batchnorm(const std::string& name, int in);
    int act(const std::string& name, int in, Activation kind);
    int upsample(const std::string& name, int in, int factor);
    int add(const std::string& name, int a, int b);
    int concat(const std::string& name, const std::vector<int>& ins);
    int global_pool(const std::string& name, int in);
    int dense(const std::string& name, int in, int out_features, bool bias = true);
    int channel_mul(const std::string& name, int in, int gate);

    void set_group(const std::string& group) { group_ = group; }
    void mark_output(int id);
    Shape shape_of(int id) const { return graph_.shape_of(id); }
    const LayerGraph& graph() const { return graph_; }
    LayerGraph take() { return std::move(graph_); }

private:
    Node& push(LayerKind kind, const std::string& name, std::vector<int> inputs);
    LayerGraph graph_;
    std::string group_;
};

/// Plain-text rendering of the graph (one line per node), for inspection and diffing.
std::string graph_to_text(const LayerGraph& graph);

class WeightStore;

/// Runs the graph on the given inputs (matched to graph.inputs order) and
/// returns the tensors of graph.outputs in order. Intermediate results are
/// released as soon as their last consumer has run.
std::vector<Tensor> execute(const LayerGraph& graph, const std::vector<Tensor>& inputs,
                            WeightStore& weights);

} // namespace ehrnet
