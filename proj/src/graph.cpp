#include "ehrnet/graph.hpp"

#include <memory>
#include <sstream>

#include "ehrnet/weights.hpp"

namespace ehrnet {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::input: return "input";
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::act: return "act";
    case LayerKind::upsample: return "upsample";
    case LayerKind::add: return "add";
    case LayerKind::concat: return "concat";
    case LayerKind::global_pool: return "global_pool";
    case LayerKind::dense: return "dense";
    case LayerKind::channel_mul: return "channel_mul";
    }
    return "?";
}

Node& GraphBuilder::push(LayerKind kind, const std::string& name, std::vector<int> inputs) {
    for (int in : inputs)
        if (in < 0 || in >= static_cast<int>(graph_.nodes.size()))
            throw ShapeError("node '" + name + "' references unknown input id " +
                             std::to_string(in));
    Node n;
    n.id = static_cast<int>(graph_.nodes.size());
    n.name = name;
    n.group = group_;
    n.kind = kind;
    n.inputs = std::move(inputs);
    graph_.nodes.push_back(std::move(n));
    return graph_.nodes.back();
}

int GraphBuilder::input(const std::string& name, Shape shape) {
    Node& n = push(LayerKind::input, name, {});
    n.out = shape;
    graph_.inputs.push_back(n.id);
    return n.id;
}

int GraphBuilder::conv(const std::string& name, int in, int out_channels, int kernel, int stride,
                       int padding, int groups, bool bias) {
    const Shape s = graph_.shape_of(in);
    if (s.c % groups != 0)
        throw ConfigError("conv '" + name + "': input channels " + std::to_string(s.c) +
                          " not divisible by groups " + std::to_string(groups));
    const int oh = (s.h + 2 * padding - kernel) / stride + 1;
    const int ow = (s.w + 2 * padding - kernel) / stride + 1;
    if (oh < 1 || ow < 1)
        throw ShapeError("conv '" + name + "': kernel " + std::to_string(kernel) +
                         " stride " + std::to_string(stride) + " does not fit input " + s.str());
    Node& n = push(LayerKind::conv, name, {in});
    n.out = {s.n, out_channels, oh, ow};
    n.out_channels = out_channels;
    n.kernel = kernel;
    n.stride = stride;
    n.padding = padding;
    n.groups = groups;
    n.bias = bias;
    return n.id;
}

int GraphBuilder::deconv(const std::string& name, int in, int out_channels, int kernel,
                         int stride, int padding) {
    const Shape s = graph_.shape_of(in);
    const int oh = (s.h - 1) * stride - 2 * padding + kernel;
    const int ow = (s.w - 1) * stride - 2 * padding + kernel;
    if (oh < 1 || ow < 1)
        throw ShapeError("deconv '" + name + "': degenerate output for input " + s.str());
    Node& n = push(LayerKind::deconv, name, {in});
    n.out = {s.n, out_channels, oh, ow};
    n.out_channels = out_channels;
    n.kernel = kernel;
    n.stride = stride;
    n.padding = padding;
    return n.id;
}

int GraphBuilder::batchnorm(const std::string& name, int in) {
    Node& n = push(LayerKind::batchnorm, name, {in});
    n.out = graph_.shape_of(in);
    n.out_channels = n.out.c;
    return n.id;
}

int GraphBuilder::act(const std::string& name, int in, Activation kind) {
    Node& n = push(LayerKind::act, name, {in});
    n.out = graph_.shape_of(in);
    n.act = kind;
    return n.id;
}

int GraphBuilder::upsample(const std::string& name, int in, int factor) {
    if (factor < 1) throw ConfigError("upsample '" + name + "': factor must be >= 1");
    const Shape s = graph_.shape_of(in);
    Node& n = push(LayerKind::upsample, name, {in});
    n.out = {s.n, s.c, s.h * factor, s.w * factor};
    n.factor = factor;
    return n.id;
}

int GraphBuilder::add(const std::string& name, int a, int b) {
    const Shape sa = graph_.shape_of(a), sb = graph_.shape_of(b);
    if (!(sa == sb))
        throw ShapeError("add '" + name + "': operand shapes differ, " + sa.str() + " vs " +
                         sb.str());
    Node& n = push(LayerKind::add, name, {a, b});
    n.out = sa;
    return n.id;
}

int GraphBuilder::concat(const std::string& name, const std::vector<int>& ins) {
    if (ins.empty()) throw ConfigError("concat '" + name + "': no inputs");
    Shape first = graph_.shape_of(ins[0]);
    int total = 0;
    for (int in : ins) {
        const Shape s = graph_.shape_of(in);
        if (s.n != first.n || s.h != first.h || s.w != first.w)
            throw ShapeError("concat '" + name + "': incompatible input " + s.str() + " vs " +
                             first.str());
        total += s.c;
    }
    Node& n = push(LayerKind::concat, name, ins);
    n.out = {first.n, total, first.h, first.w};
    return n.id;
}

int GraphBuilder::global_pool(const std::string& name, int in) {
    const Shape s = graph_.shape_of(in);
    Node& n = push(LayerKind::global_pool, name, {in});
    n.out = {s.n, s.c, 1, 1};
    return n.id;
}

int GraphBuilder::dense(const std::string& name, int in, int out_features, bool bias) {
    const Shape s = graph_.shape_of(in);
    if (s.h != 1 || s.w != 1)
        throw ShapeError("dense '" + name + "': expects pooled input, got " + s.str());
    Node& n = push(LayerKind::dense, name, {in});
    n.out = {s.n, out_features, 1, 1};
    n.out_channels = out_features;
    n.bias = bias;
    return n.id;
}

int GraphBuilder::channel_mul(const std::string& name, int in, int gate) {
    const Shape s = graph_.shape_of(in), g = graph_.shape_of(gate);
    if (g.n != s.n || g.c != s.c || g.h != 1 || g.w != 1)
        throw ShapeError("channel_mul '" + name + "': gate " + g.str() + " does not match input " +
                         s.str());
    Node& n = push(LayerKind::channel_mul, name, {in, gate});
    n.out = s;
    return n.id;
}

void GraphBuilder::mark_output(int id) {
    if (id < 0 || id >= static_cast<int>(graph_.nodes.size()))
        throw ShapeError("mark_output: unknown node id " + std::to_string(id));
    graph_.outputs.push_back(id);
}

namespace {
constexpr float kBnEpsilon = 1e-5f;
} // namespace

std::vector<Tensor> execute(const LayerGraph& g, const std::vector<Tensor>& inputs,
                            WeightStore& weights) {
    if (inputs.size() != g.inputs.size())
        throw ShapeError("execute: graph expects " + std::to_string(g.inputs.size()) +
                         " inputs, got " + std::to_string(inputs.size()));

    std::vector<int> remaining_uses(g.nodes.size(), 0);
    for (const Node& n : g.nodes)
        for (int in : n.inputs) remaining_uses[static_cast<size_t>(in)]++;
    for (int out : g.outputs) remaining_uses[static_cast<size_t>(out)]++;

    std::vector<std::shared_ptr<Tensor>> values(g.nodes.size());
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Node& n = g.node(g.inputs[i]);
        const Shape expect = n.out;
        const Tensor& t = inputs[i];
        if (t.dims[0] != expect.n || t.dims[1] != expect.c || t.dims[2] != expect.h ||
            t.dims[3] != expect.w)
            throw ShapeError("execute: input '" + n.name + "' expects " + expect.str() + ", got " +
                             t.shape_str());
        values[static_cast<size_t>(n.id)] = std::make_shared<Tensor>(t);
    }

    auto consume = [&](int id) -> std::shared_ptr<Tensor> {
        auto v = values[static_cast<size_t>(id)];
        if (!v)
            throw ShapeError("execute: node '" + g.node(id).name + "' consumed before produced");
        if (--remaining_uses[static_cast<size_t>(id)] == 0)
            values[static_cast<size_t>(id)].reset();
        return v;
    };

    for (const Node& n : g.nodes) {
        if (n.kind == LayerKind::input) continue;
        Tensor result;
        switch (n.kind) {
        case LayerKind::conv: {
            auto in = consume(n.inputs[0]);
            const int icpg = in->channels() / n.groups;
            const std::int64_t wcount =
                static_cast<std::int64_t>(n.out_channels) * icpg * n.kernel * n.kernel;
            auto wspan = weights.tensor(n.name, WeightRole::conv_weight, wcount);
            Tensor w({n.out_channels, icpg, n.kernel, n.kernel},
                     std::vector<float>(wspan.begin(), wspan.end()));
            std::span<const float> b;
            if (n.bias) b = weights.tensor(n.name, WeightRole::conv_bias, n.out_channels);
            result = conv2d(*in, w, b, n.stride, n.padding, n.groups);
            break;
        }
        case LayerKind::deconv: {
            auto in = consume(n.inputs[0]);
            const std::int64_t wcount = static_cast<std::int64_t>(in->channels()) *
                                        n.out_channels * n.kernel * n.kernel;
            auto wspan = weights.tensor(n.name, WeightRole::conv_weight, wcount);
            Tensor w({in->channels(), n.out_channels, n.kernel, n.kernel},
                     std::vector<float>(wspan.begin(), wspan.end()));
            result = conv2d_transposed(*in, w, n.stride, n.padding);
            break;
        }
        case LayerKind::batchnorm: {
            auto in = consume(n.inputs[0]);
            const int c = in->channels();
            result = batchnorm_inference(*in, weights.tensor(n.name, WeightRole::bn_mean, c),
                                         weights.tensor(n.name, WeightRole::bn_var, c),
                                         weights.tensor(n.name, WeightRole::bn_gamma, c),
                                         weights.tensor(n.name, WeightRole::bn_beta, c),
                                         kBnEpsilon);
            break;
        }
        case LayerKind::act: {
            auto in = consume(n.inputs[0]);
            result = activation(*in, n.act);
            break;
        }
        case LayerKind::upsample: {
            auto in = consume(n.inputs[0]);
            result = upsample_nearest(*in, n.factor);
            break;
        }
        case LayerKind::add: {
            auto a = consume(n.inputs[0]);
            auto b = consume(n.inputs[1]);
            result = elementwise_add(*a, *b);
            break;
        }
        case LayerKind::concat: {
            std::vector<std::shared_ptr<Tensor>> held;
            std::vector<const Tensor*> ins;
            held.reserve(n.inputs.size());
            for (int id : n.inputs) {
                held.push_back(consume(id));
                ins.push_back(held.back().get());
            }
            result = concat_channels(ins);
            break;
        }
        case LayerKind::global_pool: {
            auto in = consume(n.inputs[0]);
            result = global_avg_pool(*in);
            break;
        }
        case LayerKind::dense: {
            auto in = consume(n.inputs[0]);
            const std::int64_t wcount =
                static_cast<std::int64_t>(in->channels()) * n.out_channels;
            auto w = weights.tensor(n.name, WeightRole::dense_weight, wcount);
            std::span<const float> b;
            if (n.bias) b = weights.tensor(n.name, WeightRole::dense_bias, n.out_channels);
            result = dense(*in, w, b, n.out_channels);
            break;
        }
        case LayerKind::channel_mul: {
            auto in = consume(n.inputs[0]);
            auto gate = consume(n.inputs[1]);
            result = multiply_channels(*in, *gate);
            break;
        }
        case LayerKind::input:
            break;
        }
        if (result.dims[0] != n.out.n || result.dims[1] != n.out.c || result.dims[2] != n.out.h ||
            result.dims[3] != n.out.w)
            throw ShapeError("execute: node '" + n.name + "' produced " + result.shape_str() +
                             ", graph expected " + n.out.str());
        if (remaining_uses[static_cast<size_t>(n.id)] > 0)
            values[static_cast<size_t>(n.id)] = std::make_shared<Tensor>(std::move(result));
    }

    std::vector<Tensor> out;
    out.reserve(g.outputs.size());
    for (int id : g.outputs) {
        auto v = values[static_cast<size_t>(id)];
        if (!v) throw ShapeError("execute: output node not computed");
        out.push_back(*v);
    }
    return out;
}

std::string graph_to_text(const LayerGraph& g) {
    std::ostringstream os;
    os << "layer_graph nodes " << g.nodes.size() << "\n";
    for (const Node& n : g.nodes) {
        os << "node " << n.id << " " << layer_kind_name(n.kind);
        if (!n.name.empty()) os << " name=" << n.name;
        if (!n.group.empty()) os << " group=" << n.group;
        if (!n.inputs.empty()) {
            os << " in=";
            for (size_t i = 0; i < n.inputs.size(); ++i)
                os << (i ? "," : "") << n.inputs[i];
        }
        switch (n.kind) {
        case LayerKind::conv:
        case LayerKind::deconv:
            os << " k=" << n.kernel << " s=" << n.stride << " p=" << n.padding;
            if (n.groups != 1) os << " g=" << n.groups;
            if (n.bias) os << " bias";
            break;
        case LayerKind::upsample:
            os << " f=" << n.factor;
            break;
        default:
            break;
        }
        os << " out=" << n.out.str() << "\n";
    }
    os << "end\n";
    return os.str();
}

} // namespace ehrnet
