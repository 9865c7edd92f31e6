#include "ehrnet/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ehrnet/network.hpp"

namespace ehrnet {

NodeCost node_cost(const Node& n, const LayerGraph& g) {
    NodeCost c;
    switch (n.kind) {
    case LayerKind::conv: {
        const Shape in = g.shape_of(n.inputs[0]);
        const std::int64_t weight_count = static_cast<std::int64_t>(n.out_channels) *
                                          (in.c / n.groups) * n.kernel * n.kernel;
        c.params = weight_count + (n.bias ? n.out_channels : 0);
        c.macs = weight_count * n.out.spatial() * n.out.n;
        break;
    }
    case LayerKind::deconv: {
        const Shape in = g.shape_of(n.inputs[0]);
        const std::int64_t weight_count =
            static_cast<std::int64_t>(in.c) * n.out_channels * n.kernel * n.kernel;
        c.params = weight_count;
        c.macs = weight_count * in.spatial() * in.n;
        break;
    }
    case LayerKind::dense: {
        const Shape in = g.shape_of(n.inputs[0]);
        c.params = static_cast<std::int64_t>(in.c) * n.out_channels +
                   (n.bias ? n.out_channels : 0);
        c.macs = static_cast<std::int64_t>(in.c) * n.out_channels * in.n;
        break;
    }
    case LayerKind::batchnorm:
        c.params = 4 * static_cast<std::int64_t>(n.out.c);
        c.minor_ops = 2 * n.out.count();
        break;
    case LayerKind::act:
    case LayerKind::add:
    case LayerKind::upsample:
    case LayerKind::channel_mul:
    case LayerKind::global_pool:
        c.minor_ops = n.out.count();
        break;
    case LayerKind::input:
    case LayerKind::concat:
        break;
    }
    return c;
}

namespace {

// Recomputes the out shape a node's geometry implies and compares it with the
// recorded one; hand-edited graphs with stale annotations are rejected.
void validate_node_shape(const Node& n, const LayerGraph& g) {
    if (n.inputs.empty()) return;
    const Shape in = g.shape_of(n.inputs[0]);
    Shape want = n.out;
    switch (n.kind) {
    case LayerKind::conv:
        want = {in.n, n.out_channels, (in.h + 2 * n.padding - n.kernel) / n.stride + 1,
                (in.w + 2 * n.padding - n.kernel) / n.stride + 1};
        break;
    case LayerKind::deconv:
        want = {in.n, n.out_channels, (in.h - 1) * n.stride - 2 * n.padding + n.kernel,
                (in.w - 1) * n.stride - 2 * n.padding + n.kernel};
        break;
    case LayerKind::batchnorm:
    case LayerKind::act:
    case LayerKind::add:
    case LayerKind::channel_mul:
        want = in;
        break;
    case LayerKind::upsample:
        want = {in.n, in.c, in.h * n.factor, in.w * n.factor};
        break;
    case LayerKind::global_pool:
        want = {in.n, in.c, 1, 1};
        break;
    case LayerKind::dense:
        want = {in.n, n.out_channels, 1, 1};
        break;
    case LayerKind::concat: {
        int total = 0;
        for (int id : n.inputs) total += g.shape_of(id).c;
        want = {in.n, total, in.h, in.w};
        break;
    }
    case LayerKind::input:
        break;
    }
    if (!(want == n.out))
        throw ShapeError("count_costs: node '" + n.name + "' records shape " + n.out.str() +
                         " but its geometry implies " + want.str());
}

} // namespace

CostReport count_costs(const LayerGraph& g, const std::string& model_name, int phi,
                       int input_resolution) {
    for (const Node& n : g.nodes) {
        for (int in : n.inputs)
            if (in >= n.id)
                throw ShapeError("count_costs: node '" + n.name + "' breaks topological order");
        validate_node_shape(n, g);
    }
    CostReport r;
    r.model_name = model_name;
    r.phi = phi;
    r.input_resolution = input_resolution;
    for (const Node& n : g.nodes) {
        const NodeCost c = node_cost(n, g);
        r.params += c.params;
        r.macs += c.macs;
        r.minor_ops += c.minor_ops;
        CostBucket& bucket = r.per_module[n.group.empty() ? "other" : n.group];
        bucket.params += c.params;
        bucket.macs += c.macs;
        bucket.minor_ops += c.minor_ops;
    }
    r.flops_2x = 2 * r.macs;
    return r;
}

std::vector<CostReport> scaling_table() {
    std::vector<CostReport> reports;
    for (int phi = 0; phi >= -4; --phi) {
        const ScaleConfig config = config_for_phi(phi);
        const NetworkGraph net = build_network(config);
        const std::string name = phi == 0 ? "H0" : "H" + std::to_string(phi);
        reports.push_back(count_costs(net.graph, name, phi, config.input_resolution));
    }
    return reports;
}

const std::vector<PublishedTarget>& published_targets() {
    // Published COCO2017-val comparison figures for the model family.
    static const std::vector<PublishedTarget> targets = {
        {0, 23.3e6, 25.6e9},
        {-1, 16.0e6, 14.2e9},
        {-2, 10.3e6, 7.7e9},
        {-3, 6.9e6, 4.2e9},
        {-4, 3.7e6, 2.1e9},
    };
    return targets;
}

std::vector<ToleranceBreach> check_against_targets(const std::vector<CostReport>& reports) {
    constexpr double kParamTol = 0.15;
    constexpr double kFlopTol = 0.20;
    std::vector<ToleranceBreach> breaches;
    for (const PublishedTarget& t : published_targets()) {
        const CostReport* report = nullptr;
        for (const CostReport& r : reports)
            if (r.phi == t.phi) report = &r;
        if (!report) {
            breaches.push_back({t.phi, "missing", 0.0, t.params, 1.0});
            continue;
        }
        const double perr = std::abs(report->params - t.params) / t.params;
        if (perr > kParamTol)
            breaches.push_back({t.phi, "params", static_cast<double>(report->params), t.params,
                                perr});
        const double e1 = std::abs(report->macs - t.flops) / t.flops;
        const double e2 = std::abs(report->flops_2x - t.flops) / t.flops;
        if (e1 > kFlopTol && e2 > kFlopTol)
            breaches.push_back({t.phi, "flops", static_cast<double>(report->macs), t.flops,
                                std::min(e1, e2)});
    }
    return breaches;
}

AEScore ae_score(double accuracy_ap, double fps, double watts) {
    if (watts <= 0.0)
        throw DomainError("ae_score: watts must be positive, got " + std::to_string(watts));
    AEScore s;
    s.accuracy_ap = accuracy_ap;
    s.fps = fps;
    s.watts = watts;
    s.efficiency = std::round(fps / watts * 1000.0) / 1000.0;
    s.ae = accuracy_ap * s.efficiency;
    return s;
}

std::string cost_table_text(const std::vector<CostReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(6) << "model" << std::right << std::setw(5) << "phi"
       << std::setw(7) << "input" << std::setw(12) << "params" << std::setw(14) << "macs"
       << std::setw(14) << "flops(2x)" << std::setw(12) << "backbone" << std::setw(12) << "body"
       << std::setw(12) << "head" << "\n";
    auto meg = [](std::int64_t v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << static_cast<double>(v) / 1e6 << "M";
        return s.str();
    };
    auto gig = [](std::int64_t v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << static_cast<double>(v) / 1e9 << "B";
        return s.str();
    };
    for (const CostReport& r : reports) {
        os << std::left << std::setw(6) << r.model_name << std::right << std::setw(5) << r.phi
           << std::setw(7) << r.input_resolution << std::setw(12) << meg(r.params)
           << std::setw(14) << gig(r.macs) << std::setw(14) << gig(r.flops_2x);
        for (const char* module : {"backbone", "body", "head"}) {
            auto it = r.per_module.find(module);
            os << std::setw(12) << (it == r.per_module.end() ? "-" : meg(it->second.params));
        }
        os << "\n";
    }
    return os.str();
}

std::string to_records(const CostReport& r) {
    std::ostringstream os;
    os << "cost_report_begin\n";
    os << "model " << r.model_name << "\n";
    os << "phi " << r.phi << "\n";
    os << "input_resolution " << r.input_resolution << "\n";
    os << "params " << r.params << "\n";
    os << "macs " << r.macs << "\n";
    os << "flops_2x " << r.flops_2x << "\n";
    os << "minor_ops " << r.minor_ops << "\n";
    for (const auto& [module, bucket] : r.per_module) {
        os << module << ".params " << bucket.params << "\n";
        os << module << ".macs " << bucket.macs << "\n";
        os << module << ".minor_ops " << bucket.minor_ops << "\n";
    }
    os << "cost_report_end\n";
    return os.str();
}

} // namespace ehrnet
