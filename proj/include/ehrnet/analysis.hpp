#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ehrnet/graph.hpp"

namespace ehrnet {

struct NodeCost {
    std::int64_t params = 0;
    std::int64_t macs = 0;      // headline multiply-accumulates (conv/deconv/dense)
    std::int64_t minor_ops = 0; // elementwise ops: activations, adds, batchnorm, upsample
};

/// Cost of a single node from its geometry. Conv params = out*in/groups*k^2
/// (+out for bias) and MACs = weight count * output spatial elements; deconv
/// MACs use input spatial elements (each input pixel touches k^2 taps);
/// dense = in*out; batchnorm 4 params and 2 ops per element.
NodeCost node_cost(const Node& node, const LayerGraph& graph);

struct CostBucket {
    std::int64_t params = 0;
    std::int64_t macs = 0;
    std::int64_t minor_ops = 0;
};

/// Per-layer and total parameter/MAC accounting for one compiled model.
struct CostReport {
    std::string model_name;
    int phi = 0;
    int input_resolution = 0;
    std::int64_t params = 0;
    std::int64_t macs = 0;
    std::int64_t flops_2x = 0; // always exactly 2 * macs
    std::int64_t minor_ops = 0;
    std::map<std::string, CostBucket> per_module; // backbone / body / head
};

CostReport count_costs(const LayerGraph& graph, const std::string& model_name, int phi,
                       int input_resolution);

/// Cost reports for the whole family, phi = 0 down to -4.
std::vector<CostReport> scaling_table();

/// Published parameter/FLOP figures the reports are checked against.
struct PublishedTarget {
    int phi;
    double params;
    double flops; // convention unstated; either macs or 2*macs may match
};
const std::vector<PublishedTarget>& published_targets();

struct ToleranceBreach {
    int phi;
    std::string what; // "params" or "flops"
    double computed;
    double target;
    double rel_error;
};

/// Checks params within +-15% and macs-or-2x-macs within +-20% per model.
std::vector<ToleranceBreach> check_against_targets(const std::vector<CostReport>& reports);

/// Accuracy-times-efficiency score. Efficiency is FPS per Watt, kept at the
/// 3-decimal precision used in published comparisons, so ae = ap * efficiency
/// reproduces reported tables.
struct AEScore {
    double accuracy_ap = 0.0;
    double fps = 0.0;
    double watts = 0.0;
    double efficiency = 0.0;
    double ae = 0.0;
};
AEScore ae_score(double accuracy_ap, double fps, double watts);

std::string cost_table_text(const std::vector<CostReport>& reports);
std::string to_records(const CostReport& report);

} // namespace ehrnet
