#include "ehrnet/scaling.hpp"

#include <cmath>
#include <sstream>

namespace ehrnet {

namespace {

struct TableRow {
    int phi;
    int input_res;
    std::array<int, 4> widths;
    std::array<int, 3> repeats;
};

// Published scaling configs, stored verbatim: no single rounding rule
// reproduces every width (e.g. W_b4 at phi = -1 is 206, not ceil(204.8) = 205).
constexpr TableRow kConfigs[] = {
    {0, 512, {32, 64, 128, 256}, {1, 4, 3}},
    {-1, 480, {26, 52, 103, 206}, {1, 3, 3}},
    {-2, 448, {21, 42, 83, 166}, {1, 2, 3}},
    {-3, 416, {17, 34, 67, 133}, {1, 1, 3}},
    {-4, 384, {14, 27, 54, 107}, {1, 1, 2}},
};

// Classification input sizes of the compact backbones. 224 * 1.15^phi rounding
// does not reproduce the 145 entry, so these are stored as constants too.
constexpr int kClassificationRes[] = {128, 145, 170, 195, 224}; // phi -4..0

const TableRow* find_row(int phi) {
    for (const TableRow& row : kConfigs)
        if (row.phi == phi) return &row;
    return nullptr;
}

[[noreturn]] void throw_out_of_range(int phi) {
    throw UnsupportedCoefficient("scaling coefficient phi=" + std::to_string(phi) +
                                 " unsupported; valid range is [-4, 0]");
}

} // namespace

BackboneCoefficients backbone_coefficients(int phi) {
    BackboneCoefficients c;
    c.phi = phi;
    c.depth_mult = std::pow(1.2, phi);
    c.width_mult = std::pow(1.1, phi);
    c.resolution_mult = std::pow(1.15, phi);
    return c;
}

int input_resolution(int phi) {
    const int r = 512 + 32 * phi;
    if (r < 32)
        throw UnsupportedCoefficient("input resolution 512+32*phi = " + std::to_string(r) +
                                     " for phi=" + std::to_string(phi) + " is below 32");
    return r;
}

int branch_width_formula(int branch, int phi) {
    if (branch < 1 || branch > 4)
        throw ConfigError("branch index must be in 1..4, got " + std::to_string(branch));
    static constexpr int base[4] = {32, 64, 128, 256};
    return static_cast<int>(std::ceil(base[branch - 1] * std::pow(1.25, phi)));
}

std::array<int, 3> stage_repeats(int phi) {
    const TableRow* row = find_row(phi);
    if (!row) throw_out_of_range(phi);
    return row->repeats;
}

int classification_resolution(int phi) {
    if (phi >= -4 && phi <= 0) return kClassificationRes[phi + 4];
    return static_cast<int>(std::ceil(224.0 * std::pow(1.15, phi)));
}

ScaleConfig config_for_phi(int phi) {
    const TableRow* row = find_row(phi);
    if (!row) throw_out_of_range(phi);
    ScaleConfig c;
    c.phi = phi;
    c.input_resolution = row->input_res;
    c.branch_widths = row->widths;
    c.stage_repeats = row->repeats;
    c.backbone = backbone_coefficients(phi);
    c.tag_size = row->input_res / 4;
    c.heatmap_size = row->input_res / 2;
    return c;
}

std::string to_records(const ScaleConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "scale_config_begin\n";
    os << "phi " << c.phi << "\n";
    os << "input_resolution " << c.input_resolution << "\n";
    os << "branch_widths " << c.branch_widths[0] << " " << c.branch_widths[1] << " "
       << c.branch_widths[2] << " " << c.branch_widths[3] << "\n";
    os << "stage_repeats " << c.stage_repeats[0] << " " << c.stage_repeats[1] << " "
       << c.stage_repeats[2] << "\n";
    os << "backbone.phi " << c.backbone.phi << "\n";
    os << "backbone.depth_mult " << c.backbone.depth_mult << "\n";
    os << "backbone.width_mult " << c.backbone.width_mult << "\n";
    os << "backbone.resolution_mult " << c.backbone.resolution_mult << "\n";
    os << "tag_size " << c.tag_size << "\n";
    os << "heatmap_size " << c.heatmap_size << "\n";
    os << "scale_config_end\n";
    return os.str();
}

ScaleConfig config_from_records(const std::string& text) {
    ScaleConfig c;
    std::istringstream is(text);
    std::string line;
    bool open = false, closed = false;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "scale_config_begin") { open = true; continue; }
        if (key == "scale_config_end") { closed = true; break; }
        if (!open) continue;
        auto fail = [&]() {
            throw FormatError("scale_config: bad value for '" + key + "' at line " +
                              std::to_string(lineno));
        };
        if (key == "phi") { if (!(ls >> c.phi)) fail(); }
        else if (key == "input_resolution") { if (!(ls >> c.input_resolution)) fail(); }
        else if (key == "branch_widths") {
            for (int& w : c.branch_widths) if (!(ls >> w)) fail();
        } else if (key == "stage_repeats") {
            for (int& r : c.stage_repeats) if (!(ls >> r)) fail();
        } else if (key == "backbone.phi") { if (!(ls >> c.backbone.phi)) fail(); }
        else if (key == "backbone.depth_mult") { if (!(ls >> c.backbone.depth_mult)) fail(); }
        else if (key == "backbone.width_mult") { if (!(ls >> c.backbone.width_mult)) fail(); }
        else if (key == "backbone.resolution_mult") { if (!(ls >> c.backbone.resolution_mult)) fail(); }
        else if (key == "tag_size") { if (!(ls >> c.tag_size)) fail(); }
        else if (key == "heatmap_size") { if (!(ls >> c.heatmap_size)) fail(); }
        // unknown keys ignored
    }
    if (!open || !closed)
        throw FormatError("scale_config: missing scale_config_begin/scale_config_end");
    return c;
}

} // namespace ehrnet
