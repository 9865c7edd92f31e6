// Command-line front end: describe scaling configs, account costs, run the
// compiled network on tensor fixtures and decode poses.
//
// Exit codes: 0 success, 2 usage error, 3 tolerance breach under --check,
// 4 malformed input tensors or shape mismatch.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <random>

#include "ehrnet/analysis.hpp"
#include "ehrnet/decoder.hpp"
#include "ehrnet/fixture_io.hpp"
#include "ehrnet/network.hpp"

using namespace ehrnet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitTolerance = 3;
constexpr int kExitBadInput = 4;

ScaleConfig resolve_config(int phi, bool extrapolate) {
    if (phi >= -4 && phi <= 0) return config_for_phi(phi);
    if (!extrapolate)
        throw UnsupportedCoefficient("phi=" + std::to_string(phi) +
                                     " outside [-4, 0]; pass --extrapolate to use the closed-form "
                                     "scaling rules");
    ScaleConfig c;
    c.phi = phi;
    c.input_resolution = input_resolution(phi);
    for (int n = 1; n <= 4; ++n)
        c.branch_widths[static_cast<size_t>(n - 1)] = branch_width_formula(n, phi);
    c.stage_repeats = phi < -4 ? std::array<int, 3>{1, 1, 1} : stage_repeats(0);
    c.backbone = backbone_coefficients(phi);
    c.tag_size = c.input_resolution / 4;
    c.heatmap_size = c.input_resolution / 2;
    return c;
}

void print_config(const ScaleConfig& c, const std::string& format) {
    if (format == "records") {
        std::cout << to_records(c);
        return;
    }
    const std::string name = c.phi == 0 ? "H0" : "H" + std::to_string(c.phi);
    std::cout << "model             " << name << " (phi " << c.phi << ")\n";
    std::cout << "input_resolution  " << c.input_resolution << "\n";
    std::cout << "branch_widths     " << c.branch_widths[0] << " " << c.branch_widths[1] << " "
              << c.branch_widths[2] << " " << c.branch_widths[3] << "\n";
    std::cout << "stage_repeats     " << c.stage_repeats[0] << " " << c.stage_repeats[1] << " "
              << c.stage_repeats[2] << "\n";
    std::cout << "tag_size          " << c.tag_size << "\n";
    std::cout << "heatmap_size      " << c.heatmap_size << "\n";
    std::cout.precision(6);
    std::cout << "backbone          d=" << c.backbone.depth_mult << " w=" << c.backbone.width_mult
              << " r=" << c.backbone.resolution_mult << " (classification input "
              << classification_resolution(c.phi) << ")\n";
}

int cmd_costs(int phi, bool all, bool check, const std::string& format) {
    std::vector<CostReport> reports;
    if (all) {
        reports = scaling_table();
    } else {
        const ScaleConfig config = config_for_phi(phi);
        const NetworkGraph net = build_network(config);
        const std::string name = phi == 0 ? "H0" : "H" + std::to_string(phi);
        reports.push_back(count_costs(net.graph, name, phi, config.input_resolution));
    }
    if (format == "records")
        for (const CostReport& r : reports) std::cout << to_records(r);
    else
        std::cout << cost_table_text(reports);
    if (check) {
        const auto breaches = check_against_targets(reports);
        if (!breaches.empty()) {
            for (const auto& b : breaches)
                std::cerr << "tolerance breach: phi=" << b.phi << " " << b.what << " computed "
                          << b.computed << " vs target " << b.target << " ("
                          << static_cast<int>(std::lround(b.rel_error * 100)) << "% off)\n";
            return kExitTolerance;
        }
        std::cout << "all " << reports.size() << " models within published tolerances\n";
    }
    return 0;
}

int cmd_infer(int phi, const std::string& input_path, std::uint64_t seed,
              const std::string& first_out, const std::string& refined_out) {
    const ScaleConfig config = config_for_phi(phi);
    Tensor image;
    try {
        image = read_tensor(input_path);
    } catch (const FormatError& e) {
        std::cerr << e.what() << "\n";
        return kExitBadInput;
    }
    const int r = config.input_resolution;
    if (image.dims != std::array<int, 4>{1, 3, r, r}) {
        std::cerr << "infer: input tensor is " << image.shape_str() << ", expected 1x3x"
                  << r << "x" << r << " for phi=" << phi << "\n";
        return kExitBadInput;
    }
    const NetworkGraph net = build_network(config);
    SeededWeights weights(seed);
    const auto [first, refined] = forward_network(net, image, weights);
    write_tensor(first, first_out);
    write_tensor(refined, refined_out);
    std::cout << "wrote " << first.shape_str() << " -> " << first_out << "\n";
    std::cout << "wrote " << refined.shape_str() << " -> " << refined_out << "\n";
    return 0;
}

int cmd_decode(int phi, const std::vector<std::string>& first_paths,
               const std::vector<std::string>& refined_paths, bool multiscale,
               const DecodeParams& params, const std::string& out_path) {
    const ScaleConfig config = config_for_phi(phi);
    std::vector<Tensor> firsts, refineds;
    try {
        for (const auto& p : first_paths) firsts.push_back(read_tensor(p));
        for (const auto& p : refined_paths) refineds.push_back(read_tensor(p));
    } catch (const FormatError& e) {
        std::cerr << e.what() << "\n";
        return kExitBadInput;
    }
    PoseSet poses;
    try {
        if (multiscale) {
            std::vector<Tensor> heatmaps, tags;
            for (size_t s = 0; s < firsts.size(); ++s) {
                if (firsts[s].channels() != 2 * kJointCount)
                    throw ShapeError("decode: first-head tensor " + firsts[s].shape_str() +
                                     " must have 34 channels");
                heatmaps.push_back(refineds[s]);
                Tensor tag(1, kJointCount, firsts[s].height(), firsts[s].width());
                const std::int64_t plane =
                    static_cast<std::int64_t>(firsts[s].height()) * firsts[s].width();
                std::copy_n(firsts[s].data.begin() + kJointCount * plane, kJointCount * plane,
                            tag.data.begin());
                tags.push_back(std::move(tag));
            }
            auto [avg, cat] = aggregate_scales(heatmaps, tags, config.heatmap_size);
            poses = decode_maps(avg, cat, static_cast<int>(firsts.size()),
                                static_cast<float>(config.input_resolution) /
                                    static_cast<float>(config.heatmap_size),
                                params);
        } else {
            poses = decode(firsts.at(0), refineds.at(0), config, params);
        }
    } catch (const ShapeError& e) {
        std::cerr << e.what() << "\n";
        return kExitBadInput;
    }
    write_poses(poses, out_path);
    std::cout << poses.persons.size() << " person(s) -> " << out_path << "\n";
    return 0;
}

// Compact self-contained checks of the numeric kernels and the decode path.
int cmd_selftest() {
    int failures = 0;
    auto check = [&](bool ok, const std::string& what) {
        std::cout << (ok ? "  ok   " : "  FAIL ") << what << "\n";
        if (!ok) ++failures;
    };

    {
        Tensor in(1, 1, 3, 3, 1.0f), w(1, 1, 3, 3, 1.0f);
        const Tensor out = conv2d(in, w, {}, 1, 0);
        check(out.data[0] == 9.0f, "conv2d all-ones 3x3 sums to 9");
    }
    {
        std::mt19937 rng(1);
        std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
        Tensor in(1, 2, 6, 6), w(3, 2, 3, 3);
        for (float& v : in.data) v = dist(rng);
        for (float& v : w.data) v = dist(rng);
        const Tensor out = conv2d(in, w, {}, 2, 1);
        float worst = 0.0f;
        for (int oc = 0; oc < 3; ++oc)
            for (int oy = 0; oy < 3; ++oy)
                for (int ox = 0; ox < 3; ++ox) {
                    float acc = 0.0f;
                    for (int ic = 0; ic < 2; ++ic)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 6) continue;
                                acc += in.at(0, ic, iy, ix) * w.at(oc, ic, ky, kx);
                            }
                    worst = std::max(worst, std::abs(acc - out.at(0, oc, oy, ox)));
                }
        check(worst <= 1e-5f, "conv2d matches naive loop reference");
    }
    {
        Tensor in(1, 1, 2, 2);
        in.data = {1, 2, 3, 4};
        Tensor w(1, 1, 2, 2, 1.0f);
        const Tensor out = conv2d_transposed(in, w, 2, 0);
        check(out.shape_str() == "1x1x4x4" && out.at(0, 0, 3, 3) == 4.0f &&
                  out.at(0, 0, 0, 1) == 1.0f,
              "transposed conv scatters scaled blocks");
    }
    {
        const ScaleConfig c = config_for_phi(0);
        check(c.branch_widths == std::array<int, 4>{32, 64, 128, 256} && c.input_resolution == 512,
              "scaling table baseline row");
    }
    {
        std::mt19937 rng(2);
        std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
        Tensor t(1, 17, 8, 8);
        for (float& v : t.data) v = dist(rng);
        const auto path = std::filesystem::temp_directory_path() / "ehrnet_selftest.hrt";
        write_tensor(t, path);
        const Tensor back = read_tensor(path);
        std::filesystem::remove(path);
        check(back.data == t.data && back.dims == t.dims, "tensor file round-trip is bit-exact");
    }
    {
        std::mt19937 rng(3);
        const ScaleConfig c = config_for_phi(-4);
        PersonKeypoints person{};
        person[0] = {100.0f, 150.0f};
        person[5] = {200.0f, 250.0f};
        const TrainingTargets targets = make_targets({person}, c);
        Tensor first(1, 34, c.tag_size, c.tag_size);
        const std::int64_t plane = static_cast<std::int64_t>(c.tag_size) * c.tag_size;
        std::copy_n(targets.quarter.data.begin(), 17 * plane, first.data.begin());
        for (std::int64_t i = 17 * plane; i < 34 * plane; ++i) first.data[static_cast<size_t>(i)] = 2.0f;
        const PoseSet poses = decode(first, targets.half, c);
        check(poses.persons.size() == 1 && poses.persons[0].keypoints.size() == 2,
              "decode recovers a planted person");
    }
    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EfficientHRNet family compiler, cost analyzer and decoder"};
    app.require_subcommand(1);

    int phi = 0;
    bool extrapolate = false;
    std::string format = "table";

    auto* describe = app.add_subcommand("describe", "print the scaling config for one phi");
    describe->add_option("--phi", phi, "scaling coefficient")->required();
    describe->add_flag("--extrapolate", extrapolate, "allow phi outside [-4, 0]");
    describe->add_option("--format", format)->check(CLI::IsMember({"table", "records"}));

    bool all = false, check = false;
    auto* costs = app.add_subcommand("costs", "parameter/MAC accounting per model");
    auto* costs_phi = costs->add_option("--phi", phi, "scaling coefficient");
    costs->add_flag("--all", all, "report every phi in [-4, 0]");
    costs->add_flag("--check", check, "compare against embedded published targets");
    costs->add_option("--format", format)->check(CLI::IsMember({"table", "records"}));

    std::string input_path, first_out = "first_head.hrt", refined_out = "refined.hrt";
    std::uint64_t seed = 0;
    auto* infer = app.add_subcommand("infer", "run the network on an input tensor");
    infer->add_option("--phi", phi)->required();
    infer->add_option("--input", input_path, "input tensor (1x3xRxR)")->required();
    infer->add_option("--seed", seed, "weight seed");
    infer->add_option("--first-out", first_out, "path for the 34-channel head output");
    infer->add_option("--refined-out", refined_out, "path for the refined heatmaps");

    std::vector<std::string> first_paths, refined_paths;
    std::string poses_out = "poses.txt";
    bool multiscale = false;
    DecodeParams params;
    bool no_subpixel = false;
    auto* decode_cmd = app.add_subcommand("decode", "decode poses from head outputs");
    decode_cmd->add_option("--phi", phi)->required();
    decode_cmd->add_option("--first", first_paths, "first-head tensor path(s)")->required();
    decode_cmd->add_option("--refined", refined_paths, "refined heatmap tensor path(s)")
        ->required();
    decode_cmd->add_flag("--multiscale", multiscale, "aggregate scales before decoding");
    decode_cmd->add_option("--nms-window", params.nms_window);
    decode_cmd->add_option("--top-k", params.top_k);
    decode_cmd->add_option("--threshold", params.threshold);
    decode_cmd->add_option("--tag-threshold", params.tag_threshold);
    decode_cmd->add_flag("--no-subpixel", no_subpixel, "disable quarter-pixel refinement");
    decode_cmd->add_option("--output", poses_out, "pose document path");

    auto* selftest = app.add_subcommand("selftest", "run the built-in oracle checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (describe->parsed()) {
            print_config(resolve_config(phi, extrapolate), format);
            return 0;
        }
        if (costs->parsed()) {
            if (!all && costs_phi->count() == 0) {
                std::cerr << "costs: pass --phi or --all\n";
                return kExitUsage;
            }
            return cmd_costs(phi, all, check, format);
        }
        if (infer->parsed()) return cmd_infer(phi, input_path, seed, first_out, refined_out);
        if (decode_cmd->parsed()) {
            params.refine_subpixel = !no_subpixel;
            if (first_paths.size() != refined_paths.size()) {
                std::cerr << "decode: need matching --first/--refined counts\n";
                return kExitUsage;
            }
            if (!multiscale && first_paths.size() != 1) {
                std::cerr << "decode: multiple scales require --multiscale\n";
                return kExitUsage;
            }
            return cmd_decode(phi, first_paths, refined_paths, multiscale, params, poses_out);
        }
        if (selftest->parsed()) return cmd_selftest();
    } catch (const UnsupportedCoefficient& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << e.what() << "\n";
        return kExitBadInput;
    } catch (const ShapeError& e) {
        std::cerr << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
