#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ehrnet/fixture_io.hpp"
#include "ehrnet/scaling.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli_path;
fs::path g_dir;

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

RunResult run(const std::string& args) {
    const fs::path out = g_dir / "stdout.txt";
    const fs::path err = g_dir / "stderr.txt";
    const std::string cmd =
        "\"" + g_cli_path + "\" " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("describe prints the requested config row") {
    const RunResult r = run("describe --phi 0");
    CHECK(r.code == 0);
    CHECK(r.out.find("512") != std::string::npos);
    CHECK(r.out.find("32 64 128 256") != std::string::npos);
}

TEST_CASE("describe rejects out-of-range phi with exit code 2") {
    const RunResult r = run("describe --phi -5");
    CHECK(r.code == 2);
    CHECK(r.err.find("-4") != std::string::npos);
    CHECK(run("describe --phi -5 --extrapolate").code == 0);
    CHECK(run("describe").code == 2);      // missing required option
    CHECK(run("describe --phi 0 --format nonsense").code == 2);
}

TEST_CASE("describe records output parses back into the same config") {
    const RunResult r = run("describe --phi -3 --format records");
    REQUIRE(r.code == 0);
    const ehrnet::ScaleConfig back = ehrnet::config_from_records(r.out);
    const ehrnet::ScaleConfig want = ehrnet::config_for_phi(-3);
    CHECK(back.input_resolution == want.input_resolution);
    CHECK(back.branch_widths == want.branch_widths);
    CHECK(back.stage_repeats == want.stage_repeats);
}

TEST_CASE("costs reports one model or the whole family") {
    const RunResult one = run("costs --phi -2");
    CHECK(one.code == 0);
    CHECK(one.out.find("H-2") != std::string::npos);
    CHECK(one.out.find("448") != std::string::npos);

    const RunResult records = run("costs --phi 0 --format records");
    CHECK(records.code == 0);
    CHECK(records.out.find("cost_report_begin") != std::string::npos);
    CHECK(records.out.find("model H0") != std::string::npos);

    CHECK(run("costs").code == 2); // neither --phi nor --all
}

TEST_CASE("costs --all --check passes against the embedded targets") {
    const RunResult r = run("costs --all --check");
    CHECK(r.code == 0);
    CHECK(r.out.find("within published tolerances") != std::string::npos);
}

TEST_CASE("infer is deterministic for a fixed seed and validates shapes") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    ehrnet::Tensor image(1, 3, 384, 384);
    for (float& v : image.data) v = dist(rng);
    const fs::path in = g_dir / "input.hrt";
    ehrnet::write_tensor(image, in);

    const std::string base = "infer --phi -4 --seed 7 --input " + in.string();
    const fs::path f1 = g_dir / "f1.hrt", r1 = g_dir / "r1.hrt";
    const fs::path f2 = g_dir / "f2.hrt", r2 = g_dir / "r2.hrt";
    const RunResult a =
        run(base + " --first-out " + f1.string() + " --refined-out " + r1.string());
    REQUIRE(a.code == 0);
    CHECK(a.out.find("1x34x96x96") != std::string::npos);
    CHECK(a.out.find("1x17x192x192") != std::string::npos);
    const RunResult b =
        run(base + " --first-out " + f2.string() + " --refined-out " + r2.string());
    REQUIRE(b.code == 0);
    CHECK(file_bytes(f1) == file_bytes(f2));
    CHECK(file_bytes(r1) == file_bytes(r2));

    // same tensor against the wrong phi: exit 4 naming the expected resolution
    const RunResult wrong = run("infer --phi 0 --input " + in.string());
    CHECK(wrong.code == 4);
    CHECK(wrong.err.find("1x3x512x512") != std::string::npos);

    const fs::path junk = g_dir / "junk.hrt";
    std::ofstream(junk) << "not a tensor";
    CHECK(run("infer --phi -4 --input " + junk.string()).code == 4);
}

TEST_CASE("decode recovers a planted fixture and handles zero maps") {
    std::mt19937 rng(11);
    const ehrnet::ScaleConfig c = ehrnet::config_for_phi(-4);
    const auto f = fixtures::make_decode_fixture(c, rng, 1, 2.0f, 4.0f);
    const fs::path first = g_dir / "first.hrt", refined = g_dir / "refined.hrt";
    ehrnet::write_tensor(f.first_head, first);
    ehrnet::write_tensor(f.refined, refined);
    const fs::path poses = g_dir / "poses.txt";
    const RunResult r = run("decode --phi -4 --first " + first.string() + " --refined " +
                            refined.string() + " --output " + poses.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("1 person(s)") != std::string::npos);
    const ehrnet::PoseSet decoded = ehrnet::read_poses(poses);
    REQUIRE(decoded.persons.size() == 1);

    // two scales aggregated
    const RunResult multi = run("decode --phi -4 --multiscale --first " + first.string() + " " +
                                first.string() + " --refined " + refined.string() + " " +
                                refined.string() + " --output " + poses.string());
    CHECK(multi.code == 0);
    CHECK(multi.out.find("1 person(s)") != std::string::npos);

    const RunResult coarse = run("decode --phi -4 --no-subpixel --tag-threshold 0.5 --first " +
                                 first.string() + " --refined " + refined.string() +
                                 " --output " + poses.string());
    CHECK(coarse.code == 0);
    CHECK(coarse.out.find("1 person(s)") != std::string::npos);

    const fs::path zf = g_dir / "zf.hrt", zr = g_dir / "zr.hrt";
    ehrnet::write_tensor(ehrnet::Tensor(1, 34, c.tag_size, c.tag_size), zf);
    ehrnet::write_tensor(ehrnet::Tensor(1, 17, c.heatmap_size, c.heatmap_size), zr);
    const RunResult zero = run("decode --phi -4 --first " + zf.string() + " --refined " +
                               zr.string() + " --output " + poses.string());
    CHECK(zero.code == 0);
    CHECK(zero.out.find("0 person(s)") != std::string::npos);

    // mismatched scale counts
    CHECK(run("decode --phi -4 --first " + first.string() + " --refined " + refined.string() +
              " " + refined.string() + " --output " + poses.string())
              .code == 2);
}

TEST_CASE("selftest runs the built-in oracle checks") {
    const RunResult r = run("selftest");
    CHECK(r.code == 0);
    CHECK(r.out.find("selftest passed") != std::string::npos);
}

int main(int argc, char** argv) {
    doctest::Context context;
    std::vector<char*> pass;
    for (int i = 0; i < argc; ++i) {
        if (std::string(argv[i]) == "--cli" && i + 1 < argc) {
            g_cli_path = argv[++i];
            continue;
        }
        pass.push_back(argv[i]);
    }
    if (g_cli_path.empty()) {
        std::fprintf(stderr, "test_cli: pass --cli <path-to-ehrnet-binary>\n");
        return 1;
    }
    g_dir = fs::temp_directory_path() / ("ehrnet_cli_test_" + std::to_string(getpid()));
    fs::create_directories(g_dir);
    context.applyCommandLine(static_cast<int>(pass.size()), pass.data());
    const int rc = context.run();
    fs::remove_all(g_dir);
    return rc;
}
