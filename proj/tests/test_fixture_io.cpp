#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "ehrnet/fixture_io.hpp"
#include "oracles.hpp"

using namespace ehrnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ehrnet_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("tensor files round-trip bit-exact") {
    TempDir dir;
    std::mt19937 rng(7);
    const Tensor t = oracle::random_tensor(rng, 1, 17, 64, 64, -10.0f, 10.0f);
    const fs::path p = dir.path / "t.hrt";
    write_tensor(t, p);
    const Tensor back = read_tensor(p);
    CHECK(back.dims == t.dims);
    REQUIRE(back.data.size() == t.data.size());
    CHECK(std::memcmp(back.data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0);

    // writing again produces identical bytes
    const fs::path p2 = dir.path / "t2.hrt";
    write_tensor(t, p2);
    CHECK(slurp(p) == slurp(p2));
    CHECK(fs::file_size(p) == 22 + t.data.size() * 4);
}

TEST_CASE("tensor round-trip is bit-exact for random shapes") {
    TempDir dir;
    std::mt19937 rng(13);
    std::uniform_int_distribution<int> d(1, 9);
    for (int iter = 0; iter < 12; ++iter) {
        const Tensor t = oracle::random_tensor(rng, d(rng), d(rng), d(rng), d(rng), -1e6f, 1e6f);
        const fs::path p = dir.path / ("r" + std::to_string(iter) + ".hrt");
        write_tensor(t, p);
        const Tensor back = read_tensor(p);
        REQUIRE(back.dims == t.dims);
        CHECK(std::memcmp(back.data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("tensor reader rejects malformed files with positions") {
    TempDir dir;
    const fs::path bad_magic = dir.path / "magic.hrt";
    {
        std::ofstream os(bad_magic, std::ios::binary);
        os << "XXXX";
        os.put(0);
        os.put(4);
    }
    CHECK_THROWS_WITH_AS(read_tensor(bad_magic), doctest::Contains("magic"), FormatError);

    const Tensor t(1, 2, 3, 4);
    const fs::path truncated = dir.path / "trunc.hrt";
    write_tensor(t, truncated);
    fs::resize_file(truncated, 22 + 5 * 4); // drop most of the payload
    CHECK_THROWS_WITH_AS(read_tensor(truncated), doctest::Contains("96"), FormatError);

    const fs::path bad_dtype = dir.path / "dtype.hrt";
    {
        auto bytes = slurp(truncated);
        bytes[4] = 9;
        std::ofstream os(bad_dtype, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(read_tensor(bad_dtype), doctest::Contains("dtype"), FormatError);

    CHECK_THROWS_AS(read_tensor(dir.path / "missing.hrt"), FormatError);

    // oversized dim claims must fail cleanly instead of allocating
    const fs::path huge = dir.path / "huge.hrt";
    {
        std::ofstream os(huge, std::ios::binary);
        os << "HRT1";
        os.put(0);
        os.put(4);
        const unsigned char big[16] = {0xff, 0xff, 0xff, 0xff, 1, 0, 0, 0,
                                       1,    0,    0,    0,    1, 0, 0, 0};
        os.write(reinterpret_cast<const char*>(big), 16);
    }
    CHECK_THROWS_AS(read_tensor(huge), FormatError);
}

TEST_CASE("annotations round-trip, including an empty person list") {
    TempDir dir;
    Annotations doc;
    doc.width = 384;
    doc.height = 384;
    const fs::path p = dir.path / "empty.txt";
    write_annotations(doc, p);
    const Annotations back = read_annotations(p);
    CHECK(back.width == 384);
    CHECK(back.persons.empty());

    PersonKeypoints full{};
    for (int j = 0; j < kJointCount; ++j)
        full[static_cast<size_t>(j)] = {static_cast<float>(10 + j * 20) , 37.5f};
    doc.persons.push_back(full);
    const fs::path p2 = dir.path / "full.txt";
    write_annotations(doc, p2);
    const Annotations back2 = read_annotations(p2);
    REQUIRE(back2.persons.size() == 1);
    for (int j = 0; j < kJointCount; ++j) {
        REQUIRE(back2.persons[0][static_cast<size_t>(j)].has_value());
        CHECK(back2.persons[0][static_cast<size_t>(j)]->first ==
              doctest::Approx(10.0f + 20.0f * static_cast<float>(j)));
    }
}

TEST_CASE("annotation reader rejects out-of-bounds keypoints naming indices") {
    TempDir dir;
    const fs::path p = dir.path / "oob.txt";
    {
        std::ofstream os(p);
        os << "image_size 100 100\n";
        os << "person_begin\nkeypoint 0 50 50\nperson_end\n";
        os << "person_begin\nkeypoint 3 120 10\nperson_end\n";
    }
    CHECK_THROWS_WITH_AS(read_annotations(p), doctest::Contains("person 1"), FormatError);
    CHECK_THROWS_WITH_AS(read_annotations(p), doctest::Contains("joint 3"), FormatError);
}

TEST_CASE("annotation reader ignores unknown fields and reports parse locations") {
    TempDir dir;
    const fs::path p = dir.path / "extra.txt";
    {
        std::ofstream os(p);
        os << "# comment line\n";
        os << "image_size 64 64\n";
        os << "camera_id 12\n"; // unknown, ignored
        os << "person_begin\nkeypoint 2 10 10\nfuture_field abc\nperson_end\n";
    }
    const Annotations doc = read_annotations(p);
    REQUIRE(doc.persons.size() == 1);
    CHECK(doc.persons[0][2].has_value());

    const fs::path bad = dir.path / "bad.txt";
    {
        std::ofstream os(bad);
        os << "image_size 64 64\nperson_begin\nkeypoint nonsense\n";
    }
    CHECK_THROWS_WITH_AS(read_annotations(bad), doctest::Contains("line 3"), FormatError);
}

TEST_CASE("pose documents round-trip") {
    TempDir dir;
    PoseSet poses;
    Person a;
    a.score = 0.75f;
    a.keypoints.push_back({0, 12.5f, 34.0f, 0.9f, {1.5f}});
    a.keypoints.push_back({5, 100.0f, 200.0f, 0.6f, {1.4f}});
    poses.persons.push_back(a);
    poses.persons.emplace_back(); // empty person

    const fs::path p = dir.path / "poses.txt";
    write_poses(poses, p);
    const PoseSet back = read_poses(p);
    REQUIRE(back.persons.size() == 2);
    CHECK(back.persons[0].score == doctest::Approx(0.75f));
    REQUIRE(back.persons[0].keypoints.size() == 2);
    CHECK(back.persons[0].keypoints[1].joint_id == 5);
    CHECK(back.persons[0].keypoints[1].x == doctest::Approx(100.0f));
    CHECK(back.persons[0].keypoints[0].tag.size() == 1);
    CHECK(back.persons[1].keypoints.empty());

    CHECK_THROWS_AS(poses_from_text("person_end\n"), FormatError);
    const PoseSet empty = poses_from_text(poses_to_text(PoseSet{}));
    CHECK(empty.persons.empty());
}
