#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ehrnet/decoder.hpp"
#include "ehrnet/head.hpp"
#include "ehrnet/tensor.hpp"

namespace ehrnet {

// Binary tensor fixture format (the wire contract, little-endian throughout):
//   bytes 0..3   magic "HRT1"
//   byte  4      dtype code (0 = float32)
//   byte  5      rank
//   then rank x uint32 dims, then row-major float32 payload.
// Example header for a (1, 17, 64, 64) tensor:
//   48 52 54 31 00 04  01 00 00 00  11 00 00 00  40 00 00 00  40 00 00 00

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

/// Image size plus per-person keypoint annotations (17-joint convention).
struct Annotations {
    int width = 0;
    int height = 0;
    std::vector<PersonKeypoints> persons;
};

Annotations read_annotations(const std::filesystem::path& path);
void write_annotations(const Annotations& doc, const std::filesystem::path& path);

void write_poses(const PoseSet& poses, const std::filesystem::path& path);
PoseSet read_poses(const std::filesystem::path& path);

std::string poses_to_text(const PoseSet& poses);
PoseSet poses_from_text(const std::string& text);

} // namespace ehrnet
