#include "ehrnet/fixture_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace ehrnet {

namespace {

constexpr char kMagic[4] = {'H', 'R', 'T', '1'};
constexpr unsigned char kDtypeFloat32 = 0;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4] = {0, 0, 0, 0};
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Caps on untrusted headers; the largest network tensor is a few million
// elements, so a gigabyte-scale claim is a corrupt or hostile file.
constexpr std::uint32_t kMaxDim = 1u << 20;
constexpr std::int64_t kMaxElements = 1ll << 28;

bool is_little_endian() {
    const std::uint32_t probe = 1;
    return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

} // namespace

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("write_tensor: cannot open '" + path.string() + "'");
    os.write(kMagic, 4);
    os.put(static_cast<char>(kDtypeFloat32));
    os.put(static_cast<char>(4)); // rank, fixed at 4 for network tensors
    for (int d : t.dims) put_u32(os, static_cast<std::uint32_t>(d));
    if (is_little_endian()) {
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    } else {
        for (float v : t.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(os, bits);
        }
    }
    if (!os) throw FormatError("write_tensor: short write to '" + path.string() + "'");
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("read_tensor: cannot open '" + path.string() + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("read_tensor: bad magic at byte 0 in '" + path.string() +
                          "' (expected \"HRT1\")");
    const int dtype = is.get();
    if (dtype != kDtypeFloat32)
        throw FormatError("read_tensor: unsupported dtype code " + std::to_string(dtype) +
                          " at byte 4");
    const int rank = is.get();
    if (rank != 4)
        throw FormatError("read_tensor: unsupported rank " + std::to_string(rank) +
                          " at byte 5 (network tensors are rank 4)");
    std::array<int, 4> dims{};
    std::int64_t count = 1;
    for (int i = 0; i < 4; ++i) {
        const std::uint32_t d = get_u32(is);
        if (!is)
            throw FormatError("read_tensor: truncated header at byte " + std::to_string(6 + 4 * i));
        if (d < 1 || d > kMaxDim)
            throw FormatError("read_tensor: dim " + std::to_string(d) + " at byte " +
                              std::to_string(6 + 4 * i) + " outside [1, " +
                              std::to_string(kMaxDim) + "]");
        dims[static_cast<size_t>(i)] = static_cast<int>(d);
        count *= d;
    }
    if (count > kMaxElements)
        throw FormatError("read_tensor: header claims " + std::to_string(count) +
                          " elements, above the " + std::to_string(kMaxElements) + " cap");
    std::vector<float> data(static_cast<size_t>(count));
    const std::streamsize want = static_cast<std::streamsize>(count * sizeof(float));
    is.read(reinterpret_cast<char*>(data.data()), want);
    if (is.gcount() != want)
        throw FormatError("read_tensor: truncated payload in '" + path.string() + "': expected " +
                          std::to_string(want) + " bytes after the 22-byte header, got " +
                          std::to_string(is.gcount()));
    if (!is_little_endian())
        for (float& v : data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) |
                   (bits >> 24);
            std::memcpy(&v, &bits, 4);
        }
    return Tensor(dims, std::move(data));
}

Annotations read_annotations(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("read_annotations: cannot open '" + path.string() + "'");
    Annotations doc;
    std::string line;
    int lineno = 0;
    bool in_person = false;
    PersonKeypoints current{};
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') continue;
        if (key == "image_size") {
            if (!(ls >> doc.width >> doc.height) || doc.width < 1 || doc.height < 1)
                throw FormatError("read_annotations: bad image_size at line " +
                                  std::to_string(lineno));
        } else if (key == "person_begin") {
            if (in_person)
                throw FormatError("read_annotations: nested person_begin at line " +
                                  std::to_string(lineno));
            in_person = true;
            current = PersonKeypoints{};
        } else if (key == "person_end") {
            if (!in_person)
                throw FormatError("read_annotations: person_end without person_begin at line " +
                                  std::to_string(lineno));
            doc.persons.push_back(current);
            in_person = false;
        } else if (key == "keypoint") {
            if (!in_person)
                throw FormatError("read_annotations: keypoint outside person at line " +
                                  std::to_string(lineno));
            int joint;
            float x, y;
            if (!(ls >> joint >> x >> y) || joint < 0 || joint >= kJointCount)
                throw FormatError("read_annotations: bad keypoint at line " +
                                  std::to_string(lineno));
            if (x < 0.0f || y < 0.0f || x >= static_cast<float>(doc.width) ||
                y >= static_cast<float>(doc.height))
                throw FormatError("read_annotations: keypoint out of bounds at line " +
                                  std::to_string(lineno) + " (person " +
                                  std::to_string(doc.persons.size()) + ", joint " +
                                  std::to_string(joint) + ")");
            current[static_cast<size_t>(joint)] = std::make_pair(x, y);
        }
        // unknown keys ignored
    }
    if (in_person) throw FormatError("read_annotations: unterminated person block");
    if (doc.width == 0) throw FormatError("read_annotations: missing image_size");
    return doc;
}

void write_annotations(const Annotations& doc, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("write_annotations: cannot open '" + path.string() + "'");
    os << "image_size " << doc.width << " " << doc.height << "\n";
    for (const PersonKeypoints& person : doc.persons) {
        os << "person_begin\n";
        for (int j = 0; j < kJointCount; ++j)
            if (person[static_cast<size_t>(j)]) {
                os.precision(9);
                os << "keypoint " << j << " " << person[static_cast<size_t>(j)]->first << " "
                   << person[static_cast<size_t>(j)]->second << "\n";
            }
        os << "person_end\n";
    }
}

std::string poses_to_text(const PoseSet& poses) {
    std::ostringstream os;
    os.precision(9);
    os << "pose_set " << poses.persons.size() << "\n";
    for (const Person& person : poses.persons) {
        os << "person_begin score " << person.score << "\n";
        for (const Keypoint& kp : person.keypoints) {
            os << "keypoint " << kp.joint_id << " " << kp.x << " " << kp.y << " " << kp.score;
            for (float t : kp.tag) os << " " << t;
            os << "\n";
        }
        os << "person_end\n";
    }
    return os.str();
}

PoseSet poses_from_text(const std::string& text) {
    std::istringstream is(text);
    PoseSet poses;
    std::string line;
    int lineno = 0;
    bool in_person = false;
    Person current;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') continue;
        if (key == "pose_set") continue;
        if (key == "person_begin") {
            if (in_person)
                throw FormatError("poses: nested person_begin at line " + std::to_string(lineno));
            in_person = true;
            current = Person{};
            std::string score_key;
            if (ls >> score_key && score_key == "score") ls >> current.score;
        } else if (key == "person_end") {
            if (!in_person)
                throw FormatError("poses: person_end without begin at line " +
                                  std::to_string(lineno));
            poses.persons.push_back(std::move(current));
            in_person = false;
        } else if (key == "keypoint") {
            if (!in_person)
                throw FormatError("poses: keypoint outside person at line " +
                                  std::to_string(lineno));
            Keypoint kp;
            if (!(ls >> kp.joint_id >> kp.x >> kp.y >> kp.score))
                throw FormatError("poses: bad keypoint at line " + std::to_string(lineno));
            float t;
            while (ls >> t) kp.tag.push_back(t);
            current.keypoints.push_back(std::move(kp));
        }
    }
    if (in_person) throw FormatError("poses: unterminated person block");
    return poses;
}

void write_poses(const PoseSet& poses, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("write_poses: cannot open '" + path.string() + "'");
    os << poses_to_text(poses);
}

PoseSet read_poses(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("read_poses: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return poses_from_text(buf.str());
}

} // namespace ehrnet
