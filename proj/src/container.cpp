#include "vap/data/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "container blobs are little-endian and written via memcpy");

namespace vap::data {

namespace {

// header layout offsets, used for error reporting
constexpr std::size_t kMagicOffset = 0;
constexpr std::size_t kVersionOffset = 8;
constexpr std::size_t kJsonLenOffset = 12;
constexpr std::size_t kJsonOffset = 20;

void append_u32(std::string& out, std::uint32_t v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void append_u64(std::string& out, std::uint64_t v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace

PackWriter::PackWriter(nlohmann::json meta) : meta_(std::move(meta)) {}

void PackWriter::add(const std::string& name, const std::string& dtype, const char* p,
                     Index rows, Index cols, std::size_t elem_size) {
    if (rows < 0 || cols < 0) throw ShapeError("negative tensor shape for " + name);
    dir_.push_back({{"name", name},
                    {"dtype", dtype},
                    {"shape", {rows, cols}}});
    blobs_.append(p, elem_size * static_cast<std::size_t>(rows) *
                         static_cast<std::size_t>(cols));
}

void PackWriter::f32(const std::string& name, const float* p, Index rows, Index cols) {
    add(name, "f32", reinterpret_cast<const char*>(p), rows, cols, sizeof(float));
}

void PackWriter::f32(const std::string& name, const Mat& m) {
    f32(name, m.data(), m.rows(), m.cols());
}

void PackWriter::f32(const std::string& name, const Vec& v) {
    f32(name, v.data(), v.size(), 1);
}

void PackWriter::i32(const std::string& name, const std::int32_t* p, Index rows,
                     Index cols) {
    add(name, "i32", reinterpret_cast<const char*>(p), rows, cols, sizeof(std::int32_t));
}

void PackWriter::i32(const std::string& name, const std::vector<std::int32_t>& v) {
    i32(name, v.data(), static_cast<Index>(v.size()), 1);
}

std::string PackWriter::to_bytes() const {
    nlohmann::json header{{"tensors", dir_}, {"meta", meta_}};
    const std::string json = header.dump();
    std::string out;
    out.reserve(kJsonOffset + json.size() + blobs_.size());
    out.append(kPackMagic, sizeof(kPackMagic));
    append_u32(out, kPackVersion);
    append_u64(out, json.size());
    out.append(json);
    out.append(blobs_);
    return out;
}

void PackWriter::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("IoError", "cannot open for writing: " + path);
    const std::string bytes = to_bytes();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("IoError", "write failed: " + path);
}

PackReader::PackReader(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("IoError", "cannot open for reading: " + path);
    bytes_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    parse();
}

PackReader PackReader::from_bytes(std::string bytes) {
    PackReader r;
    r.bytes_ = std::move(bytes);
    r.parse();
    return r;
}

void PackReader::parse() {
    if (bytes_.size() < kJsonOffset)
        throw FormatError("file shorter than the fixed header", bytes_.size());
    if (std::memcmp(bytes_.data(), kPackMagic, sizeof(kPackMagic)) != 0)
        throw FormatError("bad magic", kMagicOffset);
    std::uint32_t version = 0;
    std::memcpy(&version, bytes_.data() + kVersionOffset, sizeof(version));
    if (version != kPackVersion)
        throw FormatError("unsupported container version " + std::to_string(version),
                          kVersionOffset);
    std::uint64_t json_len = 0;
    std::memcpy(&json_len, bytes_.data() + kJsonLenOffset, sizeof(json_len));
    if (kJsonOffset + json_len > bytes_.size())
        throw FormatError("metadata extends past end of file", kJsonLenOffset);

    nlohmann::json header = nlohmann::json::parse(
        bytes_.begin() + kJsonOffset,
        bytes_.begin() + static_cast<std::ptrdiff_t>(kJsonOffset + json_len),
        nullptr, false);
    if (header.is_discarded() || !header.contains("tensors") || !header.contains("meta"))
        throw FormatError("metadata is not valid JSON", kJsonOffset);
    meta_ = header["meta"];

    std::size_t offset = kJsonOffset + json_len;
    for (const auto& t : header["tensors"]) {
        Entry e;
        std::string name;
        try {
            name = t.at("name").get<std::string>();
            e.dtype = t.at("dtype").get<std::string>();
            e.rows = t.at("shape").at(0).get<Index>();
            e.cols = t.at("shape").at(1).get<Index>();
        } catch (const nlohmann::json::exception&) {
            throw FormatError("malformed tensor directory entry", kJsonOffset);
        }
        if (e.dtype != "f32" && e.dtype != "i32")
            throw FormatError("unknown dtype '" + e.dtype + "' for " + name, kJsonOffset);
        if (e.rows < 0 || e.cols < 0)
            throw FormatError("negative shape for " + name, kJsonOffset);
        e.offset = offset;
        // both supported dtypes are four bytes wide
        const std::size_t bytes = 4 * static_cast<std::size_t>(e.rows) *
                                  static_cast<std::size_t>(e.cols);
        if (e.offset + bytes > bytes_.size())
            throw FormatError("tensor '" + name + "' truncated", e.offset);
        offset += bytes;
        entries_.emplace_back(std::move(name), e);
    }
    if (offset != bytes_.size())
        throw FormatError("trailing bytes after the last tensor", offset);
}

bool PackReader::has(const std::string& name) const {
    for (const auto& [n, e] : entries_)
        if (n == name) return true;
    return false;
}

const PackReader::Entry& PackReader::entry(const std::string& name,
                                           const std::string& dtype) const {
    for (const auto& [n, e] : entries_) {
        if (n != name) continue;
        if (e.dtype != dtype)
            throw FormatError("tensor '" + name + "' has dtype " + e.dtype + ", wanted " +
                                  dtype,
                              e.offset);
        return e;
    }
    throw FormatError("tensor '" + name + "' missing", bytes_.size());
}

std::vector<Index> PackReader::shape(const std::string& name) const {
    for (const auto& [n, e] : entries_)
        if (n == name) return {e.rows, e.cols};
    throw FormatError("tensor '" + name + "' missing", bytes_.size());
}

Mat PackReader::f32(const std::string& name) const {
    const Entry& e = entry(name, "f32");
    Mat m(e.rows, e.cols);
    std::memcpy(m.data(), bytes_.data() + e.offset,
                sizeof(float) * static_cast<std::size_t>(m.size()));
    return m;
}

std::vector<std::int32_t> PackReader::i32(const std::string& name) const {
    const Entry& e = entry(name, "i32");
    std::vector<std::int32_t> v(static_cast<std::size_t>(e.rows) *
                                static_cast<std::size_t>(e.cols));
    std::memcpy(v.data(), bytes_.data() + e.offset, sizeof(std::int32_t) * v.size());
    return v;
}

}  // namespace vap::data
