#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "vap/errors.hpp"
#include "vap/types.hpp"

namespace vap::data {

// Single-file artifact container: 8-byte magic, u32 format version, u64
// metadata length, JSON metadata (tensor directory + caller metadata), then
// raw little-endian tensor blobs in directory order. Matrices are stored
// column-major, matching Eigen's in-memory layout bit for bit.
inline constexpr char kPackMagic[8] = {'A', 'C', 'E', 'P', 'A', 'C', 'K', '1'};
inline constexpr std::uint32_t kPackVersion = 1;

class PackWriter {
public:
    explicit PackWriter(nlohmann::json meta = nlohmann::json::object());

    void f32(const std::string& name, const float* p, Index rows, Index cols);
    void f32(const std::string& name, const Mat& m);
    void f32(const std::string& name, const Vec& v);
    void i32(const std::string& name, const std::int32_t* p, Index rows, Index cols);
    void i32(const std::string& name, const std::vector<std::int32_t>& v);

    nlohmann::json& meta() { return meta_; }
    void save(const std::string& path) const;
    std::string to_bytes() const;

private:
    void add(const std::string& name, const std::string& dtype, const char* p,
             Index rows, Index cols, std::size_t elem_size);

    nlohmann::json meta_;
    nlohmann::json dir_ = nlohmann::json::array();
    std::string blobs_;
};

class PackReader {
public:
    explicit PackReader(const std::string& path);
    static PackReader from_bytes(std::string bytes);

    const nlohmann::json& meta() const { return meta_; }
    bool has(const std::string& name) const;
    std::vector<Index> shape(const std::string& name) const;

    Mat f32(const std::string& name) const;
    std::vector<std::int32_t> i32(const std::string& name) const;

private:
    PackReader() = default;
    void parse();

    struct Entry {
        std::string dtype;
        Index rows = 0, cols = 0;
        std::size_t offset = 0;  // into bytes_, absolute
    };

    const Entry& entry(const std::string& name, const std::string& dtype) const;

    std::string bytes_;
    nlohmann::json meta_;
    std::vector<std::pair<std::string, Entry>> entries_;
};

}  // namespace vap::data
