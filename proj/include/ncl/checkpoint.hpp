#ifndef NCL_CHECKPOINT_HPP
#define NCL_CHECKPOINT_HPP

// Binary model checkpoints.
//
// Layout (all integers and floats little-endian):
//   "NTCK"                 4 bytes magic
//   u16 version            currently 1
//   u8  role               0 = student, 1 = teacher
//   u32 descriptor length, then the Architecture text form (UTF-8)
//   u32 block count, then per block:
//       u64 weight count, f64 weights..., u64 bias count, f64 biases...

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ncl/error.hpp"
#include "ncl/nn.hpp"

namespace ncl {

inline constexpr char kCheckpointMagic[4] = {'N', 'T', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class CheckpointRole : std::uint8_t { Student = 0, Teacher = 1 };

class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double d) { uint(std::bit_cast<std::uint64_t>(d)); }
    void str(const std::string& s) {
        uint(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void doubles(const std::vector<double>& v) {
        uint(static_cast<std::uint64_t>(v.size()));
        for (double d : v) f64(d);
    }
    const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& buf, std::string source) : buf_(buf), source_(std::move(source)) {}

    void raw(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T uint() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::string str() {
        const auto n = uint<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<double> doubles() {
        const auto n = uint<std::uint64_t>();
        if (n > (buf_.size() - pos_) / 8) fail(n * 8);
        std::vector<double> v(n);
        for (auto& d : v) d = f64();
        return v;
    }
    std::size_t position() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) fail(n);
    }
    [[noreturn]] void fail(std::size_t n) const {
        throw FileError(source_ + ": truncated at byte " + std::to_string(pos_) + ", needed " + std::to_string(n) +
                        " more bytes, " + std::to_string(buf_.size() - pos_) + " available");
    }

    const std::vector<std::uint8_t>& buf_;
    std::string source_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path.string() + ": cannot open for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FileError(path.string() + ": write failed");
}

inline void write_model(ByteWriter& w, const ModelState& model, CheckpointRole role) {
    w.raw(kCheckpointMagic, 4);
    w.uint(kCheckpointVersion);
    w.uint(static_cast<std::uint8_t>(role));
    w.str(model.arch.to_string());
    w.uint(static_cast<std::uint32_t>(model.params.size()));
    for (const auto& b : model.params) {
        w.doubles(b.weights);
        w.doubles(b.bias);
    }
}

struct LoadedModel {
    ModelState model;
    CheckpointRole role;
};

inline LoadedModel read_model(ByteReader& r, const std::string& source) {
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FileError(source + ": bad checkpoint magic");
    const auto version = r.uint<std::uint16_t>();
    if (version != kCheckpointVersion)
        throw FileError(source + ": unsupported checkpoint version " + std::to_string(version));
    const auto role = r.uint<std::uint8_t>();
    if (role > 1) throw FileError(source + ": unknown checkpoint role " + std::to_string(role));
    ModelState m;
    try {
        m = ModelState::zeros(Architecture::parse(r.str()));
    } catch (const ConfigError& e) {
        throw FileError(source + ": bad architecture descriptor: " + e.what());
    }
    const auto blocks = r.uint<std::uint32_t>();
    if (blocks != m.params.size()) throw FileError(source + ": block count does not match architecture");
    for (auto& b : m.params) {
        auto w = r.doubles();
        auto bias = r.doubles();
        if (w.size() != b.weights.size() || bias.size() != b.bias.size())
            throw FileError(source + ": parameter block size does not match architecture");
        b.weights = std::move(w);
        b.bias = std::move(bias);
    }
    return {std::move(m), static_cast<CheckpointRole>(role)};
}

inline std::vector<std::uint8_t> encode_checkpoint(const ModelState& model, CheckpointRole role) {
    ByteWriter w;
    write_model(w, model, role);
    return w.bytes();
}

inline LoadedModel decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "checkpoint") {
    ByteReader r(bytes, source);
    auto out = read_model(r, source);
    if (!r.at_end()) throw FileError(source + ": trailing bytes after checkpoint");
    return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelState& model,
                            CheckpointRole role = CheckpointRole::Student) {
    write_file_bytes(path, encode_checkpoint(model, role));
}

inline LoadedModel load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file_bytes(path), path.string());
}

}  // namespace ncl

#endif  // NCL_CHECKPOINT_HPP
