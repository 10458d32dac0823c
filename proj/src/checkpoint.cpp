#include "matxfer/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "matxfer/errors.hpp"
#include "matxfer/graph.hpp"

namespace matxfer {

namespace {

constexpr char kMagic[4] = {'M', 'X', 'N', '1'};

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    ByteReader(const std::vector<char>& b, const std::string& path) : bytes_(b), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw DataError("checkpoint " + path_ + ": truncated file");
    }
    const std::vector<char>& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const char* p, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(p[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(ckpt.catalog_version);
    w.u32(static_cast<std::uint32_t>(ckpt.config_words.size()));
    for (std::uint32_t cw : ckpt.config_words) w.u32(cw);
    w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.raw(name.data(), name.size());
        w.u32(static_cast<std::uint32_t>(t.ndim()));
        for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
        for (float v : t.data) w.f32(v);
    }
    std::uint64_t checksum = fnv1a(w.bytes().data(), w.bytes().size());
    w.u64(checksum);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint " + path + ": cannot open for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw DataError("checkpoint " + path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint " + path + ": cannot open");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DataError("checkpoint " + path + ": bad magic");
    std::uint64_t stored_sum = 0;
    for (int i = 0; i < 8; ++i)
        stored_sum |= static_cast<std::uint64_t>(
                          static_cast<unsigned char>(bytes[bytes.size() - 8 + i])) << (8 * i);
    if (fnv1a(bytes.data(), bytes.size() - 8) != stored_sum)
        throw DataError("checkpoint " + path + ": checksum mismatch");

    ByteReader r(bytes, path);
    r.str(4);
    Checkpoint ckpt;
    ckpt.catalog_version = r.u32();
    if (ckpt.catalog_version != kOpCatalogVersion)
        throw DataError("checkpoint " + path + ": op catalog version " +
                        std::to_string(ckpt.catalog_version) + ", expected " +
                        std::to_string(kOpCatalogVersion));
    std::uint32_t n_config = r.u32();
    for (std::uint32_t i = 0; i < n_config; ++i) ckpt.config_words.push_back(r.u32());
    std::uint32_t n_tensors = r.u32();
    for (std::uint32_t ti = 0; ti < n_tensors; ++ti) {
        std::uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        std::uint32_t ndim = r.u32();
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.u32()));
        Tensor t(shape);
        for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = r.f32();
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (r.pos() != bytes.size() - 8)
        throw DataError("checkpoint " + path + ": trailing bytes");
    return ckpt;
}

} // namespace matxfer
