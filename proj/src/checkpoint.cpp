#include "posekit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace posekit {

namespace {

constexpr char kMagic[4] = {'P', 'K', 'T', '1'};

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, const float* data, int64_t n) {
    // IEEE-754 floats serialized byte-wise little-endian
    std::vector<unsigned char> buf(static_cast<size_t>(n) * 4);
    for (int64_t i = 0; i < n; ++i) {
        uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        buf[static_cast<size_t>(i) * 4 + 0] = static_cast<unsigned char>(bits & 0xff);
        buf[static_cast<size_t>(i) * 4 + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
        buf[static_cast<size_t>(i) * 4 + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
        buf[static_cast<size_t>(i) * 4 + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_f32(std::istream& is, float* data, int64_t n) {
    std::vector<unsigned char> buf(static_cast<size_t>(n) * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    for (int64_t i = 0; i < n; ++i) {
        const uint32_t bits = static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 0]) |
                              (static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 1]) << 8) |
                              (static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 2]) << 16) |
                              (static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 3]) << 24);
        std::memcpy(&data[i], &bits, 4);
    }
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor<float>>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    write_u32(os, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_u32(os, static_cast<uint32_t>(t.dim(i)));
        write_f32(os, t.data(), t.size());
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::map<std::string, Tensor<float>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t count = read_u32(is);
    std::map<std::string, Tensor<float>> params;
    for (uint32_t p = 0; p < count; ++p) {
        const uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint32_t rank = read_u32(is);
        if (rank == 0 || rank > 8) throw std::runtime_error("checkpoint: bad rank");
        std::vector<int> shape(rank);
        for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(read_u32(is));
        Tensor<float> t(shape);
        read_f32(is, t.data(), t.size());
        params.emplace(std::move(name), std::move(t));
    }
    return params;
}

}  // namespace posekit
