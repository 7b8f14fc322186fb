#include "xmodal/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "xmodal/error.hpp"

namespace xmodal {

namespace {

constexpr char kMagic[4] = {'X', 'M', 'T', '1'};

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("tensor file: truncated u32");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, const float* p, size_t n) {
    // x86 is little-endian; write raw
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
}

}  // namespace

void save_tensors(const std::string& path, const TensorFile& tf) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kMagic, 4);
    write_u32(os, static_cast<uint32_t>(tf.entries.size()));
    for (const auto& [name, t] : tf.entries) {
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) write_u32(os, static_cast<uint32_t>(d));
        write_f32(os, t.data.data(), t.data.size());
    }
    if (!os) throw IoError("write failed: " + path);
}

TensorFile load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError("bad magic in tensor file: " + path);
    uint32_t count = read_u32(is);
    TensorFile tf;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nlen = read_u32(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        if (!is) throw IoError("tensor file: truncated name");
        uint32_t rank = read_u32(is);
        std::vector<int> shape(rank);
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(read_u32(is));
            numel *= static_cast<size_t>(shape[d]);
        }
        Tensor<float> t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(numel * sizeof(float)));
        if (!is) throw IoError("tensor file: truncated data for " + name);
        tf.entries.emplace_back(std::move(name), std::move(t));
    }
    return tf;
}

}  // namespace xmodal
