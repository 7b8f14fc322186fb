#include "xmodal/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace xmodal {

namespace {

uint32_t rd_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) | (static_cast<uint32_t>(p[2]) << 16) |
           (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

void wr_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
void wr_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

Waveform load_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open wav: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw WavFormatError("malformed RIFF/WAVE header: " + path);

    // walk chunks for fmt and data
    size_t pos = 12;
    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const unsigned char* data = nullptr;
    uint32_t data_size = 0;
    while (pos + 8 <= buf.size()) {
        const unsigned char* ch = buf.data() + pos;
        uint32_t sz = rd_u32(ch + 4);
        if (std::memcmp(ch, "fmt ", 4) == 0) {
            if (pos + 8 + 16 > buf.size()) throw WavFormatError("truncated fmt chunk: " + path);
            format = rd_u16(ch + 8);
            channels = rd_u16(ch + 10);
            rate = rd_u32(ch + 12);
            bits = rd_u16(ch + 22);
            have_fmt = true;
        } else if (std::memcmp(ch, "data", 4) == 0) {
            if (pos + 8 + sz > buf.size()) throw WavFormatError("truncated data chunk: " + path);
            data = ch + 8;
            data_size = sz;
        }
        pos += 8 + sz + (sz & 1);
    }
    if (!have_fmt || !data) throw WavFormatError("missing fmt or data chunk: " + path);
    if (format != 1 || bits != 16)
        throw WavEncodingError("unsupported encoding (need 16-bit PCM): " + path);
    if (channels == 0) throw WavFormatError("zero channels: " + path);
    if (rate != 44100)
        throw WavSampleRateError("sample rate " + std::to_string(rate) + " != 44100 (no resampler): " + path);

    const size_t n_frames = data_size / (2u * channels);
    Waveform w;
    w.sample_rate = 44100;
    w.samples.resize(n_frames);
    for (size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (uint16_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (i * channels + c) * 2;
            int16_t s = static_cast<int16_t>(p[0] | (p[1] << 8));
            acc += static_cast<double>(s) / 32768.0;
        }
        w.samples[i] = acc / channels;
    }
    return w;
}

void save_wav(const std::string& path, const Waveform& w) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path);
    const uint32_t data_size = static_cast<uint32_t>(w.samples.size() * 2);
    os.write("RIFF", 4);
    wr_u32(os, 36 + data_size);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    wr_u32(os, 16);
    wr_u16(os, 1);  // PCM
    wr_u16(os, 1);  // mono
    wr_u32(os, static_cast<uint32_t>(w.sample_rate));
    wr_u32(os, static_cast<uint32_t>(w.sample_rate) * 2);
    wr_u16(os, 2);
    wr_u16(os, 16);
    os.write("data", 4);
    wr_u32(os, data_size);
    for (double v : w.samples) {
        double c = std::clamp(v, -1.0, 1.0);
        int16_t s = static_cast<int16_t>(std::lround(c * 32767.0));
        unsigned char b[2] = {static_cast<unsigned char>(s & 0xff), static_cast<unsigned char>((s >> 8) & 0xff)};
        os.write(reinterpret_cast<const char*>(b), 2);
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace xmodal
