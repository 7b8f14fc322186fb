#pragma once

#include <string>
#include <vector>

#include "xmodal/error.hpp"

namespace xmodal {

// Mono waveform, samples in [-1, 1], 44.1 kHz after ingestion.
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 44100;
};

class WavFormatError : public IoError {
public:
    explicit WavFormatError(const std::string& m) : IoError(m) {}
};
class WavEncodingError : public IoError {
public:
    explicit WavEncodingError(const std::string& m) : IoError(m) {}
};
class WavSampleRateError : public IoError {
public:
    explicit WavSampleRateError(const std::string& m) : IoError(m) {}
};

// 16-bit PCM only; stereo is averaged to mono; rates other than 44100 are
// rejected (no resampler).
Waveform load_wav(const std::string& path);

// 16-bit PCM mono writer, used by the synthetic dataset generator.
void save_wav(const std::string& path, const Waveform& w);

}  // namespace xmodal
