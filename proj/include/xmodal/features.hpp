#pragma once

#include <map>
#include <optional>
#include <vector>

#include "xmodal/audio.hpp"
#include "xmodal/manifest.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

// Audio chunk referenced by a pair, cut to manifest chunk length.
Waveform load_chunk(const SamplePair& p, double chunk_seconds);
Waveform cut_chunk(const Waveform& whole, int chunk, double chunk_seconds);

// One of the five time-frequency representations of a chunk.
Spectrogram chunk_representation(const Waveform& chunk, SpecKind kind, const MelFilterbank& fb);

// Classifier input path: resize to 128x44 when the representation has other
// dimensions, standardize per sample to zero mean / unit variance, emit
// [1,128,44].
Tensor<float> classifier_input(const Spectrogram& s);

// LMS mapped affinely to [-1,1] with train-split stats; [1,128,bins] layout.
Tensor<float> normalize_lms(const Spectrogram& lms, double lms_min, double lms_max);
Spectrogram denormalize_lms(const Tensor<float>& t, double lms_min, double lms_max);

// Lazy in-memory feature store over a manifest; all accessors are
// deterministic and cache their results.
class FeatureCache {
public:
    explicit FeatureCache(const Manifest& m, SpecKind kind = SpecKind::LMS);

    const Manifest& manifest() const { return m_; }
    SpecKind kind() const { return kind_; }

    const Tensor<float>& image(size_t pair_idx);        // [3,64,64] in [-1,1]
    const Tensor<float>& audio_input(size_t pair_idx);  // [1,128,44] standardized
    // Normalized LMS targets/inputs for the I2S path; require manifest stats.
    const Tensor<float>& lms_norm44(size_t pair_idx);  // [1,128,44] in [-1,1]
    const Tensor<float>& lms_norm34(size_t pair_idx);  // [1,128,34] in [-1,1]

private:
    Spectrogram raw_lms(size_t pair_idx);
    const Waveform& wav(const std::string& path);

    const Manifest& m_;
    SpecKind kind_;
    MelFilterbank fb_;
    std::map<std::string, Waveform> wavs_;
    std::vector<std::optional<Tensor<float>>> images_, audio_, lms44_, lms34_;
};

}  // namespace xmodal
