#include "xmodal/features.hpp"

#include <algorithm>
#include <cmath>

#include "xmodal/error.hpp"
#include "xmodal/image_io.hpp"

namespace xmodal {

Waveform cut_chunk(const Waveform& whole, int chunk, double chunk_seconds) {
    const int n = static_cast<int>(std::lround(chunk_seconds * whole.sample_rate));
    const size_t begin = static_cast<size_t>(chunk) * n;
    if (begin + n > whole.samples.size())
        throw ValueError("chunk " + std::to_string(chunk) + " beyond end of waveform");
    Waveform c;
    c.sample_rate = whole.sample_rate;
    c.samples.assign(whole.samples.begin() + static_cast<long>(begin),
                     whole.samples.begin() + static_cast<long>(begin + n));
    return c;
}

Waveform load_chunk(const SamplePair& p, double chunk_seconds) {
    auto [path, chunk] = parse_audio_ref(p.audio_ref);
    return cut_chunk(load_wav(path), chunk, chunk_seconds);
}

Spectrogram chunk_representation(const Waveform& chunk, SpecKind kind, const MelFilterbank& fb) {
    switch (kind) {
        case SpecKind::STFT:
            return stft(chunk);
        case SpecKind::MS:
            return mel_spectrogram(stft(chunk), fb);
        case SpecKind::LMS:
            return log_mel(mel_spectrogram(stft(chunk), fb));
        case SpecKind::MFCC:
            return mfcc(log_mel(mel_spectrogram(stft(chunk), fb)));
        case SpecKind::CQT:
            return cqt(chunk);
    }
    throw ValueError("unknown representation kind");
}

Tensor<float> classifier_input(const Spectrogram& s) {
    const Spectrogram* src = &s;
    Spectrogram resized;
    if (s.bins != 128 || s.frames != 44) {
        resized = resize_spectrogram(s, 128, 44);
        src = &resized;
    }
    double mean = 0.0;
    for (double v : src->values) mean += v;
    mean /= static_cast<double>(src->values.size());
    double var = 0.0;
    for (double v : src->values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(src->values.size());
    const double inv = 1.0 / (std::sqrt(var) + 1e-6);
    Tensor<float> t({1, 128, 44});
    for (size_t i = 0; i < src->values.size(); ++i)
        t.data[i] = static_cast<float>((src->values[i] - mean) * inv);
    return t;
}

Tensor<float> normalize_lms(const Spectrogram& lms, double lms_min, double lms_max) {
    if (lms_max <= lms_min) throw ValueError("normalize_lms: degenerate stats range");
    Tensor<float> t({1, lms.bins, lms.frames});
    const double scale = 2.0 / (lms_max - lms_min);
    for (size_t i = 0; i < lms.values.size(); ++i) {
        double v = (lms.values[i] - lms_min) * scale - 1.0;
        t.data[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    return t;
}

Spectrogram denormalize_lms(const Tensor<float>& t, double lms_min, double lms_max) {
    if (t.rank() != 3 || t.dim(0) != 1) throw ShapeError("denormalize_lms: expected [1,bins,frames]");
    Spectrogram s;
    s.kind = SpecKind::LMS;
    s.bins = t.dim(1);
    s.frames = t.dim(2);
    s.values.resize(t.data.size());
    const double scale = (lms_max - lms_min) / 2.0;
    for (size_t i = 0; i < t.data.size(); ++i)
        s.values[i] = (static_cast<double>(t.data[i]) + 1.0) * scale + lms_min;
    return s;
}

FeatureCache::FeatureCache(const Manifest& m, SpecKind kind)
    : m_(m), kind_(kind), fb_(make_mel_filterbank()) {
    images_.resize(m.pairs.size());
    audio_.resize(m.pairs.size());
    lms44_.resize(m.pairs.size());
    lms34_.resize(m.pairs.size());
}

const Waveform& FeatureCache::wav(const std::string& path) {
    auto it = wavs_.find(path);
    if (it == wavs_.end()) it = wavs_.emplace(path, load_wav(path)).first;
    return it->second;
}

Spectrogram FeatureCache::raw_lms(size_t i) {
    auto [path, chunk] = parse_audio_ref(m_.pairs[i].audio_ref);
    Waveform c = cut_chunk(wav(path), chunk, m_.chunk_seconds);
    return log_mel(mel_spectrogram(stft(c), fb_));
}

const Tensor<float>& FeatureCache::image(size_t i) {
    if (!images_[i]) images_[i] = image_preprocess(load_png(m_.pairs[i].image_ref));
    return *images_[i];
}

const Tensor<float>& FeatureCache::audio_input(size_t i) {
    if (!audio_[i]) {
        auto [path, chunk] = parse_audio_ref(m_.pairs[i].audio_ref);
        Waveform c = cut_chunk(wav(path), chunk, m_.chunk_seconds);
        audio_[i] = classifier_input(chunk_representation(c, kind_, fb_));
    }
    return *audio_[i];
}

const Tensor<float>& FeatureCache::lms_norm44(size_t i) {
    if (!lms44_[i]) {
        if (!m_.has_stats) throw ValueError("manifest has no LMS stats; run stats computation first");
        lms44_[i] = normalize_lms(raw_lms(i), m_.lms_min, m_.lms_max);
    }
    return *lms44_[i];
}

const Tensor<float>& FeatureCache::lms_norm34(size_t i) {
    if (!lms34_[i]) {
        if (!m_.has_stats) throw ValueError("manifest has no LMS stats; run stats computation first");
        lms34_[i] = normalize_lms(resize_spectrogram(raw_lms(i), 128, 34), m_.lms_min, m_.lms_max);
    }
    return *lms34_[i];
}

}  // namespace xmodal
