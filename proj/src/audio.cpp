#include "xmodal/audio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "xmodal/error.hpp"
#include "xmodal/serialize.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// index into the signal with reflection at the boundaries (no edge repeat)
double sample_reflect(const std::vector<double>& x, long i) {
    const long n = static_cast<long>(x.size());
    if (n == 1) return x[0];
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return x[static_cast<size_t>(i)];
}

}  // namespace

std::string spec_kind_name(SpecKind k) {
    switch (k) {
        case SpecKind::STFT: return "STFT";
        case SpecKind::MS: return "MS";
        case SpecKind::LMS: return "LMS";
        case SpecKind::MFCC: return "MFCC";
        case SpecKind::CQT: return "CQT";
    }
    return "?";
}

SpecKind spec_kind_from_name(const std::string& name) {
    if (name == "STFT" || name == "stft") return SpecKind::STFT;
    if (name == "MS" || name == "ms") return SpecKind::MS;
    if (name == "LMS" || name == "lms") return SpecKind::LMS;
    if (name == "MFCC" || name == "mfcc") return SpecKind::MFCC;
    if (name == "CQT" || name == "cqt") return SpecKind::CQT;
    throw ValueError("unknown representation kind: " + name);
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ValueError("fft size must be a power of two, got " + std::to_string(n));
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

MelFilterbank make_mel_filterbank(int n_mels, int n_fft, int sample_rate, double f_min, double f_max) {
    MelFilterbank fb;
    fb.n_mels = n_mels;
    fb.n_bins = n_fft / 2 + 1;
    fb.f_min = f_min;
    fb.f_max = f_max;
    fb.weights.assign(static_cast<size_t>(n_mels) * fb.n_bins, 0.0);
    const double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);
    std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        edges[static_cast<size_t>(i)] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (n_mels + 1));
    const double bin_hz = static_cast<double>(sample_rate) / n_fft;
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[static_cast<size_t>(m)], ctr = edges[static_cast<size_t>(m) + 1],
                     hi = edges[static_cast<size_t>(m) + 2];
        for (int b = 0; b < fb.n_bins; ++b) {
            const double f = b * bin_hz;
            double w = 0.0;
            if (f > lo && f < ctr)
                w = (f - lo) / (ctr - lo);
            else if (f >= ctr && f < hi)
                w = (hi - f) / (hi - ctr);
            fb.weights[static_cast<size_t>(m) * fb.n_bins + b] = w;
        }
    }
    return fb;
}

Spectrogram stft(const Waveform& w, int n_fft, int hop) {
    if (w.samples.empty()) throw ValueError("stft: empty input");
    const int n = static_cast<int>(w.samples.size());
    const int frames = 1 + n / hop;
    const int bins = n_fft / 2 + 1;
    std::vector<double> window(static_cast<size_t>(n_fft));
    for (int i = 0; i < n_fft; ++i) window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n_fft);
    Spectrogram s;
    s.kind = SpecKind::STFT;
    s.bins = bins;
    s.frames = frames;
    s.sample_rate = w.sample_rate;
    s.n_fft = n_fft;
    s.hop = hop;
    s.values.assign(static_cast<size_t>(bins) * frames, 0.0);
    std::vector<std::complex<double>> buf(static_cast<size_t>(n_fft));
    for (int t = 0; t < frames; ++t) {
        const long center = static_cast<long>(t) * hop;
        for (int i = 0; i < n_fft; ++i)
            buf[static_cast<size_t>(i)] = sample_reflect(w.samples, center - n_fft / 2 + i) * window[static_cast<size_t>(i)];
        fft(buf);
        for (int b = 0; b < bins; ++b) s.at(b, t) = std::abs(buf[static_cast<size_t>(b)]);
    }
    return s;
}

Spectrogram mel_spectrogram(const Spectrogram& s, const MelFilterbank& fb) {
    if (s.bins != fb.n_bins)
        throw ShapeError("mel_spectrogram: STFT bins " + std::to_string(s.bins) + " != filterbank bins " +
                         std::to_string(fb.n_bins));
    Spectrogram out;
    out.kind = SpecKind::MS;
    out.bins = fb.n_mels;
    out.frames = s.frames;
    out.sample_rate = s.sample_rate;
    out.n_fft = s.n_fft;
    out.hop = s.hop;
    out.values.assign(static_cast<size_t>(fb.n_mels) * s.frames, 0.0);
    for (int m = 0; m < fb.n_mels; ++m)
        for (int t = 0; t < s.frames; ++t) {
            double acc = 0.0;
            for (int b = 0; b < s.bins; ++b) acc += fb.w(m, b) * s.at(b, t);
            out.at(m, t) = acc;
        }
    return out;
}

Spectrogram log_mel(const Spectrogram& ms) {
    Spectrogram out = ms;
    out.kind = SpecKind::LMS;
    for (auto& v : out.values) v = 20.0 * std::log10(v + 1e-10);
    return out;
}

Spectrogram mfcc(const Spectrogram& lms, int n_coeff) {
    if (n_coeff > lms.bins)
        throw ShapeError("mfcc: n_coeff " + std::to_string(n_coeff) + " > mel bins " + std::to_string(lms.bins));
    const int n = lms.bins;
    Spectrogram out;
    out.kind = SpecKind::MFCC;
    out.bins = n_coeff;
    out.frames = lms.frames;
    out.sample_rate = lms.sample_rate;
    out.n_fft = lms.n_fft;
    out.hop = lms.hop;
    out.values.assign(static_cast<size_t>(n_coeff) * lms.frames, 0.0);
    // orthonormal DCT-II
    for (int k = 0; k < n_coeff; ++k) {
        const double norm = (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int t = 0; t < lms.frames; ++t) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += lms.at(i, t) * std::cos(kPi / n * (i + 0.5) * k);
            out.at(k, t) = norm * acc;
        }
    }
    return out;
}

Spectrogram cqt(const Waveform& w, double f_min, int bins_per_octave, int n_bins, int hop) {
    const double nyquist = w.sample_rate / 2.0;
    const double f_top = f_min * std::pow(2.0, static_cast<double>(n_bins) / bins_per_octave);
    if (f_top >= nyquist)
        throw ValueError("cqt: top bin " + std::to_string(f_top) + " Hz exceeds Nyquist " + std::to_string(nyquist));
    const int n = static_cast<int>(w.samples.size());
    const int frames = 1 + n / hop;
    const double q = 1.0 / (std::pow(2.0, 1.0 / bins_per_octave) - 1.0);
    const int max_kernel = 4096;  // cap so low bins stay tractable on 0.5 s chunks

    Spectrogram s;
    s.kind = SpecKind::CQT;
    s.bins = n_bins;
    s.frames = frames;
    s.sample_rate = w.sample_rate;
    s.n_fft = 0;
    s.hop = hop;
    s.values.assign(static_cast<size_t>(n_bins) * frames, 0.0);

    for (int k = 0; k < n_bins; ++k) {
        const double fk = f_min * std::pow(2.0, static_cast<double>(k) / bins_per_octave);
        int len = static_cast<int>(std::ceil(q * w.sample_rate / fk));
        len = std::min(len, max_kernel);
        std::vector<std::complex<double>> kernel(static_cast<size_t>(len));
        double wsum = 0.0;
        for (int i = 0; i < len; ++i) {
            const double win = 0.5 - 0.5 * std::cos(2.0 * kPi * i / len);
            wsum += win;
            const double ph = 2.0 * kPi * fk * (i - len / 2) / w.sample_rate;
            kernel[static_cast<size_t>(i)] = std::polar(win, -ph);
        }
        for (int t = 0; t < frames; ++t) {
            const long center = static_cast<long>(t) * hop;
            std::complex<double> acc(0.0, 0.0);
            for (int i = 0; i < len; ++i) {
                const long idx = center - len / 2 + i;
                if (idx < 0 || idx >= n) continue;  // zero padding outside the chunk
                acc += kernel[static_cast<size_t>(i)] * w.samples[static_cast<size_t>(idx)];
            }
            s.at(k, t) = std::abs(acc) / wsum;
        }
    }
    return s;
}

double loudness_dbfs(const Waveform& w) {
    double mx = 0.0, mean = 0.0;
    for (double v : w.samples) {
        const double a = std::abs(v);
        mx = std::max(mx, a);
        mean += a;
    }
    if (mx == 0.0 || w.samples.empty()) return -std::numeric_limits<double>::infinity();
    mean /= static_cast<double>(w.samples.size());
    return 20.0 * std::log10(mean / mx);
}

bool gate(const Waveform& w, double theta_dbfs) { return loudness_dbfs(w) > theta_dbfs; }

Spectrogram resize_spectrogram(const Spectrogram& s, int new_bins, int new_frames) {
    if (new_bins <= 0 || new_frames <= 0) throw ShapeError("resize_spectrogram: non-positive target size");
    Spectrogram out = s;
    out.bins = new_bins;
    out.frames = new_frames;
    out.values.assign(static_cast<size_t>(new_bins) * new_frames, 0.0);
    const double sy = static_cast<double>(s.bins) / new_bins;
    const double sx = static_cast<double>(s.frames) / new_frames;
    for (int y = 0; y < new_bins; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(s.bins - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, s.bins - 1);
        const double wy = fy - y0;
        for (int x = 0; x < new_frames; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(s.frames - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, s.frames - 1);
            const double wx = fx - x0;
            out.at(y, x) = (1 - wy) * ((1 - wx) * s.at(y0, x0) + wx * s.at(y0, x1)) +
                           wy * ((1 - wx) * s.at(y1, x0) + wx * s.at(y1, x1));
        }
    }
    return out;
}

void save_spectrogram(const std::string& path, const Spectrogram& s) {
    TensorFile tf;
    Tensor<float> t({s.bins, s.frames});
    for (size_t i = 0; i < s.values.size(); ++i) t.data[i] = static_cast<float>(s.values[i]);
    tf.add("spectrogram", t);
    save_tensors(path, tf);
    nlohmann::json j{{"kind", spec_kind_name(s.kind)}, {"bins", s.bins},        {"frames", s.frames},
                     {"n_fft", s.n_fft},               {"hop", s.hop},          {"sample_rate", s.sample_rate}};
    std::ofstream os(path + ".json", std::ios::trunc);
    if (!os) throw IoError("cannot write sidecar: " + path + ".json");
    os << j.dump(2) << "\n";
}

Spectrogram load_spectrogram(const std::string& path) {
    TensorFile tf = load_tensors(path);
    const Tensor<float>* t = tf.find("spectrogram");
    if (!t || t->rank() != 2) throw IoError("not a spectrogram file: " + path);
    std::ifstream is(path + ".json");
    if (!is) throw IoError("missing sidecar: " + path + ".json");
    nlohmann::json j = nlohmann::json::parse(is);
    Spectrogram s;
    s.kind = spec_kind_from_name(j.at("kind").get<std::string>());
    s.bins = t->dim(0);
    s.frames = t->dim(1);
    s.n_fft = j.at("n_fft").get<int>();
    s.hop = j.at("hop").get<int>();
    s.sample_rate = j.at("sample_rate").get<int>();
    s.values.resize(t->numel());
    for (size_t i = 0; i < t->numel(); ++i) s.values[i] = static_cast<double>(t->data[i]);
    return s;
}

void save_spectrogram_pgm(const std::string& path, const Spectrogram& s) {
    double lo = s.values.empty() ? 0.0 : s.values[0], hi = lo;
    for (double v : s.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = (hi > lo) ? hi - lo : 1.0;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write pgm: " + path);
    os << "P5\n" << s.frames << " " << s.bins << "\n255\n";
    // low frequencies at the bottom of the image
    for (int b = s.bins - 1; b >= 0; --b)
        for (int t = 0; t < s.frames; ++t) {
            const unsigned char px = static_cast<unsigned char>(std::lround(255.0 * (s.at(b, t) - lo) / range));
            os.write(reinterpret_cast<const char*>(&px), 1);
        }
}

}  // namespace xmodal
