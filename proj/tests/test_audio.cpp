#include <cmath>
#include <complex>
#include <cstdio>

#include "doctest.h"
#include "xmodal/audio.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/wav.hpp"

using namespace xmodal;

namespace {

constexpr double kPi = 3.14159265358979323846;

Waveform sine(double freq, double seconds = 0.5, double amp = 0.8) {
    Waveform w;
    w.samples.resize(static_cast<size_t>(seconds * 44100));
    for (size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = amp * std::sin(2.0 * kPi * freq * i / 44100.0);
    return w;
}

// same reflection convention as the STFT implementation
double reflect_at(const std::vector<double>& x, long i) {
    const long n = static_cast<long>(x.size());
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return x[static_cast<size_t>(i)];
}

// direct-summation DFT magnitude of one centered Hann window
std::vector<double> dft_window_oracle(const Waveform& w, int frame, int n_fft, int hop) {
    std::vector<std::complex<double>> acc(static_cast<size_t>(n_fft / 2 + 1), {0.0, 0.0});
    const long center = static_cast<long>(frame) * hop;
    for (int i = 0; i < n_fft; ++i) {
        const double win = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n_fft);
        const double v = reflect_at(w.samples, center - n_fft / 2 + i) * win;
        for (int b = 0; b <= n_fft / 2; ++b) {
            const double ang = -2.0 * kPi * b * i / n_fft;
            acc[static_cast<size_t>(b)] += v * std::complex<double>(std::cos(ang), std::sin(ang));
        }
    }
    std::vector<double> mag(acc.size());
    for (size_t b = 0; b < acc.size(); ++b) mag[b] = std::abs(acc[b]);
    return mag;
}

}  // namespace

TEST_CASE("load_wav: silence, scaling, stereo averaging, errors") {
    const std::string path = "/tmp/xmodal_test.wav";

    Waveform silence;
    silence.samples.assign(22050, 0.0);
    save_wav(path, silence);
    Waveform back = load_wav(path);
    CHECK(back.samples.size() == 22050);
    for (double v : back.samples) CHECK(v == 0.0);

    // full-scale square wave: int16 asymmetry gives -1 and +0.99997
    Waveform square;
    square.samples.resize(1000);
    for (size_t i = 0; i < square.samples.size(); ++i) square.samples[i] = (i % 2) ? 1.0 : -1.0;
    save_wav(path, square);
    back = load_wav(path);
    for (size_t i = 0; i < back.samples.size(); ++i) {
        if (i % 2)
            CHECK(back.samples[i] == doctest::Approx(32767.0 / 32768.0));
        else
            CHECK(back.samples[i] == doctest::Approx(-32767.0 / 32768.0));
    }

    // stereo (+x, -x) averages to zero; hand-build a 2-channel file
    {
        std::vector<int16_t> frames;
        for (int i = 0; i < 100; ++i) {
            frames.push_back(static_cast<int16_t>(1000 + i));
            frames.push_back(static_cast<int16_t>(-(1000 + i)));
        }
        FILE* f = fopen(path.c_str(), "wb");
        REQUIRE(f);
        auto u32 = [&](uint32_t v) { fwrite(&v, 4, 1, f); };
        auto u16 = [&](uint16_t v) { fwrite(&v, 2, 1, f); };
        fwrite("RIFF", 1, 4, f);
        u32(36 + 400);
        fwrite("WAVE", 1, 4, f);
        fwrite("fmt ", 1, 4, f);
        u32(16);
        u16(1);
        u16(2);
        u32(44100);
        u32(44100 * 4);
        u16(4);
        u16(16);
        fwrite("data", 1, 4, f);
        u32(400);
        fwrite(frames.data(), 2, frames.size(), f);
        fclose(f);
        back = load_wav(path);
        CHECK(back.samples.size() == 100);
        for (double v : back.samples) CHECK(v == 0.0);
    }

    // wrong sample rate is a distinct error
    Waveform wrong;
    wrong.samples.assign(100, 0.1);
    wrong.sample_rate = 48000;
    save_wav(path, wrong);
    CHECK_THROWS_AS(load_wav(path), WavSampleRateError);

    // garbage header
    {
        FILE* f = fopen(path.c_str(), "wb");
        fwrite("not a wav file at all, just bytes padded out to length!", 1, 56, f);
        fclose(f);
    }
    CHECK_THROWS_AS(load_wav(path), WavFormatError);
    std::remove(path.c_str());
}

TEST_CASE("stft: shapes, zero input, 1 kHz peak bin") {
    Waveform zero;
    zero.samples.assign(22050, 0.0);
    Spectrogram z = stft(zero);
    CHECK(z.bins == 1025);
    CHECK(z.frames == 44);
    for (double v : z.values) CHECK(v == doctest::Approx(0.0));

    Waveform s = sine(1000.0);
    Spectrogram sp = stft(s);
    // boundary frames see the reflected signal; check fully interior ones
    for (int t = 2; t < sp.frames - 2; ++t) {
        int best = 0;
        for (int b = 1; b < sp.bins; ++b)
            if (sp.at(b, t) > sp.at(best, t)) best = b;
        CHECK(best == 46);  // round(1000 * 2048 / 44100)
    }
}

TEST_CASE("stft magnitudes match a direct DFT oracle") {
    Rng rng(200);
    Waveform w;
    w.samples.resize(6000);
    for (auto& v : w.samples) v = rng.uniform(-1.0, 1.0);
    Spectrogram sp = stft(w);
    for (int frame : {0, 3, sp.frames - 1}) {
        auto oracle = dft_window_oracle(w, frame, 2048, 512);
        for (int b = 0; b < sp.bins; ++b) CHECK(std::abs(sp.at(b, frame) - oracle[static_cast<size_t>(b)]) < 1e-6);
    }
}

TEST_CASE("stft Parseval sanity on a windowed frame") {
    Rng rng(201);
    Waveform w;
    w.samples.resize(4096);
    for (auto& v : w.samples) v = rng.uniform(-1.0, 1.0);
    const int frame = 4, n_fft = 2048, hop = 512;
    Spectrogram sp = stft(w, n_fft, hop);
    double time_energy = 0.0;
    const long center = static_cast<long>(frame) * hop;
    for (int i = 0; i < n_fft; ++i) {
        const double win = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n_fft);
        const double v = reflect_at(w.samples, center - n_fft / 2 + i) * win;
        time_energy += v * v;
    }
    double spec_energy = sp.at(0, frame) * sp.at(0, frame) + sp.at(1024, frame) * sp.at(1024, frame);
    for (int b = 1; b < 1024; ++b) spec_energy += 2.0 * sp.at(b, frame) * sp.at(b, frame);
    spec_energy /= n_fft;
    CHECK(std::abs(time_energy - spec_energy) / time_energy < 1e-6);
}

TEST_CASE("mel filterbank invariants: nonnegative, unimodal, covering") {
    MelFilterbank fb = make_mel_filterbank();
    for (double v : fb.weights) CHECK(v >= 0.0);
    for (int m = 0; m < fb.n_mels; ++m) {
        // single contiguous support, rising then falling
        int first = -1, last = -1;
        for (int b = 0; b < fb.n_bins; ++b)
            if (fb.w(m, b) > 0.0) {
                if (first < 0) first = b;
                last = b;
            }
        REQUIRE(first >= 0);
        bool falling = false;
        for (int b = first + 1; b <= last; ++b) {
            const double prev = fb.w(m, b - 1), cur = fb.w(m, b);
            if (cur < prev) falling = true;
            if (falling) CHECK(cur <= prev + 1e-12);
            CHECK(fb.w(m, b) > 0.0);  // contiguity
        }
    }
    // every bin strictly inside (f_min, f_max) is covered by some filter
    const double bin_hz = 44100.0 / 2048.0;
    for (int b = 0; b < fb.n_bins; ++b) {
        const double f = b * bin_hz;
        if (f <= fb.f_min || f >= fb.f_max) continue;
        double colsum = 0.0;
        for (int m = 0; m < fb.n_mels; ++m) colsum += fb.w(m, b);
        CHECK(colsum > 0.0);
    }
}

TEST_CASE("mel_spectrogram: shape, linearity, impulse column") {
    MelFilterbank fb = make_mel_filterbank();
    Spectrogram z;
    z.kind = SpecKind::STFT;
    z.bins = 1025;
    z.frames = 44;
    z.values.assign(1025 * 44, 0.0);
    Spectrogram mz = mel_spectrogram(z, fb);
    CHECK(mz.bins == 128);
    CHECK(mz.frames == 44);
    for (double v : mz.values) CHECK(v == 0.0);

    // single-bin impulse picks out that filterbank column
    Spectrogram imp = z;
    const int bin = 300;
    for (int t = 0; t < 44; ++t) imp.at(bin, t) = 2.5;
    Spectrogram mi = mel_spectrogram(imp, fb);
    for (int m = 0; m < 128; ++m) CHECK(mi.at(m, 7) == doctest::Approx(2.5 * fb.w(m, bin)));

    Spectrogram bad = z;
    bad.bins = 513;
    bad.values.resize(513 * 44);
    CHECK_THROWS_AS(mel_spectrogram(bad, fb), ShapeError);
}

TEST_CASE("log_mel point values and monotonicity") {
    Spectrogram ms;
    ms.kind = SpecKind::MS;
    ms.bins = 2;
    ms.frames = 2;
    ms.values = {1.0, 0.0, 0.5, 2.0};
    Spectrogram lms = log_mel(ms);
    CHECK(lms.values[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(lms.values[1] == doctest::Approx(-200.0));
    CHECK(lms.values[2] < lms.values[3]);
    CHECK(lms.kind == SpecKind::LMS);
}

TEST_CASE("mfcc: DC case, shape, ramp vs direct-summation oracle") {
    Spectrogram lms;
    lms.kind = SpecKind::LMS;
    lms.bins = 128;
    lms.frames = 44;
    lms.values.assign(128 * 44, -3.0);
    Spectrogram mf = mfcc(lms);
    CHECK(mf.bins == 40);
    CHECK(mf.frames == 44);
    CHECK(mf.at(0, 0) == doctest::Approx(-3.0 * std::sqrt(128.0)));
    for (int k = 1; k < 40; ++k) CHECK(mf.at(k, 0) == doctest::Approx(0.0).epsilon(1e-9));

    // 8-point ramp against the textbook DCT-II sum
    Spectrogram ramp;
    ramp.bins = 8;
    ramp.frames = 1;
    ramp.values = {0, 1, 2, 3, 4, 5, 6, 7};
    Spectrogram rd = mfcc(ramp, 8);
    for (int k = 0; k < 8; ++k) {
        double acc = 0.0;
        for (int i = 0; i < 8; ++i) acc += ramp.values[static_cast<size_t>(i)] * std::cos(kPi / 8 * (i + 0.5) * k);
        acc *= (k == 0) ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
        CHECK(std::abs(rd.at(k, 0) - acc) < 1e-10);
    }

    CHECK_THROWS_AS(mfcc(lms, 200), ShapeError);
}

TEST_CASE("cqt: zeros, A4 bin, frame count, Nyquist guard") {
    Waveform zero;
    zero.samples.assign(22050, 0.0);
    Spectrogram z = cqt(zero);
    CHECK(z.bins == 84);
    CHECK(z.frames == 44);
    for (double v : z.values) CHECK(v == 0.0);

    Waveform a4 = sine(440.0);
    Spectrogram s = cqt(a4);
    for (int t = 10; t < 34; ++t) {
        int best = 0;
        for (int b = 1; b < s.bins; ++b)
            if (s.at(b, t) > s.at(best, t)) best = b;
        CHECK(best == 45);  // round(12 * log2(440 / 32.70))
    }

    CHECK_THROWS_AS(cqt(a4, 32.70, 12, 200), ValueError);
}

TEST_CASE("loudness: point values, sentinel, scale invariance") {
    Waveform c;
    c.samples.assign(100, 0.37);
    CHECK(loudness_dbfs(c) == doctest::Approx(0.0));

    Waveform p;
    p.samples = {1.0, 0.0, 0.0, 0.0};
    CHECK(std::abs(loudness_dbfs(p) - 20.0 * std::log10(0.25)) < 1e-9);

    Waveform z;
    z.samples.assign(10, 0.0);
    CHECK(std::isinf(loudness_dbfs(z)));
    CHECK(loudness_dbfs(z) < 0.0);

    Rng rng(202);
    Waveform r;
    r.samples.resize(500);
    for (auto& v : r.samples) v = rng.uniform(-1.0, 1.0);
    const double base = loudness_dbfs(r);
    for (double scale : {0.001, 0.5, 3.0, -2.0}) {
        Waveform rs = r;
        for (auto& v : rs.samples) v *= scale;
        CHECK(loudness_dbfs(rs) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("gate: silence deleted, loud kept, boundary deleted") {
    Waveform z;
    z.samples.assign(10, 0.0);
    CHECK_FALSE(gate(z));

    Waveform c;
    c.samples.assign(10, 0.9);
    CHECK(gate(c));  // Gamma = 0

    // exact boundary Gamma == Theta is deleted
    Waveform p;
    p.samples = {1.0, 0.2, 0.0, 0.3};
    const double gamma = loudness_dbfs(p);
    CHECK_FALSE(gate(p, gamma));
    CHECK(gate(p, gamma - 1e-9));
}

TEST_CASE("resize_spectrogram: 44<->34 paths and identity") {
    Rng rng(203);
    Spectrogram s;
    s.kind = SpecKind::LMS;
    s.bins = 128;
    s.frames = 44;
    s.values.resize(128 * 44);
    for (auto& v : s.values) v = rng.uniform(-80.0, 0.0);

    Spectrogram a = resize_spectrogram(s, 128, 34);
    CHECK(a.bins == 128);
    CHECK(a.frames == 34);
    Spectrogram b = resize_spectrogram(a, 128, 44);
    CHECK(b.frames == 44);

    Spectrogram id = resize_spectrogram(s, 128, 44);
    for (size_t i = 0; i < s.values.size(); ++i) CHECK(id.values[i] == doctest::Approx(s.values[i]).epsilon(1e-12));

    CHECK_THROWS_AS(resize_spectrogram(s, 0, 10), ShapeError);
}

TEST_CASE("all five representations of a 0.5 s chunk have 44 frames") {
    Waveform w = sine(523.25);
    REQUIRE(w.samples.size() == 22050);
    MelFilterbank fb = make_mel_filterbank();
    Spectrogram st = stft(w);
    Spectrogram ms = mel_spectrogram(st, fb);
    Spectrogram lms = log_mel(ms);
    Spectrogram mf = mfcc(lms);
    Spectrogram cq = cqt(w);
    CHECK(st.frames == 44);
    CHECK(ms.frames == 44);
    CHECK(lms.frames == 44);
    CHECK(mf.frames == 44);
    CHECK(cq.frames == 44);
    CHECK(lms.bins == 128);
}

TEST_CASE("spectrogram serialization round-trips through sidecar format") {
    Rng rng(204);
    Spectrogram s;
    s.kind = SpecKind::LMS;
    s.bins = 16;
    s.frames = 9;
    s.values.resize(16 * 9);
    for (auto& v : s.values) v = rng.uniform(-80.0, 0.0);
    const std::string path = "/tmp/xmodal_spec_test.bin";
    save_spectrogram(path, s);
    Spectrogram back = load_spectrogram(path);
    CHECK(back.kind == SpecKind::LMS);
    CHECK(back.bins == 16);
    CHECK(back.frames == 9);
    for (size_t i = 0; i < s.values.size(); ++i)
        CHECK(back.values[i] == doctest::Approx(s.values[i]).epsilon(1e-6));
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}
