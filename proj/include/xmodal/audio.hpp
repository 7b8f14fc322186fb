#pragma once

#include <complex>
#include <string>
#include <vector>

#include "xmodal/wav.hpp"

namespace xmodal {

enum class SpecKind { STFT, MS, LMS, MFCC, CQT };

std::string spec_kind_name(SpecKind k);
SpecKind spec_kind_from_name(const std::string& name);

// bins x frames real matrix, row-major, tagged with its representation kind.
struct Spectrogram {
    std::vector<double> values;
    int bins = 0;
    int frames = 0;
    SpecKind kind = SpecKind::STFT;
    int sample_rate = 44100;
    int n_fft = 2048;
    int hop = 512;

    double& at(int b, int f) { return values[static_cast<size_t>(b) * frames + f]; }
    double at(int b, int f) const { return values[static_cast<size_t>(b) * frames + f]; }
};

// 128 triangular filters (peak height 1) on the mel scale over [f_min, f_max].
struct MelFilterbank {
    std::vector<double> weights;  // n_mels x (n_fft/2 + 1)
    int n_mels = 128;
    int n_bins = 1025;
    double f_min = 0.0;
    double f_max = 22050.0;

    double w(int m, int b) const { return weights[static_cast<size_t>(m) * n_bins + b]; }
};

MelFilterbank make_mel_filterbank(int n_mels = 128, int n_fft = 2048, int sample_rate = 44100,
                                  double f_min = 0.0, double f_max = 22050.0);

// In-place iterative radix-2 FFT (size must be a power of two).
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

// Hann-windowed magnitude STFT with reflection center padding;
// frames = 1 + floor(len / hop).
Spectrogram stft(const Waveform& w, int n_fft = 2048, int hop = 512);

Spectrogram mel_spectrogram(const Spectrogram& s, const MelFilterbank& fb);

// 20*log10(v + 1e-10), elementwise.
Spectrogram log_mel(const Spectrogram& ms);

// Orthonormal DCT-II along the bin axis, keeping the first n_coeff rows.
Spectrogram mfcc(const Spectrogram& lms, int n_coeff = 40);

// Naive windowed complex-kernel constant-Q magnitudes, same hop/centering as
// the STFT path.
Spectrogram cqt(const Waveform& w, double f_min = 32.70, int bins_per_octave = 12, int n_bins = 84, int hop = 512);

// Gamma = 20*log10(mean|psi| / max|psi|); -inf for all-zero input.
double loudness_dbfs(const Waveform& w);

// keep iff Gamma > theta
bool gate(const Waveform& w, double theta_dbfs = -45.0);

// Bilinear (half-pixel convention) resize over the value grid.
Spectrogram resize_spectrogram(const Spectrogram& s, int new_bins, int new_frames);

// Serialization: tensor-core binary plus a JSON sidecar at path + ".json".
void save_spectrogram(const std::string& path, const Spectrogram& s);
Spectrogram load_spectrogram(const std::string& path);

// Grayscale PGM render for visual inspection (min..max mapped to 0..255).
void save_spectrogram_pgm(const std::string& path, const Spectrogram& s);

}  // namespace xmodal
