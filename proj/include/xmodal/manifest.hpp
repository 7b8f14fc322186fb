#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xmodal/rng.hpp"

namespace xmodal {

enum class Split { Train, Test };

// Which population wrong pairs are drawn from; drives the three adversarial
// regimes.
enum class WrongPairMode { InstrumentOriented, PoseOriented, I2S };

struct SamplePair {
    std::string image_ref;  // path to the frame image
    std::string audio_ref;  // "wav_path#chunk_index" into a 0.5 s chunk
    int category = 0;
    int index = 0;  // position within category, assigned in canonical order
    std::string video_id;
    Split split = Split::Train;
};

struct Manifest {
    std::vector<SamplePair> pairs;
    std::vector<std::string> categories;
    double lms_min = 0.0;  // train-split LMS range, for GAN output scaling
    double lms_max = 0.0;
    bool has_stats = false;
    double chunk_seconds = 0.5;
    double gate_theta = -45.0;
    uint64_t seed = 0;

    std::vector<const SamplePair*> split_pairs(Split s) const;
    int n_categories() const { return static_cast<int>(categories.size()); }
};

// Scans <frames_root>/<category>/<video_id>/frames/%06d.png against
// <audio_root>/<category>/<video_id>/audio.wav, cuts audio into 0.5 s chunks,
// pairs each kept chunk with its first frame and drops gated chunks.
Manifest build_manifest(const std::string& frames_root, const std::string& audio_root,
                        double chunk_seconds = 0.5, double gate_theta = -45.0);

// Per-category greedy assignment of whole videos toward an 80/20 pair-count
// split; no video id crosses the split boundary.
Manifest split_by_video(const Manifest& m, double train_fraction, uint64_t seed);

// Fills lms_min/lms_max from the train split (loads and transforms audio).
void compute_lms_stats(Manifest& m);

// Uniform draw from the mode's wrong-pair population, always from train.
const SamplePair& sample_wrong(const Manifest& m, const SamplePair& anchor, WrongPairMode mode, Rng& rng);

// Writes a synthetic corpus (procedural shapes + harmonic tones) under
// data_root in the standard directory layout, then builds, splits, and
// stats-completes a manifest over it.
Manifest synth_dataset(const std::string& data_root, int n_categories = 4, int pairs_per_category = 200,
                       uint64_t seed = 7);

// Line-delimited JSON: one header line, then one pair per line.
void save_manifest(const std::string& path, const Manifest& m);
Manifest load_manifest(const std::string& path);

// Splits "path#chunk" audio refs.
std::pair<std::string, int> parse_audio_ref(const std::string& ref);

}  // namespace xmodal
