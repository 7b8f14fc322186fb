#include "xmodal/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"
#include "xmodal/audio.hpp"
#include "xmodal/error.hpp"
#include "xmodal/image_io.hpp"
#include "xmodal/wav.hpp"

namespace fs = std::filesystem;

namespace xmodal {

namespace {

std::vector<std::string> sorted_subdirs(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

char frame_name_buf[64];

std::string frame_name(int idx) {
    std::snprintf(frame_name_buf, sizeof(frame_name_buf), "%06d.png", idx);
    return frame_name_buf;
}

Waveform chunk_of(const Waveform& w, int chunk, int chunk_samples) {
    Waveform c;
    c.sample_rate = w.sample_rate;
    const size_t begin = static_cast<size_t>(chunk) * chunk_samples;
    c.samples.assign(w.samples.begin() + static_cast<long>(begin),
                     w.samples.begin() + static_cast<long>(begin + chunk_samples));
    return c;
}

}  // namespace

std::vector<const SamplePair*> Manifest::split_pairs(Split s) const {
    std::vector<const SamplePair*> out;
    for (const auto& p : pairs)
        if (p.split == s) out.push_back(&p);
    return out;
}

std::pair<std::string, int> parse_audio_ref(const std::string& ref) {
    const size_t pos = ref.rfind('#');
    if (pos == std::string::npos) throw ValueError("audio ref missing #chunk suffix: " + ref);
    return {ref.substr(0, pos), std::stoi(ref.substr(pos + 1))};
}

Manifest build_manifest(const std::string& frames_root, const std::string& audio_root, double chunk_seconds,
                        double gate_theta) {
    Manifest m;
    m.chunk_seconds = chunk_seconds;
    m.gate_theta = gate_theta;
    m.categories = sorted_subdirs(frames_root);
    if (m.categories.empty()) throw IoError("no category directories under " + frames_root);

    for (size_t ci = 0; ci < m.categories.size(); ++ci) {
        const std::string& cat = m.categories[ci];
        std::vector<std::string> videos = sorted_subdirs(fs::path(frames_root) / cat);
        size_t cat_pairs = 0;
        for (const std::string& vid : videos) {
            const fs::path wav_path = fs::path(audio_root) / cat / vid / "audio.wav";
            if (!fs::exists(wav_path)) {
                std::fprintf(stderr, "warning: no audio.wav for %s/%s, skipping video\n", cat.c_str(), vid.c_str());
                continue;
            }
            Waveform w = load_wav(wav_path.string());
            const int chunk_samples = static_cast<int>(std::lround(chunk_seconds * w.sample_rate));
            const int n_chunks = static_cast<int>(w.samples.size()) / chunk_samples;
            for (int k = 0; k < n_chunks; ++k) {
                Waveform chunk = chunk_of(w, k, chunk_samples);
                if (!gate(chunk, gate_theta)) continue;
                const fs::path frame = fs::path(frames_root) / cat / vid / "frames" / frame_name(k);
                if (!fs::exists(frame)) {
                    std::fprintf(stderr, "warning: missing frame %s, skipping pair\n", frame.string().c_str());
                    continue;
                }
                SamplePair p;
                p.image_ref = frame.string();
                p.audio_ref = wav_path.string() + "#" + std::to_string(k);
                p.category = static_cast<int>(ci);
                p.video_id = vid;
                m.pairs.push_back(std::move(p));
                ++cat_pairs;
            }
        }
        if (cat_pairs == 0) throw IoError("category '" + cat + "' produced no pairs");
    }

    // canonical order, then per-category indexing
    std::sort(m.pairs.begin(), m.pairs.end(), [](const SamplePair& a, const SamplePair& b) {
        if (a.category != b.category) return a.category < b.category;
        if (a.video_id != b.video_id) return a.video_id < b.video_id;
        return parse_audio_ref(a.audio_ref).second < parse_audio_ref(b.audio_ref).second;
    });
    std::vector<int> next_index(m.categories.size(), 0);
    for (auto& p : m.pairs) p.index = next_index[static_cast<size_t>(p.category)]++;
    return m;
}

Manifest split_by_video(const Manifest& m, double train_fraction, uint64_t seed) {
    Manifest out = m;
    out.seed = seed;
    Rng rng(seed);
    for (int c = 0; c < out.n_categories(); ++c) {
        std::map<std::string, int> video_counts;
        for (const auto& p : out.pairs)
            if (p.category == c) ++video_counts[p.video_id];
        if (video_counts.size() < 2)
            throw ValueError("category '" + out.categories[static_cast<size_t>(c)] +
                             "' has fewer than 2 videos; video-disjoint split impossible");
        std::vector<std::string> videos;
        int total = 0;
        for (const auto& [v, n] : video_counts) {
            videos.push_back(v);
            total += n;
        }
        // deterministic shuffle
        for (size_t i = videos.size(); i > 1; --i) std::swap(videos[i - 1], videos[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

        const double target = train_fraction * total;
        std::map<std::string, Split> assignment;
        int train_count = 0;
        for (const auto& v : videos) {
            if (static_cast<double>(train_count) < target) {
                assignment[v] = Split::Train;
                train_count += video_counts[v];
            } else {
                assignment[v] = Split::Test;
            }
        }
        // both splits must be populated
        if (train_count == total) assignment[videos.back()] = Split::Test;
        bool any_train = false;
        for (const auto& [v, s] : assignment) any_train |= (s == Split::Train);
        if (!any_train) assignment[videos.front()] = Split::Train;

        for (auto& p : out.pairs)
            if (p.category == c) p.split = assignment[p.video_id];
    }
    out.has_stats = false;  // stats are defined over the train split
    return out;
}

void compute_lms_stats(Manifest& m) {
    MelFilterbank fb = make_mel_filterbank();
    std::map<std::string, Waveform> cache;
    double lo = 1e300, hi = -1e300;
    bool any = false;
    for (const auto& p : m.pairs) {
        if (p.split != Split::Train) continue;
        auto [path, chunk] = parse_audio_ref(p.audio_ref);
        auto it = cache.find(path);
        if (it == cache.end()) it = cache.emplace(path, load_wav(path)).first;
        const int chunk_samples = static_cast<int>(std::lround(m.chunk_seconds * it->second.sample_rate));
        Waveform c = chunk_of(it->second, chunk, chunk_samples);
        Spectrogram lms = log_mel(mel_spectrogram(stft(c), fb));
        for (double v : lms.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        any = true;
    }
    if (!any) throw ValueError("compute_lms_stats: manifest has no train pairs");
    m.lms_min = lo;
    m.lms_max = hi;
    m.has_stats = true;
}

const SamplePair& sample_wrong(const Manifest& m, const SamplePair& anchor, WrongPairMode mode, Rng& rng) {
    std::vector<const SamplePair*> candidates;
    for (const auto& p : m.pairs) {
        if (p.split != Split::Train) continue;
        switch (mode) {
            case WrongPairMode::InstrumentOriented:
            case WrongPairMode::I2S:
                if (p.category != anchor.category) candidates.push_back(&p);
                break;
            case WrongPairMode::PoseOriented:
                if (p.category == anchor.category && p.index != anchor.index) candidates.push_back(&p);
                break;
        }
    }
    if (candidates.empty()) {
        if (mode == WrongPairMode::PoseOriented)
            throw ValueError("sample_wrong: category has a single pair; pose-oriented sampling impossible");
        throw ValueError("sample_wrong: no candidates outside category " + std::to_string(anchor.category));
    }
    return *candidates[static_cast<size_t>(rng.uniform_int(static_cast<int>(candidates.size())))];
}

namespace {

// procedural 64x64 frame: shape kind by category, position by pose in [0,1]
Image synth_frame(int category, double pose) {
    const int sz = 64;
    Image img;
    img.width = img.height = sz;
    img.rgb.assign(static_cast<size_t>(sz) * sz * 3, 20);
    static const uint8_t palette[4][3] = {{230, 60, 60}, {60, 200, 80}, {80, 110, 235}, {225, 205, 60}};
    const uint8_t* col = palette[category % 4];
    const int shift = static_cast<int>(std::lround(pose * 24.0));
    auto put = [&](int y, int x) {
        if (y < 0 || y >= sz || x < 0 || x >= sz) return;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
    };
    switch (category % 4) {
        case 0:  // vertical bars
            for (int y = 8; y < 56; ++y)
                for (int x = 0; x < sz; ++x)
                    if (((x + shift) / 6) % 2 == 0) put(y, x);
            break;
        case 1: {  // disc
            const int cx = 16 + shift, cy = 32, r = 13;
            for (int y = 0; y < sz; ++y)
                for (int x = 0; x < sz; ++x)
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) put(y, x);
            break;
        }
        case 2: {  // cross
            const int cx = 20 + shift, cy = 32;
            for (int d = -18; d <= 18; ++d)
                for (int t = -4; t <= 4; ++t) {
                    put(cy + d, cx + t);
                    put(cy + t, cx + d);
                }
            break;
        }
        case 3:  // checkerboard with phase shift
            for (int y = 0; y < sz; ++y)
                for (int x = 0; x < sz; ++x)
                    if ((((x + shift) / 8) + (y / 8)) % 2 == 0) put(y, x);
            break;
    }
    return img;
}

}  // namespace

Manifest synth_dataset(const std::string& data_root, int n_categories, int pairs_per_category, uint64_t seed) {
    if (n_categories < 2) throw ValueError("synth_dataset: need at least 2 categories");
    if (pairs_per_category < 8) throw ValueError("synth_dataset: need at least 8 pairs per category");
    Rng rng(seed);
    const int sr = 44100, chunk_samples = 22050;
    const int n_videos = 4;

    for (int c = 0; c < n_categories; ++c) {
        const std::string cat = "cat" + std::to_string(c);
        const double fundamental = 220.0 * std::pow(2.0, c / 2.0);
        int remaining = pairs_per_category;
        for (int v = 0; v < n_videos; ++v) {
            const int chunks = remaining / (n_videos - v);
            remaining -= chunks;
            const fs::path vdir = fs::path(data_root) / cat / ("vid" + std::to_string(v));
            fs::create_directories(vdir / "frames");
            Waveform w;
            w.sample_rate = sr;
            w.samples.assign(static_cast<size_t>(chunks) * chunk_samples, 0.0);
            for (int k = 0; k < chunks; ++k) {
                // pose sweeps through the video with a per-chunk wobble
                double pose = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979323846 * k / 16.0 + rng.uniform(0.0, 0.4));
                pose = std::clamp(pose, 0.0, 1.0);
                const double amp = 0.30 + 0.55 * pose;
                const double f = fundamental * (1.0 + 0.01 * rng.uniform(-1.0, 1.0));
                static const double harmonic_amp[4] = {1.0, 0.5, 0.25, 0.125};
                for (int i = 0; i < chunk_samples; ++i) {
                    double s = 0.0;
                    for (int h = 0; h < 4; ++h)
                        s += harmonic_amp[h] * std::sin(2.0 * 3.14159265358979323846 * f * (h + 1) * i / sr);
                    w.samples[static_cast<size_t>(k) * chunk_samples + i] = amp * s / 1.875;
                }
                save_png((vdir / "frames" / frame_name(k)).string(), synth_frame(c, pose));
            }
            save_wav((vdir / "audio.wav").string(), w);
        }
    }

    Manifest m = build_manifest(data_root, data_root);
    m = split_by_video(m, 0.8, seed);
    m.seed = seed;
    compute_lms_stats(m);
    return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write manifest: " + path);
    nlohmann::json header{{"categories", m.categories},
                          {"chunk_seconds", m.chunk_seconds},
                          {"gate_theta", m.gate_theta},
                          {"seed", m.seed}};
    if (m.has_stats) header["stats"] = {{"lms_min", m.lms_min}, {"lms_max", m.lms_max}};
    os << header.dump() << "\n";
    for (const auto& p : m.pairs) {
        nlohmann::json j{{"image", p.image_ref},   {"audio", p.audio_ref},
                         {"category", p.category}, {"index", p.index},
                         {"video", p.video_id},    {"split", p.split == Split::Train ? "train" : "test"}};
        os << j.dump() << "\n";
    }
    if (!os) throw IoError("manifest write failed: " + path);
}

Manifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path);
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty manifest: " + path);
    nlohmann::json header = nlohmann::json::parse(line);
    Manifest m;
    m.categories = header.at("categories").get<std::vector<std::string>>();
    m.chunk_seconds = header.at("chunk_seconds").get<double>();
    m.gate_theta = header.at("gate_theta").get<double>();
    m.seed = header.at("seed").get<uint64_t>();
    if (header.contains("stats")) {
        m.lms_min = header["stats"].at("lms_min").get<double>();
        m.lms_max = header["stats"].at("lms_max").get<double>();
        m.has_stats = true;
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        SamplePair p;
        p.image_ref = j.at("image").get<std::string>();
        p.audio_ref = j.at("audio").get<std::string>();
        p.category = j.at("category").get<int>();
        p.index = j.at("index").get<int>();
        p.video_id = j.at("video").get<std::string>();
        p.split = j.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
        if (p.category < 0 || p.category >= m.n_categories())
            throw ValueError("manifest pair category out of range: " + std::to_string(p.category));
        m.pairs.push_back(std::move(p));
    }
    return m;
}

}  // namespace xmodal
