#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "xmodal/eval.hpp"
#include "xmodal/image_io.hpp"
#include "xmodal/manifest.hpp"

using namespace xmodal;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("confusion matrix accounts for every sample and inverts to accuracy") {
    fs::path root = fresh_dir("xm_eval_conf");
    Manifest m = synth_dataset(root.string(), 2, 12, 31);
    FeatureCache data(m, SpecKind::LMS);
    ImageClassifier clf = make_image_classifier(2, 31);
    train_image_classifier(clf, data, 8, 31, 8, 1e-3, 0.99);

    std::vector<Tensor<float>> samples;
    std::vector<int> expected;
    std::vector<int> per_cat(2, 0);
    for (size_t i = 0; i < m.pairs.size(); ++i) {
        if (m.pairs[i].split != Split::Test) continue;
        samples.push_back(data.image(i));
        expected.push_back(m.pairs[i].category);
        per_cat[static_cast<size_t>(m.pairs[i].category)] += 1;
    }
    EvalReport r = classify_generated(samples, expected, clf);
    // real test images score exactly the classifier's own test accuracy
    CHECK(r.overall_accuracy == doctest::Approx(classifier_accuracy(clf, data, Split::Test)));
    int trace = 0, total = 0;
    for (int c = 0; c < 2; ++c) {
        int row = 0;
        for (int k = 0; k < 2; ++k) row += r.confusion[c][k];
        CHECK(row == per_cat[static_cast<size_t>(c)]);
        trace += r.confusion[c][c];
        total += row;
    }
    CHECK(r.overall_accuracy == doctest::Approx(static_cast<double>(trace) / total));

    CHECK_THROWS_AS(classify_generated(samples, std::vector<int>(samples.size(), 5), clf), ValueError);
    CHECK_THROWS_AS(classify_generated(std::vector<Tensor<float>>{Tensor<float>({1, 128, 44})}, {0}, clf), ValueError);

    // chance-level calibration: labels shuffled independently of the images
    Rng rng(77);
    std::vector<int> shuffled;
    for (size_t i = 0; i < 400; ++i) shuffled.push_back(rng.uniform_int(2));
    std::vector<Tensor<float>> noise;
    for (size_t i = 0; i < 400; ++i) {
        Tensor<float> t({3, 64, 64});
        for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        noise.push_back(std::move(t));
    }
    EvalReport chance = classify_generated(noise, shuffled, clf);
    const double sigma = std::sqrt(0.5 * 0.5 / 400.0);
    CHECK(chance.overall_accuracy > 0.5 - 3 * sigma);
    CHECK(chance.overall_accuracy < 0.5 + 3 * sigma);
}

TEST_CASE("band energies: harmonic tones lean low, flat spectra balance within 1 dB") {
    fs::path root = fresh_dir("xm_eval_spec");
    Manifest m = synth_dataset(root.string(), 2, 8, 5);
    MelFilterbank fb = make_mel_filterbank();
    std::vector<Spectrogram> tones;
    for (size_t i = 0; i < 8 && i < m.pairs.size(); ++i)
        tones.push_back(chunk_representation(load_chunk(m.pairs[i], m.chunk_seconds), SpecKind::LMS, fb));

    Rng rng(3);
    std::vector<Spectrogram> flat;
    for (int k = 0; k < 6; ++k) {
        Spectrogram s;
        s.bins = 128;
        s.frames = 44;
        s.kind = SpecKind::LMS;
        s.values.resize(128 * 44);
        for (auto& v : s.values) v = -25.0 + rng.uniform(-3.0, 3.0);
        flat.push_back(std::move(s));
    }

    SpectralReport r = spectral_energy_check(tones, tones);
    CHECK(r.real_ordered);  // fundamentals sit far below the mel midpoint
    CHECK(r.generated_ordered);
    CHECK(r.consistent);

    SpectralReport f = spectral_energy_check(flat, flat);
    CHECK(std::fabs(f.generated_low_db - f.generated_high_db) < 1.0);
    CHECK(std::fabs(f.real_low_db - f.real_high_db) < 1.0);

    // high-leaning generated output against low-leaning real data is flagged
    std::vector<Spectrogram> high;
    {
        Spectrogram s;
        s.bins = 128;
        s.frames = 44;
        s.kind = SpecKind::LMS;
        s.values.resize(128 * 44);
        for (int b = 0; b < 128; ++b)
            for (int f = 0; f < 44; ++f) s.at(b, f) = b < 64 ? -40.0 : -20.0;
        high.push_back(std::move(s));
    }
    SpectralReport bad = spectral_energy_check(high, tones);
    CHECK(bad.real_ordered);
    CHECK_FALSE(bad.consistent);
}

TEST_CASE("accuracy evolution emits one point per checkpoint with csv and plot") {
    fs::path root = fresh_dir("xm_eval_evo");
    Manifest m = synth_dataset(root.string(), 2, 8, 9);
    FeatureCache data(m, SpecKind::LMS);
    ImageClassifier clf = make_image_classifier(2, 9);
    train_image_classifier(clf, data, 1, 9, 8, 1e-3);

    GanConfig cfg;
    cfg.base_channels = 32;
    cfg.z_dim = 8;
    cfg.seed = 9;
    std::vector<std::string> paths;
    for (int epoch : {5, 10, 15}) {
        S2IGan gan = make_s2i_gan(cfg);
        gan.epoch = epoch;
        std::string p = (root / ("ck" + std::to_string(epoch) + ".bin")).string();
        save_s2i_gan(p, gan);
        paths.push_back(p);
    }
    Rng rng(41);
    std::vector<std::vector<float>> enc(m.pairs.size(), std::vector<float>(128));
    for (auto& e : enc)
        for (auto& v : e) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    auto curve = accuracy_evolution(paths, data, enc, clf, 17);
    REQUIRE(curve.size() == 3);
    for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].epoch > curve[i - 1].epoch);
    const size_t n_train = data.manifest().split_pairs(Split::Train).size();
    int row0 = 0;
    for (int k = 0; k < 2; ++k) row0 += curve[0].train_report.confusion[0][k] + curve[0].train_report.confusion[1][k];
    CHECK(static_cast<size_t>(row0) == n_train);

    fs::path csv = root / "curve.csv";
    write_evolution_csv(csv.string(), curve, m.categories);
    std::string text = slurp(csv);
    size_t lines = static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
    CHECK(lines == 1 + 3 * 2 * (2 + 1));  // header + per checkpoint/split/category+overall

    fs::path png = root / "curve.png";
    render_evolution_plot(png.string(), curve);
    Image plot = load_png(png.string());
    CHECK(plot.width == 640);
    CHECK(plot.height == 400);

    CHECK_THROWS_AS(accuracy_evolution({}, data, enc, clf, 1), ValueError);
}

TEST_CASE("score sheets are blinded, complete, and seed-stable") {
    fs::path root = fresh_dir("xm_eval_sheets");
    Manifest m = synth_dataset(root.string(), 2, 8, 13);
    FeatureCache data(m, SpecKind::LMS);

    GanConfig cfg;
    cfg.base_channels = 32;
    cfg.z_dim = 8;
    cfg.seed = 13;
    S2IGan gc = make_s2i_gan(cfg);
    cfg.variant = GanVariant::N;
    S2IGan gn = make_s2i_gan(cfg);
    cfg.variant = GanVariant::A;
    S2IGan ga = make_s2i_gan(cfg);

    Rng rng(99);
    std::vector<std::vector<float>> enc(m.pairs.size(), std::vector<float>(128));
    for (auto& e : enc)
        for (auto& v : e) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    fs::path out1 = root / "run1";
    SheetBundle b = human_eval_make_sheets(out1.string(), gc, enc, gn, enc, ga, enc, data, 2, 21);
    REQUIRE(b.sets.size() == 2 * 2);  // instruments x sets
    CHECK(b.blinding.size() == b.sets.size() * 4);
    for (const SheetSet& s : b.sets) {
        REQUIRE(s.items.size() == 4);
        std::set<std::string> models;
        for (const std::string& id : s.items) {
            CHECK(fs::exists(out1 / "items" / (id + ".png")));
            models.insert(b.blinding.at(id));
        }
        // every set holds exactly one item from each source
        CHECK(models == std::set<std::string>{"s2i-c", "s2i-n", "s2i-a", "real"});
        CHECK(fs::exists(out1 / "sets" / (s.set_id + ".png")));
    }
    std::string sheet_text = slurp(out1 / "sheet.json");
    CHECK(sheet_text.find("s2i-c") == std::string::npos);  // sources live only in blinding.json
    CHECK(sheet_text.find("real") == std::string::npos);

    fs::path out2 = root / "run2";
    SheetBundle b2 = human_eval_make_sheets(out2.string(), gc, enc, gn, enc, ga, enc, data, 2, 21);
    CHECK(sheet_text == slurp(out2 / "sheet.json"));
    CHECK(slurp(out1 / "blinding.json") == slurp(out2 / "blinding.json"));
    CHECK(slurp(out1 / "items" / (b.sets[0].items[0] + ".png")) == slurp(out2 / "items" / (b2.sets[0].items[0] + ".png")));

    cfg.variant = GanVariant::C;
    S2IGan other = make_s2i_gan(cfg);
    CHECK_THROWS_AS(human_eval_make_sheets((root / "bad").string(), gc, enc, other, enc, ga, enc, data, 1, 1),
                    ValueError);
}

TEST_CASE("score aggregation unblinds, rejects bad rows, and ignores order") {
    std::map<std::string, std::string> blinding{{"i0", "s2i-c"}, {"i1", "s2i-c"}, {"i2", "s2i-c"}, {"i3", "s2i-c"},
                                                {"i4", "real"},  {"i5", "real"}};
    std::vector<std::pair<std::string, std::string>> rows{{"i0", "3"}, {"i1", "2"},   {"i2", "1"},
                                                          {"i3", "0"}, {"i4", "3"},   {"i5", "3"},
                                                          {"i0", "4"}, {"i1", "1.5"}, {"zz", "2"}};
    HumanEvalResult r = human_eval_aggregate(rows, blinding);
    CHECK(r.mean_score.at("s2i-c") == doctest::Approx(1.5));
    CHECK(r.mean_score.at("real") == doctest::Approx(3.0));
    CHECK(r.histogram.at("s2i-c") == std::array<int, 4>{1, 1, 1, 1});
    CHECK(r.histogram.at("real") == std::array<int, 4>{0, 0, 0, 2});
    REQUIRE(r.rejected.size() == 3);

    std::vector<std::pair<std::string, std::string>> shuffled(rows.rbegin(), rows.rend());
    HumanEvalResult r2 = human_eval_aggregate(shuffled, blinding);
    CHECK(r2.mean_score == r.mean_score);
    CHECK(r2.histogram == r.histogram);

    fs::path root = fresh_dir("xm_eval_agg");
    {
        std::ofstream csv(root / "scores.csv");
        csv << "item_id,score\n";
        for (const auto& [id, sc] : rows) csv << id << ',' << sc << '\n';
        std::ofstream bj(root / "blinding.json");
        bj << "{\"i0\":\"s2i-c\",\"i1\":\"s2i-c\",\"i2\":\"s2i-c\",\"i3\":\"s2i-c\",\"i4\":\"real\",\"i5\":\"real\"}";
    }
    HumanEvalResult rf = human_eval_aggregate_files((root / "scores.csv").string(), (root / "blinding.json").string(),
                                                    (root / "agg.csv").string());
    CHECK(rf.mean_score == r.mean_score);
    std::string agg = slurp(root / "agg.csv");
    CHECK(agg.find("model,mean,n0,n1,n2,n3") == 0);
    CHECK(agg.find("real,3.000000,0,0,0,2") != std::string::npos);
}
