#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xmodal/error.hpp"
#include "xmodal/eval.hpp"
#include "xmodal/features.hpp"
#include "xmodal/image_io.hpp"

namespace fs = std::filesystem;

namespace xmodal {

namespace {

EvalReport report_from_predictions(const std::vector<int>& predicted, const std::vector<int>& expected,
                                   int n_categories) {
    EvalReport r;
    r.confusion.assign(n_categories, std::vector<int>(n_categories, 0));
    for (size_t i = 0; i < predicted.size(); ++i) r.confusion[expected[i]][predicted[i]] += 1;
    r.per_category_accuracy.assign(n_categories, 0.0);
    int hits = 0;
    for (int c = 0; c < n_categories; ++c) {
        int row = 0;
        for (int k = 0; k < n_categories; ++k) row += r.confusion[c][k];
        if (row > 0) r.per_category_accuracy[c] = static_cast<double>(r.confusion[c][c]) / row;
        hits += r.confusion[c][c];
    }
    r.overall_accuracy = predicted.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(predicted.size());
    return r;
}

void check_expected(const std::vector<Tensor<float>>& samples, const std::vector<int>& expected, int n_categories) {
    if (samples.empty()) throw ValueError("classify_generated: no samples");
    if (samples.size() != expected.size()) throw ValueError("classify_generated: one expected category per sample");
    for (int e : expected)
        if (e < 0 || e >= n_categories) throw ValueError("classify_generated: category out of range");
}

template <typename Clf>
std::vector<int> predict_batched(Clf& clf, const std::vector<Tensor<float>>& inputs) {
    std::vector<int> out;
    out.reserve(inputs.size());
    const size_t step = 32;
    for (size_t start = 0; start < inputs.size(); start += step) {
        std::vector<const Tensor<float>*> items;
        for (size_t i = start; i < std::min(inputs.size(), start + step); ++i) items.push_back(&inputs[i]);
        Tensor<float> batch = stack_batch(items);
        for (int p : classifier_predict(clf, batch)) out.push_back(p);
    }
    return out;
}

}  // namespace

EvalReport classify_generated(const std::vector<Tensor<float>>& samples, const std::vector<int>& expected,
                              ImageClassifier& clf) {
    if (!clf.trained) throw ValueError("classify_generated: classifier is not trained");
    check_expected(samples, expected, clf.n_classes);
    const std::vector<int> want{3, 64, 64};
    for (const auto& s : samples)
        if (s.shape != want) throw ValueError("classify_generated: expected [3,64,64] images");
    return report_from_predictions(predict_batched(clf, samples), expected, clf.n_classes);
}

EvalReport classify_generated(const std::vector<Tensor<float>>& samples, const std::vector<int>& expected,
                              AudioClassifier& clf, double lms_min, double lms_max) {
    if (!clf.trained) throw ValueError("classify_generated: classifier is not trained");
    check_expected(samples, expected, clf.n_classes);
    std::vector<Tensor<float>> inputs;
    inputs.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.shape.size() != 3 || s.shape[0] != 1 || s.shape[1] != 128)
            throw ValueError("classify_generated: expected [1,128,frames] spectrogram tensors");
        inputs.push_back(classifier_input(denormalize_lms(s, lms_min, lms_max)));
    }
    return report_from_predictions(predict_batched(clf, inputs), expected, clf.n_classes);
}

std::vector<EvolutionPoint> accuracy_evolution(const std::vector<std::string>& checkpoint_paths, FeatureCache& data,
                                               const std::vector<std::vector<float>>& encodings, ImageClassifier& clf,
                                               uint64_t seed) {
    if (checkpoint_paths.empty()) throw ValueError("accuracy_evolution: empty checkpoint stream");
    const Manifest& m = data.manifest();
    if (encodings.size() != m.pairs.size()) throw ValueError("accuracy_evolution: one encoding per pair required");

    std::vector<EvolutionPoint> curve;
    for (const std::string& path : checkpoint_paths) {
        S2IGan gan = load_s2i_gan(path);
        EvolutionPoint pt;
        pt.epoch = gan.epoch;
        for (Split split : {Split::Train, Split::Test}) {
            std::vector<std::vector<float>> conditions;
            std::vector<int> expected;
            for (size_t i = 0; i < m.pairs.size(); ++i) {
                if (m.pairs[i].split != split) continue;
                conditions.push_back(encodings[i]);
                expected.push_back(m.pairs[i].category);
            }
            std::vector<Tensor<float>> imgs = s2i_generate(gan, conditions, 1, seed + static_cast<uint64_t>(gan.epoch));
            EvalReport r = classify_generated(imgs, expected, clf);
            r.split = split;
            r.epoch = gan.epoch;
            r.checkpoint = path;
            (split == Split::Train ? pt.train_report : pt.test_report) = r;
        }
        curve.push_back(std::move(pt));
    }
    std::sort(curve.begin(), curve.end(), [](const EvolutionPoint& a, const EvolutionPoint& b) { return a.epoch < b.epoch; });
    return curve;
}

void write_evolution_csv(const std::string& path, const std::vector<EvolutionPoint>& curve,
                         const std::vector<std::string>& categories) {
    std::ofstream out(path);
    if (!out) throw ValueError("cannot write " + path);
    out << "epoch,split,category,accuracy\n";
    char buf[64];
    auto rows = [&](const EvalReport& r, const char* split_name) {
        for (size_t c = 0; c < categories.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.6f", r.per_category_accuracy[c]);
            out << r.epoch << ',' << split_name << ',' << categories[c] << ',' << buf << '\n';
        }
        std::snprintf(buf, sizeof(buf), "%.6f", r.overall_accuracy);
        out << r.epoch << ',' << split_name << ",overall," << buf << '\n';
    };
    for (const auto& pt : curve) {
        rows(pt.train_report, "train");
        rows(pt.test_report, "test");
    }
}

SpectralReport spectral_energy_check(const std::vector<Spectrogram>& generated, const std::vector<Spectrogram>& real) {
    auto band_means = [](const std::vector<Spectrogram>& set, double& low, double& high) {
        double lo = 0.0, hi = 0.0;
        size_t n_lo = 0, n_hi = 0;
        for (const Spectrogram& s : set) {
            if (s.bins % 2 != 0) throw ValueError("spectral_energy_check: odd mel-bin count");
            const int half = s.bins / 2;
            for (int b = 0; b < s.bins; ++b)
                for (int f = 0; f < s.frames; ++f) {
                    if (b < half) {
                        lo += s.at(b, f);
                        ++n_lo;
                    } else {
                        hi += s.at(b, f);
                        ++n_hi;
                    }
                }
        }
        low = n_lo ? lo / static_cast<double>(n_lo) : 0.0;
        high = n_hi ? hi / static_cast<double>(n_hi) : 0.0;
        return n_lo > 0;
    };
    SpectralReport r;
    const bool has_gen = band_means(generated, r.generated_low_db, r.generated_high_db);
    const bool has_real = band_means(real, r.real_low_db, r.real_high_db);
    r.generated_ordered = has_gen && r.generated_low_db > r.generated_high_db;
    r.real_ordered = has_real && r.real_low_db > r.real_high_db;
    r.consistent = !r.real_ordered || r.generated_ordered;
    return r;
}

SheetBundle human_eval_make_sheets(const std::string& out_dir, S2IGan& gan_c,
                                   const std::vector<std::vector<float>>& enc_c, S2IGan& gan_n,
                                   const std::vector<std::vector<float>>& enc_n, S2IGan& gan_a,
                                   const std::vector<std::vector<float>>& enc_a, FeatureCache& data,
                                   int sets_per_instrument, uint64_t seed) {
    if (sets_per_instrument <= 0) throw ValueError("human_eval_make_sheets: sets_per_instrument must be positive");
    if (gan_c.cfg.variant != GanVariant::C || gan_n.cfg.variant != GanVariant::N || gan_a.cfg.variant != GanVariant::A)
        throw ValueError("human_eval_make_sheets: needs one model of each variant");
    const Manifest& m = data.manifest();
    const size_t n = m.pairs.size();
    if (enc_c.size() != n || enc_n.size() != n || enc_a.size() != n)
        throw ValueError("human_eval_make_sheets: one encoding per pair per variant required");

    fs::create_directories(fs::path(out_dir) / "items");
    fs::create_directories(fs::path(out_dir) / "sets");

    SheetBundle bundle;
    bundle.guideline =
        "Score each image from 0 to 3: 0 = not recognizable as the named instrument scene; "
        "1 = barely recognizable with heavy artifacts; 2 = recognizable with minor artifacts; "
        "3 = clean and convincing.";

    Rng rng(seed);
    int item_counter = 0, set_counter = 0;
    char buf[64];
    struct Candidate {
        S2IGan* gan;
        const std::vector<std::vector<float>>* enc;
        const char* label;
    };
    const Candidate variants[3] = {{&gan_c, &enc_c, "s2i-c"}, {&gan_n, &enc_n, "s2i-n"}, {&gan_a, &enc_a, "s2i-a"}};

    for (int c = 0; c < m.n_categories(); ++c) {
        std::vector<size_t> candidates;
        for (size_t i = 0; i < n; ++i)
            if (m.pairs[i].category == c && m.pairs[i].split == Split::Test) candidates.push_back(i);
        if (candidates.empty())
            throw ValueError("human_eval_make_sheets: no test pairs for " + m.categories[c]);

        for (int k = 0; k < sets_per_instrument; ++k) {
            const size_t idx = candidates[static_cast<size_t>(rng.uniform_int(static_cast<int>(candidates.size())))];
            std::vector<std::pair<std::string, Tensor<float>>> items;
            for (const Candidate& v : variants) {
                std::vector<Tensor<float>> img =
                    s2i_generate(*v.gan, {(*v.enc)[idx]}, 1, seed + static_cast<uint64_t>(item_counter + k) * 131 + c);
                items.emplace_back(v.label, std::move(img[0]));
            }
            items.emplace_back("real", data.image(idx));
            for (size_t i = items.size(); i > 1; --i)
                std::swap(items[i - 1], items[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

            SheetSet set;
            std::snprintf(buf, sizeof(buf), "set_%04d", set_counter++);
            set.set_id = buf;
            set.instrument = m.categories[c];

            Image strip;
            strip.height = 64;
            strip.width = 4 * 64 + 3 * 2;
            strip.rgb.assign(static_cast<size_t>(strip.width) * strip.height * 3, 255);
            for (size_t pos = 0; pos < items.size(); ++pos) {
                std::snprintf(buf, sizeof(buf), "item_%05d", item_counter++);
                const std::string id = buf;
                Image img = tensor_to_image(items[pos].second);
                save_png((fs::path(out_dir) / "items" / (id + ".png")).string(), img);
                bundle.blinding[id] = items[pos].first;
                set.items.push_back(id);
                const int x0 = static_cast<int>(pos) * 66;
                for (int y = 0; y < 64; ++y)
                    for (int x = 0; x < 64; ++x)
                        for (int ch = 0; ch < 3; ++ch) strip.at(y, x0 + x, ch) = img.at(y, x, ch);
            }
            save_png((fs::path(out_dir) / "sets" / (set.set_id + ".png")).string(), strip);
            bundle.sets.push_back(std::move(set));
        }
    }

    nlohmann::json sheet{{"guideline", bundle.guideline}, {"sets", nlohmann::json::array()}};
    for (const SheetSet& s : bundle.sets)
        sheet["sets"].push_back({{"set_id", s.set_id}, {"instrument", s.instrument}, {"items", s.items}});
    std::ofstream((fs::path(out_dir) / "sheet.json").string()) << sheet.dump(2) << '\n';
    std::ofstream((fs::path(out_dir) / "blinding.json").string()) << nlohmann::json(bundle.blinding).dump(2) << '\n';
    return bundle;
}

namespace {

// strict integer 0..3; anything else (fractions, signs, stray text) is invalid
bool parse_score(const std::string& text, int& score) {
    size_t a = text.find_first_not_of(" \t\r");
    if (a == std::string::npos) return false;
    size_t b = text.find_last_not_of(" \t\r");
    const std::string t = text.substr(a, b - a + 1);
    if (t.empty() || t.size() > 2) return false;
    for (char ch : t)
        if (ch < '0' || ch > '9') return false;
    score = std::stoi(t);
    return score >= 0 && score <= 3;
}

}  // namespace

HumanEvalResult human_eval_aggregate(const std::vector<std::pair<std::string, std::string>>& rows,
                                     const std::map<std::string, std::string>& blinding) {
    HumanEvalResult res;
    std::map<std::string, std::pair<double, int>> acc;  // model -> (sum, count)
    for (const auto& [item, text] : rows) {
        auto it = blinding.find(item);
        if (it == blinding.end()) {
            res.rejected.push_back(item + ": unknown item");
            continue;
        }
        int score = 0;
        if (!parse_score(text, score)) {
            res.rejected.push_back(item + ": invalid score '" + text + "'");
            continue;
        }
        auto& [sum, count] = acc[it->second];
        sum += score;
        count += 1;
        auto hist = res.histogram.emplace(it->second, std::array<int, 4>{0, 0, 0, 0}).first;
        hist->second[static_cast<size_t>(score)] += 1;
    }
    for (const auto& [model, sc] : acc) res.mean_score[model] = sc.first / sc.second;
    return res;
}

HumanEvalResult human_eval_aggregate_files(const std::string& scores_csv, const std::string& blinding_json,
                                           const std::string& out_csv) {
    std::ifstream bf(blinding_json);
    if (!bf) throw ValueError("cannot read " + blinding_json);
    nlohmann::json bj = nlohmann::json::parse(bf);
    std::map<std::string, std::string> blinding = bj.get<std::map<std::string, std::string>>();

    std::ifstream sf(scores_csv);
    if (!sf) throw ValueError("cannot read " + scores_csv);
    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    while (std::getline(sf, line)) {
        if (line.empty() || line.rfind("item_id", 0) == 0) continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos) {
            rows.emplace_back(line, "");
            continue;
        }
        rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }

    HumanEvalResult res = human_eval_aggregate(rows, blinding);
    std::ofstream out(out_csv);
    if (!out) throw ValueError("cannot write " + out_csv);
    out << "model,mean,n0,n1,n2,n3\n";
    char buf[64];
    for (const auto& [model, mean] : res.mean_score) {
        std::snprintf(buf, sizeof(buf), "%.6f", mean);
        const auto& h = res.histogram.at(model);
        out << model << ',' << buf << ',' << h[0] << ',' << h[1] << ',' << h[2] << ',' << h[3] << '\n';
    }
    return res;
}

}  // namespace xmodal
