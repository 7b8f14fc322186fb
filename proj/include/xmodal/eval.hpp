#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xmodal/encoders.hpp"
#include "xmodal/gan.hpp"

namespace xmodal {

// Classifier-based quality report for one batch of generated samples.
struct EvalReport {
    std::vector<std::vector<int>> confusion;  // [conditioning category][predicted]
    std::vector<double> per_category_accuracy;
    double overall_accuracy = 0.0;
    Split split = Split::Test;
    int epoch = 0;
    std::string checkpoint;
};

// Images [3,64,64] scored by a trained image classifier; expected[i] is the
// conditioning category of samples[i].
EvalReport classify_generated(const std::vector<Tensor<float>>& samples, const std::vector<int>& expected,
                              ImageClassifier& clf);
// Normalized spectrogram outputs [1,128,34] are mapped back to dB, resized to
// 128x44, standardized, then scored by a trained audio classifier.
EvalReport classify_generated(const std::vector<Tensor<float>>& samples, const std::vector<int>& expected,
                              AudioClassifier& clf, double lms_min, double lms_max);

// Accuracy at one checkpoint for generation conditioned on each split.
struct EvolutionPoint {
    int epoch = 0;
    EvalReport train_report;
    EvalReport test_report;
};

// Loads every checkpoint, generates one image per condition (encodings are
// indexed by pair position) and classifies against the conditioning category.
std::vector<EvolutionPoint> accuracy_evolution(const std::vector<std::string>& checkpoint_paths, FeatureCache& data,
                                               const std::vector<std::vector<float>>& encodings, ImageClassifier& clf,
                                               uint64_t seed);
// Columns: epoch,split,category,accuracy — one row per category plus an
// "overall" row, per split, per checkpoint.
void write_evolution_csv(const std::string& path, const std::vector<EvolutionPoint>& curve,
                         const std::vector<std::string>& categories);
// Overall train/test accuracy vs epoch as a rendered PNG.
void render_evolution_plot(const std::string& path, const std::vector<EvolutionPoint>& curve);

// Generic polyline plot on a white canvas; xs shared across series.
void render_line_plot(const std::string& path, const std::vector<double>& xs,
                      const std::vector<std::vector<double>>& series, double y_min, double y_max, int width = 640,
                      int height = 400);

// Mean dB over the lower and upper halves of the mel axis for generated and
// real spectrogram sets. consistent: whenever the real set has more low-band
// than high-band energy, the generated set must as well.
struct SpectralReport {
    double generated_low_db = 0.0, generated_high_db = 0.0;
    double real_low_db = 0.0, real_high_db = 0.0;
    bool generated_ordered = false;
    bool real_ordered = false;
    bool consistent = false;
};
SpectralReport spectral_energy_check(const std::vector<Spectrogram>& generated, const std::vector<Spectrogram>& real);

// One blind-scoring set: four item ids (three model outputs plus the real
// image) in randomized order for one instrument.
struct SheetSet {
    std::string set_id;
    std::string instrument;
    std::vector<std::string> items;
};
struct SheetBundle {
    std::vector<SheetSet> sets;
    std::map<std::string, std::string> blinding;  // item id -> source model
    std::string guideline;
};

// Writes sheet.json, blinding.json, items/<id>.png (64x64) and a per-set
// strip sets/<set_id>.png under out_dir. The sheet file never names the
// source models; the blinding map is kept in its own file.
SheetBundle human_eval_make_sheets(const std::string& out_dir, S2IGan& gan_c,
                                   const std::vector<std::vector<float>>& enc_c, S2IGan& gan_n,
                                   const std::vector<std::vector<float>>& enc_n, S2IGan& gan_a,
                                   const std::vector<std::vector<float>>& enc_a, FeatureCache& data,
                                   int sets_per_instrument, uint64_t seed);

// Unblinded aggregate over filled sheets. Rows are (item id, score text);
// anything but an integer 0..3 on a known item is rejected with a reason.
struct HumanEvalResult {
    std::map<std::string, double> mean_score;
    std::map<std::string, std::array<int, 4>> histogram;  // counts of scores 0..3
    std::vector<std::string> rejected;
};
HumanEvalResult human_eval_aggregate(const std::vector<std::pair<std::string, std::string>>& rows,
                                     const std::map<std::string, std::string>& blinding);
// File form: scores CSV with "item_id,score" lines, blinding.json from
// make_sheets; writes "model,mean,n0,n1,n2,n3" rows to out_csv.
HumanEvalResult human_eval_aggregate_files(const std::string& scores_csv, const std::string& blinding_json,
                                           const std::string& out_csv);

}  // namespace xmodal
