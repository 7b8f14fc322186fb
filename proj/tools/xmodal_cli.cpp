#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xmodal/encoders.hpp"
#include "xmodal/error.hpp"
#include "xmodal/eval.hpp"
#include "xmodal/features.hpp"
#include "xmodal/gan.hpp"
#include "xmodal/image_io.hpp"
#include "xmodal/manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xmodal;

namespace {

constexpr const char* kVersion = "1.0.0";

// Every run leaves a resolved-config echo next to its outputs.
void write_run_json(CLI::App* sub, const std::string& out, bool out_is_dir) {
    fs::path target;
    if (out_is_dir) {
        fs::create_directories(out);
        target = fs::path(out) / "run.json";
    } else {
        if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
        target = fs::path(out + ".run.json");
    }
    json j{{"tool", "xmodal"}, {"version", kVersion}, {"subcommand", sub->get_name()}, {"options", json::object()}};
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_name() == "--help") continue;
        j["options"][opt->get_name()] = opt->count() ? json(opt->results()) : json(opt->get_default_str());
    }
    std::ofstream(target) << j.dump(2) << '\n';
}

// Either conditioning encoder accepted where a 128-dim audio code is needed.
struct AudioEncoder {
    std::optional<AudioClassifier> clf;
    std::optional<SoundAutoencoder> ae;
};

AudioEncoder load_audio_encoder(const std::string& path) {
    std::ifstream f(path + ".json");
    if (!f) throw IoError("missing sidecar for " + path);
    json j = json::parse(f);
    AudioEncoder enc;
    const std::string kind = j.at("kind");
    if (kind == "audio-classifier")
        enc.clf = load_audio_classifier(path);
    else if (kind == "audio-autoencoder")
        enc.ae = load_sound_autoencoder(path);
    else
        throw ValueError("not an audio encoder: " + path);
    return enc;
}

std::vector<std::vector<float>> conditions_of(const AudioEncoder& enc, FeatureCache& data) {
    return enc.clf ? audio_encodings(*enc.clf, data) : audio_encodings(*enc.ae, data);
}

std::vector<std::string> list_checkpoints(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("ckpt_epoch", 0) == 0 && e.path().extension() == ".bin") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ValueError("no checkpoints under " + dir);
    return paths;
}

void write_spectrogram_csv(const std::string& path, const Spectrogram& s) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[64];
    for (int b = 0; b < s.bins; ++b) {
        for (int f = 0; f < s.frames; ++f) {
            std::snprintf(buf, sizeof(buf), "%.6f", s.at(b, f));
            out << buf << (f + 1 < s.frames ? "," : "");
        }
        out << '\n';
    }
}

json report_json(const EvalReport& r, const std::vector<std::string>& categories) {
    return json{{"overall_accuracy", r.overall_accuracy},
                {"per_category_accuracy", r.per_category_accuracy},
                {"confusion", r.confusion},
                {"categories", categories},
                {"split", r.split == Split::Train ? "train" : "test"},
                {"epoch", r.epoch},
                {"checkpoint", r.checkpoint}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-modal generation between performance images and sound spectrograms"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value file; sections name subcommands; flags take precedence");

    // ---- build-dataset ----
    auto* build = app.add_subcommand("build-dataset", "scan a frames/audio tree into a split manifest");
    struct {
        std::string frames_root, audio_root, out;
        double chunk_seconds = 0.5, gate_dbfs = -45.0, train_fraction = 0.8;
        uint64_t seed = 7;
    } bd;
    build->add_option("--frames-root", bd.frames_root, "root of <category>/<video>/frames")->required();
    build->add_option("--audio-root", bd.audio_root, "root of <category>/<video>/audio.wav")->required();
    build->add_option("--out", bd.out, "manifest path (.jsonl)")->required();
    build->add_option("--chunk-seconds", bd.chunk_seconds, "audio chunk length")->capture_default_str();
    build->add_option("--gate-dbfs", bd.gate_dbfs, "silence gate threshold")->capture_default_str();
    build->add_option("--train-fraction", bd.train_fraction, "target train share of pairs")->capture_default_str();
    build->add_option("--seed", bd.seed, "split shuffling seed")->capture_default_str();
    build->callback([&] {
        Manifest m = build_manifest(bd.frames_root, bd.audio_root, bd.chunk_seconds, bd.gate_dbfs);
        m = split_by_video(m, bd.train_fraction, bd.seed);
        compute_lms_stats(m);
        save_manifest(bd.out, m);
        write_run_json(build, bd.out, false);
        std::printf("manifest: %zu pairs, %d categories -> %s\n", m.pairs.size(), m.n_categories(), bd.out.c_str());
    });

    // ---- synth-data ----
    auto* synth = app.add_subcommand("synth-data", "write the procedural corpus and its manifest");
    struct {
        std::string out, data_root;
        int categories = 4, pairs = 200;
        uint64_t seed = 7;
    } sd;
    synth->add_option("--out", sd.out, "manifest path (.jsonl)")->required();
    synth->add_option("--data-root", sd.data_root, "corpus directory (default: <out dir>/synth_data)");
    synth->add_option("--categories", sd.categories, "number of instrument categories")->capture_default_str();
    synth->add_option("--pairs", sd.pairs, "pairs per category")->capture_default_str();
    synth->add_option("--seed", sd.seed, "generation seed")->capture_default_str();
    synth->callback([&] {
        std::string root = sd.data_root.empty() ? (fs::path(sd.out).parent_path() / "synth_data").string() : sd.data_root;
        Manifest m = synth_dataset(root, sd.categories, sd.pairs, sd.seed);
        save_manifest(sd.out, m);
        write_run_json(synth, sd.out, false);
        std::printf("synthetic corpus: %zu pairs under %s -> %s\n", m.pairs.size(), root.c_str(), sd.out.c_str());
    });

    // ---- features ----
    auto* feat = app.add_subcommand("features", "export a time-frequency representation per pair");
    struct {
        std::string manifest, out, kind = "lms";
        int limit = 0;
    } ft;
    feat->add_option("--manifest", ft.manifest, "manifest path")->required();
    feat->add_option("--out", ft.out, "output directory")->required();
    feat->add_option("--kind", ft.kind, "stft|ms|lms|mfcc|cqt")->capture_default_str();
    feat->add_option("--limit", ft.limit, "max pairs (0 = all)")->capture_default_str();
    feat->callback([&] {
        Manifest m = load_manifest(ft.manifest);
        const SpecKind kind = spec_kind_from_name(ft.kind);
        MelFilterbank fb = make_mel_filterbank();
        fs::create_directories(ft.out);
        const size_t n = ft.limit > 0 ? std::min(m.pairs.size(), static_cast<size_t>(ft.limit)) : m.pairs.size();
        char buf[64];
        for (size_t i = 0; i < n; ++i) {
            Spectrogram s = chunk_representation(load_chunk(m.pairs[i], m.chunk_seconds), kind, fb);
            std::snprintf(buf, sizeof(buf), "pair_%05zu.csv", i);
            write_spectrogram_csv((fs::path(ft.out) / buf).string(), s);
        }
        write_run_json(feat, ft.out, true);
        std::printf("wrote %zu %s files under %s\n", n, ft.kind.c_str(), ft.out.c_str());
    });

    // ---- train-encoder ----
    auto* tenc = app.add_subcommand("train-encoder", "train a classifier or autoencoder on real pairs");
    struct {
        std::string manifest, out, kind, representation = "lms";
        int epochs = 30, batch_size = 64;
        double lr = 1e-3, stop_at = 2.0;
        uint64_t seed = 7;
    } te;
    tenc->add_option("--manifest", te.manifest, "manifest path")->required();
    tenc->add_option("--out", te.out, "model path (.bin)")->required();
    tenc->add_option("--kind", te.kind, "audio-classifier|image-classifier|audio-autoencoder")->required();
    tenc->add_option("--representation", te.representation, "audio classifier input representation")->capture_default_str();
    tenc->add_option("--epochs", te.epochs, "training epochs (per stack for the autoencoder)")->capture_default_str();
    tenc->add_option("--batch-size", te.batch_size, "minibatch size")->capture_default_str();
    tenc->add_option("--lr", te.lr, "learning rate")->capture_default_str();
    tenc->add_option("--stop-at", te.stop_at, "stop early at this test accuracy")->capture_default_str();
    tenc->add_option("--seed", te.seed, "init and shuffle seed")->capture_default_str();
    tenc->callback([&] {
        Manifest m = load_manifest(te.manifest);
        if (te.kind == "audio-classifier") {
            const SpecKind kind = spec_kind_from_name(te.representation);
            FeatureCache data(m, kind);
            AudioClassifier clf = make_audio_classifier(m.n_categories(), kind, te.seed);
            ClassifierReport rep = train_audio_classifier(clf, data, te.epochs, te.seed, te.batch_size, te.lr, te.stop_at);
            save_audio_classifier(te.out, clf);
            std::printf("audio classifier: %d epochs, test accuracy %.4f\n", clf.epochs_trained, rep.test_accuracy.back());
        } else if (te.kind == "image-classifier") {
            FeatureCache data(m, SpecKind::LMS);
            ImageClassifier clf = make_image_classifier(m.n_categories(), te.seed);
            ClassifierReport rep = train_image_classifier(clf, data, te.epochs, te.seed, te.batch_size, te.lr, te.stop_at);
            save_image_classifier(te.out, clf);
            std::printf("image classifier: %d epochs, test accuracy %.4f\n", clf.epochs_trained, rep.test_accuracy.back());
        } else if (te.kind == "audio-autoencoder") {
            FeatureCache data(m, SpecKind::LMS);
            SoundAutoencoder ae = make_sound_autoencoder(te.seed);
            auto curves = train_autoencoder(ae, data, te.epochs, te.seed, te.batch_size, te.lr);
            ae.categories = m.categories;
            save_sound_autoencoder(te.out, ae);
            std::printf("autoencoder: final stack loss %.6f\n", curves.back().back());
        } else {
            throw ValueError("unknown encoder kind: " + te.kind);
        }
        write_run_json(tenc, te.out, false);
    });

    // ---- train-gan ----
    auto* tgan = app.add_subcommand("train-gan", "adversarial training of one generation direction");
    struct {
        std::string manifest, out, mode = "s2i-instrument", variant = "c", audio_encoder, image_encoder;
        int epochs = 100, batch_size = 64, z_dim = 16, base_channels = 32, checkpoint_every = 5;
        double lr = 2e-4, beta1 = 0.5;
        uint64_t seed = 7;
    } tg;
    tgan->add_option("--manifest", tg.manifest, "manifest path")->required();
    tgan->add_option("--out", tg.out, "checkpoint directory")->required();
    tgan->add_option("--mode", tg.mode, "s2i-instrument|s2i-pose|i2s")->capture_default_str();
    tgan->add_option("--variant", tg.variant, "c|n|a (adversarial regime)")->capture_default_str();
    tgan->add_option("--audio-encoder", tg.audio_encoder, "conditioning encoder for s2i modes");
    tgan->add_option("--image-encoder", tg.image_encoder, "conditioning image classifier for i2s");
    tgan->add_option("--epochs", tg.epochs, "training epochs")->capture_default_str();
    tgan->add_option("--batch-size", tg.batch_size, "minibatch size")->capture_default_str();
    tgan->add_option("--z-dim", tg.z_dim, "noise dimension")->capture_default_str();
    tgan->add_option("--base-channels", tg.base_channels, "channel width at the 4x4 stage")->capture_default_str();
    tgan->add_option("--checkpoint-every", tg.checkpoint_every, "epochs between checkpoints")->capture_default_str();
    tgan->add_option("--lr", tg.lr, "learning rate")->capture_default_str();
    tgan->add_option("--beta1", tg.beta1, "Adam first-moment decay")->capture_default_str();
    tgan->add_option("--seed", tg.seed, "init, shuffle, and noise seed")->capture_default_str();
    tgan->callback([&] {
        Manifest m = load_manifest(tg.manifest);
        GanConfig cfg;
        cfg.mode = gan_mode_from_name(tg.mode);
        cfg.variant = gan_variant_from_name(tg.variant);
        cfg.epochs = tg.epochs;
        cfg.batch_size = tg.batch_size;
        cfg.z_dim = tg.z_dim;
        cfg.base_channels = tg.base_channels;
        cfg.checkpoint_every = tg.checkpoint_every;
        cfg.learning_rate = tg.lr;
        cfg.beta1 = tg.beta1;
        cfg.seed = tg.seed;
        GanTrainResult res;
        if (cfg.mode == GanMode::I2S) {
            if (tg.image_encoder.empty()) throw ValueError("i2s training needs --image-encoder");
            ImageClassifier clf = load_image_classifier(tg.image_encoder);
            res = train_i2s_gan(m, cfg, tg.out, clf);
        } else {
            if (tg.audio_encoder.empty()) throw ValueError("s2i training needs --audio-encoder");
            AudioEncoder enc = load_audio_encoder(tg.audio_encoder);
            if (cfg.variant == GanVariant::A && !enc.ae)
                throw ValueError("variant a conditions on the autoencoder encoding");
            if (cfg.variant != GanVariant::A && !enc.clf)
                throw ValueError("variants c and n condition on the audio classifier encoding");
            res = train_s2i_gan(m, cfg, tg.out, enc.clf ? &*enc.clf : nullptr, enc.ae ? &*enc.ae : nullptr);
        }
        write_run_json(tgan, tg.out, true);
        const StepReport& last = res.epoch_reports.back();
        std::printf("trained %s-%s: %zu checkpoints, final d_loss %.4f g_loss %.4f\n", tg.mode.c_str(),
                    tg.variant.c_str(), res.checkpoint_paths.size(), last.d_loss, last.g_loss);
    });

    // ---- generate ----
    auto* gen = app.add_subcommand("generate", "sample a trained checkpoint conditioned on one split");
    struct {
        std::string checkpoint, manifest, out, split = "test", audio_encoder, image_encoder;
        int n_per_condition = 1, limit = 0;
        uint64_t seed = 7;
    } ge;
    gen->add_option("--checkpoint", ge.checkpoint, "checkpoint path (.bin)")->required();
    gen->add_option("--manifest", ge.manifest, "manifest path")->required();
    gen->add_option("--out", ge.out, "output directory")->required();
    gen->add_option("--split", ge.split, "train|test conditioning pairs")->capture_default_str();
    gen->add_option("--audio-encoder", ge.audio_encoder, "conditioning encoder for s2i checkpoints");
    gen->add_option("--image-encoder", ge.image_encoder, "conditioning classifier for i2s checkpoints");
    gen->add_option("--n-per-condition", ge.n_per_condition, "samples per conditioning pair")->capture_default_str();
    gen->add_option("--limit", ge.limit, "max conditioning pairs (0 = all)")->capture_default_str();
    gen->add_option("--seed", ge.seed, "noise seed")->capture_default_str();
    gen->callback([&] {
        Manifest m = load_manifest(ge.manifest);
        FeatureCache data(m, SpecKind::LMS);
        const Split split = ge.split == "train" ? Split::Train : Split::Test;
        std::ifstream sf(ge.checkpoint + ".json");
        if (!sf) throw IoError("missing sidecar for " + ge.checkpoint);
        const std::string kind = json::parse(sf).at("kind");
        fs::create_directories(ge.out);

        std::vector<size_t> idx;
        for (size_t i = 0; i < m.pairs.size(); ++i)
            if (m.pairs[i].split == split) idx.push_back(i);
        if (ge.limit > 0 && idx.size() > static_cast<size_t>(ge.limit)) idx.resize(static_cast<size_t>(ge.limit));
        char buf[96];

        if (kind == "s2i-gan") {
            if (ge.audio_encoder.empty()) throw ValueError("s2i generation needs --audio-encoder");
            S2IGan gan = load_s2i_gan(ge.checkpoint);
            auto enc = conditions_of(load_audio_encoder(ge.audio_encoder), data);
            std::vector<std::vector<float>> conds;
            for (size_t i : idx) conds.push_back(enc[i]);
            auto imgs = s2i_generate(gan, conds, ge.n_per_condition, ge.seed);
            for (size_t c = 0; c < conds.size(); ++c)
                for (int k = 0; k < ge.n_per_condition; ++k) {
                    std::snprintf(buf, sizeof(buf), "%s_%05zu_%02d.png", m.categories[m.pairs[idx[c]].category].c_str(),
                                  idx[c], k);
                    save_png((fs::path(ge.out) / buf).string(),
                             tensor_to_image(imgs[c * static_cast<size_t>(ge.n_per_condition) + k]));
                }
            std::printf("wrote %zu images under %s\n", imgs.size(), ge.out.c_str());
        } else if (kind == "i2s-gan") {
            if (ge.image_encoder.empty()) throw ValueError("i2s generation needs --image-encoder");
            I2SGan gan = load_i2s_gan(ge.checkpoint);
            ImageClassifier clf = load_image_classifier(ge.image_encoder);
            auto enc = image_encodings(clf, data);
            std::vector<std::vector<float>> conds;
            for (size_t i : idx) conds.push_back(enc[i]);
            auto specs = i2s_generate(gan, conds, ge.n_per_condition, ge.seed);
            for (size_t c = 0; c < conds.size(); ++c)
                for (int k = 0; k < ge.n_per_condition; ++k) {
                    std::snprintf(buf, sizeof(buf), "%s_%05zu_%02d.csv", m.categories[m.pairs[idx[c]].category].c_str(),
                                  idx[c], k);
                    const auto& t = specs[c * static_cast<size_t>(ge.n_per_condition) + k];
                    write_spectrogram_csv((fs::path(ge.out) / buf).string(),
                                          denormalize_lms(t, gan.lms_min, gan.lms_max));
                }
            std::printf("wrote %zu spectrograms under %s\n", specs.size(), ge.out.c_str());
        } else {
            throw ValueError("not a checkpoint: " + ge.checkpoint);
        }
        write_run_json(gen, ge.out, true);
    });

    // ---- evaluate ----
    auto* ev = app.add_subcommand("evaluate", "score generated samples against real data");
    struct {
        std::string check, manifest, checkpoint, checkpoints_dir, image_classifier, audio_classifier, audio_encoder,
            image_encoder, out, split = "test";
        uint64_t seed = 7;
    } ec;
    ev->add_option("--check", ec.check, "classify|evolution|spectral")->required();
    ev->add_option("--manifest", ec.manifest, "manifest path")->required();
    ev->add_option("--checkpoint", ec.checkpoint, "single checkpoint (classify, spectral)");
    ev->add_option("--checkpoints-dir", ec.checkpoints_dir, "checkpoint directory (evolution)");
    ev->add_option("--image-classifier", ec.image_classifier, "scoring classifier for s2i outputs");
    ev->add_option("--audio-classifier", ec.audio_classifier, "scoring classifier for i2s outputs (spectral)");
    ev->add_option("--audio-encoder", ec.audio_encoder, "conditioning encoder for s2i checkpoints");
    ev->add_option("--image-encoder", ec.image_encoder, "conditioning classifier for i2s checkpoints");
    ev->add_option("--out", ec.out, "report path (json for classify/spectral, csv for evolution)")->required();
    ev->add_option("--split", ec.split, "train|test conditioning pairs")->capture_default_str();
    ev->add_option("--seed", ec.seed, "noise seed")->capture_default_str();
    ev->callback([&] {
        Manifest m = load_manifest(ec.manifest);
        FeatureCache data(m, SpecKind::LMS);
        const Split split = ec.split == "train" ? Split::Train : Split::Test;
        std::vector<size_t> idx;
        for (size_t i = 0; i < m.pairs.size(); ++i)
            if (m.pairs[i].split == split) idx.push_back(i);

        if (ec.check == "classify") {
            if (ec.checkpoint.empty() || ec.image_classifier.empty() || ec.audio_encoder.empty())
                throw ValueError("classify needs --checkpoint, --image-classifier, --audio-encoder");
            S2IGan gan = load_s2i_gan(ec.checkpoint);
            ImageClassifier clf = load_image_classifier(ec.image_classifier);
            auto enc = conditions_of(load_audio_encoder(ec.audio_encoder), data);
            std::vector<std::vector<float>> conds;
            std::vector<int> expected;
            for (size_t i : idx) {
                conds.push_back(enc[i]);
                expected.push_back(m.pairs[i].category);
            }
            auto imgs = s2i_generate(gan, conds, 1, ec.seed);
            EvalReport r = classify_generated(imgs, expected, clf);
            r.split = split;
            r.epoch = gan.epoch;
            r.checkpoint = ec.checkpoint;
            std::ofstream(ec.out) << report_json(r, m.categories).dump(2) << '\n';
            std::printf("%s-conditioned accuracy at epoch %d: %.4f\n", ec.split.c_str(), r.epoch, r.overall_accuracy);
        } else if (ec.check == "evolution") {
            if (ec.checkpoints_dir.empty() || ec.image_classifier.empty() || ec.audio_encoder.empty())
                throw ValueError("evolution needs --checkpoints-dir, --image-classifier, --audio-encoder");
            ImageClassifier clf = load_image_classifier(ec.image_classifier);
            auto enc = conditions_of(load_audio_encoder(ec.audio_encoder), data);
            auto curve = accuracy_evolution(list_checkpoints(ec.checkpoints_dir), data, enc, clf, ec.seed);
            write_evolution_csv(ec.out, curve, m.categories);
            render_evolution_plot(ec.out + ".png", curve);
            std::printf("evolution over %zu checkpoints -> %s (+.png)\n", curve.size(), ec.out.c_str());
        } else if (ec.check == "spectral") {
            if (ec.checkpoint.empty() || ec.image_encoder.empty())
                throw ValueError("spectral needs --checkpoint and --image-encoder");
            I2SGan gan = load_i2s_gan(ec.checkpoint);
            ImageClassifier clf = load_image_classifier(ec.image_encoder);
            auto enc = image_encodings(clf, data);
            std::vector<std::vector<float>> conds;
            std::vector<Spectrogram> real;
            MelFilterbank fb = make_mel_filterbank();
            for (size_t i : idx) {
                conds.push_back(enc[i]);
                real.push_back(chunk_representation(load_chunk(m.pairs[i], m.chunk_seconds), SpecKind::LMS, fb));
            }
            auto outs = i2s_generate(gan, conds, 1, ec.seed);
            std::vector<Spectrogram> generated;
            for (const auto& t : outs) generated.push_back(denormalize_lms(t, gan.lms_min, gan.lms_max));
            SpectralReport r = spectral_energy_check(generated, real);
            json j{{"generated_low_db", r.generated_low_db}, {"generated_high_db", r.generated_high_db},
                   {"real_low_db", r.real_low_db},           {"real_high_db", r.real_high_db},
                   {"generated_ordered", r.generated_ordered}, {"real_ordered", r.real_ordered},
                   {"consistent", r.consistent}};
            std::ofstream(ec.out) << j.dump(2) << '\n';
            std::printf("spectral bands: generated %.2f/%.2f dB, real %.2f/%.2f dB, consistent=%s\n",
                        r.generated_low_db, r.generated_high_db, r.real_low_db, r.real_high_db,
                        r.consistent ? "yes" : "no");
        } else {
            throw ValueError("unknown check: " + ec.check);
        }
        write_run_json(ev, ec.out, false);
    });

    // ---- human-eval ----
    auto* he = app.add_subcommand("human-eval", "blind scoring sheets and their aggregation");
    he->require_subcommand(1);

    auto* mk = he->add_subcommand("make-sheets", "export blinded comparison sets");
    struct {
        std::string manifest, ckpt_c, ckpt_n, ckpt_a, audio_classifier, autoencoder, out;
        int sets = 10;
        uint64_t seed = 7;
    } ms;
    mk->add_option("--manifest", ms.manifest, "manifest path")->required();
    mk->add_option("--checkpoint-c", ms.ckpt_c, "matching-aware model checkpoint")->required();
    mk->add_option("--checkpoint-n", ms.ckpt_n, "no-mismatch-term model checkpoint")->required();
    mk->add_option("--checkpoint-a", ms.ckpt_a, "autoencoder-conditioned model checkpoint")->required();
    mk->add_option("--audio-classifier", ms.audio_classifier, "conditioning encoder for variants c and n")->required();
    mk->add_option("--autoencoder", ms.autoencoder, "conditioning encoder for variant a")->required();
    mk->add_option("--out", ms.out, "sheet directory")->required();
    mk->add_option("--sets", ms.sets, "sets per instrument")->capture_default_str();
    mk->add_option("--seed", ms.seed, "sampling seed")->capture_default_str();
    mk->callback([&] {
        Manifest m = load_manifest(ms.manifest);
        FeatureCache data(m, SpecKind::LMS);
        S2IGan gc = load_s2i_gan(ms.ckpt_c);
        S2IGan gn = load_s2i_gan(ms.ckpt_n);
        S2IGan ga = load_s2i_gan(ms.ckpt_a);
        AudioClassifier clf = load_audio_classifier(ms.audio_classifier);
        SoundAutoencoder ae = load_sound_autoencoder(ms.autoencoder);
        auto enc_clf = audio_encodings(clf, data);
        auto enc_ae = audio_encodings(ae, data);
        SheetBundle b = human_eval_make_sheets(ms.out, gc, enc_clf, gn, enc_clf, ga, enc_ae, data, ms.sets, ms.seed);
        write_run_json(mk, ms.out, true);
        std::printf("%zu sets (%zu items) under %s\n", b.sets.size(), b.blinding.size(), ms.out.c_str());
    });

    auto* ag = he->add_subcommand("aggregate", "unblind filled sheets into per-model scores");
    struct {
        std::string scores, blinding, out;
    } agc;
    ag->add_option("--scores", agc.scores, "filled CSV with item_id,score lines")->required();
    ag->add_option("--blinding", agc.blinding, "blinding.json from make-sheets")->required();
    ag->add_option("--out", agc.out, "aggregate CSV path")->required();
    ag->callback([&] {
        HumanEvalResult r = human_eval_aggregate_files(agc.scores, agc.blinding, agc.out);
        write_run_json(ag, agc.out, false);
        for (const auto& [model, mean] : r.mean_score) std::printf("%s: mean %.3f\n", model.c_str(), mean);
        if (!r.rejected.empty()) std::printf("rejected %zu rows\n", r.rejected.size());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
