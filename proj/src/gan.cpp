#include "xmodal/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "xmodal/adam.hpp"
#include "xmodal/error.hpp"
#include "xmodal/serialize.hpp"

namespace fs = std::filesystem;

namespace xmodal {

std::string gan_mode_name(GanMode m) {
    switch (m) {
        case GanMode::S2IInstrument: return "s2i-instrument";
        case GanMode::S2IPose: return "s2i-pose";
        case GanMode::I2S: return "i2s";
    }
    throw ValueError("bad mode");
}

GanMode gan_mode_from_name(const std::string& s) {
    if (s == "s2i-instrument") return GanMode::S2IInstrument;
    if (s == "s2i-pose") return GanMode::S2IPose;
    if (s == "i2s") return GanMode::I2S;
    throw ValueError("unknown gan mode: " + s);
}

std::string gan_variant_name(GanVariant v) {
    switch (v) {
        case GanVariant::C: return "c";
        case GanVariant::N: return "n";
        case GanVariant::A: return "a";
    }
    throw ValueError("bad variant");
}

GanVariant gan_variant_from_name(const std::string& s) {
    if (s == "c") return GanVariant::C;
    if (s == "n") return GanVariant::N;
    if (s == "a") return GanVariant::A;
    throw ValueError("unknown gan variant: " + s);
}

void GanConfig::validate() const {
    if (mode == GanMode::I2S && variant != GanVariant::C)
        throw ValueError("variants n/a apply to the s2i modes only");
    if (z_dim < 1 || batch_size < 2 || epochs < 1) throw ValueError("bad gan config");
    if (base_channels < 32 || base_channels % 16 != 0)
        throw ValueError("base_channels must be a multiple of 16, at least 32");
}

S2IGan make_s2i_gan(const GanConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    S2IGan gan;
    gan.cfg = cfg;
    gan.gen = make_s2i_generator<float>(cfg.z_dim, cfg.base_channels, rng);
    gan.disc = make_s2i_discriminator<float>(cfg.base_channels, rng);
    return gan;
}

I2SGan make_i2s_gan(const GanConfig& cfg, double lms_min, double lms_max) {
    cfg.validate();
    Rng rng(cfg.seed);
    I2SGan gan;
    gan.cfg = cfg;
    gan.gen = make_i2s_generator<float>(cfg.z_dim, cfg.base_channels, rng);
    gan.disc = make_i2s_discriminator<float>(cfg.base_channels, rng);
    gan.lms_min = lms_min;
    gan.lms_max = lms_max;
    return gan;
}

// ---- checkpoint io ----------------------------------------------------

namespace {

template <typename Net>
void add_net(TensorFile& tf, const std::string& prefix, Net& net) {
    tf.add(prefix + ".comp_w", net.comp_w);
    tf.add(prefix + ".comp_b", net.comp_b);
    for (size_t i = 0; i < net.w.size(); ++i) {
        tf.add(prefix + ".w" + std::to_string(i), net.w[i]);
        tf.add(prefix + ".b" + std::to_string(i), net.b[i]);
    }
    for (size_t i = 0; i < net.bn.size(); ++i) {
        tf.add(prefix + ".bn" + std::to_string(i) + ".g", net.bn[i].gamma);
        tf.add(prefix + ".bn" + std::to_string(i) + ".b", net.bn[i].beta);
        tf.add(prefix + ".bn" + std::to_string(i) + ".rm", net.bn[i].run_mean);
        tf.add(prefix + ".bn" + std::to_string(i) + ".rv", net.bn[i].run_var);
    }
}

template <typename Net>
void add_fc(TensorFile& tf, const std::string& prefix, Net& net) {
    tf.add(prefix + ".fc_w", net.fc_w);
    tf.add(prefix + ".fc_b", net.fc_b);
}

const Tensor<float>& need(const TensorFile& tf, const std::string& name) {
    const Tensor<float>* t = tf.find(name);
    if (!t) throw IoError("checkpoint missing tensor " + name);
    return *t;
}

template <typename Net>
void get_net(const TensorFile& tf, const std::string& prefix, Net& net) {
    net.comp_w = need(tf, prefix + ".comp_w");
    net.comp_b = need(tf, prefix + ".comp_b");
    for (size_t i = 0; i < net.w.size(); ++i) {
        net.w[i] = need(tf, prefix + ".w" + std::to_string(i));
        net.b[i] = need(tf, prefix + ".b" + std::to_string(i));
    }
    for (size_t i = 0; i < net.bn.size(); ++i) {
        net.bn[i].gamma = need(tf, prefix + ".bn" + std::to_string(i) + ".g");
        net.bn[i].beta = need(tf, prefix + ".bn" + std::to_string(i) + ".b");
        net.bn[i].run_mean = need(tf, prefix + ".bn" + std::to_string(i) + ".rm");
        net.bn[i].run_var = need(tf, prefix + ".bn" + std::to_string(i) + ".rv");
    }
}

nlohmann::json config_json(const GanConfig& cfg) {
    return nlohmann::json{{"mode", gan_mode_name(cfg.mode)},
                          {"variant", gan_variant_name(cfg.variant)},
                          {"z_dim", cfg.z_dim},
                          {"batch_size", cfg.batch_size},
                          {"epochs", cfg.epochs},
                          {"base_channels", cfg.base_channels},
                          {"checkpoint_every", cfg.checkpoint_every},
                          {"learning_rate", cfg.learning_rate},
                          {"beta1", cfg.beta1},
                          {"seed", cfg.seed}};
}

GanConfig config_from_json(const nlohmann::json& j) {
    GanConfig cfg;
    cfg.mode = gan_mode_from_name(j.at("mode").get<std::string>());
    cfg.variant = gan_variant_from_name(j.at("variant").get<std::string>());
    cfg.z_dim = j.at("z_dim").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    return cfg;
}

void write_sidecar(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(path + ".json", std::ios::trunc);
    if (!os) throw IoError("cannot write sidecar for " + path);
    os << j.dump(2) << "\n";
}

nlohmann::json read_sidecar(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw IoError("missing sidecar " + path + ".json");
    nlohmann::json j;
    is >> j;
    return j;
}

}  // namespace

void save_s2i_gan(const std::string& path, const S2IGan& gan) {
    TensorFile tf;
    auto& g = const_cast<S2IGan&>(gan);
    add_net(tf, "gen", g.gen);
    add_fc(tf, "gen", g.gen);
    add_net(tf, "disc", g.disc);
    save_tensors(path, tf);
    write_sidecar(path, nlohmann::json{{"kind", "s2i-gan"},
                                       {"config", config_json(gan.cfg)},
                                       {"epoch", gan.epoch},
                                       {"category", gan.category}});
}

S2IGan load_s2i_gan(const std::string& path) {
    nlohmann::json j = read_sidecar(path);
    if (j.at("kind") != "s2i-gan") throw IoError("not an s2i checkpoint: " + path);
    S2IGan gan = make_s2i_gan(config_from_json(j.at("config")));
    gan.epoch = j.at("epoch").get<int>();
    gan.category = j.value("category", "");
    TensorFile tf = load_tensors(path);
    get_net(tf, "gen", gan.gen);
    gan.gen.fc_w = need(tf, "gen.fc_w");
    gan.gen.fc_b = need(tf, "gen.fc_b");
    get_net(tf, "disc", gan.disc);
    return gan;
}

void save_i2s_gan(const std::string& path, const I2SGan& gan) {
    TensorFile tf;
    auto& g = const_cast<I2SGan&>(gan);
    add_net(tf, "gen", g.gen);
    add_fc(tf, "gen", g.gen);
    add_net(tf, "disc", g.disc);
    save_tensors(path, tf);
    write_sidecar(path, nlohmann::json{{"kind", "i2s-gan"},
                                       {"config", config_json(gan.cfg)},
                                       {"epoch", gan.epoch},
                                       {"stats", {{"lms_min", gan.lms_min}, {"lms_max", gan.lms_max}}}});
}

I2SGan load_i2s_gan(const std::string& path) {
    nlohmann::json j = read_sidecar(path);
    if (j.at("kind") != "i2s-gan") throw IoError("not an i2s checkpoint: " + path);
    I2SGan gan = make_i2s_gan(config_from_json(j.at("config")), j.at("stats").at("lms_min").get<double>(),
                              j.at("stats").at("lms_max").get<double>());
    gan.epoch = j.at("epoch").get<int>();
    TensorFile tf = load_tensors(path);
    get_net(tf, "gen", gan.gen);
    gan.gen.fc_w = need(tf, "gen.fc_w");
    gan.gen.fc_b = need(tf, "gen.fc_b");
    get_net(tf, "disc", gan.disc);
    return gan;
}

// ---- conditioning encodings -------------------------------------------

std::vector<std::vector<float>> audio_encodings(const AudioClassifier& clf, FeatureCache& data) {
    std::vector<std::vector<float>> out(data.manifest().pairs.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = encode(clf, data.audio_input(i));
    return out;
}

std::vector<std::vector<float>> audio_encodings(const SoundAutoencoder& ae, FeatureCache& data) {
    std::vector<std::vector<float>> out(data.manifest().pairs.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = encode(ae, data.lms_norm44(i));
    return out;
}

std::vector<std::vector<float>> image_encodings(const ImageClassifier& clf, FeatureCache& data) {
    std::vector<std::vector<float>> out(data.manifest().pairs.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = encode(clf, data.image(i));
    return out;
}

// ---- batch assembly ----------------------------------------------------

namespace {

Tensor<float> encoding_batch(const std::vector<std::vector<float>>& encodings, const std::vector<size_t>& idx) {
    Tensor<float> t({static_cast<int>(idx.size()), 128});
    for (size_t i = 0; i < idx.size(); ++i) {
        if (encodings[idx[i]].size() != 128) throw ShapeError("encoding length != 128");
        std::copy(encodings[idx[i]].begin(), encodings[idx[i]].end(), t.data.begin() + static_cast<long>(i) * 128);
    }
    return t;
}

Tensor<float> noise_batch(int n, int z_dim, Rng& rng) {
    Tensor<float> z({n, z_dim});
    for (auto& v : z.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return z;
}

double mean_of(const Tensor<float>& t) {
    double acc = 0.0;
    for (float v : t.data) acc += v;
    return acc / static_cast<double>(t.numel());
}

WrongPairMode wrong_mode_for(GanMode mode) {
    switch (mode) {
        case GanMode::S2IInstrument: return WrongPairMode::InstrumentOriented;
        case GanMode::S2IPose: return WrongPairMode::PoseOriented;
        case GanMode::I2S: return WrongPairMode::I2S;
    }
    throw ValueError("bad mode");
}

size_t pair_position(const Manifest& m, const SamplePair& p) {
    for (size_t i = 0; i < m.pairs.size(); ++i)
        if (&m.pairs[i] == &p) return i;
    throw ValueError("pair not in manifest");
}

}  // namespace

// ---- train steps -------------------------------------------------------

StepReport s2i_train_step(S2IGan& gan, FeatureCache& data, const std::vector<std::vector<float>>& encodings,
                          const std::vector<size_t>& batch, Adam<float>& opt_d, Adam<float>& opt_g, Rng& rng) {
    const int n = static_cast<int>(batch.size());
    if (n < 2) throw ValueError("train step needs a batch of at least 2");
    const Manifest& m = data.manifest();
    if (gan.cfg.mode == GanMode::S2IInstrument) {
        // wrong images come from other categories of the train split
        int first = -1;
        bool mixed = false;
        for (const auto& p : m.pairs) {
            if (p.split != Split::Train) continue;
            if (first < 0) first = p.category;
            mixed |= p.category != first;
        }
        if (!mixed) throw ValueError("instrument mode needs at least 2 categories in the train split");
    }

    Tensor<float> enc = encoding_batch(encodings, batch);
    std::vector<const Tensor<float>*> real_items, wrong_items;
    const WrongPairMode wmode = wrong_mode_for(gan.cfg.mode);
    std::vector<size_t> wrong_idx;
    for (size_t i : batch) {
        real_items.push_back(&data.image(i));
        const SamplePair& w = sample_wrong(m, m.pairs[i], wmode, rng);
        wrong_idx.push_back(pair_position(m, w));
    }
    for (size_t wi : wrong_idx) wrong_items.push_back(&data.image(wi));
    Tensor<float> real = stack_batch(real_items);
    Tensor<float> wrong = stack_batch(wrong_items);

    // detached generator sample for the discriminator update
    Tensor<float> fake;
    {
        Graph<float> g;
        auto out = s2i_generator_forward(g, gan.gen, g.input(enc), g.input(noise_batch(n, gan.cfg.z_dim, rng)), true);
        fake = g.val(out);
    }

    StepReport rep;
    rep.has_s_w = gan.cfg.variant != GanVariant::N;
    {
        Graph<float> g;
        auto e = g.input(enc);
        auto s_r = s2i_discriminator_forward(g, gan.disc, g.input(real), e, true);
        auto s_f = s2i_discriminator_forward(g, gan.disc, g.input(fake), e, true);
        Graph<float>::Var loss;
        if (rep.has_s_w) {
            auto s_w = s2i_discriminator_forward(g, gan.disc, g.input(wrong), e, true);
            loss = g.add(g.bce_const(s_r, 1.0f),
                         g.scale(g.add(g.bce_const(s_w, 0.0f), g.bce_const(s_f, 0.0f)), 0.5f));
            rep.s_w = mean_of(g.val(s_w));
        } else {
            loss = g.add(g.bce_const(s_r, 1.0f), g.bce_const(s_f, 0.0f));
        }
        opt_d.zero_grad();
        g.backward(loss);
        opt_d.step();
        rep.d_loss = g.val(loss).data[0];
        rep.s_r = mean_of(g.val(s_r));
        rep.s_f = mean_of(g.val(s_f));
    }
    {
        Graph<float> g;
        auto e = g.input(enc);
        auto img = s2i_generator_forward(g, gan.gen, e, g.input(noise_batch(n, gan.cfg.z_dim, rng)), true);
        auto s_f = s2i_discriminator_forward(g, gan.disc, img, e, true);
        auto loss = g.bce_const(s_f, 1.0f);
        opt_g.zero_grad();
        g.backward(loss);
        opt_g.step();
        rep.g_loss = g.val(loss).data[0];
    }
    return rep;
}

StepReport i2s_train_step(I2SGan& gan, FeatureCache& data, const std::vector<std::vector<float>>& encodings,
                          const std::vector<size_t>& batch, Adam<float>& opt_d, Adam<float>& opt_g, Rng& rng) {
    const int n = static_cast<int>(batch.size());
    if (n < 2) throw ValueError("train step needs a batch of at least 2");
    const Manifest& m = data.manifest();

    Tensor<float> enc = encoding_batch(encodings, batch);
    std::vector<const Tensor<float>*> real_items, wrong_items;
    std::vector<size_t> wrong_idx;
    for (size_t i : batch) {
        real_items.push_back(&data.lms_norm34(i));
        const SamplePair& w = sample_wrong(m, m.pairs[i], WrongPairMode::I2S, rng);
        wrong_idx.push_back(pair_position(m, w));
    }
    for (size_t wi : wrong_idx) wrong_items.push_back(&data.lms_norm34(wi));
    Tensor<float> real = stack_batch(real_items);
    Tensor<float> wrong = stack_batch(wrong_items);

    Tensor<float> fake;
    {
        Graph<float> g;
        auto out = i2s_generator_forward(g, gan.gen, g.input(enc), g.input(noise_batch(n, gan.cfg.z_dim, rng)), true);
        fake = g.val(out);
    }

    StepReport rep;
    {
        Graph<float> g;
        auto e = g.input(enc);
        auto s_r = i2s_discriminator_forward(g, gan.disc, g.input(real), e, true);
        auto s_f = i2s_discriminator_forward(g, gan.disc, g.input(fake), e, true);
        auto s_w = i2s_discriminator_forward(g, gan.disc, g.input(wrong), e, true);
        auto loss = g.add(g.bce_const(s_r, 1.0f),
                          g.scale(g.add(g.bce_const(s_w, 0.0f), g.bce_const(s_f, 0.0f)), 0.5f));
        opt_d.zero_grad();
        g.backward(loss);
        opt_d.step();
        rep.d_loss = g.val(loss).data[0];
        rep.s_r = mean_of(g.val(s_r));
        rep.s_f = mean_of(g.val(s_f));
        rep.s_w = mean_of(g.val(s_w));
    }
    {
        Graph<float> g;
        auto e = g.input(enc);
        auto spec = i2s_generator_forward(g, gan.gen, e, g.input(noise_batch(n, gan.cfg.z_dim, rng)), true);
        auto s_f = i2s_discriminator_forward(g, gan.disc, spec, e, true);
        auto loss = g.bce_const(s_f, 1.0f);
        opt_g.zero_grad();
        g.backward(loss);
        opt_g.step();
        rep.g_loss = g.val(loss).data[0];
    }
    return rep;
}

// ---- epoch loops -------------------------------------------------------

namespace {

std::string ckpt_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_epoch%03d.bin", epoch);
    return buf;
}

template <typename Gan, typename Step, typename Save>
GanTrainResult epoch_loop(const Manifest& m, Gan& gan, const std::string& out_dir, Step step, Save save) {
    const GanConfig& cfg = gan.cfg;
    fs::create_directories(out_dir);
    std::vector<size_t> train_idx;
    for (size_t i = 0; i < m.pairs.size(); ++i)
        if (m.pairs[i].split == Split::Train) train_idx.push_back(i);
    if (train_idx.size() < 2) throw ValueError("gan training needs at least 2 train pairs");

    typename Adam<float>::Config ac;
    ac.learning_rate = static_cast<float>(cfg.learning_rate);
    ac.beta1 = static_cast<float>(cfg.beta1);
    Adam<float> opt_d(ac), opt_g(ac);
    opt_d.attach(gan.disc.params());
    opt_g.attach(gan.gen.params());

    GanTrainResult result;
    Rng rng(cfg.seed + 0x5eedULL);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
        StepReport last;
        for (size_t at = 0; at + 2 <= train_idx.size(); at += static_cast<size_t>(cfg.batch_size)) {
            const size_t bn = std::min(static_cast<size_t>(cfg.batch_size), train_idx.size() - at);
            if (bn < 2) break;
            std::vector<size_t> batch(train_idx.begin() + static_cast<long>(at),
                                      train_idx.begin() + static_cast<long>(at + bn));
            last = step(batch, opt_d, opt_g, rng);
        }
        result.epoch_reports.push_back(last);
        gan.epoch = epoch;
        if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs) {
            const std::string path = (fs::path(out_dir) / ckpt_name(epoch)).string();
            save(path);
            result.checkpoint_paths.push_back(path);
        }
    }
    return result;
}

}  // namespace

GanTrainResult train_s2i_gan(const Manifest& m, const GanConfig& cfg, const std::string& out_dir,
                             const AudioClassifier* clf, const SoundAutoencoder* ae) {
    cfg.validate();
    if (cfg.mode == GanMode::I2S) throw ValueError("train_s2i_gan cannot run in i2s mode");
    if (cfg.variant == GanVariant::A) {
        if (!ae || !ae->trained) throw ValueError("variant a requires a trained sound autoencoder");
    } else {
        if (!clf || !clf->trained) throw ValueError("variants c/n require a trained audio classifier");
    }

    if (cfg.mode == GanMode::S2IPose) {
        GanTrainResult all;
        for (int c = 0; c < m.n_categories(); ++c) {
            Manifest sub = m;
            sub.pairs.clear();
            for (const auto& p : m.pairs)
                if (p.category == c) sub.pairs.push_back(p);
            GanConfig sub_cfg = cfg;
            sub_cfg.seed = cfg.seed + static_cast<uint64_t>(c) * 7919ULL;
            FeatureCache data(sub);
            std::vector<std::vector<float>> enc =
                cfg.variant == GanVariant::A ? audio_encodings(*ae, data) : audio_encodings(*clf, data);
            S2IGan gan = make_s2i_gan(sub_cfg);
            gan.category = m.categories[static_cast<size_t>(c)];
            GanTrainResult r = epoch_loop(
                sub, gan, (fs::path(out_dir) / m.categories[static_cast<size_t>(c)]).string(),
                [&](const std::vector<size_t>& batch, Adam<float>& od, Adam<float>& og, Rng& rng) {
                    return s2i_train_step(gan, data, enc, batch, od, og, rng);
                },
                [&](const std::string& path) { save_s2i_gan(path, gan); });
            all.checkpoint_paths.insert(all.checkpoint_paths.end(), r.checkpoint_paths.begin(),
                                        r.checkpoint_paths.end());
            all.epoch_reports.insert(all.epoch_reports.end(), r.epoch_reports.begin(), r.epoch_reports.end());
        }
        return all;
    }

    if (m.n_categories() < 2) throw ValueError("instrument mode needs at least 2 categories");
    FeatureCache data(m);
    std::vector<std::vector<float>> enc =
        cfg.variant == GanVariant::A ? audio_encodings(*ae, data) : audio_encodings(*clf, data);
    S2IGan gan = make_s2i_gan(cfg);
    return epoch_loop(
        m, gan, out_dir,
        [&](const std::vector<size_t>& batch, Adam<float>& od, Adam<float>& og, Rng& rng) {
            return s2i_train_step(gan, data, enc, batch, od, og, rng);
        },
        [&](const std::string& path) { save_s2i_gan(path, gan); });
}

GanTrainResult train_i2s_gan(const Manifest& m, const GanConfig& cfg, const std::string& out_dir,
                             const ImageClassifier& clf) {
    cfg.validate();
    if (cfg.mode != GanMode::I2S) throw ValueError("train_i2s_gan requires i2s mode");
    if (!clf.trained) throw ValueError("i2s training requires a trained image classifier");
    if (!m.has_stats) throw ValueError("i2s training requires manifest LMS stats");
    if (m.n_categories() < 2) throw ValueError("i2s mode needs at least 2 categories");
    FeatureCache data(m);
    std::vector<std::vector<float>> enc = image_encodings(clf, data);
    I2SGan gan = make_i2s_gan(cfg, m.lms_min, m.lms_max);
    return epoch_loop(
        m, gan, out_dir,
        [&](const std::vector<size_t>& batch, Adam<float>& od, Adam<float>& og, Rng& rng) {
            return i2s_train_step(gan, data, enc, batch, od, og, rng);
        },
        [&](const std::string& path) { save_i2s_gan(path, gan); });
}

// ---- generation --------------------------------------------------------

std::vector<Tensor<float>> s2i_generate(S2IGan& gan, const std::vector<std::vector<float>>& conditions,
                                        int n_per_condition, uint64_t seed) {
    if (n_per_condition < 1) throw ValueError("n_per_condition must be positive");
    Rng rng(seed);
    std::vector<Tensor<float>> out;
    for (const auto& c : conditions) {
        if (c.size() != 128) throw ShapeError("condition encoding must have length 128");
        Tensor<float> enc({n_per_condition, 128});
        for (int i = 0; i < n_per_condition; ++i)
            std::copy(c.begin(), c.end(), enc.data.begin() + static_cast<long>(i) * 128);
        Graph<float> g;
        auto img = s2i_generator_forward(g, gan.gen, g.input(std::move(enc)),
                                         g.input(noise_batch(n_per_condition, gan.cfg.z_dim, rng)), false);
        const Tensor<float>& v = g.val(img);
        for (int i = 0; i < n_per_condition; ++i) {
            Tensor<float> one({3, 64, 64});
            std::copy(v.data.begin() + static_cast<long>(i) * 3 * 64 * 64,
                      v.data.begin() + static_cast<long>(i + 1) * 3 * 64 * 64, one.data.begin());
            out.push_back(std::move(one));
        }
    }
    return out;
}

std::vector<Tensor<float>> i2s_generate(I2SGan& gan, const std::vector<std::vector<float>>& conditions,
                                        int n_per_condition, uint64_t seed) {
    if (n_per_condition < 1) throw ValueError("n_per_condition must be positive");
    Rng rng(seed);
    std::vector<Tensor<float>> out;
    for (const auto& c : conditions) {
        if (c.size() != 128) throw ShapeError("condition encoding must have length 128");
        Tensor<float> enc({n_per_condition, 128});
        for (int i = 0; i < n_per_condition; ++i)
            std::copy(c.begin(), c.end(), enc.data.begin() + static_cast<long>(i) * 128);
        Graph<float> g;
        auto spec = i2s_generator_forward(g, gan.gen, g.input(std::move(enc)),
                                          g.input(noise_batch(n_per_condition, gan.cfg.z_dim, rng)), false);
        const Tensor<float>& v = g.val(spec);
        const long per = 128 * 34;
        for (int i = 0; i < n_per_condition; ++i) {
            Tensor<float> one({1, 128, 34});
            std::copy(v.data.begin() + static_cast<long>(i) * per, v.data.begin() + static_cast<long>(i + 1) * per,
                      one.data.begin());
            out.push_back(std::move(one));
        }
    }
    return out;
}

ScorePair i2s_heldout_scores(I2SGan& gan, FeatureCache& data, const ImageClassifier& clf, Split split,
                             uint64_t seed) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < data.manifest().pairs.size(); ++i)
        if (data.manifest().pairs[i].split == split) idx.push_back(i);
    if (idx.empty()) throw ValueError("no pairs in requested split");

    Rng rng(seed);
    double sum_r = 0.0, sum_f = 0.0;
    size_t count = 0;
    const size_t bs = 32;
    for (size_t at = 0; at < idx.size(); at += bs) {
        const size_t n = std::min(bs, idx.size() - at);
        std::vector<std::vector<float>> conds;
        std::vector<const Tensor<float>*> real_items;
        for (size_t i = 0; i < n; ++i) {
            conds.push_back(encode(clf, data.image(idx[at + i])));
            real_items.push_back(&data.lms_norm34(idx[at + i]));
        }
        Tensor<float> enc({static_cast<int>(n), 128});
        for (size_t i = 0; i < n; ++i)
            std::copy(conds[i].begin(), conds[i].end(), enc.data.begin() + static_cast<long>(i) * 128);
        Tensor<float> fake;
        {
            Graph<float> g;
            Tensor<float> e2 = enc;
            auto spec = i2s_generator_forward(g, gan.gen, g.input(std::move(e2)),
                                              g.input(noise_batch(static_cast<int>(n), gan.cfg.z_dim, rng)), false);
            fake = g.val(spec);
        }
        Graph<float> g;
        auto e = g.input(enc);
        auto s_r = i2s_discriminator_forward(g, gan.disc, g.input(stack_batch(real_items)), e, false);
        auto s_f = i2s_discriminator_forward(g, gan.disc, g.input(fake), e, false);
        for (float v : g.val(s_r).data) sum_r += v;
        for (float v : g.val(s_f).data) sum_f += v;
        count += n;
    }
    return {sum_r / static_cast<double>(count), sum_f / static_cast<double>(count)};
}

}  // namespace xmodal
