#pragma once

#include <string>
#include <vector>

#include "xmodal/adam.hpp"
#include "xmodal/encoders.hpp"
#include "xmodal/features.hpp"
#include "xmodal/graph.hpp"
#include "xmodal/manifest.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

enum class GanMode { S2IInstrument, S2IPose, I2S };
enum class GanVariant { C, N, A };

std::string gan_mode_name(GanMode m);
GanMode gan_mode_from_name(const std::string& s);
std::string gan_variant_name(GanVariant v);
GanVariant gan_variant_from_name(const std::string& s);

struct GanConfig {
    GanMode mode = GanMode::S2IInstrument;
    GanVariant variant = GanVariant::C;
    int z_dim = 100;           // noise sampled i.i.d. uniform on [-1,1]
    int batch_size = 64;
    int epochs = 100;
    int base_channels = 512;   // channel width at the 4x4 stage; scale knob
    int checkpoint_every = 5;
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    uint64_t seed = 0;

    void validate() const;
};

namespace detail {

template <typename T>
Tensor<T> gan_init(std::vector<int> shape, Rng& rng) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, 0.02));
    return t;
}

inline Conv2dSpec sq4(int ic, int oc) {
    Conv2dSpec s;
    s.kernel_h = s.kernel_w = 4;
    s.stride_h = s.stride_w = 2;
    s.pad_h = s.pad_w = 1;
    s.in_channels = ic;
    s.out_channels = oc;
    return s;
}

// 4x4 kernel, stride 2x1, pad 1x1: the rectangular spectrogram stage
inline Conv2dSpec rect4(int ic, int oc) {
    Conv2dSpec s = sq4(ic, oc);
    s.stride_w = 1;
    return s;
}

inline Conv2dSpec same3g(int ic, int oc) {
    Conv2dSpec s;
    s.kernel_h = s.kernel_w = 3;
    s.pad_h = s.pad_w = 1;
    s.in_channels = ic;
    s.out_channels = oc;
    return s;
}

inline Conv2dSpec one1(int ic, int oc) {
    Conv2dSpec s;
    s.in_channels = ic;
    s.out_channels = oc;
    return s;
}

inline Conv2dSpec valid4(int ic, int oc) {
    Conv2dSpec s;
    s.kernel_h = s.kernel_w = 4;
    s.in_channels = ic;
    s.out_channels = oc;
    return s;
}

}  // namespace detail

// Batch-norm bundle for one layer.
template <typename T>
struct BnLayer {
    Tensor<T> gamma, beta, run_mean, run_var;

    explicit BnLayer(int c = 1)
        : gamma(Tensor<T>::ones({c})), beta(Tensor<T>::zeros({c})), run_mean(Tensor<T>::zeros({c})),
          run_var(Tensor<T>::ones({c})) {}
};

// concat(z, compressed condition) -> FC to 4x4xbase -> four 4x4/s2/p1
// transposed convs -> tanh, 3x64x64. Owns its 128->64 compression layer.
template <typename T>
struct S2IGenerator {
    int z_dim = 100, base = 512;
    Tensor<T> comp_w, comp_b;  // 64 x 128
    Tensor<T> fc_w, fc_b;      // (16*base) x (z_dim + 64)
    std::vector<Tensor<T>> w, b;  // 4 transposed convs
    std::vector<BnLayer<T>> bn;   // fc output + first 3 convT outputs

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> p{&comp_w, &comp_b, &fc_w, &fc_b};
        for (size_t i = 0; i < w.size(); ++i) {
            p.push_back(&w[i]);
            p.push_back(&b[i]);
        }
        for (auto& l : bn) {
            p.push_back(&l.gamma);
            p.push_back(&l.beta);
        }
        return p;
    }
};

// four 4x4/s2/p1 convs to 4x4xbase, condition replicated to 4x4x64 and
// concatenated, 1x1 conv, then a 4x4 valid conv + sigmoid. The final conv is
// zero-initialized so an untrained model scores exactly 0.5.
template <typename T>
struct S2IDiscriminator {
    int base = 512;
    Tensor<T> comp_w, comp_b;
    std::vector<Tensor<T>> w, b;  // conv1..4, 1x1, final
    std::vector<BnLayer<T>> bn;   // conv2..4 + 1x1

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> p{&comp_w, &comp_b};
        for (size_t i = 0; i < w.size(); ++i) {
            p.push_back(&w[i]);
            p.push_back(&b[i]);
        }
        for (auto& l : bn) {
            p.push_back(&l.gamma);
            p.push_back(&l.beta);
        }
        return p;
    }
};

// FC to 4x4xbase -> three square transposed convs to 32x32x(base/4) -> two
// rectangular transposed convs (4x4, stride 2x1, pad 1x1) to 128x34 -> two
// 3x3/s1/p1 convs -> tanh, 1x128x34.
template <typename T>
struct I2SGenerator {
    int z_dim = 100, base = 512;
    Tensor<T> comp_w, comp_b;
    Tensor<T> fc_w, fc_b;
    std::vector<Tensor<T>> w, b;  // 3 square convT + 2 rect convT + 2 convs
    std::vector<BnLayer<T>> bn;   // fc + all but the output layer

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> p{&comp_w, &comp_b, &fc_w, &fc_b};
        for (size_t i = 0; i < w.size(); ++i) {
            p.push_back(&w[i]);
            p.push_back(&b[i]);
        }
        for (auto& l : bn) {
            p.push_back(&l.gamma);
            p.push_back(&l.beta);
        }
        return p;
    }
};

// two rectangular convs (128x34 -> 64x33 -> 32x32), twelve 3x3/s1/p1 convs,
// square conv stack to 4x4, condition concatenation, 1x1 conv, 4x4 valid
// conv + sigmoid.
template <typename T>
struct I2SDiscriminator {
    int base = 512;
    Tensor<T> comp_w, comp_b;
    std::vector<Tensor<T>> w, b;  // 2 rect + 12 extra + 3 square + 1x1 + final
    std::vector<BnLayer<T>> bn;   // all hidden layers after the first

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> p{&comp_w, &comp_b};
        for (size_t i = 0; i < w.size(); ++i) {
            p.push_back(&w[i]);
            p.push_back(&b[i]);
        }
        for (auto& l : bn) {
            p.push_back(&l.gamma);
            p.push_back(&l.beta);
        }
        return p;
    }
};

// ---- factories --------------------------------------------------------

template <typename T>
S2IGenerator<T> make_s2i_generator(int z_dim, int base, Rng& rng) {
    using detail::gan_init;
    S2IGenerator<T> m;
    m.z_dim = z_dim;
    m.base = base;
    m.comp_w = gan_init<T>({64, 128}, rng);
    m.comp_b = Tensor<T>({64});
    m.fc_w = gan_init<T>({16 * base, z_dim + 64}, rng);
    m.fc_b = Tensor<T>({16 * base});
    const int ch[5] = {base, base / 2, base / 4, base / 8, 3};
    for (int i = 0; i < 4; ++i) {
        m.w.push_back(gan_init<T>({ch[i], ch[i + 1], 4, 4}, rng));
        m.b.push_back(Tensor<T>({ch[i + 1]}));
    }
    m.bn.emplace_back(base);
    for (int i = 0; i < 3; ++i) m.bn.emplace_back(ch[i + 1]);
    return m;
}

template <typename T>
S2IDiscriminator<T> make_s2i_discriminator(int base, Rng& rng) {
    using detail::gan_init;
    S2IDiscriminator<T> m;
    m.base = base;
    m.comp_w = gan_init<T>({64, 128}, rng);
    m.comp_b = Tensor<T>({64});
    const int ch[5] = {3, base / 8, base / 4, base / 2, base};
    for (int i = 0; i < 4; ++i) {
        m.w.push_back(gan_init<T>({ch[i + 1], ch[i], 4, 4}, rng));
        m.b.push_back(Tensor<T>({ch[i + 1]}));
    }
    m.w.push_back(gan_init<T>({base, base + 64, 1, 1}, rng));
    m.b.push_back(Tensor<T>({base}));
    m.w.push_back(Tensor<T>({1, base, 4, 4}));  // zero: untrained score is 0.5
    m.b.push_back(Tensor<T>({1}));
    for (int i = 1; i < 4; ++i) m.bn.emplace_back(ch[i + 1]);
    m.bn.emplace_back(base);
    return m;
}

template <typename T>
I2SGenerator<T> make_i2s_generator(int z_dim, int base, Rng& rng) {
    using detail::gan_init;
    I2SGenerator<T> m;
    m.z_dim = z_dim;
    m.base = base;
    m.comp_w = gan_init<T>({64, 128}, rng);
    m.comp_b = Tensor<T>({64});
    m.fc_w = gan_init<T>({16 * base, z_dim + 64}, rng);
    m.fc_b = Tensor<T>({16 * base});
    // square: base -> base/2 -> base/4 -> base/4 (32x32); rect: -> base/8 ->
    // base/16 (128x34); extra: -> base/16 -> 1
    const int ch[8] = {base, base / 2, base / 4, base / 4, base / 8, base / 16, base / 16, 1};
    const int kinds[7] = {0, 0, 0, 1, 1, 2, 2};  // 0 square convT, 1 rect convT, 2 conv3x3
    for (int i = 0; i < 7; ++i) {
        m.w.push_back(gan_init<T>({kinds[i] == 2 ? ch[i + 1] : ch[i], kinds[i] == 2 ? ch[i] : ch[i + 1],
                                   kinds[i] == 2 ? 3 : 4, kinds[i] == 2 ? 3 : 4},
                                  rng));
        m.b.push_back(Tensor<T>({ch[i + 1]}));
    }
    m.bn.emplace_back(base);
    for (int i = 0; i < 6; ++i) m.bn.emplace_back(ch[i + 1]);
    return m;
}

template <typename T>
I2SDiscriminator<T> make_i2s_discriminator(int base, Rng& rng) {
    using detail::gan_init;
    I2SDiscriminator<T> m;
    m.base = base;
    m.comp_w = gan_init<T>({64, 128}, rng);
    m.comp_b = Tensor<T>({64});
    const int c1 = base / 16, c2 = base / 8;
    m.w.push_back(gan_init<T>({c1, 1, 4, 4}, rng));  // rect 1
    m.b.push_back(Tensor<T>({c1}));
    m.w.push_back(gan_init<T>({c2, c1, 4, 4}, rng));  // rect 2
    m.b.push_back(Tensor<T>({c2}));
    for (int i = 0; i < 12; ++i) {  // the twelve added shape-preserving convs
        m.w.push_back(gan_init<T>({c2, c2, 3, 3}, rng));
        m.b.push_back(Tensor<T>({c2}));
    }
    const int sq[4] = {c2, base / 4, base / 2, base};
    for (int i = 0; i < 3; ++i) {
        m.w.push_back(gan_init<T>({sq[i + 1], sq[i], 4, 4}, rng));
        m.b.push_back(Tensor<T>({sq[i + 1]}));
    }
    m.w.push_back(gan_init<T>({base, base + 64, 1, 1}, rng));
    m.b.push_back(Tensor<T>({base}));
    m.w.push_back(Tensor<T>({1, base, 4, 4}));  // zero: untrained score is 0.5
    m.b.push_back(Tensor<T>({1}));
    m.bn.emplace_back(c2);                                 // rect 2
    for (int i = 0; i < 12; ++i) m.bn.emplace_back(c2);    // extras
    for (int i = 0; i < 3; ++i) m.bn.emplace_back(sq[i + 1]);
    m.bn.emplace_back(base);                               // 1x1
    return m;
}

// ---- forwards ---------------------------------------------------------

template <typename T>
typename Graph<T>::Var compress_condition(Graph<T>& g, Tensor<T>* w, Tensor<T>* b, typename Graph<T>::Var enc) {
    if (g.val(enc).shape.back() != 128) throw ShapeError("condition encoding must have length 128");
    return g.leaky_relu(g.fully_connected(enc, g.param(w), g.param(b)), static_cast<T>(kLeakySlope));
}

template <typename T>
typename Graph<T>::Var s2i_generator_forward(Graph<T>& g, S2IGenerator<T>& m, typename Graph<T>::Var enc,
                                             typename Graph<T>::Var z, bool training) {
    using detail::sq4;
    const int n = g.val(z).dim(0);
    auto cond = compress_condition(g, &m.comp_w, &m.comp_b, enc);
    auto h = g.fully_connected(g.concat(z, cond), g.param(&m.fc_w), g.param(&m.fc_b));
    h = g.reshape(h, {n, m.base, 4, 4});
    h = g.relu(g.batch_norm(h, g.param(&m.bn[0].gamma), g.param(&m.bn[0].beta), &m.bn[0].run_mean, &m.bn[0].run_var,
                            training));
    const int ch[5] = {m.base, m.base / 2, m.base / 4, m.base / 8, 3};
    for (int i = 0; i < 4; ++i) {
        // transposed direction: spec.out_channels is the input side
        h = g.conv_transpose2d(h, sq4(ch[i + 1], ch[i]), g.param(&m.w[static_cast<size_t>(i)]),
                               g.param(&m.b[static_cast<size_t>(i)]));
        if (i < 3) {
            auto& l = m.bn[static_cast<size_t>(i + 1)];
            h = g.relu(g.batch_norm(h, g.param(&l.gamma), g.param(&l.beta), &l.run_mean, &l.run_var, training));
        }
    }
    return g.tanh_(h);
}

template <typename T>
typename Graph<T>::Var s2i_discriminator_forward(Graph<T>& g, S2IDiscriminator<T>& m, typename Graph<T>::Var img,
                                                 typename Graph<T>::Var enc, bool training) {
    using detail::one1;
    using detail::sq4;
    using detail::valid4;
    const auto& s = g.val(img).shape;
    if (s.size() != 4 || s[1] != 3 || s[2] != 64 || s[3] != 64)
        throw ShapeError("s2i discriminator expects [N,3,64,64], got " + shape_str(s));
    const int n = s[0];
    auto cond = compress_condition(g, &m.comp_w, &m.comp_b, enc);
    const int ch[5] = {3, m.base / 8, m.base / 4, m.base / 2, m.base};
    auto h = img;
    for (int i = 0; i < 4; ++i) {
        h = g.conv2d(h, sq4(ch[i], ch[i + 1]), g.param(&m.w[static_cast<size_t>(i)]),
                     g.param(&m.b[static_cast<size_t>(i)]));
        if (i > 0) {
            auto& l = m.bn[static_cast<size_t>(i - 1)];
            h = g.batch_norm(h, g.param(&l.gamma), g.param(&l.beta), &l.run_mean, &l.run_var, training);
        }
        h = g.leaky_relu(h, static_cast<T>(kLeakySlope));
    }
    h = g.concat(h, g.replicate_spatial(cond, 4, 4));
    h = g.conv2d(h, one1(m.base + 64, m.base), g.param(&m.w[4]), g.param(&m.b[4]));
    auto& l = m.bn[3];
    h = g.leaky_relu(g.batch_norm(h, g.param(&l.gamma), g.param(&l.beta), &l.run_mean, &l.run_var, training),
                     static_cast<T>(kLeakySlope));
    h = g.conv2d(h, valid4(m.base, 1), g.param(&m.w[5]), g.param(&m.b[5]));
    return g.sigmoid(g.reshape(h, {n, 1}));
}

template <typename T>
typename Graph<T>::Var i2s_generator_forward(Graph<T>& g, I2SGenerator<T>& m, typename Graph<T>::Var enc,
                                             typename Graph<T>::Var z, bool training) {
    using detail::rect4;
    using detail::same3g;
    using detail::sq4;
    const int n = g.val(z).dim(0);
    auto cond = compress_condition(g, &m.comp_w, &m.comp_b, enc);
    auto h = g.fully_connected(g.concat(z, cond), g.param(&m.fc_w), g.param(&m.fc_b));
    h = g.reshape(h, {n, m.base, 4, 4});
    h = g.relu(g.batch_norm(h, g.param(&m.bn[0].gamma), g.param(&m.bn[0].beta), &m.bn[0].run_mean, &m.bn[0].run_var,
                            training));
    const int ch[8] = {m.base, m.base / 2, m.base / 4, m.base / 4, m.base / 8, m.base / 16, m.base / 16, 1};
    for (int i = 0; i < 7; ++i) {
        if (i < 3)
            h = g.conv_transpose2d(h, sq4(ch[i + 1], ch[i]), g.param(&m.w[static_cast<size_t>(i)]),
                                   g.param(&m.b[static_cast<size_t>(i)]));
        else if (i < 5)
            h = g.conv_transpose2d(h, rect4(ch[i + 1], ch[i]), g.param(&m.w[static_cast<size_t>(i)]),
                                   g.param(&m.b[static_cast<size_t>(i)]));
        else
            h = g.conv2d(h, same3g(ch[i], ch[i + 1]), g.param(&m.w[static_cast<size_t>(i)]),
                         g.param(&m.b[static_cast<size_t>(i)]));
        if (i < 6) {
            auto& l = m.bn[static_cast<size_t>(i + 1)];
            h = g.relu(g.batch_norm(h, g.param(&l.gamma), g.param(&l.beta), &l.run_mean, &l.run_var, training));
        }
    }
    return g.tanh_(h);
}

template <typename T>
typename Graph<T>::Var i2s_discriminator_forward(Graph<T>& g, I2SDiscriminator<T>& m, typename Graph<T>::Var spec,
                                                 typename Graph<T>::Var enc, bool training) {
    using detail::one1;
    using detail::rect4;
    using detail::same3g;
    using detail::sq4;
    using detail::valid4;
    const auto& s = g.val(spec).shape;
    if (s.size() != 4 || s[1] != 1 || s[2] != 128 || s[3] != 34)
        throw ShapeError("i2s discriminator expects [N,1,128,34], got " + shape_str(s));
    const int n = s[0];
    auto cond = compress_condition(g, &m.comp_w, &m.comp_b, enc);
    const int c1 = m.base / 16, c2 = m.base / 8;
    size_t li = 0, bi = 0;
    auto h = g.leaky_relu(g.conv2d(spec, rect4(1, c1), g.param(&m.w[li]), g.param(&m.b[li])),
                          static_cast<T>(kLeakySlope));
    ++li;
    auto bn_lrelu = [&](typename Graph<T>::Var x) {
        auto& l = m.bn[bi++];
        return g.leaky_relu(g.batch_norm(x, g.param(&l.gamma), g.param(&l.beta), &l.run_mean, &l.run_var, training),
                            static_cast<T>(kLeakySlope));
    };
    h = bn_lrelu(g.conv2d(h, rect4(c1, c2), g.param(&m.w[li]), g.param(&m.b[li])));
    ++li;
    for (int i = 0; i < 12; ++i, ++li) h = bn_lrelu(g.conv2d(h, same3g(c2, c2), g.param(&m.w[li]), g.param(&m.b[li])));
    const int sq[4] = {c2, m.base / 4, m.base / 2, m.base};
    for (int i = 0; i < 3; ++i, ++li)
        h = bn_lrelu(g.conv2d(h, sq4(sq[i], sq[i + 1]), g.param(&m.w[li]), g.param(&m.b[li])));
    h = g.concat(h, g.replicate_spatial(cond, 4, 4));
    h = bn_lrelu(g.conv2d(h, one1(m.base + 64, m.base), g.param(&m.w[li]), g.param(&m.b[li])));
    ++li;
    h = g.conv2d(h, valid4(m.base, 1), g.param(&m.w[li]), g.param(&m.b[li]));
    return g.sigmoid(g.reshape(h, {n, 1}));
}

// ---- training / checkpoints (float) -----------------------------------

struct StepReport {
    double d_loss = 0.0;
    double g_loss = 0.0;
    double s_r = 0.0, s_f = 0.0, s_w = 0.0;
    bool has_s_w = true;
};

struct S2IGan {
    S2IGenerator<float> gen;
    S2IDiscriminator<float> disc;
    GanConfig cfg;
    int epoch = 0;
    std::string category;  // set for pose-mode per-category models
};

struct I2SGan {
    I2SGenerator<float> gen;
    I2SDiscriminator<float> disc;
    GanConfig cfg;
    int epoch = 0;
    double lms_min = 0.0, lms_max = 0.0;
};

S2IGan make_s2i_gan(const GanConfig& cfg);
I2SGan make_i2s_gan(const GanConfig& cfg, double lms_min, double lms_max);

void save_s2i_gan(const std::string& path, const S2IGan& gan);
S2IGan load_s2i_gan(const std::string& path);
void save_i2s_gan(const std::string& path, const I2SGan& gan);
I2SGan load_i2s_gan(const std::string& path);

// Frozen per-pair 128-dim conditioning encodings.
std::vector<std::vector<float>> audio_encodings(const AudioClassifier& clf, FeatureCache& data);
std::vector<std::vector<float>> audio_encodings(const SoundAutoencoder& ae, FeatureCache& data);
std::vector<std::vector<float>> image_encodings(const ImageClassifier& clf, FeatureCache& data);

// One discriminator step then one generator step over one batch of train
// pair indices. Encodings are indexed by pair position in the manifest.
StepReport s2i_train_step(S2IGan& gan, FeatureCache& data, const std::vector<std::vector<float>>& encodings,
                          const std::vector<size_t>& batch, Adam<float>& opt_d, Adam<float>& opt_g, Rng& rng);
StepReport i2s_train_step(I2SGan& gan, FeatureCache& data, const std::vector<std::vector<float>>& encodings,
                          const std::vector<size_t>& batch, Adam<float>& opt_d, Adam<float>& opt_g, Rng& rng);

struct GanTrainResult {
    std::vector<std::string> checkpoint_paths;
    std::vector<StepReport> epoch_reports;  // last step of each epoch
};

// Epoch loop with checkpoints every cfg.checkpoint_every epochs plus final.
// Pose mode trains one model per category under out_dir/<category>/.
GanTrainResult train_s2i_gan(const Manifest& m, const GanConfig& cfg, const std::string& out_dir,
                             const AudioClassifier* clf, const SoundAutoencoder* ae);
GanTrainResult train_i2s_gan(const Manifest& m, const GanConfig& cfg, const std::string& out_dir,
                             const ImageClassifier& clf);

// Inference-mode sampling; one output per (condition, draw).
std::vector<Tensor<float>> s2i_generate(S2IGan& gan, const std::vector<std::vector<float>>& conditions,
                                        int n_per_condition, uint64_t seed);
// Normalized [1,128,34] outputs; use denormalize_lms + resize for dB space.
std::vector<Tensor<float>> i2s_generate(I2SGan& gan, const std::vector<std::vector<float>>& conditions,
                                        int n_per_condition, uint64_t seed);

// Mean discriminator scores on real vs generated pairs from one split.
struct ScorePair {
    double s_r = 0.0, s_f = 0.0;
};
ScorePair i2s_heldout_scores(I2SGan& gan, FeatureCache& data, const ImageClassifier& clf, Split split,
                             uint64_t seed);

}  // namespace xmodal
