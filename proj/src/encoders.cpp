#include "xmodal/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "xmodal/adam.hpp"
#include "xmodal/error.hpp"
#include "xmodal/serialize.hpp"

namespace xmodal {

namespace {

Tensor<float> init_conv(int oc, int ic, int kh, int kw, Rng& rng) {
    Tensor<float> t({oc, ic, kh, kw});
    const double std = std::sqrt(2.0 / (ic * kh * kw));
    for (auto& v : t.data) v = static_cast<float>(rng.normal(0.0, std));
    return t;
}

Tensor<float> init_fc(int m, int f, Rng& rng) {
    Tensor<float> t({m, f});
    const double std = std::sqrt(2.0 / f);
    for (auto& v : t.data) v = static_cast<float>(rng.normal(0.0, std));
    return t;
}

Conv2dSpec same3(int ic, int oc) {
    Conv2dSpec s;
    s.kernel_h = s.kernel_w = 3;
    s.pad_h = s.pad_w = 1;
    s.in_channels = ic;
    s.out_channels = oc;
    return s;
}

Conv2dSpec valid_k(int k) {
    Conv2dSpec s;
    s.kernel_h = s.kernel_w = k;
    s.in_channels = s.out_channels = 1;
    return s;
}

std::vector<int> argmax_rows(const Tensor<float>& logits) {
    const int n = logits.dim(0), c = logits.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const float* r = logits.data.data() + static_cast<size_t>(i) * c;
        out[static_cast<size_t>(i)] = static_cast<int>(std::max_element(r, r + c) - r);
    }
    return out;
}

}  // namespace

Tensor<float> stack_batch(const std::vector<const Tensor<float>*>& items) {
    if (items.empty()) throw ValueError("stack_batch: empty batch");
    std::vector<int> shape = items[0]->shape;
    shape.insert(shape.begin(), static_cast<int>(items.size()));
    Tensor<float> out(shape);
    const size_t per = items[0]->numel();
    for (size_t i = 0; i < items.size(); ++i) {
        if (items[i]->shape != items[0]->shape) throw ShapeError("stack_batch: mixed shapes");
        std::copy(items[i]->data.begin(), items[i]->data.end(), out.data.begin() + static_cast<long>(i * per));
    }
    return out;
}

// ---- audio classifier -------------------------------------------------

AudioClassifier make_audio_classifier(int n_classes, SpecKind kind, uint64_t seed) {
    if (n_classes < 2) throw ValueError("classifier needs at least 2 classes");
    Rng rng(seed);
    AudioClassifier m;
    m.n_classes = n_classes;
    m.representation = kind;
    m.seed = seed;
    const int ch[5] = {1, 32, 32, 64, 64};
    for (int i = 0; i < 4; ++i) {
        m.conv_w.push_back(init_conv(ch[i + 1], ch[i], 3, 3, rng));
        m.conv_b.push_back(Tensor<float>({ch[i + 1]}));
    }
    m.fc1_w = init_fc(512, 1024, rng);
    m.fc1_b = Tensor<float>({512});
    m.fc2_w = init_fc(128, 512, rng);
    m.fc2_b = Tensor<float>({128});
    m.fc3_w = init_fc(n_classes, 128, rng);
    m.fc3_b = Tensor<float>({n_classes});
    return m;
}

std::vector<Tensor<float>*> AudioClassifier::params() {
    std::vector<Tensor<float>*> p;
    for (size_t i = 0; i < conv_w.size(); ++i) {
        p.push_back(&conv_w[i]);
        p.push_back(&conv_b[i]);
    }
    p.insert(p.end(), {&fc1_w, &fc1_b, &fc2_w, &fc2_b, &fc3_w, &fc3_b});
    return p;
}

std::vector<Tensor<float>*> AudioClassifier::fc_weights() { return {&fc1_w, &fc2_w, &fc3_w}; }

ClassifierNodes audio_classifier_forward(Graph<float>& g, AudioClassifier& m, Graph<float>::Var x, bool training,
                                         Rng* rng) {
    Rng dummy(0);
    Rng& r = rng ? *rng : dummy;
    const int ch[5] = {1, 32, 32, 64, 64};
    Graph<float>::Var h = x;
    for (int i = 0; i < 4; ++i) {
        h = g.conv2d(h, same3(ch[i], ch[i + 1]), g.param(&m.conv_w[static_cast<size_t>(i)]),
                     g.param(&m.conv_b[static_cast<size_t>(i)]));
        h = g.leaky_relu(h, kLeakySlope);
        h = g.max_pool2(h);
    }
    const int n = g.val(x).dim(0);
    h = g.reshape(h, {n, 1024});
    h = g.leaky_relu(g.fully_connected(h, g.param(&m.fc1_w), g.param(&m.fc1_b)), kLeakySlope);
    h = g.dropout(h, 0.7, r, training);
    Graph<float>::Var pen =
        g.leaky_relu(g.fully_connected(h, g.param(&m.fc2_w), g.param(&m.fc2_b)), kLeakySlope);
    h = g.dropout(pen, 0.8, r, training);
    Graph<float>::Var logits = g.fully_connected(h, g.param(&m.fc3_w), g.param(&m.fc3_b));
    return {logits, pen};
}

// ---- image classifier -------------------------------------------------

ImageClassifier make_image_classifier(int n_classes, uint64_t seed) {
    if (n_classes < 2) throw ValueError("classifier needs at least 2 classes");
    Rng rng(seed);
    ImageClassifier m;
    m.n_classes = n_classes;
    m.seed = seed;
    const int ch[7] = {3, 32, 32, 64, 64, 128, 128};
    for (int i = 0; i < 6; ++i) {
        m.conv_w.push_back(init_conv(ch[i + 1], ch[i], 3, 3, rng));
        m.conv_b.push_back(Tensor<float>({ch[i + 1]}));
    }
    m.fc1_w = init_fc(512, 8192, rng);
    m.fc1_b = Tensor<float>({512});
    m.fc2_w = init_fc(128, 512, rng);
    m.fc2_b = Tensor<float>({128});
    m.fc3_w = init_fc(n_classes, 128, rng);
    m.fc3_b = Tensor<float>({n_classes});
    return m;
}

std::vector<Tensor<float>*> ImageClassifier::params() {
    std::vector<Tensor<float>*> p;
    for (size_t i = 0; i < conv_w.size(); ++i) {
        p.push_back(&conv_w[i]);
        p.push_back(&conv_b[i]);
    }
    p.insert(p.end(), {&fc1_w, &fc1_b, &fc2_w, &fc2_b, &fc3_w, &fc3_b});
    return p;
}

std::vector<Tensor<float>*> ImageClassifier::fc_weights() { return {&fc1_w, &fc2_w, &fc3_w}; }

ClassifierNodes image_classifier_forward(Graph<float>& g, ImageClassifier& m, Graph<float>::Var x, bool training,
                                         Rng* rng) {
    Rng dummy(0);
    Rng& r = rng ? *rng : dummy;
    const int ch[7] = {3, 32, 32, 64, 64, 128, 128};
    Graph<float>::Var h = x;
    for (int i = 0; i < 6; ++i) {
        h = g.conv2d(h, same3(ch[i], ch[i + 1]), g.param(&m.conv_w[static_cast<size_t>(i)]),
                     g.param(&m.conv_b[static_cast<size_t>(i)]));
        h = g.leaky_relu(h, kLeakySlope);
        if (i % 2 == 1) h = g.max_pool2(h);
    }
    const int n = g.val(x).dim(0);
    h = g.reshape(h, {n, 8192});
    h = g.leaky_relu(g.fully_connected(h, g.param(&m.fc1_w), g.param(&m.fc1_b)), kLeakySlope);
    h = g.dropout(h, 0.7, r, training);
    Graph<float>::Var pen =
        g.leaky_relu(g.fully_connected(h, g.param(&m.fc2_w), g.param(&m.fc2_b)), kLeakySlope);
    h = g.dropout(pen, 0.8, r, training);
    Graph<float>::Var logits = g.fully_connected(h, g.param(&m.fc3_w), g.param(&m.fc3_b));
    return {logits, pen};
}

// ---- shared training loop --------------------------------------------

namespace {

template <typename Model, typename Forward, typename Feature>
ClassifierReport train_classifier(Model& m, FeatureCache& data, int epochs, uint64_t seed, int batch_size,
                                  double learning_rate, double stop_at_test_accuracy, Forward forward,
                                  Feature feature) {
    if (data.manifest().n_categories() != m.n_classes)
        throw ValueError("classifier has " + std::to_string(m.n_classes) + " classes but manifest has " +
                         std::to_string(data.manifest().n_categories()) + " categories");
    m.categories = data.manifest().categories;

    std::vector<size_t> train_idx, test_idx;
    for (size_t i = 0; i < data.manifest().pairs.size(); ++i)
        (data.manifest().pairs[i].split == Split::Train ? train_idx : test_idx).push_back(i);
    if (train_idx.empty()) throw ValueError("no training pairs in manifest");

    typename Adam<float>::Config cfg;
    cfg.learning_rate = static_cast<float>(learning_rate);
    cfg.beta1 = 0.9f;  // plain classifier training, not the adversarial setting
    Adam<float> opt(cfg);
    opt.attach(m.params());

    auto eval_split = [&](const std::vector<size_t>& idx) {
        size_t hits = 0;
        for (size_t at = 0; at < idx.size(); at += static_cast<size_t>(batch_size)) {
            const size_t n = std::min(static_cast<size_t>(batch_size), idx.size() - at);
            std::vector<const Tensor<float>*> items;
            std::vector<int> labels;
            for (size_t i = 0; i < n; ++i) {
                items.push_back(&feature(idx[at + i]));
                labels.push_back(data.manifest().pairs[idx[at + i]].category);
            }
            Graph<float> g;
            auto nodes = forward(g, m, g.input(stack_batch(items)), false, nullptr);
            std::vector<int> pred = argmax_rows(g.val(nodes.logits));
            for (size_t i = 0; i < n; ++i)
                if (pred[i] == labels[i]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(idx.size());
    };

    ClassifierReport rep;
    Rng rng(seed);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
        double loss_sum = 0.0;
        size_t hits = 0, steps = 0;
        for (size_t at = 0; at < train_idx.size(); at += static_cast<size_t>(batch_size)) {
            const size_t n = std::min(static_cast<size_t>(batch_size), train_idx.size() - at);
            std::vector<const Tensor<float>*> items;
            std::vector<int> labels;
            for (size_t i = 0; i < n; ++i) {
                items.push_back(&feature(train_idx[at + i]));
                labels.push_back(data.manifest().pairs[train_idx[at + i]].category);
            }
            Graph<float> g;
            auto nodes = forward(g, m, g.input(stack_batch(items)), true, &rng);
            Graph<float>::Var loss = g.softmax_cross_entropy(nodes.logits, labels);
            Graph<float>::Var reg = -1;
            for (Tensor<float>* w : m.fc_weights()) {
                Graph<float>::Var t = g.l2sum(g.param(w));
                reg = reg < 0 ? t : g.add(reg, t);
            }
            loss = g.add(loss, g.scale(reg, 0.015f));
            opt.zero_grad();
            g.backward(loss);
            opt.step();
            loss_sum += g.val(loss).data[0];
            ++steps;
            std::vector<int> pred = argmax_rows(g.val(nodes.logits));
            for (size_t i = 0; i < n; ++i)
                if (pred[i] == labels[i]) ++hits;
        }
        rep.train_loss.push_back(loss_sum / static_cast<double>(steps));
        rep.train_accuracy.push_back(static_cast<double>(hits) / static_cast<double>(train_idx.size()));
        rep.test_accuracy.push_back(test_idx.empty() ? 0.0 : eval_split(test_idx));
        ++m.epochs_trained;
        if (rep.test_accuracy.back() >= stop_at_test_accuracy) break;
    }
    m.trained = true;
    return rep;
}

}  // namespace

ClassifierReport train_audio_classifier(AudioClassifier& m, FeatureCache& data, int epochs, uint64_t seed,
                                        int batch_size, double learning_rate, double stop_at_test_accuracy) {
    return train_classifier(
        m, data, epochs, seed, batch_size, learning_rate, stop_at_test_accuracy,
        [](Graph<float>& g, AudioClassifier& mm, Graph<float>::Var x, bool t, Rng* r) {
            return audio_classifier_forward(g, mm, x, t, r);
        },
        [&data](size_t i) -> const Tensor<float>& { return data.audio_input(i); });
}

ClassifierReport train_image_classifier(ImageClassifier& m, FeatureCache& data, int epochs, uint64_t seed,
                                        int batch_size, double learning_rate, double stop_at_test_accuracy) {
    return train_classifier(
        m, data, epochs, seed, batch_size, learning_rate, stop_at_test_accuracy,
        [](Graph<float>& g, ImageClassifier& mm, Graph<float>::Var x, bool t, Rng* r) {
            return image_classifier_forward(g, mm, x, t, r);
        },
        [&data](size_t i) -> const Tensor<float>& { return data.image(i); });
}

double classifier_accuracy(AudioClassifier& m, FeatureCache& data, Split split) {
    size_t hits = 0, total = 0;
    for (size_t i = 0; i < data.manifest().pairs.size(); ++i) {
        if (data.manifest().pairs[i].split != split) continue;
        Graph<float> g;
        Tensor<float> one = data.audio_input(i);
        one.shape.insert(one.shape.begin(), 1);
        auto nodes = audio_classifier_forward(g, m, g.input(std::move(one)), false, nullptr);
        if (argmax_rows(g.val(nodes.logits))[0] == data.manifest().pairs[i].category) ++hits;
        ++total;
    }
    if (total == 0) throw ValueError("no pairs in requested split");
    return static_cast<double>(hits) / static_cast<double>(total);
}

double classifier_accuracy(ImageClassifier& m, FeatureCache& data, Split split) {
    size_t hits = 0, total = 0;
    for (size_t i = 0; i < data.manifest().pairs.size(); ++i) {
        if (data.manifest().pairs[i].split != split) continue;
        Graph<float> g;
        Tensor<float> one = data.image(i);
        one.shape.insert(one.shape.begin(), 1);
        auto nodes = image_classifier_forward(g, m, g.input(std::move(one)), false, nullptr);
        if (argmax_rows(g.val(nodes.logits))[0] == data.manifest().pairs[i].category) ++hits;
        ++total;
    }
    if (total == 0) throw ValueError("no pairs in requested split");
    return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<int> classifier_predict(AudioClassifier& m, const Tensor<float>& batch) {
    Graph<float> g;
    auto nodes = audio_classifier_forward(g, m, g.input(batch), false, nullptr);
    return argmax_rows(g.val(nodes.logits));
}

std::vector<int> classifier_predict(ImageClassifier& m, const Tensor<float>& batch) {
    Graph<float> g;
    auto nodes = image_classifier_forward(g, m, g.input(batch), false, nullptr);
    return argmax_rows(g.val(nodes.logits));
}

std::vector<float> encode(const AudioClassifier& m, const Tensor<float>& input) {
    if (!m.trained) throw ValueError("encode: classifier is untrained");
    Tensor<float> x = input;
    if (x.rank() == 3) x.shape.insert(x.shape.begin(), 1);
    Graph<float> g;
    auto nodes = audio_classifier_forward(g, const_cast<AudioClassifier&>(m), g.input(std::move(x)), false, nullptr);
    const auto& pen = g.val(nodes.penultimate);
    return std::vector<float>(pen.data.begin(), pen.data.begin() + 128);
}

std::vector<float> encode(const ImageClassifier& m, const Tensor<float>& input) {
    if (!m.trained) throw ValueError("encode: classifier is untrained");
    Tensor<float> x = input;
    if (x.rank() == 3) x.shape.insert(x.shape.begin(), 1);
    Graph<float> g;
    auto nodes = image_classifier_forward(g, const_cast<ImageClassifier&>(m), g.input(std::move(x)), false, nullptr);
    const auto& pen = g.val(nodes.penultimate);
    return std::vector<float>(pen.data.begin(), pen.data.begin() + 128);
}

// ---- sound autoencoder ------------------------------------------------

SoundAutoencoder make_sound_autoencoder(uint64_t seed) {
    Rng rng(seed);
    SoundAutoencoder m;
    m.seed = seed;
    const int k[3] = {3, 3, 5};
    for (int s = 0; s < 3; ++s) {
        m.enc_w.push_back(init_conv(1, 1, k[s], k[s], rng));
        m.enc_b.push_back(Tensor<float>({1}));
        m.dec_w.push_back(init_conv(1, 1, k[s], k[s], rng));
        m.dec_b.push_back(Tensor<float>({1}));
    }
    m.proj_w = init_fc(128, 4320, rng);
    m.proj_b = Tensor<float>({128});
    m.unproj_w = init_fc(4320, 128, rng);
    m.unproj_b = Tensor<float>({4320});
    return m;
}

std::vector<Tensor<float>*> SoundAutoencoder::stack_params(int stack) {
    if (stack < 3)
        return {&enc_w[static_cast<size_t>(stack)], &enc_b[static_cast<size_t>(stack)],
                &dec_w[static_cast<size_t>(stack)], &dec_b[static_cast<size_t>(stack)]};
    return {&proj_w, &proj_b, &unproj_w, &unproj_b};
}

namespace {

// Frozen encoder prefix applied outside any training graph.
Tensor<float> ae_prefix(const SoundAutoencoder& m, const Tensor<float>& x, int n_stacks) {
    const int k[3] = {3, 3, 5};
    Graph<float> g;
    Graph<float>::Var h = g.input(x);
    SoundAutoencoder& mm = const_cast<SoundAutoencoder&>(m);
    for (int s = 0; s < n_stacks; ++s) {
        Tensor<float> w = mm.enc_w[static_cast<size_t>(s)];
        Tensor<float> b = mm.enc_b[static_cast<size_t>(s)];
        h = g.leaky_relu(g.conv2d(h, valid_k(k[s]), g.input(std::move(w)), g.input(std::move(b))), kLeakySlope);
    }
    return g.val(h);
}

}  // namespace

std::vector<std::vector<double>> train_autoencoder(SoundAutoencoder& m, FeatureCache& data, int epochs_per_stack,
                                                   uint64_t seed, int batch_size, double learning_rate) {
    std::vector<size_t> train_idx;
    for (size_t i = 0; i < data.manifest().pairs.size(); ++i)
        if (data.manifest().pairs[i].split == Split::Train) train_idx.push_back(i);
    if (train_idx.empty()) throw ValueError("no training pairs in manifest");

    const int k[3] = {3, 3, 5};
    std::vector<std::vector<double>> curves(4);
    Rng rng(seed);
    for (int stack = 0; stack < 4; ++stack) {
        typename Adam<float>::Config cfg;
        cfg.learning_rate = static_cast<float>(learning_rate);
        cfg.beta1 = 0.9f;
        Adam<float> opt(cfg);
        opt.attach(m.stack_params(stack));
        for (int epoch = 0; epoch < epochs_per_stack; ++epoch) {
            for (size_t i = train_idx.size(); i > 1; --i)
                std::swap(train_idx[i - 1], train_idx[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
            double loss_sum = 0.0;
            size_t steps = 0;
            for (size_t at = 0; at < train_idx.size(); at += static_cast<size_t>(batch_size)) {
                const size_t n = std::min(static_cast<size_t>(batch_size), train_idx.size() - at);
                std::vector<Tensor<float>> inputs;
                inputs.reserve(n);
                std::vector<const Tensor<float>*> ptrs;
                for (size_t i = 0; i < n; ++i) {
                    inputs.push_back(ae_prefix(m, data.lms_norm44(train_idx[at + i]), stack < 3 ? stack : 3));
                    ptrs.push_back(&inputs.back());
                }
                Tensor<float> batch = stack_batch(ptrs);
                Graph<float> g;
                Graph<float>::Var x = g.input(batch);
                Graph<float>::Var loss;
                if (stack < 3) {
                    Graph<float>::Var h = g.leaky_relu(
                        g.conv2d(x, valid_k(k[stack]), g.param(&m.enc_w[static_cast<size_t>(stack)]),
                                 g.param(&m.enc_b[static_cast<size_t>(stack)])),
                        kLeakySlope);
                    Graph<float>::Var y =
                        g.conv_transpose2d(h, valid_k(k[stack]), g.param(&m.dec_w[static_cast<size_t>(stack)]),
                                           g.param(&m.dec_b[static_cast<size_t>(stack)]));
                    loss = g.mse(y, x);
                } else {
                    Graph<float>::Var flat = g.reshape(x, {static_cast<int>(n), 4320});
                    Graph<float>::Var code = g.fully_connected(flat, g.param(&m.proj_w), g.param(&m.proj_b));
                    Graph<float>::Var y = g.fully_connected(code, g.param(&m.unproj_w), g.param(&m.unproj_b));
                    loss = g.mse(y, flat);
                }
                opt.zero_grad();
                g.backward(loss);
                opt.step();
                loss_sum += g.val(loss).data[0];
                ++steps;
            }
            curves[static_cast<size_t>(stack)].push_back(loss_sum / static_cast<double>(steps));
        }
    }
    m.categories = data.manifest().categories;
    m.epochs_trained = epochs_per_stack;
    m.trained = true;
    return curves;
}

std::vector<float> encode(const SoundAutoencoder& m, const Tensor<float>& lms_norm) {
    if (!m.trained) throw ValueError("encode: autoencoder is untrained");
    Tensor<float> x = lms_norm;
    if (x.rank() == 3) x.shape.insert(x.shape.begin(), 1);
    Tensor<float> h = ae_prefix(m, x, 3);
    Graph<float> g;
    SoundAutoencoder& mm = const_cast<SoundAutoencoder&>(m);
    Tensor<float> w = mm.proj_w, b = mm.proj_b;
    Graph<float>::Var flat = g.reshape(g.input(std::move(h)), {1, 4320});
    Graph<float>::Var code = g.fully_connected(flat, g.input(std::move(w)), g.input(std::move(b)));
    const auto& v = g.val(code);
    return std::vector<float>(v.data.begin(), v.data.end());
}

// ---- serialization ----------------------------------------------------

namespace {

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

template <typename Model>
void add_classifier_tensors(TensorFile& tf, Model& m) {
    for (size_t i = 0; i < m.conv_w.size(); ++i) {
        tf.add("conv" + std::to_string(i) + "_w", m.conv_w[i]);
        tf.add("conv" + std::to_string(i) + "_b", m.conv_b[i]);
    }
    tf.add("fc1_w", m.fc1_w);
    tf.add("fc1_b", m.fc1_b);
    tf.add("fc2_w", m.fc2_w);
    tf.add("fc2_b", m.fc2_b);
    tf.add("fc3_w", m.fc3_w);
    tf.add("fc3_b", m.fc3_b);
}

template <typename Model>
void get_classifier_tensors(const TensorFile& tf, Model& m, size_t n_conv) {
    auto need = [&](const std::string& name) -> const Tensor<float>& {
        const Tensor<float>* t = tf.find(name);
        if (!t) throw IoError("model file missing tensor " + name);
        return *t;
    };
    m.conv_w.clear();
    m.conv_b.clear();
    for (size_t i = 0; i < n_conv; ++i) {
        m.conv_w.push_back(need("conv" + std::to_string(i) + "_w"));
        m.conv_b.push_back(need("conv" + std::to_string(i) + "_b"));
    }
    m.fc1_w = need("fc1_w");
    m.fc1_b = need("fc1_b");
    m.fc2_w = need("fc2_w");
    m.fc2_b = need("fc2_b");
    m.fc3_w = need("fc3_w");
    m.fc3_b = need("fc3_b");
}

}  // namespace

void save_audio_classifier(const std::string& path, const AudioClassifier& m) {
    TensorFile tf;
    add_classifier_tensors(tf, const_cast<AudioClassifier&>(m));
    save_tensors(path, tf);
    write_sidecar(path, nlohmann::json{{"kind", "audio-classifier"},
                                       {"input_shape", {1, 128, 44}},
                                       {"categories", m.categories},
                                       {"representation_kind", spec_kind_name(m.representation)},
                                       {"seed", m.seed},
                                       {"epochs", m.epochs_trained}});
}

AudioClassifier load_audio_classifier(const std::string& path) {
    nlohmann::json j = read_sidecar(path);
    if (j.at("kind") != "audio-classifier") throw IoError("not an audio classifier: " + path);
    AudioClassifier m;
    m.categories = j.at("categories").get<std::vector<std::string>>();
    m.n_classes = static_cast<int>(m.categories.size());
    m.representation = spec_kind_from_name(j.at("representation_kind").get<std::string>());
    m.seed = j.at("seed").get<uint64_t>();
    m.epochs_trained = j.at("epochs").get<int>();
    get_classifier_tensors(load_tensors(path), m, 4);
    m.trained = true;
    return m;
}

void save_image_classifier(const std::string& path, const ImageClassifier& m) {
    TensorFile tf;
    add_classifier_tensors(tf, const_cast<ImageClassifier&>(m));
    save_tensors(path, tf);
    write_sidecar(path, nlohmann::json{{"kind", "image-classifier"},
                                       {"input_shape", {3, 64, 64}},
                                       {"categories", m.categories},
                                       {"seed", m.seed},
                                       {"epochs", m.epochs_trained}});
}

ImageClassifier load_image_classifier(const std::string& path) {
    nlohmann::json j = read_sidecar(path);
    if (j.at("kind") != "image-classifier") throw IoError("not an image classifier: " + path);
    ImageClassifier m;
    m.categories = j.at("categories").get<std::vector<std::string>>();
    m.n_classes = static_cast<int>(m.categories.size());
    m.seed = j.at("seed").get<uint64_t>();
    m.epochs_trained = j.at("epochs").get<int>();
    get_classifier_tensors(load_tensors(path), m, 6);
    m.trained = true;
    return m;
}

void save_sound_autoencoder(const std::string& path, const SoundAutoencoder& m) {
    TensorFile tf;
    for (size_t s = 0; s < 3; ++s) {
        tf.add("enc" + std::to_string(s) + "_w", m.enc_w[s]);
        tf.add("enc" + std::to_string(s) + "_b", m.enc_b[s]);
        tf.add("dec" + std::to_string(s) + "_w", m.dec_w[s]);
        tf.add("dec" + std::to_string(s) + "_b", m.dec_b[s]);
    }
    tf.add("proj_w", m.proj_w);
    tf.add("proj_b", m.proj_b);
    tf.add("unproj_w", m.unproj_w);
    tf.add("unproj_b", m.unproj_b);
    save_tensors(path, tf);
    write_sidecar(path, nlohmann::json{{"kind", "audio-autoencoder"},
                                       {"input_shape", {1, 128, 44}},
                                       {"categories", m.categories},
                                       {"representation_kind", "lms"},
                                       {"seed", m.seed},
                                       {"epochs", m.epochs_trained}});
}

SoundAutoencoder load_sound_autoencoder(const std::string& path) {
    nlohmann::json j = read_sidecar(path);
    if (j.at("kind") != "audio-autoencoder") throw IoError("not a sound autoencoder: " + path);
    SoundAutoencoder m;
    m.categories = j.at("categories").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<uint64_t>();
    m.epochs_trained = j.at("epochs").get<int>();
    TensorFile tf = load_tensors(path);
    auto need = [&](const std::string& name) -> const Tensor<float>& {
        const Tensor<float>* t = tf.find(name);
        if (!t) throw IoError("model file missing tensor " + name);
        return *t;
    };
    m.enc_w.clear();
    m.enc_b.clear();
    m.dec_w.clear();
    m.dec_b.clear();
    for (size_t s = 0; s < 3; ++s) {
        m.enc_w.push_back(need("enc" + std::to_string(s) + "_w"));
        m.enc_b.push_back(need("enc" + std::to_string(s) + "_b"));
        m.dec_w.push_back(need("dec" + std::to_string(s) + "_w"));
        m.dec_b.push_back(need("dec" + std::to_string(s) + "_b"));
    }
    m.proj_w = need("proj_w");
    m.proj_b = need("proj_b");
    m.unproj_w = need("unproj_w");
    m.unproj_b = need("unproj_b");
    m.trained = true;
    return m;
}

}  // namespace xmodal
