#pragma once

#include <string>
#include <vector>

#include "xmodal/features.hpp"
#include "xmodal/graph.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

inline constexpr float kLeakySlope = 0.2f;

// Per-epoch training trace for a classifier.
struct ClassifierReport {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> test_accuracy;
};

// 4 conv blocks (3x3/pad1, channels 32,32,64,64, leaky ReLU + 2x2 max-pool)
// on a 1x128x44 input, then FC 1024 -> 512 -> 128 -> C. L2 0.015 on FC
// weight matrices only; dropout keep 0.7 / 0.8 feeding the last two FC
// layers.
struct AudioClassifier {
    std::vector<Tensor<float>> conv_w, conv_b;  // 4 layers
    Tensor<float> fc1_w, fc1_b;                 // 512 x 1024
    Tensor<float> fc2_w, fc2_b;                 // 128 x 512
    Tensor<float> fc3_w, fc3_b;                 // C x 128
    int n_classes = 0;
    SpecKind representation = SpecKind::LMS;
    std::vector<std::string> categories;
    uint64_t seed = 0;
    int epochs_trained = 0;
    bool trained = false;

    std::vector<Tensor<float>*> params();
    std::vector<Tensor<float>*> fc_weights();  // L2 targets
};

// 6 convs (3x3/pad1, channels 32,32,64,64,128,128, pool after every second)
// on 3x64x64, then FC 8192 -> 512 -> 128 -> C.
struct ImageClassifier {
    std::vector<Tensor<float>> conv_w, conv_b;  // 6 layers
    Tensor<float> fc1_w, fc1_b;
    Tensor<float> fc2_w, fc2_b;
    Tensor<float> fc3_w, fc3_b;
    int n_classes = 0;
    std::vector<std::string> categories;
    uint64_t seed = 0;
    int epochs_trained = 0;
    bool trained = false;

    std::vector<Tensor<float>*> params();
    std::vector<Tensor<float>*> fc_weights();
};

// Greedily trained conv-deconv stacks on normalized LMS: valid convs 3x3,
// 3x3, 5x5 (single channel) shrink 128x44 -> 126x42 -> 124x40 -> 120x36,
// then a flatten + FC projection to 128. Each stack has a mirror decoder
// used only during its own training.
struct SoundAutoencoder {
    std::vector<Tensor<float>> enc_w, enc_b;  // 3 conv stacks
    std::vector<Tensor<float>> dec_w, dec_b;  // mirror transposed convs
    Tensor<float> proj_w, proj_b;             // 128 x 4320
    Tensor<float> unproj_w, unproj_b;         // 4320 x 128
    std::vector<std::string> categories;
    uint64_t seed = 0;
    int epochs_trained = 0;
    bool trained = false;

    std::vector<Tensor<float>*> stack_params(int stack);  // enc+dec of one stack
};

AudioClassifier make_audio_classifier(int n_classes, SpecKind kind, uint64_t seed);
ImageClassifier make_image_classifier(int n_classes, uint64_t seed);
SoundAutoencoder make_sound_autoencoder(uint64_t seed);

// Graph forwards; x is [N,1,128,44] / [N,3,64,64]. Returns {logits,
// penultimate} node ids.
struct ClassifierNodes {
    Graph<float>::Var logits;
    Graph<float>::Var penultimate;  // [N,128]
};
ClassifierNodes audio_classifier_forward(Graph<float>& g, AudioClassifier& m, Graph<float>::Var x, bool training,
                                         Rng* rng);
ClassifierNodes image_classifier_forward(Graph<float>& g, ImageClassifier& m, Graph<float>::Var x, bool training,
                                         Rng* rng);

ClassifierReport train_audio_classifier(AudioClassifier& m, FeatureCache& data, int epochs, uint64_t seed,
                                        int batch_size = 64, double learning_rate = 1e-3,
                                        double stop_at_test_accuracy = 2.0);
ClassifierReport train_image_classifier(ImageClassifier& m, FeatureCache& data, int epochs, uint64_t seed,
                                        int batch_size = 64, double learning_rate = 1e-3,
                                        double stop_at_test_accuracy = 2.0);

// Per-stack reconstruction-loss curves (4 stacks).
std::vector<std::vector<double>> train_autoencoder(SoundAutoencoder& m, FeatureCache& data, int epochs_per_stack,
                                                   uint64_t seed, int batch_size = 64, double learning_rate = 1e-3);

// Frozen 128-dim encodings (inference mode; deterministic).
std::vector<float> encode(const AudioClassifier& m, const Tensor<float>& input);
std::vector<float> encode(const ImageClassifier& m, const Tensor<float>& input);
std::vector<float> encode(const SoundAutoencoder& m, const Tensor<float>& lms_norm);

// Split accuracy of a trained classifier over its native modality.
double classifier_accuracy(AudioClassifier& m, FeatureCache& data, Split split);
double classifier_accuracy(ImageClassifier& m, FeatureCache& data, Split split);
// Predicted category per input batch [N,...]; inference mode.
std::vector<int> classifier_predict(AudioClassifier& m, const Tensor<float>& batch);
std::vector<int> classifier_predict(ImageClassifier& m, const Tensor<float>& batch);

// Tensor blob + JSON sidecar at path + ".json".
void save_audio_classifier(const std::string& path, const AudioClassifier& m);
AudioClassifier load_audio_classifier(const std::string& path);
void save_image_classifier(const std::string& path, const ImageClassifier& m);
ImageClassifier load_image_classifier(const std::string& path);
void save_sound_autoencoder(const std::string& path, const SoundAutoencoder& m);
SoundAutoencoder load_sound_autoencoder(const std::string& path);

// Stacks per-pair features into a batch tensor for the given indices.
Tensor<float> stack_batch(const std::vector<const Tensor<float>*>& items);

}  // namespace xmodal
