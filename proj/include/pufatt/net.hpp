#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pufatt/dataset.hpp"
#include "pufatt/matrix.hpp"

namespace pufatt {

enum class Activation { Rectifier, Tanh };

enum class HeadKind { Binary, Categorical };

struct HeadSpec {
    HeadKind kind = HeadKind::Binary;
    int classes = 1;  // 1 for binary heads
    double loss_weight = 1.0;

    bool operator==(const HeadSpec&) const = default;
};

struct NetConfig {
    int input_dim = 0;
    std::vector<int> hidden;
    Activation activation = Activation::Rectifier;
    std::vector<HeadSpec> heads;

    void validate() const;

    bool operator==(const NetConfig&) const = default;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 1000;
    int max_epochs = 100;
    int patience = 20;  // epochs without validation response improvement
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int threads = 0;  // 0 = hardware concurrency; the result is identical either way

    void validate() const;
};

struct DenseLayer {
    Matrix w;  // fan_in x fan_out
    std::vector<double> b;

    bool operator==(const DenseLayer&) const = default;
};

// Per-head batch outputs: binary heads yield a single sigmoid column,
// categorical heads a softmax row per input.
struct HeadOutputs {
    std::vector<Matrix> heads;
};

struct LossValue {
    double total = 0.0;
    std::vector<double> per_head;
};

// Gradient of the weighted total loss, shaped like the parameters.
struct Gradients {
    std::vector<DenseLayer> shared;
    std::vector<DenseLayer> heads;
};

struct EpochStats {
    double train_loss = 0.0;
    std::vector<double> val_loss_per_head;
    std::vector<double> val_acc_per_head;
    double val_response_accuracy = 0.0;

    bool operator==(const EpochStats&) const = default;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_response_accuracy = 0.0;

    bool operator==(const TrainHistory&) const = default;
};

// Maps head outputs to predicted response bits. The default uses the binary
// head at index 0 with threshold 0.5 (ties map to 1); single-label crossed
// models install their own recovery.
using ResponseExtractor = std::function<std::vector<Bit>(const HeadOutputs&)>;

// Shared dense trunk with one output layer per head, trained by Adam on the
// loss-weight sum of per-head cross entropies.
class MultiHeadNet {
public:
    MultiHeadNet() = default;
    // Fan-in-scaled uniform weights, zero biases, deterministic per seed.
    MultiHeadNet(NetConfig cfg, std::uint64_t seed);

    const NetConfig& config() const { return cfg_; }
    const std::vector<DenseLayer>& shared_layers() const { return shared_; }
    const std::vector<DenseLayer>& head_layers() const { return heads_; }
    std::vector<DenseLayer>& shared_layers() { return shared_; }
    std::vector<DenseLayer>& head_layers() { return heads_; }

    HeadOutputs forward(const Matrix& inputs) const;
    LossValue loss(const HeadOutputs& outputs, const std::vector<Matrix>& targets) const;

    // Analytic gradients of the weighted total loss over the batch; heads
    // with zero loss weight contribute nothing. Throws on non-finite
    // activations.
    Gradients backward(const Matrix& inputs, const std::vector<Matrix>& targets, int threads = 1,
                       LossValue* loss_out = nullptr) const;

    // Bias-corrected adaptive-moment update at step t >= 1.
    void adam_step(const Gradients& grads, std::uint64_t t, const TrainConfig& cfg);

    // Checkpoint: self-describing header plus raw little-endian doubles in
    // declaration order; round-trips bit-exactly.
    void save(const std::string& path) const;
    static MultiHeadNet load(const std::string& path);

    bool operator==(const MultiHeadNet& other) const {
        return cfg_ == other.cfg_ && shared_ == other.shared_ && heads_ == other.heads_;
    }

private:
    NetConfig cfg_;
    std::vector<DenseLayer> shared_;
    std::vector<DenseLayer> heads_;
    Gradients moment1_;
    Gradients moment2_;
    bool moments_ready_ = false;
};

// Mini-batch epochs with seeded in-epoch shuffling and early stopping on
// validation response accuracy; the returned net holds the best-validation
// snapshot. Train and validation batches must not carry test-split rows.
TrainHistory train(MultiHeadNet& net, const EncodedBatch& train_set, const EncodedBatch& validation_set,
                   const TrainConfig& cfg, const ResponseExtractor& extractor = {});

std::vector<Bit> predict_response(const MultiHeadNet& net, const Matrix& inputs);

// Per-head losses/accuracies plus extracted-response accuracy over a batch.
struct EvalResult {
    std::vector<double> loss_per_head;
    std::vector<double> acc_per_head;
    double response_accuracy = 0.0;
};
EvalResult evaluate(const MultiHeadNet& net, const EncodedBatch& batch,
                    const ResponseExtractor& extractor = {});

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

}  // namespace pufatt
