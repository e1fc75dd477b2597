#pragma once

#include "mdiq/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

// Fully connected feed-forward network trained by error backpropagation.
// Layer arithmetic: eps = W x, zeta = f(eps - theta) on hidden layers, and
// an identity output layer. Weights and thresholds are the trainable state.

namespace mdiq {

enum class Activation { Sigmoid, Tanh };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpModel {
    std::vector<std::size_t> layer_sizes; // input first, output last
    // weights[l]: row-major (layer_sizes[l+1] x layer_sizes[l])
    std::vector<std::vector<double>> weights;
    // thresholds[l]: layer_sizes[l+1] values, subtracted before activation
    std::vector<std::vector<double>> thresholds;
    Activation hidden_activation = Activation::Sigmoid;
    Normalizer input_norm;  // applied by evaluate(), not forward()
    Normalizer output_norm;

    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }

    // Glorot-uniform weights, zero thresholds, identity normalizers.
    static MlpModel make(const std::vector<std::size_t>& sizes,
                         std::uint64_t seed,
                         Activation hidden = Activation::Sigmoid);
};

// Raw network pass on an already-normalized input.
std::vector<double> forward(const MlpModel& m, const std::vector<double>& x);

// Normalize input, forward, denormalize output.
std::vector<double> evaluate(const MlpModel& m, const std::vector<double>& x);

struct TrainingSet {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> targets;
    std::size_t size() const { return inputs.size(); }
};

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> thresholds;
};

// Mean squared error over samples and output dimensions. `subset` (when
// given) selects sample indices.
double mse_loss(const MlpModel& m, const TrainingSet& data,
                const std::vector<std::size_t>* subset = nullptr);

// Gradient of mse_loss with respect to every weight and threshold.
Gradients backprop_gradients(const MlpModel& m, const TrainingSet& data,
                             const std::vector<std::size_t>* subset = nullptr);

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 2000;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    double validation_fraction = 0.1; // 0 disables early stopping
    double momentum = 0.9;
    std::size_t patience = 100; // epochs without validation improvement
};

struct TrainingDiverged : std::runtime_error {
    TrainingDiverged(std::size_t epoch, std::size_t batch)
        : std::runtime_error("training loss is NaN at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch)),
          epoch(epoch), batch(batch) {}
    std::size_t epoch, batch;
};

struct TrainResult {
    std::vector<double> loss_history; // training MSE, one entry per epoch run
    double best_validation_loss = 0;  // 0 when no validation split
    std::size_t epochs_run = 0;
};

// Mini-batch gradient descent with momentum; seeded shuffling; early stop
// on validation plateau with best-weights restore. Throws TrainingDiverged
// on NaN loss.
TrainResult train(MlpModel& m, const TrainingSet& data, const TrainConfig& cfg);

struct ModelLoadError : std::runtime_error {
    explicit ModelLoadError(const std::string& field)
        : std::runtime_error("model load failed at field: " + field) {}
};

// Versioned human-readable text format; doubles at full round-trip
// precision so a reloaded model forwards bit-identically.
void save_model(const MlpModel& m, std::ostream& os);
void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(std::istream& is);
MlpModel load_model(const std::string& path);

} // namespace mdiq
