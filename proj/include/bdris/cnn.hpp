// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/aging.hpp"
#include "bdris/system.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace bdris {

/// Log-magnitude of successive-interval differences of a preprocessed CSI
/// matrix C (2M x VK): entry (i, vK + k) is log10(|C(i, (v+1)K + k) - C(i, vK + k)| / rms(C)),
/// floored at -8. Output is 2M x (V - 1)K.
RealMatrix cnn_features(const RealMatrix& c, int K);

struct CnnArchitecture {
    int rows = 0;  ///< input height
    int cols = 0;  ///< input width
    int conv1 = 8;
    int conv2 = 16;
    int kernel = 3;
    int fc1 = 64;
    int fc2 = 32;
    int outputs = 2;

    void validate() const;
    bool operator==(const CnnArchitecture&) const = default;
};

struct CnnHyper {
    double learning_rate = 1e-3;
    int batch = 50;
    int max_epochs = 300;
    int patience = 10;  ///< epochs without validation improvement before stopping
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

/// conv(tanh) -> 2x2 average pool -> conv(tanh) -> global average ->
/// dense(sigmoid) -> dense(sigmoid) -> dense(linear).
class CnnModel {
  public:
    static CnnModel initialize(const CnnArchitecture& arch, Rng& rng);

    [[nodiscard]] const CnnArchitecture& architecture() const { return arch_; }
    [[nodiscard]] std::vector<double>& parameters() { return params_; }
    [[nodiscard]] const std::vector<double>& parameters() const { return params_; }

    /// Inputs are mapped to (x - shift) / scale before the first layer.
    void set_input_normalization(double shift, double scale);
    [[nodiscard]] double input_shift() const { return shift_; }
    [[nodiscard]] double input_scale() const { return scale_; }

    [[nodiscard]] RealVector forward(const RealMatrix& x) const;

    /// Mean squared error over the batch and outputs; accumulates its
    /// gradient into `grad` (resized and zeroed first).
    double loss_and_gradient(const std::vector<const RealMatrix*>& inputs, const std::vector<const RealVector*>& targets,
                             std::vector<double>& grad) const;
    double loss(const std::vector<const RealMatrix*>& inputs, const std::vector<const RealVector*>& targets) const;

    /// Flat binary: magic, eight int32 architecture fields, the input shift and
    /// scale, u64 parameter count, then the parameters in layer order.
    void save(const std::filesystem::path& path) const;
    static CnnModel load(const std::filesystem::path& path);

    bool operator==(const CnnModel&) const = default;

  private:
    CnnArchitecture arch_;
    std::vector<double> params_;
    double shift_ = 0.0;
    double scale_ = 1.0;
};

struct CnnDataset {
    std::vector<RealMatrix> inputs;  ///< already passed through cnn_features
    std::vector<int> labels;
    int classes = 0;

    [[nodiscard]] std::size_t size() const { return inputs.size(); }
    /// Mean and standard deviation over every entry of every input.
    [[nodiscard]] std::pair<double, double> entry_statistics() const;
};

struct TrainingReport {
    int epochs = 0;
    int best_epoch = 0;
    double initial_val_loss = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    bool diverged = false;
    bool stalled = false;  ///< validation loss never fell below 99% of its initial value
    std::string message;
};

/// Adam on the one-hot MSE loss with early stopping; the returned model holds
/// the weights of the best validation epoch.
CnnModel cnn_train(const CnnModel& init, const CnnDataset& train, const CnnDataset& val, const CnnHyper& hyper,
                   Rng& rng, TrainingReport* report = nullptr);

/// Index of the largest output; ties go to the lowest index.
int cnn_predict_class(const CnnModel& model, const RealMatrix& features);
double cnn_accuracy(const CnnModel& model, const CnnDataset& data);

/// Bank entry for a preprocessed CSI matrix C with block width K.
const ArModel& classify_fn(const CnnModel& model, const RealMatrix& c, int K, const PatternBank& bank);

/// Noise added to a dataset sample, relative to its mean entry power.
struct DatasetNoise {
    double relative_power = 0.0;
};

/// samples_per_class UE-RIS series of V intervals for every Doppler value,
/// generated with cfg's aging model and spatial correlation.
CnnDataset make_cnn_dataset(const SystemConfig& cfg, const std::vector<double>& dopplers, int samples_per_class,
                            int V, Rng& rng, DatasetNoise noise = {});

}  // namespace bdris
