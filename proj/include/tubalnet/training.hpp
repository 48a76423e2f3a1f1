#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tubalnet/backprop.hpp"
#include "tubalnet/network.hpp"
#include "tubalnet/observation_mask.hpp"
#include "tubalnet/tensor3.hpp"
#include "tubalnet/transform_matrix.hpp"

namespace tubalnet {

struct TrainConfig {
    int epochs = 4000;
    double learning_rate = 0.5;
    double weight_decay = 1e-4;
    std::size_t depth = 3;
    std::size_t latent_dim = 20;
    Activation activation = Activation::kTanh;
    Pooling pooling = Pooling::kStacked;
    std::string transform = "dct";
    std::uint64_t seed = 0;
    bool normalize = true;
    /// Stop after this many epochs without a new best validation RMSE; 0 disables.
    int patience = 100;
    double validation_fraction = 0.05;
    /// Lateral columns per gradient step; 0 means full batch.
    std::size_t batch_columns = 0;
    double init_gain = 0.5;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Affine map between data units and the units the network is trained in.
struct Normalization {
    double offset = 0.0;
    double scale = 1.0;

    double apply(double x) const { return (x - offset) / scale; }
    double invert(double x) const { return x * scale + offset; }
    Tensor3 apply(const Tensor3& t) const;
    Tensor3 invert(const Tensor3& t) const;
};

/// Mean and standard deviation of r over the mask (scale 1 when the spread vanishes).
Normalization fit_normalization(const Tensor3& r, const ObservationMask& mask);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_rmse = 0.0;   // NaN without a validation split
    double test_rmse = 0.0;  // NaN without ground truth
};

struct RunReport {
    std::vector<EpochRecord> epochs;
    std::optional<double> final_test_rmse;
    int best_epoch = 0;
    double best_val_rmse = 0.0;
    bool stopped_early = false;
    double wall_seconds = 0.0;
    std::size_t train_count = 0;
    std::size_t validation_count = 0;
    TrainConfig config;
    Normalization normalization;
    std::string transform_name;
};

/// Ground truth for entries outside the observation mask, used only for reporting.
struct EvalSet {
    const Tensor3* truth = nullptr;
    ObservationMask mask;
};

struct TrainResult {
    NetworkParams params;
    /// Network output in data units on every entry, including observed ones.
    Tensor3 x_estimate;
    /// x_estimate with observed entries replaced by the input.
    Tensor3 x_completed;
    RunReport report;
};

/// round((1 - missing_rate) * size) observed entries drawn without replacement.
ObservationMask random_missing_mask(const Dims& dims, double missing_rate, std::uint64_t seed);

/// Moves round(fraction * |mask|) observed entries into a validation mask.
std::pair<ObservationMask, ObservationMask> split_validation(const ObservationMask& mask, double fraction,
                                                             std::uint64_t seed);

/// Root mean squared error over the entries of eval_mask.
double rmse(const Tensor3& truth, const Tensor3& estimate, const ObservationMask& eval_mask);

/// Every entry replaced by the mean over the mask.
Tensor3 mean_fill(const Tensor3& r, const ObservationMask& mask);

/// theta <- theta - lr * (g + lambda * theta) for every parameter block.
void sgd_step(NetworkParams& params, const Gradients& grads, double learning_rate, double weight_decay);

/// Runs the network on r restricted to input_mask and maps the output back to data units.
Tensor3 predict(const NetworkParams& params, const Tensor3& r, const ObservationMask& input_mask,
                const Normalization& normalization, Pooling pooling);

/// Full completion run. Observed entries of the result are copied from r
/// unchanged. Throws DivergenceError when the loss becomes non-finite.
TrainResult train_completion(const Tensor3& r, const ObservationMask& mask, const TrainConfig& cfg,
                             const std::optional<EvalSet>& eval = std::nullopt);

/// Gaussian A (n1, rank, n3) *_M Gaussian B (rank, n2, n3).
Tensor3 synthetic_low_rank_raw(const Dims& dims, std::size_t rank, std::uint64_t seed, const TransformMatrix& m);

/// synthetic_low_rank_raw min-max rescaled to [0, 1].
Tensor3 make_synthetic_low_rank(const Dims& dims, std::size_t rank, std::uint64_t seed, const TransformMatrix& m);

}  // namespace tubalnet
