#include "tubalnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "tubalnet/algebra.hpp"
#include "tubalnet/errors.hpp"
#include "tubalnet/transform.hpp"

namespace tubalnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_dims(const Dims& a, const Dims& b, const char* what) {
    if (a != b) throw ShapeError(std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
}

// Fisher-Yates prefix: the first `take` entries become a uniform sample without replacement.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t take,
                                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(take);
    return pool;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
    if (depth < 2) throw ConfigError("depth must be at least 2");
    if (latent_dim < 1) throw ConfigError("latent dimension must be at least 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 0.5)) {
        throw ConfigError("validation fraction must lie in [0, 0.5)");
    }
    if (patience < 0) throw ConfigError("patience must be non-negative");
    if (!(init_gain > 0.0)) throw ConfigError("init gain must be positive");
}

Tensor3 Normalization::apply(const Tensor3& t) const {
    Tensor3 out = t;
    for (double& v : out.data()) v = apply(v);
    return out;
}

Tensor3 Normalization::invert(const Tensor3& t) const {
    Tensor3 out = t;
    for (double& v : out.data()) v = invert(v);
    return out;
}

Normalization fit_normalization(const Tensor3& r, const ObservationMask& mask) {
    require_dims(r.dims(), mask.dims(), "fit_normalization");
    if (mask.count() == 0) throw EmptyObservationError("fit_normalization: empty observation set");
    auto d = r.data();
    double sum = 0.0;
    for (std::size_t n = 0; n < d.size(); ++n)
        if (mask[n]) sum += d[n];
    const double mean = sum / static_cast<double>(mask.count());
    double ss = 0.0;
    for (std::size_t n = 0; n < d.size(); ++n)
        if (mask[n]) ss += (d[n] - mean) * (d[n] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(mask.count()));
    return {mean, sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0};
}

ObservationMask random_missing_mask(const Dims& dims, double missing_rate, std::uint64_t seed) {
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
        throw ConfigError("missing rate must lie in [0, 1), got " + std::to_string(missing_rate));
    }
    const std::size_t total = dims.size();
    const auto observed = static_cast<std::size_t>(std::llround((1.0 - missing_rate) * static_cast<double>(total)));
    std::vector<std::size_t> pool(total);
    std::iota(pool.begin(), pool.end(), 0);
    ObservationMask mask(dims, false);
    for (std::size_t idx : sample_without_replacement(std::move(pool), observed, seed)) mask.set(idx, true);
    return mask;
}

std::pair<ObservationMask, ObservationMask> split_validation(const ObservationMask& mask, double fraction,
                                                             std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
    std::vector<std::size_t> observed;
    observed.reserve(mask.count());
    for (std::size_t n = 0; n < mask.size(); ++n)
        if (mask[n]) observed.push_back(n);
    auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(observed.size())));
    if (held >= observed.size()) held = observed.empty() ? 0 : observed.size() - 1;

    ObservationMask train = mask;
    ObservationMask validation(mask.dims(), false);
    for (std::size_t idx : sample_without_replacement(std::move(observed), held, seed)) {
        train.set(idx, false);
        validation.set(idx, true);
    }
    return {std::move(train), std::move(validation)};
}

double rmse(const Tensor3& truth, const Tensor3& estimate, const ObservationMask& eval_mask) {
    require_dims(truth.dims(), estimate.dims(), "rmse");
    require_dims(truth.dims(), eval_mask.dims(), "rmse mask");
    if (eval_mask.count() == 0) throw EmptyObservationError("rmse: empty evaluation set");
    auto y = truth.data();
    auto y_hat = estimate.data();
    double acc = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) {
        if (eval_mask[n]) {
            const double d = y[n] - y_hat[n];
            acc += d * d;
        }
    }
    return std::sqrt(acc / static_cast<double>(eval_mask.count()));
}

Tensor3 mean_fill(const Tensor3& r, const ObservationMask& mask) {
    require_dims(r.dims(), mask.dims(), "mean_fill");
    if (mask.count() == 0) throw EmptyObservationError("mean_fill: empty observation set");
    auto d = r.data();
    double sum = 0.0;
    for (std::size_t n = 0; n < d.size(); ++n)
        if (mask[n]) sum += d[n];
    return Tensor3(r.dims(), sum / static_cast<double>(mask.count()));
}

void sgd_step(NetworkParams& params, const Gradients& grads, double learning_rate, double weight_decay) {
    auto theta = params.blocks();
    auto g = grads.blocks();
    if (theta.size() != g.size()) throw ShapeError("sgd_step: gradient blocks do not match parameters");
    for (std::size_t b = 0; b < theta.size(); ++b) {
        auto values = theta[b].second->data();
        auto delta = g[b].second->data();
        if (values.size() != delta.size()) throw ShapeError("sgd_step: block " + theta[b].first + " size mismatch");
        for (std::size_t n = 0; n < values.size(); ++n) {
            values[n] -= learning_rate * (delta[n] + weight_decay * values[n]);
        }
    }
}

Tensor3 predict(const NetworkParams& params, const Tensor3& r, const ObservationMask& input_mask,
                const Normalization& normalization, Pooling pooling) {
    const Tensor3 input = input_mask.apply(normalization.apply(input_mask.apply(r)));
    return normalization.invert(forward(params, input, pooling).x_hat);
}

namespace {

Tensor3 columns_of(const Tensor3& t, std::span<const std::size_t> cols) { return t.lateral_columns(cols); }

ObservationMask mask_columns(const ObservationMask& mask, std::span<const std::size_t> cols) {
    const Dims d = mask.dims();
    std::vector<std::uint8_t> picked(d.n1 * cols.size() * d.n3);
    const Dims out{d.n1, cols.size(), d.n3};
    for (std::size_t k = 0; k < d.n3; ++k)
        for (std::size_t i = 0; i < d.n1; ++i)
            for (std::size_t c = 0; c < cols.size(); ++c) picked[out.offset(i, c, k)] = mask(i, cols[c], k) ? 1 : 0;
    return ObservationMask(out, std::move(picked));
}

[[noreturn]] void diverged(int epoch, double lr) {
    std::ostringstream msg;
    msg << "training diverged at epoch " << epoch << " with learning rate " << lr
        << ": loss is not finite (try a smaller --lr)";
    throw DivergenceError(msg.str(), epoch, lr);
}

}  // namespace

TrainResult train_completion(const Tensor3& r, const ObservationMask& mask, const TrainConfig& cfg,
                             const std::optional<EvalSet>& eval) {
    cfg.validate();
    require_dims(r.dims(), mask.dims(), "train_completion");
    if (mask.count() == 0) throw EmptyObservationError("train_completion: empty observation set");
    for (std::size_t n = 0; n < mask.size(); ++n) {
        if (mask[n] && !std::isfinite(r.data()[n])) {
            throw ConfigError("observed entry at offset " + std::to_string(n) + " is not finite");
        }
    }
    if (eval) {
        if (!eval->truth) throw ConfigError("evaluation set has no ground truth");
        require_dims(eval->truth->dims(), r.dims(), "evaluation truth");
        require_dims(eval->mask.dims(), r.dims(), "evaluation mask");
    }
    const auto started = std::chrono::steady_clock::now();
    const Dims dims = r.dims();

    auto [train_mask, val_mask] = split_validation(mask, cfg.validation_fraction, cfg.seed ^ 0x5eedba5eULL);
    const Normalization norm = cfg.normalize ? fit_normalization(r, train_mask) : Normalization{};
    const Tensor3 target = train_mask.apply(norm.apply(train_mask.apply(r)));
    const LatentInputs inputs = extract_latent_inputs(target);

    NetworkShape shape{.depth = cfg.depth,
                       .latent_dim = cfg.latent_dim,
                       .activation = cfg.activation,
                       .pooling_slice = cfg.pooling == Pooling::kTubeWise,
                       .init_gain = cfg.init_gain};
    NetworkParams params = init_params(dims, shape, make_transform(cfg.transform, dims.n3), cfg.seed);

    RunReport report;
    report.config = cfg;
    report.normalization = norm;
    report.transform_name = params.transform.name();
    report.train_count = train_mask.count();
    report.validation_count = val_mask.count();
    report.best_val_rmse = kNaN;

    const bool mini_batch = cfg.batch_columns > 0 && cfg.batch_columns < dims.n2;
    std::mt19937_64 batch_rng(cfg.seed ^ 0xba7c4e5ULL);
    std::vector<std::size_t> column_order(dims.n2);
    std::iota(column_order.begin(), column_order.end(), 0);

    auto full_step = [&](const ForwardTrace& trace) {
        const Gradients g = backward(params, trace, loss_grad_x(trace.x_hat, target, train_mask));
        sgd_step(params, g, cfg.learning_rate, cfg.weight_decay);
    };
    auto batch_epoch = [&]() {
        std::shuffle(column_order.begin(), column_order.end(), batch_rng);
        for (std::size_t start = 0; start < dims.n2; start += cfg.batch_columns) {
            const std::size_t stop = std::min(dims.n2, start + cfg.batch_columns);
            const std::span<const std::size_t> cols(column_order.data() + start, stop - start);
            const ObservationMask batch_mask = mask_columns(train_mask, cols);
            if (batch_mask.count() == 0) continue;
            const LatentInputs batch_inputs{inputs.u, columns_of(inputs.v, cols)};
            const ForwardTrace trace = forward(params, batch_inputs, cfg.pooling);
            const Gradients g = backward(params, trace, loss_grad_x(trace.x_hat, columns_of(target, cols), batch_mask));
            sgd_step(params, g, cfg.learning_rate, cfg.weight_decay);
        }
    };

    // Row e of the report describes the parameters after e epochs of updates.
    {
        const ForwardTrace initial = forward(params, inputs, cfg.pooling);
        if (!std::isfinite(masked_squared_loss(initial.x_hat, target, train_mask))) diverged(0, cfg.learning_rate);
        if (mini_batch) {
            batch_epoch();
        } else {
            full_step(initial);
        }
    }

    Tensor3 estimate;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const ForwardTrace trace = forward(params, inputs, cfg.pooling);
        const double loss = masked_squared_loss(trace.x_hat, target, train_mask, params, cfg.weight_decay);
        if (!std::isfinite(loss) || !trace.x_hat.all_finite()) diverged(epoch, cfg.learning_rate);
        estimate = norm.invert(trace.x_hat);

        EpochRecord rec{epoch, loss, kNaN, kNaN};
        if (val_mask.count() > 0) rec.val_rmse = rmse(r, estimate, val_mask);
        if (eval && eval->mask.count() > 0) rec.test_rmse = rmse(*eval->truth, estimate, eval->mask);
        report.epochs.push_back(rec);

        if (val_mask.count() > 0) {
            if (!(rec.val_rmse >= report.best_val_rmse)) {
                report.best_val_rmse = rec.val_rmse;
                report.best_epoch = epoch;
            } else if (cfg.patience > 0 && epoch - report.best_epoch >= cfg.patience) {
                report.stopped_early = true;
                break;
            }
        }
        if (epoch == cfg.epochs) break;
        if (mini_batch) {
            batch_epoch();
        } else {
            full_step(trace);
        }
    }

    Tensor3 completed = estimate;
    auto out = completed.data();
    auto src = r.data();
    for (std::size_t n = 0; n < out.size(); ++n)
        if (mask[n]) out[n] = src[n];
    if (eval && eval->mask.count() > 0) report.final_test_rmse = rmse(*eval->truth, completed, eval->mask);

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(params), std::move(estimate), std::move(completed), std::move(report)};
}

Tensor3 synthetic_low_rank_raw(const Dims& dims, std::size_t rank, std::uint64_t seed, const TransformMatrix& m) {
    if (rank < 1 || rank > std::min(dims.n1, dims.n2)) {
        throw ConfigError("tubal rank " + std::to_string(rank) + " must lie in [1, min(n1, n2)] for " + to_string(dims));
    }
    if (m.size() != dims.n3) throw ShapeError("transform size does not match n3");
    std::mt19937_64 rng(seed);
    const Tensor3 a = Tensor3::random_gaussian({dims.n1, rank, dims.n3}, rng());
    const Tensor3 b = Tensor3::random_gaussian({rank, dims.n2, dims.n3}, rng());
    return m_product(a, b, m);
}

Tensor3 make_synthetic_low_rank(const Dims& dims, std::size_t rank, std::uint64_t seed, const TransformMatrix& m) {
    Tensor3 t = synthetic_low_rank_raw(dims, rank, seed, m);
    auto d = t.data();
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    const double low = *lo;
    const double span = *hi - *lo;
    for (double& v : d) v = span > 0.0 ? (v - low) / span : 0.5;
    return t;
}

}  // namespace tubalnet
