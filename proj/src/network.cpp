#include "tubalnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tubalnet/algebra.hpp"
#include "tubalnet/errors.hpp"

namespace tubalnet {

Activation parse_activation(std::string_view name) {
    if (name == "sigmoid") return Activation::kSigmoid;
    if (name == "relu") return Activation::kRelu;
    if (name == "tanh") return Activation::kTanh;
    if (name == "linear") return Activation::kLinear;
    throw ConfigError("unknown activation '" + std::string(name) + "' (expected sigmoid, relu, tanh or linear)");
}

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::kSigmoid: return "sigmoid";
        case Activation::kRelu: return "relu";
        case Activation::kTanh: return "tanh";
        case Activation::kLinear: return "linear";
    }
    return "?";
}

Pooling parse_pooling(std::string_view name) {
    if (name == "stacked") return Pooling::kStacked;
    if (name == "tube-wise") return Pooling::kTubeWise;
    throw ConfigError("unknown pooling '" + std::string(name) + "' (expected stacked or tube-wise)");
}

std::string_view to_string(Pooling p) { return p == Pooling::kStacked ? "stacked" : "tube-wise"; }

double activate(Activation a, double z) {
    switch (a) {
        case Activation::kSigmoid:
            if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
            else {
                const double e = std::exp(z);
                return e / (1.0 + e);
            }
        case Activation::kRelu: return z > 0.0 ? z : 0.0;
        case Activation::kTanh: return std::tanh(z);
        case Activation::kLinear: return z;
    }
    return z;
}

double activate_derivative(Activation a, double z) {
    switch (a) {
        case Activation::kSigmoid: {
            const double s = activate(Activation::kSigmoid, z);
            return s * (1.0 - s);
        }
        case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::kTanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::kLinear: return 1.0;
    }
    return 1.0;
}

Tensor3 activate(Activation a, const Tensor3& z) {
    Tensor3 out = z;
    for (double& v : out.data()) v = activate(a, v);
    return out;
}

Tensor3 activate_derivative(Activation a, const Tensor3& z) {
    Tensor3 out = z;
    for (double& v : out.data()) v = activate_derivative(a, v);
    return out;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

void expect_dims(const Tensor3& t, const Dims& want, const std::string& what) {
    if (t.dims() != want) {
        throw ShapeError(what + " has shape " + to_string(t.dims()) + ", expected " + to_string(want));
    }
}

}  // namespace

void NetworkParams::validate(const Dims& data) const {
    const std::size_t n = depth();
    if (n < 2) throw ConfigError("network depth must be at least 2");
    if (w_v.size() != n || b_u.size() != n - 1 || b_v.size() != n - 1) {
        throw ShapeError("parameter list lengths do not match depth " + std::to_string(n));
    }
    if (transform.size() != data.n3) {
        throw ShapeError("transform size " + std::to_string(transform.size()) + " does not match n3 = " +
                         std::to_string(data.n3));
    }
    const std::size_t m = latent_dim();
    const std::size_t n3 = data.n3;
    for (std::size_t j = 0; j < n; ++j) {
        expect_dims(w_u[j], {m, j == 0 ? data.n2 : m, n3}, "w_u[" + std::to_string(j) + "]");
        expect_dims(w_v[j], {m, j == 0 ? data.n1 : m, n3}, "w_v[" + std::to_string(j) + "]");
    }
    for (std::size_t j = 0; j + 1 < n; ++j) {
        expect_dims(b_u[j], {m, 1, n3}, "b_u[" + std::to_string(j) + "]");
        expect_dims(b_v[j], {m, 1, n3}, "b_v[" + std::to_string(j) + "]");
    }
    if (h) expect_dims(*h, {m, 1, n3}, "h");
}

std::vector<std::pair<std::string, Tensor3*>> NetworkParams::blocks() {
    std::vector<std::pair<std::string, Tensor3*>> out;
    for (std::size_t j = 0; j < w_u.size(); ++j) out.emplace_back("w_u[" + std::to_string(j) + "]", &w_u[j]);
    for (std::size_t j = 0; j < w_v.size(); ++j) out.emplace_back("w_v[" + std::to_string(j) + "]", &w_v[j]);
    for (std::size_t j = 0; j < b_u.size(); ++j) out.emplace_back("b_u[" + std::to_string(j) + "]", &b_u[j]);
    for (std::size_t j = 0; j < b_v.size(); ++j) out.emplace_back("b_v[" + std::to_string(j) + "]", &b_v[j]);
    if (h) out.emplace_back("h", &*h);
    return out;
}

std::vector<std::pair<std::string, const Tensor3*>> NetworkParams::blocks() const {
    std::vector<std::pair<std::string, const Tensor3*>> out;
    for (auto& [name, t] : const_cast<NetworkParams*>(this)->blocks()) out.emplace_back(name, t);
    return out;
}

double NetworkParams::squared_norm() const {
    double acc = 0.0;
    for (const auto& [name, t] : blocks()) acc += t->squared_norm();
    return acc;
}

NetworkParams init_params(const Dims& data, const NetworkShape& shape, TransformMatrix transform,
                          std::uint64_t seed) {
    if (shape.depth < 2) throw ConfigError("network depth must be at least 2");
    if (shape.latent_dim < 1) throw ConfigError("latent dimension must be at least 1");
    if (transform.size() != data.n3) {
        throw ShapeError("transform size " + std::to_string(transform.size()) + " does not match n3 = " +
                         std::to_string(data.n3));
    }
    const std::size_t m = shape.latent_dim;
    const std::size_t n3 = data.n3;
    std::mt19937_64 rng(seed);
    auto weight = [&](std::size_t fan_in) {
        const double sd = shape.init_gain / std::sqrt(static_cast<double>(fan_in));
        return Tensor3::random_gaussian({m, fan_in, n3}, rng(), sd);
    };

    NetworkParams p{.w_u = {}, .w_v = {}, .b_u = {}, .b_v = {}, .h = std::nullopt,
                    .transform = std::move(transform), .activation = shape.activation};
    for (std::size_t j = 0; j < shape.depth; ++j) p.w_u.push_back(weight(j == 0 ? data.n2 : m));
    for (std::size_t j = 0; j < shape.depth; ++j) p.w_v.push_back(weight(j == 0 ? data.n1 : m));
    for (std::size_t j = 0; j + 1 < shape.depth; ++j) {
        p.b_u.push_back(Tensor3::zeros({m, 1, n3}));
        p.b_v.push_back(Tensor3::zeros({m, 1, n3}));
    }
    if (shape.pooling_slice) {
        p.h = Tensor3::random_gaussian({m, 1, n3}, rng(), 1.0 / std::sqrt(static_cast<double>(m)));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward pass

LatentInputs extract_latent_inputs(const Tensor3& r) { return {t_transpose(r), r}; }

namespace {

void run_branch(const std::vector<Tensor3>& weights, const std::vector<Tensor3>& biases,
                const NetworkParams& params, std::vector<Tensor3>& acts, std::vector<Tensor3>& zs) {
    const std::size_t n = weights.size();
    for (std::size_t j = 0; j < n; ++j) {
        Tensor3 z = m_product(weights[j], acts.back(), params.transform);
        if (j + 1 < n) z = add_lateral_broadcast(std::move(z), biases[j]);
        acts.push_back(activate(params.activation, z));
        zs.push_back(std::move(z));
    }
}

}  // namespace

Tensor3 tubewise_pool(const Tensor3& u, const Tensor3& v, const Tensor3& h, const TransformMatrix& m,
                      Activation activation) {
    const std::size_t latent = u.n1();
    const std::size_t n3 = u.n3();
    if (v.n1() != latent || v.n3() != n3 || h.dims() != Dims{latent, 1, n3} || m.size() != n3) {
        throw ShapeError("tubewise_pool: incompatible shapes u " + to_string(u.dims()) + ", v " +
                         to_string(v.dims()) + ", h " + to_string(h.dims()));
    }
    const Eigen::MatrixXd& fwd = m.entries();
    // Transform-domain pooling weights: h_hat(l, f) = sum_t M(f, t) h(l, t).
    Eigen::MatrixXd h_hat(latent, n3);
    for (std::size_t l = 0; l < latent; ++l)
        for (std::size_t f = 0; f < n3; ++f) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n3; ++t) acc += fwd(f, t) * h(l, 0, t);
            h_hat(l, f) = acc;
        }

    Tensor3 x_hat_domain({u.n2(), v.n2(), n3});
    Eigen::MatrixXd pooled(latent, n3);
    for (std::size_t i = 0; i < u.n2(); ++i) {
        for (std::size_t j = 0; j < v.n2(); ++j) {
            for (std::size_t l = 0; l < latent; ++l)
                for (std::size_t t = 0; t < n3; ++t) pooled(l, t) = activate(activation, u(l, i, t) * v(l, j, t));
            const Eigen::MatrixXd pooled_hat = pooled * fwd.transpose();
            const Eigen::VectorXd tube_hat = h_hat.cwiseProduct(pooled_hat).colwise().sum().transpose();
            for (std::size_t f = 0; f < n3; ++f) x_hat_domain(i, j, f) = tube_hat(static_cast<Eigen::Index>(f));
        }
    }
    return from_transform_domain(x_hat_domain, m);
}

ForwardTrace forward(const NetworkParams& params, const LatentInputs& inputs, Pooling pooling) {
    const Dims data{inputs.v.n1(), inputs.u.n1(), inputs.u.n3()};
    if (inputs.u.n2() != data.n1 || inputs.v.n3() != data.n3) {
        throw ShapeError("latent inputs " + to_string(inputs.u.dims()) + " and " + to_string(inputs.v.dims()) +
                         " are inconsistent");
    }
    params.validate(data);
    if (pooling == Pooling::kTubeWise && !params.h) {
        throw ConfigError("tube-wise pooling requires the pooling slice h");
    }

    ForwardTrace trace;
    trace.pooling = pooling;
    trace.u_acts.push_back(inputs.u);
    trace.v_acts.push_back(inputs.v);
    run_branch(params.w_u, params.b_u, params, trace.u_acts, trace.z_u);
    run_branch(params.w_v, params.b_v, params, trace.v_acts, trace.z_v);

    if (pooling == Pooling::kStacked) {
        trace.x_hat = m_product(t_transpose(trace.u_acts.back()), trace.v_acts.back(), params.transform);
    } else {
        trace.x_hat = tubewise_pool(trace.u_acts.back(), trace.v_acts.back(), *params.h, params.transform,
                                    params.activation);
    }
    return trace;
}

ForwardTrace forward(const NetworkParams& params, const Tensor3& r, Pooling pooling) {
    return forward(params, extract_latent_inputs(r), pooling);
}

// ---------------------------------------------------------------------------
// Classification head

Tensor3 tubal_exp(const Tensor3& x, const TransformMatrix& m) {
    Tensor3 hat = to_transform_domain(x, m);
    for (double& v : hat.data()) v = std::exp(v);
    return from_transform_domain(hat, m);
}

Tensor3 tubal_log(const Tensor3& x, const TransformMatrix& m) {
    Tensor3 hat = to_transform_domain(x, m);
    for (double& v : hat.data()) {
        if (!(v > 0.0)) throw SingularTubeError("tubal_log: non-positive transform-domain entry");
        v = std::log(v);
    }
    return from_transform_domain(hat, m);
}

Tensor3 tubal_softmax(const Tensor3& x, const TransformMatrix& m) {
    Tensor3 hat = to_transform_domain(x, m);
    for (std::size_t f = 0; f < hat.n3(); ++f) {
        for (std::size_t j = 0; j < hat.n2(); ++j) {
            double top = hat(0, j, f);
            for (std::size_t i = 1; i < hat.n1(); ++i) top = std::max(top, hat(i, j, f));
            double total = 0.0;
            for (std::size_t i = 0; i < hat.n1(); ++i) {
                hat(i, j, f) = std::exp(hat(i, j, f) - top);
                total += hat(i, j, f);
            }
            for (std::size_t i = 0; i < hat.n1(); ++i) hat(i, j, f) /= total;
        }
    }
    return from_transform_domain(hat, m);
}

double tubal_cross_entropy_loss(const Tensor3& y, std::span<const std::size_t> labels,
                                const TransformMatrix& m) {
    if (labels.size() != y.n2()) {
        throw ShapeError("expected " + std::to_string(y.n2()) + " labels, got " + std::to_string(labels.size()));
    }
    const Tensor3 log_y = tubal_log(y, m);
    double acc = 0.0;
    for (std::size_t j = 0; j < y.n2(); ++j) {
        if (labels[j] >= y.n1()) {
            throw IndexError("label " + std::to_string(labels[j]) + " out of range for " +
                             std::to_string(y.n1()) + " classes");
        }
        for (std::size_t k = 0; k < y.n3(); ++k) {
            const double v = log_y(labels[j], j, k);
            acc += v * v;
        }
    }
    return acc / (2.0 * static_cast<double>(y.n2()));
}

double tubal_cross_entropy_loss(const Tensor3& y, std::span<const std::size_t> labels,
                                const TransformMatrix& m, const NetworkParams& params, double weight_decay) {
    return tubal_cross_entropy_loss(y, labels, m) + weight_decay_penalty(params, weight_decay);
}

// ---------------------------------------------------------------------------
// Completion loss

double weight_decay_penalty(const NetworkParams& params, double weight_decay) {
    return weight_decay == 0.0 ? 0.0 : 0.5 * weight_decay * params.squared_norm();
}

double masked_squared_loss(const Tensor3& x_hat, const Tensor3& r, const ObservationMask& mask) {
    if (x_hat.dims() != r.dims() || mask.dims() != r.dims()) {
        throw ShapeError("masked_squared_loss: shapes " + to_string(x_hat.dims()) + ", " + to_string(r.dims()) +
                         ", mask " + to_string(mask.dims()));
    }
    if (mask.count() == 0) throw EmptyObservationError("masked_squared_loss: empty observation set");
    auto x = x_hat.data();
    auto t = r.data();
    double acc = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        if (mask[n]) {
            const double d = x[n] - t[n];
            acc += d * d;
        }
    }
    return acc / (2.0 * static_cast<double>(mask.count()));
}

double masked_squared_loss(const Tensor3& x_hat, const Tensor3& r, const ObservationMask& mask,
                           const NetworkParams& params, double weight_decay) {
    return masked_squared_loss(x_hat, r, mask) + weight_decay_penalty(params, weight_decay);
}

}  // namespace tubalnet
