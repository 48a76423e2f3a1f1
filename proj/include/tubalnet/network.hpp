#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tubalnet/observation_mask.hpp"
#include "tubalnet/tensor3.hpp"
#include "tubalnet/transform_matrix.hpp"

namespace tubalnet {

enum class Activation {
    kSigmoid,
    kRelu,
    kTanh,
    kLinear,  // identity map; only meant for oracle tests
};

enum class Pooling {
    kStacked,   // X = (U^N)^T *_M V^N
    kTubeWise,  // X(i, j, :) = h^T *_M act(U_i^N (.) V_j^N)
};

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);
Pooling parse_pooling(std::string_view name);
std::string_view to_string(Pooling p);

double activate(Activation a, double z);
/// Derivative evaluated at the pre-activation z.
double activate_derivative(Activation a, double z);
Tensor3 activate(Activation a, const Tensor3& z);
Tensor3 activate_derivative(Activation a, const Tensor3& z);

/// Trainable tensors plus the fixed transform and activation.
///
/// Layer j (0-based) of the horizontal branch maps an (fan_in, n1, n3) stack to
/// (m, n1, n3) through w_u[j]; layer 0 has fan_in = n2, deeper layers m. The
/// lateral branch mirrors it with n1 and n2 swapped. Every layer but the last
/// adds a bias lateral slice (m, 1, n3).
struct NetworkParams {
    std::vector<Tensor3> w_u;
    std::vector<Tensor3> w_v;
    std::vector<Tensor3> b_u;
    std::vector<Tensor3> b_v;
    std::optional<Tensor3> h;  // (m, 1, n3), tube-wise pooling only
    TransformMatrix transform;
    Activation activation = Activation::kTanh;

    std::size_t depth() const noexcept { return w_u.size(); }
    std::size_t latent_dim() const noexcept { return w_u.empty() ? 0 : w_u.front().n1(); }

    /// Throws ShapeError unless every tensor fits a data tensor of the given dims.
    void validate(const Dims& data) const;

    /// Named views over every trainable tensor, in a fixed order.
    std::vector<std::pair<std::string, Tensor3*>> blocks();
    std::vector<std::pair<std::string, const Tensor3*>> blocks() const;

    double squared_norm() const;
};

struct NetworkShape {
    std::size_t depth = 3;
    std::size_t latent_dim = 20;
    Activation activation = Activation::kTanh;
    bool pooling_slice = false;  // allocate h for tube-wise pooling
    /// Weight entries ~ N(0, (init_gain^2) / fan_in); biases start at zero.
    double init_gain = 0.5;
};

NetworkParams init_params(const Dims& data, const NetworkShape& shape, TransformMatrix transform,
                          std::uint64_t seed);

/// Per-branch network inputs. u holds R(i, :, :)^T as lateral slice i (n2, n1, n3);
/// v holds R(:, j, :) as lateral slice j (n1, n2, n3).
struct LatentInputs {
    Tensor3 u;
    Tensor3 v;
};

LatentInputs extract_latent_inputs(const Tensor3& r);

/// Every intermediate of one forward pass. acts[0] is the branch input and
/// acts[j + 1] = act(z[j]); the pooling layer reads acts.back().
struct ForwardTrace {
    std::vector<Tensor3> u_acts;
    std::vector<Tensor3> v_acts;
    std::vector<Tensor3> z_u;
    std::vector<Tensor3> z_v;
    Tensor3 x_hat;
    Pooling pooling = Pooling::kStacked;
};

ForwardTrace forward(const NetworkParams& params, const LatentInputs& inputs, Pooling pooling);
ForwardTrace forward(const NetworkParams& params, const Tensor3& r, Pooling pooling);

/// Tube-wise bilinear pooling of final branch outputs u (m, n1, n3) and v (m, n2, n3).
Tensor3 tubewise_pool(const Tensor3& u, const Tensor3& v, const Tensor3& h, const TransformMatrix& m,
                      Activation activation);

/// Softmax over the n1 tubes of a lateral slice, taken per transform-domain
/// frequency. Columns of a wider stack are treated independently.
Tensor3 tubal_softmax(const Tensor3& x, const TransformMatrix& m);

/// Elementwise exp / log applied in the transform domain.
Tensor3 tubal_exp(const Tensor3& x, const TransformMatrix& m);
Tensor3 tubal_log(const Tensor3& x, const TransformMatrix& m);

/// E = 1/(2 n2) sum_i || -log(y(c_i, i, :)) ||_F^2 over the n2 columns of y.
double tubal_cross_entropy_loss(const Tensor3& y, std::span<const std::size_t> labels,
                                const TransformMatrix& m);
/// Same plus (lambda / 2) * sum of squared parameter norms.
double tubal_cross_entropy_loss(const Tensor3& y, std::span<const std::size_t> labels,
                                const TransformMatrix& m, const NetworkParams& params, double weight_decay);

/// (lambda / 2) * sum of squared parameter norms.
double weight_decay_penalty(const NetworkParams& params, double weight_decay);

/// 1/(2|mask|) sum over the mask of (x_hat - r)^2 + (lambda / 2) sum ||theta||^2.
double masked_squared_loss(const Tensor3& x_hat, const Tensor3& r, const ObservationMask& mask,
                           const NetworkParams& params, double weight_decay);
double masked_squared_loss(const Tensor3& x_hat, const Tensor3& r, const ObservationMask& mask);

}  // namespace tubalnet
