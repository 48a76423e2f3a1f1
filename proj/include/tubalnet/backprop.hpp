#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tubalnet/network.hpp"
#include "tubalnet/observation_mask.hpp"
#include "tubalnet/tensor3.hpp"
#include "tubalnet/transform_matrix.hpp"

namespace tubalnet {

/// Shape mirror of NetworkParams holding dE/d(parameter), plus dE/dX.
struct Gradients {
    std::vector<Tensor3> d_w_u;
    std::vector<Tensor3> d_w_v;
    std::vector<Tensor3> d_b_u;
    std::vector<Tensor3> d_b_v;
    std::optional<Tensor3> d_h;
    Tensor3 d_x;

    /// Same order and names as NetworkParams::blocks().
    std::vector<std::pair<std::string, Tensor3*>> blocks();
    std::vector<std::pair<std::string, const Tensor3*>> blocks() const;
};

enum class ProductSide {
    kLeft,   // gradient w.r.t. A in A *_M other: cotangent *_M other^T
    kRight,  // gradient w.r.t. B in other *_M B: other^T *_M cotangent
};

/// Gradient of f(A *_M B) given the cotangent dF at the product. Valid only for
/// orthogonal-scaled transforms; throws UnsupportedTransformError otherwise.
Tensor3 m_product_gradient(const Tensor3& other, const Tensor3& cotangent, const TransformMatrix& m,
                           ProductSide side);

/// d/dX of the data term of masked_squared_loss: (x_hat - r) / |mask| on the mask, zero elsewhere.
Tensor3 loss_grad_x(const Tensor3& x_hat, const Tensor3& r, const ObservationMask& mask);

/// d/dX of tubal_cross_entropy_loss(tubal_softmax(X), labels) for logits X (n1, n2, n3).
/// Component k of column i: -(y_k - [k == c_i] e) *_M log(y_{c_i}), scaled by 1/n2.
Tensor3 cross_entropy_grad_x(const Tensor3& y, std::span<const std::size_t> labels, const TransformMatrix& m);

/// Back-propagates d_x through the pooling layer and both perceptron branches.
/// Weight decay is not included.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace, const Tensor3& d_x);

struct BlockCheck {
    std::string block;
    std::size_t entries = 0;
    double max_abs_error = 0.0;
    /// Largest |a - n| / max(|a|, |n|) over entries whose absolute error exceeds the floor.
    double max_rel_error = 0.0;
    bool passed = true;
};

struct GradientCheckReport {
    std::vector<BlockCheck> blocks;
    double rel_tolerance = 1e-5;
    double abs_floor = 1e-8;

    bool passed() const;
    double worst_rel_error() const;
};

struct GradientCheckOptions {
    Pooling pooling = Pooling::kStacked;
    double epsilon = 1e-5;  // step = epsilon * (1 + |theta|)
    double rel_tolerance = 1e-5;
    double abs_floor = 1e-8;
    /// Debug hook: negate the analytic gradient of this block before comparing.
    std::optional<std::string> corrupt_block;
};

/// Compares backward() against central finite differences of the masked squared
/// loss (no weight decay) for every parameter entry.
GradientCheckReport finite_difference_check(const NetworkParams& params, const Tensor3& r,
                                            const ObservationMask& mask, const GradientCheckOptions& options = {});

}  // namespace tubalnet
