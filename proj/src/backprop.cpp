#include "tubalnet/backprop.hpp"

#include <algorithm>
#include <cmath>

#include "tubalnet/algebra.hpp"
#include "tubalnet/errors.hpp"

namespace tubalnet {

std::vector<std::pair<std::string, Tensor3*>> Gradients::blocks() {
    std::vector<std::pair<std::string, Tensor3*>> out;
    for (std::size_t j = 0; j < d_w_u.size(); ++j) out.emplace_back("w_u[" + std::to_string(j) + "]", &d_w_u[j]);
    for (std::size_t j = 0; j < d_w_v.size(); ++j) out.emplace_back("w_v[" + std::to_string(j) + "]", &d_w_v[j]);
    for (std::size_t j = 0; j < d_b_u.size(); ++j) out.emplace_back("b_u[" + std::to_string(j) + "]", &d_b_u[j]);
    for (std::size_t j = 0; j < d_b_v.size(); ++j) out.emplace_back("b_v[" + std::to_string(j) + "]", &d_b_v[j]);
    if (d_h) out.emplace_back("h", &*d_h);
    return out;
}

std::vector<std::pair<std::string, const Tensor3*>> Gradients::blocks() const {
    std::vector<std::pair<std::string, const Tensor3*>> out;
    for (auto& [name, t] : const_cast<Gradients*>(this)->blocks()) out.emplace_back(name, t);
    return out;
}

Tensor3 m_product_gradient(const Tensor3& other, const Tensor3& cotangent, const TransformMatrix& m,
                           ProductSide side) {
    if (!m.orthogonal_scaled()) {
        throw UnsupportedTransformError("m_product_gradient: transform '" + m.name() +
                                        "' is not a multiple of an orthogonal matrix");
    }
    if (side == ProductSide::kRight) return m_product(t_transpose(other, m), cotangent, m);
    return m_product(cotangent, t_transpose(other, m), m);
}

Tensor3 loss_grad_x(const Tensor3& x_hat, const Tensor3& r, const ObservationMask& mask) {
    if (x_hat.dims() != r.dims() || mask.dims() != r.dims()) {
        throw ShapeError("loss_grad_x: shapes " + to_string(x_hat.dims()) + ", " + to_string(r.dims()) +
                         ", mask " + to_string(mask.dims()));
    }
    if (mask.count() == 0) throw EmptyObservationError("loss_grad_x: empty observation set");
    const double inv = 1.0 / static_cast<double>(mask.count());
    Tensor3 g(x_hat.dims());
    auto out = g.data();
    auto x = x_hat.data();
    auto t = r.data();
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = mask[n] ? (x[n] - t[n]) * inv : 0.0;
    return g;
}

Tensor3 cross_entropy_grad_x(const Tensor3& y, std::span<const std::size_t> labels, const TransformMatrix& m) {
    if (!m.orthogonal_scaled()) {
        throw UnsupportedTransformError("cross_entropy_grad_x: transform '" + m.name() +
                                        "' is not a multiple of an orthogonal matrix");
    }
    if (labels.size() != y.n2()) {
        throw ShapeError("expected " + std::to_string(y.n2()) + " labels, got " + std::to_string(labels.size()));
    }
    const std::size_t classes = y.n1();
    const std::size_t n3 = y.n3();
    const Tensor3 e = identity_tube(m);
    Tensor3 grad(y.dims());
    for (std::size_t col = 0; col < y.n2(); ++col) {
        const std::size_t c = labels[col];
        if (c >= classes) {
            throw IndexError("label " + std::to_string(c) + " out of range for " + std::to_string(classes) +
                             " classes");
        }
        const Tensor3 log_yc = tubal_log(y.tube_at(c, col), m);
        for (std::size_t k = 0; k < classes; ++k) {
            Tensor3 factor = y.tube_at(k, col);
            if (k == c) factor -= e;
            const Tensor3 g = m_product(factor, log_yc, m);
            for (std::size_t t = 0; t < n3; ++t) grad(k, col, t) = -g(0, 0, t);
        }
    }
    grad *= 1.0 / static_cast<double>(y.n2());
    return grad;
}

namespace {

// Walks one perceptron branch from its output cotangent back to layer 0.
void backward_branch(const std::vector<Tensor3>& weights, const std::vector<Tensor3>& acts,
                     const std::vector<Tensor3>& zs, const NetworkParams& params, Tensor3 d_act,
                     std::vector<Tensor3>& d_w, std::vector<Tensor3>& d_b) {
    const std::size_t n = weights.size();
    d_w.assign(n, Tensor3{});
    d_b.assign(n - 1, Tensor3{});
    for (std::size_t layer = n; layer-- > 0;) {
        const Tensor3 d_pre = hadamard(activate_derivative(params.activation, zs[layer]), d_act);
        d_w[layer] = m_product_gradient(acts[layer], d_pre, params.transform, ProductSide::kLeft);
        if (layer + 1 < n) d_b[layer] = sum_dim2(d_pre);
        if (layer > 0) {
            d_act = m_product_gradient(weights[layer], d_pre, params.transform, ProductSide::kRight);
        }
    }
}

void check_trace(const NetworkParams& params, const ForwardTrace& trace, const Tensor3& d_x) {
    const std::size_t n = params.depth();
    if (trace.u_acts.size() != n + 1 || trace.v_acts.size() != n + 1 || trace.z_u.size() != n ||
        trace.z_v.size() != n) {
        throw ShapeError("backward: trace depth does not match parameter depth " + std::to_string(n));
    }
    if (d_x.dims() != trace.x_hat.dims()) {
        throw ShapeError("backward: d_x " + to_string(d_x.dims()) + " does not match output " +
                         to_string(trace.x_hat.dims()));
    }
    const Dims data{trace.v_acts.front().n1(), trace.u_acts.front().n1(), trace.x_hat.n3()};
    params.validate(data);
    for (std::size_t j = 0; j < n; ++j) {
        if (trace.z_u[j].dims() != trace.u_acts[j + 1].dims() || trace.z_v[j].dims() != trace.v_acts[j + 1].dims()) {
            throw ShapeError("backward: trace layer " + std::to_string(j) + " is inconsistent");
        }
    }
}

// Tube-wise pooling: X(i, j, :) = M^-1 sum_l h_hat_l (.) M act(u_li (.) v_lj).
void backward_tubewise(const NetworkParams& params, const Tensor3& u, const Tensor3& v, const Tensor3& d_x,
                       Tensor3& d_u, Tensor3& d_v, Tensor3& d_h) {
    const TransformMatrix& m = params.transform;
    const Eigen::MatrixXd& fwd = m.entries();
    const std::size_t latent = u.n1();
    const std::size_t n3 = u.n3();
    const Tensor3& h = *params.h;

    Eigen::MatrixXd h_hat(latent, n3);
    for (std::size_t l = 0; l < latent; ++l)
        for (std::size_t f = 0; f < n3; ++f) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n3; ++t) acc += fwd(f, t) * h(l, 0, t);
            h_hat(l, f) = acc;
        }

    // Cotangent in the transform domain: x = M^-1 x_hat  =>  g_hat = M^-T g.
    const Tensor3 g_hat = mode3_product(d_x, Eigen::MatrixXd(m.inverse().transpose()));

    d_u = Tensor3::zeros(u.dims());
    d_v = Tensor3::zeros(v.dims());
    Eigen::MatrixXd d_h_hat = Eigen::MatrixXd::Zero(latent, n3);
    Eigen::MatrixXd pre(latent, n3);
    Eigen::MatrixXd pooled(latent, n3);
    for (std::size_t i = 0; i < u.n2(); ++i) {
        for (std::size_t j = 0; j < v.n2(); ++j) {
            Eigen::RowVectorXd g(n3);
            for (std::size_t f = 0; f < n3; ++f) g(static_cast<Eigen::Index>(f)) = g_hat(i, j, f);
            for (std::size_t l = 0; l < latent; ++l)
                for (std::size_t t = 0; t < n3; ++t) {
                    pre(l, t) = u(l, i, t) * v(l, j, t);
                    pooled(l, t) = activate(params.activation, pre(l, t));
                }
            const Eigen::MatrixXd pooled_hat = pooled * fwd.transpose();
            d_h_hat.array() += pooled_hat.array().rowwise() * g.array();
            const Eigen::MatrixXd d_pooled_hat = (h_hat.array().rowwise() * g.array()).matrix();
            const Eigen::MatrixXd d_pooled = d_pooled_hat * fwd;
            for (std::size_t l = 0; l < latent; ++l)
                for (std::size_t t = 0; t < n3; ++t) {
                    const double d_pre = activate_derivative(params.activation, pre(l, t)) * d_pooled(l, t);
                    d_u(l, i, t) += d_pre * v(l, j, t);
                    d_v(l, j, t) += d_pre * u(l, i, t);
                }
        }
    }
    const Eigen::MatrixXd d_h_mat = d_h_hat * fwd;
    d_h = Tensor3({latent, 1, n3});
    for (std::size_t l = 0; l < latent; ++l)
        for (std::size_t t = 0; t < n3; ++t) d_h(l, 0, t) = d_h_mat(l, t);
}

}  // namespace

Gradients backward(const NetworkParams& params, const ForwardTrace& trace, const Tensor3& d_x) {
    check_trace(params, trace, d_x);
    const Tensor3& u_top = trace.u_acts.back();
    const Tensor3& v_top = trace.v_acts.back();

    Gradients grads;
    grads.d_x = d_x;
    Tensor3 d_u_top;
    Tensor3 d_v_top;
    if (trace.pooling == Pooling::kStacked) {
        // X = U^T *_M V: dU = V *_M dX^T, dV = U *_M dX.
        d_u_top = t_transpose(m_product_gradient(v_top, d_x, params.transform, ProductSide::kLeft));
        d_v_top = m_product_gradient(t_transpose(u_top), d_x, params.transform, ProductSide::kRight);
    } else {
        if (!params.h) throw ConfigError("tube-wise pooling requires the pooling slice h");
        if (!params.transform.orthogonal_scaled()) {
            throw UnsupportedTransformError("backward: transform '" + params.transform.name() +
                                            "' is not a multiple of an orthogonal matrix");
        }
        Tensor3 d_h;
        backward_tubewise(params, u_top, v_top, d_x, d_u_top, d_v_top, d_h);
        grads.d_h = std::move(d_h);
    }
    if (trace.pooling == Pooling::kStacked && params.h) grads.d_h = Tensor3::zeros(params.h->dims());

    backward_branch(params.w_u, trace.u_acts, trace.z_u, params, std::move(d_u_top), grads.d_w_u, grads.d_b_u);
    backward_branch(params.w_v, trace.v_acts, trace.z_v, params, std::move(d_v_top), grads.d_w_v, grads.d_b_v);
    return grads;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

bool GradientCheckReport::passed() const {
    return std::all_of(blocks.begin(), blocks.end(), [](const BlockCheck& b) { return b.passed; });
}

double GradientCheckReport::worst_rel_error() const {
    double worst = 0.0;
    for (const auto& b : blocks) worst = std::max(worst, b.max_rel_error);
    return worst;
}

GradientCheckReport finite_difference_check(const NetworkParams& params, const Tensor3& r,
                                            const ObservationMask& mask, const GradientCheckOptions& options) {
    if (!(options.epsilon > 0.0)) throw ConfigError("finite-difference epsilon must be positive");

    const ForwardTrace trace = forward(params, r, options.pooling);
    Gradients analytic = backward(params, trace, loss_grad_x(trace.x_hat, r, mask));

    NetworkParams probe = params;
    auto loss_at = [&]() { return masked_squared_loss(forward(probe, r, options.pooling).x_hat, r, mask); };

    GradientCheckReport report;
    report.rel_tolerance = options.rel_tolerance;
    report.abs_floor = options.abs_floor;
    auto grad_blocks = analytic.blocks();
    auto param_blocks = probe.blocks();
    for (std::size_t b = 0; b < param_blocks.size(); ++b) {
        auto& [name, theta] = param_blocks[b];
        const Tensor3& grad = *grad_blocks[b].second;
        const double sign = (options.corrupt_block && *options.corrupt_block == name) ? -1.0 : 1.0;

        BlockCheck check;
        check.block = name;
        check.entries = theta->size();
        auto values = theta->data();
        for (std::size_t n = 0; n < values.size(); ++n) {
            const double saved = values[n];
            const double step = options.epsilon * (1.0 + std::abs(saved));
            values[n] = saved + step;
            const double up = loss_at();
            values[n] = saved - step;
            const double down = loss_at();
            values[n] = saved;

            const double numeric = (up - down) / (2.0 * step);
            const double exact = sign * grad.data()[n];
            const double abs_err = std::abs(exact - numeric);
            check.max_abs_error = std::max(check.max_abs_error, abs_err);
            if (abs_err > options.abs_floor) {
                const double rel = abs_err / std::max(std::abs(exact), std::abs(numeric));
                check.max_rel_error = std::max(check.max_rel_error, rel);
                if (rel > options.rel_tolerance) check.passed = false;
            }
        }
        report.blocks.push_back(std::move(check));
    }
    return report;
}

}  // namespace tubalnet
