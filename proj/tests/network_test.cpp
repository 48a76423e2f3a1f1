#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tubalnet/algebra.hpp"
#include "tubalnet/errors.hpp"
#include "tubalnet/network.hpp"
#include "tubalnet/transform.hpp"

namespace tubalnet {
namespace {

NetworkParams zeroed(NetworkParams p) {
    for (auto& [name, t] : p.blocks()) *t = Tensor3::zeros(t->dims());
    return p;
}

NetworkShape shape_of(std::size_t depth, std::size_t m, Activation a, bool slice = false) {
    return NetworkShape{.depth = depth, .latent_dim = m, .activation = a, .pooling_slice = slice, .init_gain = 1.0};
}

TEST(Activation, ParseAndEvaluate) {
    EXPECT_EQ(parse_activation("sigmoid"), Activation::kSigmoid);
    EXPECT_EQ(parse_activation("relu"), Activation::kRelu);
    EXPECT_EQ(parse_activation("tanh"), Activation::kTanh);
    EXPECT_EQ(parse_pooling("tube-wise"), Pooling::kTubeWise);
    EXPECT_EQ(to_string(Pooling::kStacked), "stacked");
    EXPECT_THROW(parse_activation("gelu"), ConfigError);
    EXPECT_THROW(parse_pooling("max"), ConfigError);
    EXPECT_DOUBLE_EQ(activate(Activation::kSigmoid, 0.0), 0.5);
    EXPECT_DOUBLE_EQ(activate_derivative(Activation::kSigmoid, 0.0), 0.25);
    EXPECT_DOUBLE_EQ(activate(Activation::kRelu, -2.0), 0.0);
    EXPECT_DOUBLE_EQ(activate_derivative(Activation::kRelu, 3.0), 1.0);
    EXPECT_DOUBLE_EQ(activate_derivative(Activation::kTanh, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(activate(Activation::kLinear, -4.0), -4.0);
    for (Activation a : {Activation::kSigmoid, Activation::kTanh}) {
        for (double z : {-1.3, 0.2, 2.1}) {
            const double h = 1e-6;
            const double fd = (activate(a, z + h) - activate(a, z - h)) / (2 * h);
            EXPECT_NEAR(activate_derivative(a, z), fd, 1e-8);
        }
    }
}

TEST(InitParams, ShapesAndDeterminism) {
    const Dims d{4, 5, 3};
    const NetworkParams p = init_params(d, shape_of(3, 6, Activation::kTanh, true), dct_transform(3), 1);
    ASSERT_EQ(p.depth(), 3u);
    EXPECT_EQ(p.latent_dim(), 6u);
    EXPECT_EQ(p.w_u[0].dims(), (Dims{6, 5, 3}));
    EXPECT_EQ(p.w_v[0].dims(), (Dims{6, 4, 3}));
    EXPECT_EQ(p.w_u[2].dims(), (Dims{6, 6, 3}));
    ASSERT_EQ(p.b_u.size(), 2u);
    EXPECT_EQ(p.b_v[1].dims(), (Dims{6, 1, 3}));
    ASSERT_TRUE(p.h.has_value());
    EXPECT_EQ(p.h->dims(), (Dims{6, 1, 3}));
    EXPECT_NO_THROW(p.validate(d));
    EXPECT_THROW(p.validate({5, 4, 3}), ShapeError);
    const NetworkParams q = init_params(d, shape_of(3, 6, Activation::kTanh, true), dct_transform(3), 1);
    EXPECT_EQ(p.w_u[1], q.w_u[1]);
    EXPECT_EQ(p.blocks().size(), 3u + 3u + 2u + 2u + 1u);
    EXPECT_THROW(init_params(d, shape_of(1, 6, Activation::kTanh), dct_transform(3), 1), ConfigError);
    EXPECT_THROW(init_params(d, shape_of(2, 6, Activation::kTanh), dct_transform(4), 1), ShapeError);
}

TEST(ExtractLatentInputs, Layout) {
    Tensor3 r({3, 4, 2});
    r(0, 0, 0) = 7.0;
    const LatentInputs single = extract_latent_inputs(r);
    EXPECT_EQ(single.u(0, 0, 0), 7.0);
    EXPECT_EQ(single.v(0, 0, 0), 7.0);

    const Tensor3 x = Tensor3::random_gaussian({3, 4, 2}, 3);
    const LatentInputs in = extract_latent_inputs(x);
    EXPECT_EQ(in.v, x);
    EXPECT_EQ(in.u.dims(), (Dims{4, 3, 2}));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(in.u(j, i, k), x(i, j, k));
}

TEST(Forward, ZeroWeightsSigmoidStacked) {
    // sigmoid(0) = 0.5 in every latent entry; stacked pooling sums m products 0.5 * 0.5.
    const Dims d{3, 4, 1};
    const NetworkParams p =
        zeroed(init_params(d, shape_of(2, 2, Activation::kSigmoid), identity_transform(1), 0));
    const ForwardTrace t = forward(p, Tensor3::random_gaussian(d, 1), Pooling::kStacked);
    for (double v : t.x_hat.data()) EXPECT_DOUBLE_EQ(v, 0.5);
    for (const auto& a : t.u_acts) EXPECT_EQ(a.dims().n3, 1u);
    for (double v : t.u_acts.back().data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Forward, LinearIdentityWeightsIsSliceMatrixFactorization) {
    const std::size_t n = 4, n3 = 3;
    const Dims d{n, n, n3};
    NetworkParams p = zeroed(init_params(d, shape_of(2, n, Activation::kLinear), identity_transform(n3), 0));
    for (auto* w : {&p.w_u[0], &p.w_u[1], &p.w_v[0], &p.w_v[1]})
        for (std::size_t k = 0; k < n3; ++k)
            for (std::size_t i = 0; i < n; ++i) (*w)(i, i, k) = 1.0;
    const Tensor3 r = Tensor3::random_gaussian(d, 4);
    const ForwardTrace t = forward(p, r, Pooling::kStacked);
    const LatentInputs in = extract_latent_inputs(r);
    // U^N = u1, V^N = v1, so x_hat(:,:,k) = u1(:,:,k)^T v1(:,:,k).
    EXPECT_LE(max_abs_diff(t.x_hat, oracle::facewise(oracle::transpose(in.u), in.v)), 1e-10);
}

TEST(Forward, LinearRandomWeightsMatchesOracleChain) {
    const Dims d{3, 5, 4};
    const TransformMatrix m = random_orthogonal_transform(4, 2);
    const NetworkParams p = init_params(d, shape_of(3, 2, Activation::kLinear), m, 5);
    NetworkParams q = p;
    for (auto& b : q.b_u) b = Tensor3::random_gaussian(b.dims(), 9);
    const Tensor3 r = Tensor3::random_gaussian(d, 6);
    const LatentInputs in = extract_latent_inputs(r);
    auto chain = [&](const std::vector<Tensor3>& w, const std::vector<Tensor3>& b, Tensor3 act) {
        for (std::size_t j = 0; j < w.size(); ++j) {
            Tensor3 z = oracle::m_product(w[j], act, m.entries());
            if (j + 1 < w.size())
                for (std::size_t col = 0; col < z.n2(); ++col)
                    for (std::size_t i = 0; i < z.n1(); ++i)
                        for (std::size_t k = 0; k < z.n3(); ++k) z(i, col, k) += b[j](i, 0, k);
            act = z;
        }
        return act;
    };
    const Tensor3 u = chain(q.w_u, q.b_u, in.u);
    const Tensor3 v = chain(q.w_v, q.b_v, in.v);
    const Tensor3 expect = oracle::m_product(oracle::transpose(u), v, m.entries());
    EXPECT_LE(max_abs_diff(forward(q, r, Pooling::kStacked).x_hat, expect), 1e-10);
}

TEST(Forward, TubeWiseMatchesOracle) {
    const Dims d{3, 4, 3};
    const TransformMatrix m = dct_transform(3);
    for (Activation a : {Activation::kSigmoid, Activation::kTanh, Activation::kRelu}) {
        const NetworkParams p = init_params(d, shape_of(2, 3, a, true), m, 8);
        const Tensor3 r = Tensor3::random_gaussian(d, 9);
        const ForwardTrace t = forward(p, r, Pooling::kTubeWise);
        const Tensor3& u = t.u_acts.back();
        const Tensor3& v = t.v_acts.back();
        Tensor3 expect(d);
        for (std::size_t i = 0; i < d.n1; ++i)
            for (std::size_t j = 0; j < d.n2; ++j) {
                Tensor3 pooled({3, 1, 3});
                for (std::size_t l = 0; l < 3; ++l)
                    for (std::size_t k = 0; k < 3; ++k) pooled(l, 0, k) = activate(a, u(l, i, k) * v(l, j, k));
                const Tensor3 tube = oracle::m_product(oracle::transpose(*p.h), pooled, m.entries());
                for (std::size_t k = 0; k < 3; ++k) expect(i, j, k) = tube(0, 0, k);
            }
        EXPECT_LE(max_abs_diff(t.x_hat, expect), 1e-12) << to_string(a);
    }
}

TEST(Forward, TubeWiseZeroSliceGivesZero) {
    const Dims d{3, 4, 2};
    NetworkParams p = init_params(d, shape_of(3, 3, Activation::kSigmoid, true), dct_transform(2), 1);
    *p.h = Tensor3::zeros(p.h->dims());
    EXPECT_EQ(forward(p, Tensor3::random_gaussian(d, 2), Pooling::kTubeWise).x_hat.max_abs(), 0.0);
}

TEST(Forward, TubeWiseWithoutSliceIsConfigError) {
    const Dims d{3, 4, 2};
    const NetworkParams p = init_params(d, shape_of(2, 3, Activation::kSigmoid), dct_transform(2), 1);
    EXPECT_THROW(forward(p, Tensor3::random_gaussian(d, 2), Pooling::kTubeWise), ConfigError);
    EXPECT_THROW(forward(p, Tensor3::random_gaussian({4, 3, 2}, 2), Pooling::kStacked), ShapeError);
}

TEST(Forward, TraceShapesChain) {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<std::size_t> dim(1, 6);
    for (int trial = 0; trial < 20; ++trial) {
        const Dims d{dim(rng), dim(rng), dim(rng)};
        const std::size_t depth = 2 + trial % 3, m = dim(rng);
        const Pooling pool = trial % 2 ? Pooling::kTubeWise : Pooling::kStacked;
        const NetworkParams p =
            init_params(d, shape_of(depth, m, Activation::kTanh, pool == Pooling::kTubeWise), dct_transform(d.n3), rng());
        const ForwardTrace t = forward(p, Tensor3::random_gaussian(d, rng()), pool);
        EXPECT_EQ(t.x_hat.dims(), d);
        ASSERT_EQ(t.u_acts.size(), depth + 1);
        ASSERT_EQ(t.z_v.size(), depth);
        EXPECT_EQ(t.u_acts[0].dims(), (Dims{d.n2, d.n1, d.n3}));
        for (std::size_t j = 1; j <= depth; ++j) {
            EXPECT_EQ(t.u_acts[j].dims(), (Dims{m, d.n1, d.n3}));
            EXPECT_EQ(t.v_acts[j].dims(), (Dims{m, d.n2, d.n3}));
        }
        EXPECT_TRUE(t.x_hat.all_finite());
    }
}

// Classification head

TEST(TubalSoftmax, Examples) {
    const TransformMatrix id = identity_transform(3);
    Tensor3 x({2, 1, 3});
    for (std::size_t k = 0; k < 3; ++k) x(0, 0, k) = x(1, 0, k) = 0.3 * static_cast<double>(k) - 1.0;
    const Tensor3 even = tubal_softmax(x, id);
    for (double v : even.data()) EXPECT_DOUBLE_EQ(v, 0.5);

    const TransformMatrix m = dct_transform(4);
    const Tensor3 single = tubal_softmax(Tensor3::random_gaussian({1, 1, 4}, 3), m);
    EXPECT_LE(max_abs_diff(single, identity_tube(m)), 1e-12);

    const Tensor3 y = tubal_softmax(Tensor3({3, 1, 1}, {1.0, 2.0, 3.0}), identity_transform(1));
    EXPECT_NEAR(y(0, 0, 0), 0.0900, 5e-5);
    EXPECT_NEAR(y(1, 0, 0), 0.2447, 5e-5);
    EXPECT_NEAR(y(2, 0, 0), 0.6652, 5e-5);
}

TEST(TubalSoftmax, NormalizesToIdentityTube) {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> dim(1, 6);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n1 = dim(rng), n2 = dim(rng), n3 = dim(rng);
        const TransformMatrix m = trial % 3 == 0   ? identity_transform(n3)
                                  : trial % 3 == 1 ? dct_transform(n3)
                                                   : random_orthogonal_transform(n3, rng());
        const Tensor3 y = tubal_softmax(Tensor3::random_gaussian({n1, n2, n3}, rng(), 3.0), m);
        const Tensor3 e = identity_tube(m);
        for (std::size_t j = 0; j < n2; ++j)
            for (std::size_t k = 0; k < n3; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < n1; ++i) s += y(i, j, k);
                EXPECT_NEAR(s, e(0, 0, k), 1e-10);
            }
    }
}

TEST(TubalSoftmax, ScalarCaseMatchesOracle) {
    std::mt19937_64 rng(32);
    const TransformMatrix id = identity_transform(1);
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor3 x = Tensor3::random_gaussian({5, 3, 1}, rng(), 4.0);
        const Tensor3 y = tubal_softmax(x, id);
        std::vector<std::vector<double>> probs;
        std::vector<std::size_t> labels;
        for (std::size_t j = 0; j < 3; ++j) {
            std::vector<double> col;
            for (std::size_t i = 0; i < 5; ++i) col.push_back(x(i, j, 0));
            const auto p = oracle::softmax(col);
            for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(y(i, j, 0), p[i], 1e-12);
            probs.push_back(p);
            labels.push_back((j + static_cast<std::size_t>(trial)) % 5);
        }
        EXPECT_NEAR(tubal_cross_entropy_loss(y, labels, id), oracle::half_squared_cross_entropy(probs, labels), 1e-12);
    }
}

TEST(TubalCrossEntropy, Examples) {
    const TransformMatrix m = dct_transform(3);
    Tensor3 y({2, 1, 3});
    y.set_horizontal_slice(0, identity_tube(m));
    y(1, 0, 0) = 0.1;
    const std::vector<std::size_t> first = {0};
    EXPECT_NEAR(tubal_cross_entropy_loss(y, first, m), 0.0, 1e-24);

    const Tensor3 half({2, 1, 1}, {0.5, 0.5});
    const std::vector<std::size_t> label = {1};
    EXPECT_NEAR(tubal_cross_entropy_loss(half, label, identity_transform(1)), 0.5 * std::log(2.0) * std::log(2.0),
                1e-15);
    EXPECT_NEAR(0.5 * std::log(2.0) * std::log(2.0), 0.2402, 5e-5);

    const std::vector<std::size_t> bad = {2};
    EXPECT_THROW(tubal_cross_entropy_loss(half, bad, identity_transform(1)), IndexError);
}

TEST(TubalCrossEntropy, DuplicatedSamplesLeaveLossUnchanged) {
    const TransformMatrix m = dct_transform(2);
    const Tensor3 y = tubal_softmax(Tensor3::random_gaussian({3, 2, 2}, 4), m);
    Tensor3 twice({3, 4, 2});
    for (std::size_t j = 0; j < 4; ++j) twice.set_lateral_slice(j, y.lateral_slice(j % 2));
    const std::vector<std::size_t> l2 = {0, 2};
    const std::vector<std::size_t> l4 = {0, 2, 0, 2};
    EXPECT_NEAR(tubal_cross_entropy_loss(y, l2, m), tubal_cross_entropy_loss(twice, l4, m), 1e-14);
}

TEST(TubalExpLog, AreInverses) {
    const TransformMatrix m = random_orthogonal_transform(4, 5);
    const Tensor3 x = Tensor3::random_gaussian({2, 3, 4}, 6);
    EXPECT_LE(max_abs_diff(tubal_log(tubal_exp(x, m), m), x), 1e-12);
    EXPECT_THROW(tubal_log(Tensor3::tube({-1.0}), identity_transform(1)), SingularTubeError);
}

// Completion loss

TEST(MaskedSquaredLoss, Examples) {
    const Tensor3 r = Tensor3::random_gaussian({3, 3, 2}, 7);
    const ObservationMask all = ObservationMask::all(r.dims());
    EXPECT_EQ(masked_squared_loss(r, r, all), 0.0);

    ObservationMask one = ObservationMask::none(r.dims());
    one.set(4, true);
    Tensor3 x = r;
    x.data()[4] += 2.0;
    EXPECT_DOUBLE_EQ(masked_squared_loss(x, r, one), 2.0);

    const Tensor3 e = Tensor3::random_gaussian(r.dims(), 8);
    ObservationMask half = ObservationMask::none(r.dims());
    for (std::size_t n = 0; n < r.size(); n += 2) half.set(n, true);
    EXPECT_NEAR(masked_squared_loss(e, r, half), oracle::masked_loss(e, r, half), 1e-14);

    EXPECT_THROW(masked_squared_loss(e, r, ObservationMask::none(r.dims())), EmptyObservationError);
    EXPECT_THROW(masked_squared_loss(e, Tensor3({3, 3, 1}), half), ShapeError);
}

TEST(MaskedSquaredLoss, IgnoresValuesOutsideMask) {
    const Tensor3 r = Tensor3::random_gaussian({4, 3, 2}, 9);
    const Tensor3 x = Tensor3::random_gaussian({4, 3, 2}, 10);
    ObservationMask mask = ObservationMask::none(r.dims());
    for (std::size_t n = 0; n < r.size(); n += 3) mask.set(n, true);
    Tensor3 perturbed = r;
    for (std::size_t n = 0; n < r.size(); ++n)
        if (!mask[n]) perturbed.data()[n] += 100.0;
    EXPECT_EQ(masked_squared_loss(x, r, mask), masked_squared_loss(x, perturbed, mask));
}

TEST(MaskedSquaredLoss, WeightDecayTerm) {
    const Dims d{2, 3, 2};
    const NetworkParams p = init_params(d, shape_of(2, 2, Activation::kTanh), dct_transform(2), 3);
    const Tensor3 r = Tensor3::random_gaussian(d, 4);
    const ObservationMask all = ObservationMask::all(d);
    double sq = 0.0;
    for (const auto& [name, t] : p.blocks()) sq += t->squared_norm();
    EXPECT_NEAR(masked_squared_loss(r, r, all, p, 0.1), 0.05 * sq, 1e-14);
    EXPECT_NEAR(weight_decay_penalty(p, 0.1), 0.05 * sq, 1e-14);
    EXPECT_NEAR(p.squared_norm(), sq, 1e-12);
}

}  // namespace
}  // namespace tubalnet
