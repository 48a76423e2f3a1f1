#include "tubalnet/algebra.hpp"

#include <cmath>
#include <string>

#include "tubalnet/errors.hpp"
#include "tubalnet/parallel.hpp"

namespace tubalnet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

constexpr double kSingularTol = 1e-12;

void require_transform_size(const Tensor3& a, const TransformMatrix& m, const char* op) {
    if (a.n3() != m.size()) {
        throw ShapeError(std::string(op) + ": tensor " + to_string(a.dims()) +
                         " does not match transform of size " + std::to_string(m.size()));
    }
}

void require_tube(const Tensor3& x, const char* op) {
    if (x.n1() != 1 || x.n2() != 1) {
        throw ShapeError(std::string(op) + ": expected a tube (1x1xn3), got " + to_string(x.dims()));
    }
}

}  // namespace

Tensor3 mode3_product(const Tensor3& a, const Eigen::MatrixXd& m) {
    if (static_cast<std::size_t>(m.cols()) != a.n3() || m.rows() == 0) {
        throw ShapeError("mode3_product: matrix " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " incompatible with tensor " + to_string(a.dims()));
    }
    const auto p = static_cast<std::size_t>(m.rows());
    const auto plane = static_cast<Eigen::Index>(a.dims().slice_size());
    Tensor3 out({a.n1(), a.n2(), p});
    ConstRowMap src(a.data().data(), static_cast<Eigen::Index>(a.n3()), plane);
    RowMap dst(out.data().data(), static_cast<Eigen::Index>(p), plane);
    dst.noalias() = m * src;
    return out;
}

Tensor3 mode3_product(const Tensor3& a, const TransformMatrix& m) {
    require_transform_size(a, m, "mode3_product");
    if (m.is_identity()) return a;
    return mode3_product(a, m.entries());
}

Tensor3 to_transform_domain(const Tensor3& a, const TransformMatrix& m) { return mode3_product(a, m); }

Tensor3 from_transform_domain(const Tensor3& a, const TransformMatrix& m) {
    require_transform_size(a, m, "from_transform_domain");
    if (m.is_identity()) return a;
    return mode3_product(a, m.inverse());
}

Tensor3 facewise_product(const Tensor3& a, const Tensor3& b) {
    if (a.n2() != b.n1() || a.n3() != b.n3()) {
        throw ShapeError("facewise_product: cannot multiply " + to_string(a.dims()) + " by " +
                         to_string(b.dims()));
    }
    const std::size_t l = a.n1(), p = a.n2(), q = b.n2(), n = a.n3();
    Tensor3 out({l, q, n});
    parallel_for(n, l * p * q, [&](std::size_t k) {
        ConstRowMap ak(a.frontal(k).data(), static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(p));
        ConstRowMap bk(b.frontal(k).data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        RowMap ck(out.frontal(k).data(), static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(q));
        ck.noalias() = ak * bk;
    });
    return out;
}

Tensor3 m_product(const Tensor3& a, const Tensor3& b, const TransformMatrix& m) {
    require_transform_size(a, m, "m_product");
    require_transform_size(b, m, "m_product");
    if (m.is_identity()) return facewise_product(a, b);
    return from_transform_domain(facewise_product(to_transform_domain(a, m), to_transform_domain(b, m)), m);
}

Tensor3 t_transpose(const Tensor3& a) {
    Tensor3 out({a.n2(), a.n1(), a.n3()});
    for (std::size_t k = 0; k < a.n3(); ++k)
        for (std::size_t i = 0; i < a.n1(); ++i)
            for (std::size_t j = 0; j < a.n2(); ++j) out(j, i, k) = a(i, j, k);
    return out;
}

Tensor3 t_transpose(const Tensor3& a, const TransformMatrix& m) {
    require_transform_size(a, m, "t_transpose");
    return t_transpose(a);
}

Tensor3 hadamard(const Tensor3& a, const Tensor3& b) {
    if (a.dims() != b.dims()) {
        throw ShapeError("hadamard: shape mismatch " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    }
    Tensor3 out = a;
    auto o = out.data();
    auto y = b.data();
    for (std::size_t n = 0; n < o.size(); ++n) o[n] *= y[n];
    return out;
}

Tensor3 identity_tube(const TransformMatrix& m) {
    return from_transform_domain(Tensor3::ones({1, 1, m.size()}), m);
}

Tensor3 tubal_inverse(const Tensor3& x, const TransformMatrix& m) {
    require_tube(x, "tubal_inverse");
    require_transform_size(x, m, "tubal_inverse");
    Tensor3 hat = to_transform_domain(x, m);
    for (std::size_t k = 0; k < hat.n3(); ++k) {
        double& v = hat(0, 0, k);
        if (!(std::abs(v) > kSingularTol)) {
            throw SingularTubeError("tubal_inverse: transform-domain entry " + std::to_string(k) +
                                    " is " + std::to_string(v) + " (|.| <= 1e-12)");
        }
        v = 1.0 / v;
    }
    return from_transform_domain(hat, m);
}

Tensor3 sum_dim2(const Tensor3& a) {
    Tensor3 out({a.n1(), 1, a.n3()});
    for (std::size_t k = 0; k < a.n3(); ++k)
        for (std::size_t i = 0; i < a.n1(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < a.n2(); ++j) acc += a(i, j, k);
            out(i, 0, k) = acc;
        }
    return out;
}

Tensor3 add_lateral_broadcast(Tensor3 a, const Tensor3& b) {
    if (b.n1() != a.n1() || b.n2() != 1 || b.n3() != a.n3()) {
        throw ShapeError("add_lateral_broadcast: bias " + to_string(b.dims()) + " does not fit " +
                         to_string(a.dims()));
    }
    for (std::size_t k = 0; k < a.n3(); ++k)
        for (std::size_t i = 0; i < a.n1(); ++i) {
            const double bias = b(i, 0, k);
            for (std::size_t j = 0; j < a.n2(); ++j) a(i, j, k) += bias;
        }
    return a;
}

}  // namespace tubalnet
