#include "tubalnet/transform.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "tubalnet/errors.hpp"

namespace tubalnet {

namespace {

constexpr double kInverseTol = 1e-10;
constexpr double kOrthogonalTol = 1e-10;

void require_size(std::size_t n3) {
    if (n3 == 0) throw ConfigError("transform size must be at least 1");
}

}  // namespace

TransformMatrix::TransformMatrix(Eigen::MatrixXd entries, std::string name)
    : entries_(std::move(entries)), name_(std::move(name)) {
    if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
        throw ShapeError("transform matrix must be square and non-empty, got " +
                         std::to_string(entries_.rows()) + "x" + std::to_string(entries_.cols()));
    }
    const auto n = entries_.rows();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    identity_ = (entries_.array() == eye.array()).all();

    const Eigen::MatrixXd gram = entries_.transpose() * entries_;
    const double c = gram.diagonal().mean();
    if (c > 0.0 && (gram - c * eye).cwiseAbs().maxCoeff() <= kOrthogonalTol * std::max(1.0, c)) {
        orthogonal_scaled_ = true;
        scale_ = c;
        inverse_ = entries_.transpose() / c;
    } else {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(entries_);
        if (!lu.isInvertible()) throw ConfigError("transform matrix is singular");
        inverse_ = lu.inverse();
    }
    if ((entries_ * inverse_ - eye).cwiseAbs().maxCoeff() > kInverseTol) {
        throw ConfigError("transform matrix is too ill-conditioned: M * M^-1 deviates from I by more than 1e-10");
    }
}

TransformMatrix identity_transform(std::size_t n3) {
    require_size(n3);
    const auto n = static_cast<Eigen::Index>(n3);
    return TransformMatrix(Eigen::MatrixXd::Identity(n, n), "identity");
}

TransformMatrix dct_transform(std::size_t n3) {
    require_size(n3);
    const auto n = static_cast<Eigen::Index>(n3);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = std::sqrt((i == 0 ? 1.0 : 2.0) / static_cast<double>(n));
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = c * std::cos(std::numbers::pi * static_cast<double>((2 * j + 1) * i) /
                                   (2.0 * static_cast<double>(n)));
        }
    }
    return TransformMatrix(std::move(m), "dct");
}

TransformMatrix random_orthogonal_transform(std::size_t n3, std::uint64_t seed) {
    require_size(n3);
    const auto n = static_cast<Eigen::Index>(n3);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return TransformMatrix(std::move(q), "rand-orth:" + std::to_string(seed));
}

TransformMatrix make_transform(std::string_view spec, std::size_t n3) {
    if (spec == "dct") return dct_transform(n3);
    if (spec == "identity") return identity_transform(n3);
    constexpr std::string_view prefix = "rand-orth:";
    if (spec.starts_with(prefix)) {
        const auto digits = spec.substr(prefix.size());
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty()) {
            return random_orthogonal_transform(n3, seed);
        }
    }
    throw ConfigError("unknown transform '" + std::string(spec) +
                      "' (expected dct, identity or rand-orth:<seed>)");
}

}  // namespace tubalnet
