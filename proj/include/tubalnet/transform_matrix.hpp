#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace tubalnet {

/// Invertible n3 x n3 matrix defining the *_M-product.
///
/// The inverse is computed and verified (entries * inverse == I to 1e-10) at
/// construction. When M^T M == c I for some c > 0 the transform is flagged
/// orthogonal-scaled; the simplified gradient rule is only valid in that case.
class TransformMatrix {
public:
    explicit TransformMatrix(Eigen::MatrixXd entries, std::string name = "custom");

    std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    const Eigen::MatrixXd& inverse() const noexcept { return inverse_; }
    bool orthogonal_scaled() const noexcept { return orthogonal_scaled_; }
    /// c in M^T M = c I; meaningful only when orthogonal_scaled().
    double scale() const noexcept { return scale_; }
    bool is_identity() const noexcept { return identity_; }
    const std::string& name() const noexcept { return name_; }

private:
    Eigen::MatrixXd entries_;
    Eigen::MatrixXd inverse_;
    bool orthogonal_scaled_ = false;
    bool identity_ = false;
    double scale_ = 0.0;
    std::string name_;
};

}  // namespace tubalnet
