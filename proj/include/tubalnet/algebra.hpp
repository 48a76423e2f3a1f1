#pragma once

#include <Eigen/Dense>

#include "tubalnet/tensor3.hpp"
#include "tubalnet/transform_matrix.hpp"

namespace tubalnet {

/// Applies a p x n3 matrix to every tube: result(i, j, :) = m * a(i, j, :).
Tensor3 mode3_product(const Tensor3& a, const Eigen::MatrixXd& m);
Tensor3 mode3_product(const Tensor3& a, const TransformMatrix& m);

/// Into / out of the transform domain.
Tensor3 to_transform_domain(const Tensor3& a, const TransformMatrix& m);
Tensor3 from_transform_domain(const Tensor3& a, const TransformMatrix& m);

/// Slice-wise matrix product of (l, p, n) and (p, q, n).
Tensor3 facewise_product(const Tensor3& a, const Tensor3& b);

/// a *_M b = ((a x3 M) facewise (b x3 M)) x3 M^-1.
Tensor3 m_product(const Tensor3& a, const Tensor3& b, const TransformMatrix& m);

/// Tensor transpose under *_M: transform-domain frontal slices are transposed.
/// Mode-3 products act on tubes only, so this is the spatial slice-wise transpose.
Tensor3 t_transpose(const Tensor3& a, const TransformMatrix& m);
Tensor3 t_transpose(const Tensor3& a);

Tensor3 hadamard(const Tensor3& a, const Tensor3& b);

/// Tube whose transform-domain entries are all one; the unit of *_M on tubes.
Tensor3 identity_tube(const TransformMatrix& m);

/// Multiplicative inverse of a tube under *_M. Throws SingularTubeError when any
/// transform-domain entry has magnitude <= 1e-12.
Tensor3 tubal_inverse(const Tensor3& x, const TransformMatrix& m);

/// Sum over the second index: (n1, n2, n3) -> (n1, 1, n3).
Tensor3 sum_dim2(const Tensor3& a);

/// Adds lateral slice b (n1, 1, n3) to every lateral slice of a.
Tensor3 add_lateral_broadcast(Tensor3 a, const Tensor3& b);

}  // namespace tubalnet
