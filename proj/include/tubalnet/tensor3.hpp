#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tubalnet {

/// Extents of a third-order tensor. Lateral slices are (n, 1, n3) and tubes (1, 1, n3).
struct Dims {
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::size_t n3 = 0;

    std::size_t size() const noexcept { return n1 * n2 * n3; }
    std::size_t slice_size() const noexcept { return n1 * n2; }

    /// Linear offset of (i, j, k): frontal slice k outermost, row-major inside the slice.
    /// Shared by the in-memory layout and both on-disk containers.
    std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return (k * n1 + i) * n2 + j;
    }

    friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Dense real n1 x n2 x n3 tensor.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Dims dims, double fill = 0.0);
    Tensor3(Dims dims, std::vector<double> data);

    static Tensor3 zeros(Dims dims) { return Tensor3(dims, 0.0); }
    static Tensor3 ones(Dims dims) { return Tensor3(dims, 1.0); }
    /// i.i.d. N(0, stddev^2) entries from a seeded mt19937_64.
    static Tensor3 random_gaussian(Dims dims, std::uint64_t seed, double stddev = 1.0);
    /// Tube (1, 1, values.size()).
    static Tensor3 tube(std::span<const double> values);
    static Tensor3 tube(std::initializer_list<double> values);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t n1() const noexcept { return dims_.n1; }
    std::size_t n2() const noexcept { return dims_.n2; }
    std::size_t n3() const noexcept { return dims_.n3; }
    std::size_t size() const noexcept { return data_.size(); }

    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[dims_.offset(i, j, k)];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[dims_.offset(i, j, k)];
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    /// Frontal slice k as a row-major n1 x n2 block.
    std::span<const double> frontal(std::size_t k) const noexcept {
        return std::span<const double>(data_).subspan(k * dims_.slice_size(), dims_.slice_size());
    }
    std::span<double> frontal(std::size_t k) noexcept {
        return std::span<double>(data_).subspan(k * dims_.slice_size(), dims_.slice_size());
    }

    Tensor3 horizontal_slice(std::size_t i) const;  // (1, n2, n3)
    Tensor3 lateral_slice(std::size_t j) const;     // (n1, 1, n3)
    Tensor3 frontal_slice(std::size_t k) const;     // (n1, n2, 1)
    Tensor3 tube_at(std::size_t i, std::size_t j) const;  // (1, 1, n3)

    void set_horizontal_slice(std::size_t i, const Tensor3& s);
    void set_lateral_slice(std::size_t j, const Tensor3& s);
    void set_frontal_slice(std::size_t k, const Tensor3& s);

    /// Lateral slices selected by column index, in the given order.
    Tensor3 lateral_columns(std::span<const std::size_t> columns) const;

    Tensor3 map(const std::function<double(double)>& f) const;

    Tensor3& operator+=(const Tensor3& other);
    Tensor3& operator-=(const Tensor3& other);
    Tensor3& operator*=(double s);
    Tensor3& operator+=(double s);

    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
    friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
    friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

    double frobenius_norm() const;
    double squared_norm() const;
    double max_abs() const;
    bool all_finite() const;

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    Dims dims_{};
    std::vector<double> data_;
};

/// Largest absolute elementwise difference. Throws ShapeError on mismatched dims.
double max_abs_diff(const Tensor3& a, const Tensor3& b);

}  // namespace tubalnet
