#include "tubalnet/tensor3.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tubalnet/errors.hpp"

namespace tubalnet {

std::string to_string(const Dims& d) {
    return std::to_string(d.n1) + "x" + std::to_string(d.n2) + "x" + std::to_string(d.n3);
}

namespace {

void require_positive(const Dims& d) {
    if (d.n1 == 0 || d.n2 == 0 || d.n3 == 0) {
        throw ShapeError("tensor dims must be positive, got " + to_string(d));
    }
}

void require_same(const Dims& a, const Dims& b, const char* op) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
    }
}

}  // namespace

Tensor3::Tensor3(Dims dims, double fill) : dims_(dims) {
    require_positive(dims_);
    data_.assign(dims_.size(), fill);
}

Tensor3::Tensor3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    require_positive(dims_);
    if (data_.size() != dims_.size()) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match dims " +
                         to_string(dims_));
    }
}

Tensor3 Tensor3::random_gaussian(Dims dims, std::uint64_t seed, double stddev) {
    Tensor3 t(dims);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    for (double& v : t.data_) v = normal(rng);
    return t;
}

Tensor3 Tensor3::tube(std::span<const double> values) {
    return Tensor3({1, 1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor3 Tensor3::tube(std::initializer_list<double> values) {
    return tube(std::span<const double>(values.begin(), values.size()));
}

Tensor3 Tensor3::horizontal_slice(std::size_t i) const {
    if (i >= n1()) throw IndexError("horizontal slice " + std::to_string(i) + " out of range");
    Tensor3 s({1, n2(), n3()});
    for (std::size_t k = 0; k < n3(); ++k)
        for (std::size_t j = 0; j < n2(); ++j) s(0, j, k) = (*this)(i, j, k);
    return s;
}

Tensor3 Tensor3::lateral_slice(std::size_t j) const {
    if (j >= n2()) throw IndexError("lateral slice " + std::to_string(j) + " out of range");
    Tensor3 s({n1(), 1, n3()});
    for (std::size_t k = 0; k < n3(); ++k)
        for (std::size_t i = 0; i < n1(); ++i) s(i, 0, k) = (*this)(i, j, k);
    return s;
}

Tensor3 Tensor3::frontal_slice(std::size_t k) const {
    if (k >= n3()) throw IndexError("frontal slice " + std::to_string(k) + " out of range");
    auto f = frontal(k);
    return Tensor3({n1(), n2(), 1}, std::vector<double>(f.begin(), f.end()));
}

Tensor3 Tensor3::tube_at(std::size_t i, std::size_t j) const {
    if (i >= n1() || j >= n2()) throw IndexError("tube index out of range");
    Tensor3 t({1, 1, n3()});
    for (std::size_t k = 0; k < n3(); ++k) t(0, 0, k) = (*this)(i, j, k);
    return t;
}

void Tensor3::set_horizontal_slice(std::size_t i, const Tensor3& s) {
    if (i >= n1()) throw IndexError("horizontal slice " + std::to_string(i) + " out of range");
    require_same(s.dims(), {1, n2(), n3()}, "set_horizontal_slice");
    for (std::size_t k = 0; k < n3(); ++k)
        for (std::size_t j = 0; j < n2(); ++j) (*this)(i, j, k) = s(0, j, k);
}

void Tensor3::set_lateral_slice(std::size_t j, const Tensor3& s) {
    if (j >= n2()) throw IndexError("lateral slice " + std::to_string(j) + " out of range");
    require_same(s.dims(), {n1(), 1, n3()}, "set_lateral_slice");
    for (std::size_t k = 0; k < n3(); ++k)
        for (std::size_t i = 0; i < n1(); ++i) (*this)(i, j, k) = s(i, 0, k);
}

void Tensor3::set_frontal_slice(std::size_t k, const Tensor3& s) {
    if (k >= n3()) throw IndexError("frontal slice " + std::to_string(k) + " out of range");
    require_same(s.dims(), {n1(), n2(), 1}, "set_frontal_slice");
    std::copy(s.data_.begin(), s.data_.end(), frontal(k).begin());
}

Tensor3 Tensor3::lateral_columns(std::span<const std::size_t> columns) const {
    if (columns.empty()) throw ShapeError("lateral_columns: empty column selection");
    Tensor3 out({n1(), columns.size(), n3()});
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] >= n2()) throw IndexError("lateral column " + std::to_string(columns[c]));
        for (std::size_t k = 0; k < n3(); ++k)
            for (std::size_t i = 0; i < n1(); ++i) out(i, c, k) = (*this)(i, columns[c], k);
    }
    return out;
}

Tensor3 Tensor3::map(const std::function<double(double)>& f) const {
    Tensor3 out = *this;
    for (double& v : out.data_) v = f(v);
    return out;
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
    require_same(dims_, other.dims_, "add");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += other.data_[n];
    return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
    require_same(dims_, other.dims_, "subtract");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= other.data_[n];
    return *this;
}

Tensor3& Tensor3::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor3& Tensor3::operator+=(double s) {
    for (double& v : data_) v += s;
    return *this;
}

double Tensor3::squared_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return acc;
}

double Tensor3::frobenius_norm() const { return std::sqrt(squared_norm()); }

double Tensor3::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Tensor3::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
    require_same(a.dims(), b.dims(), "max_abs_diff");
    double m = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t n = 0; n < x.size(); ++n) m = std::max(m, std::abs(x[n] - y[n]));
    return m;
}

}  // namespace tubalnet
