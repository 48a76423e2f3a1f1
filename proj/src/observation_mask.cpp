#include "tubalnet/observation_mask.hpp"

#include <algorithm>

#include "tubalnet/errors.hpp"

namespace tubalnet {

ObservationMask::ObservationMask(Dims dims, bool fill)
    : dims_(dims), observed_(dims.size(), fill ? 1 : 0), count_(fill ? dims.size() : 0) {}

ObservationMask::ObservationMask(Dims dims, std::vector<std::uint8_t> observed)
    : dims_(dims), observed_(std::move(observed)) {
    if (observed_.size() != dims_.size()) {
        throw ShapeError("mask length " + std::to_string(observed_.size()) + " does not match dims " +
                         to_string(dims_));
    }
    for (auto& v : observed_) v = v ? 1 : 0;
    count_ = static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), 1));
}

void ObservationMask::set(std::size_t offset, bool value) {
    auto& slot = observed_.at(offset);
    if ((slot != 0) == value) return;
    slot = value ? 1 : 0;
    if (value) {
        ++count_;
    } else {
        --count_;
    }
}

ObservationMask ObservationMask::complement() const {
    std::vector<std::uint8_t> flipped(observed_.size());
    std::transform(observed_.begin(), observed_.end(), flipped.begin(),
                   [](std::uint8_t v) -> std::uint8_t { return v ? 0 : 1; });
    return ObservationMask(dims_, std::move(flipped));
}

ObservationMask ObservationMask::intersect(const ObservationMask& other) const {
    if (other.dims_ != dims_) {
        throw ShapeError("mask intersect: " + to_string(dims_) + " vs " + to_string(other.dims_));
    }
    std::vector<std::uint8_t> both(observed_.size());
    for (std::size_t n = 0; n < both.size(); ++n) both[n] = observed_[n] & other.observed_[n];
    return ObservationMask(dims_, std::move(both));
}

Tensor3 ObservationMask::apply(const Tensor3& t) const {
    if (t.dims() != dims_) {
        throw ShapeError("mask " + to_string(dims_) + " applied to tensor " + to_string(t.dims()));
    }
    Tensor3 out = t;
    auto d = out.data();
    for (std::size_t n = 0; n < d.size(); ++n)
        if (!observed_[n]) d[n] = 0.0;
    return out;
}

}  // namespace tubalnet
