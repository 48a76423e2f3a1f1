#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tubalnet/tensor3.hpp"

namespace tubalnet {

/// Indicator of the observed index set, in the same element order as Tensor3.
class ObservationMask {
public:
    ObservationMask() = default;
    ObservationMask(Dims dims, bool fill);
    ObservationMask(Dims dims, std::vector<std::uint8_t> observed);

    static ObservationMask all(Dims dims) { return ObservationMask(dims, true); }
    static ObservationMask none(Dims dims) { return ObservationMask(dims, false); }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return observed_.size(); }
    std::size_t count() const noexcept { return count_; }

    bool operator[](std::size_t offset) const noexcept { return observed_[offset] != 0; }
    bool operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return observed_[dims_.offset(i, j, k)] != 0;
    }
    void set(std::size_t offset, bool value);

    ObservationMask complement() const;
    /// Entries observed in both.
    ObservationMask intersect(const ObservationMask& other) const;

    /// Zero outside the mask.
    Tensor3 apply(const Tensor3& t) const;

    friend bool operator==(const ObservationMask&, const ObservationMask&) = default;

private:
    Dims dims_{};
    std::vector<std::uint8_t> observed_;
    std::size_t count_ = 0;
};

}  // namespace tubalnet
