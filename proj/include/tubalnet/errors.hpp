#pragma once

#include <stdexcept>
#include <string>

namespace tubalnet {

/// Operand shapes do not chain.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A tube has a (near) zero transform-domain entry and cannot be inverted.
class SingularTubeError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid configuration value or unsupported option combination.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Gradient requested for a transform that is not a multiple of an orthogonal matrix.
class UnsupportedTransformError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A loss or metric was asked to average over an empty index set.
class EmptyObservationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Malformed file contents. The message carries the byte offset or line/column.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int epoch, double learning_rate)
        : std::runtime_error(what), epoch_(epoch), learning_rate_(learning_rate) {}

    int epoch() const noexcept { return epoch_; }
    double learning_rate() const noexcept { return learning_rate_; }

private:
    int epoch_;
    double learning_rate_;
};

}  // namespace tubalnet
