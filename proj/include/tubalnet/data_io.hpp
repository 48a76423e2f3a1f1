#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tubalnet/observation_mask.hpp"
#include "tubalnet/tensor3.hpp"

namespace tubalnet {

// Tensor container ("T3B1"):
//   bytes 0..3    magic "T3B1"
//   bytes 4..27   n1, n2, n3 as little-endian uint64
//   bytes 28..    n1*n2*n3 little-endian IEEE-754 binary64, frontal slice
//                 major, row-major within a slice (Dims::offset order)
//
// Mask container ("T3M1"): same header with magic "T3M1", then one bit per
// element in the same order, least significant bit first, zero-padded to a
// whole byte.

void write_tensor(const Tensor3& t, const std::filesystem::path& path);
Tensor3 read_tensor(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_tensor(const Tensor3& t);
Tensor3 decode_tensor(std::span<const std::uint8_t> bytes);

void write_mask(const ObservationMask& mask, const std::filesystem::path& path);
ObservationMask read_mask(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mask(const ObservationMask& mask);
ObservationMask decode_mask(std::span<const std::uint8_t> bytes);

/// 8-bit image stored planar: channel c occupies pixels[c*h*w, (c+1)*h*w), row-major.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// height x width x 3 tensor with values byte / 255.
Tensor3 image_to_tensor(const Image& image);
/// Clamps to [0, 1] and rounds half up to the nearest byte.
Image tensor_to_image(const Tensor3& t);

struct GrayFrame {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

/// height x width x frames tensor with values byte / 255; frame k is frontal slice k.
Tensor3 frames_to_tensor(std::span<const GrayFrame> frames);

/// Splits a raw dump of `count` planes of height*width bytes.
std::vector<GrayFrame> split_frames(std::span<const std::uint8_t> raw, std::size_t width, std::size_t height,
                                    std::size_t count);

struct TrafficTable {
    Tensor3 tensor;
    /// Observed cells; non-finite or empty CSV cells are excluded.
    ObservationMask present;
    std::size_t missing_at_source = 0;
};

/// sensors rows x (intervals * days) columns; column c maps to interval c % intervals, day c / intervals.
TrafficTable traffic_csv_to_tensor(const std::filesystem::path& path, std::size_t sensors,
                                   std::size_t intervals_per_day, std::size_t days);
TrafficTable parse_traffic_csv(const std::string& text, std::size_t sensors, std::size_t intervals_per_day,
                               std::size_t days);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// FNV-1a 64-bit digest, hex encoded; used to fingerprint inputs in run manifests.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);

}  // namespace tubalnet
