#include "tubalnet/data_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tubalnet/errors.hpp"

namespace tubalnet {

namespace {

constexpr std::size_t kHeaderBytes = 4 + 3 * 8;
constexpr char kTensorMagic[4] = {'T', '3', 'B', '1'};
constexpr char kMaskMagic[4] = {'T', '3', 'M', '1'};

static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[at + b]) << (8 * b);
    return v;
}

std::vector<std::uint8_t> header(const char (&magic)[4], const Dims& d) {
    std::vector<std::uint8_t> out(magic, magic + 4);
    put_u64(out, d.n1);
    put_u64(out, d.n2);
    put_u64(out, d.n3);
    return out;
}

// Validates magic and dims; returns dims and the payload size in bytes.
Dims parse_header(std::span<const std::uint8_t> bytes, const char (&magic)[4], bool bit_packed,
                  std::size_t& payload_bytes) {
    const std::string kind(magic, 4);
    if (bytes.size() < 4) {
        throw FormatError(kind + ": truncated header at offset " + std::to_string(bytes.size()) + " (need 4-byte magic)");
    }
    if (std::memcmp(bytes.data(), magic, 4) != 0) {
        throw FormatError(kind + ": bad magic at offset 0");
    }
    if (bytes.size() < kHeaderBytes) {
        throw FormatError(kind + ": truncated header at offset " + std::to_string(bytes.size()) + " (need " +
                          std::to_string(kHeaderBytes) + " bytes)");
    }
    std::uint64_t n[3];
    for (int a = 0; a < 3; ++a) {
        n[a] = get_u64(bytes, 4 + 8 * a);
        if (n[a] == 0) throw FormatError(kind + ": zero dimension at offset " + std::to_string(4 + 8 * a));
    }
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t count = n[0];
    for (int a = 1; a < 3; ++a) {
        if (count > kMax / n[a]) {
            throw FormatError(kind + ": dimension product overflows at offset " + std::to_string(4 + 8 * a));
        }
        count *= n[a];
    }
    std::uint64_t payload = 0;
    if (bit_packed) {
        payload = count / 8 + (count % 8 != 0 ? 1 : 0);
    } else {
        if (count > kMax / 8) throw FormatError(kind + ": payload size overflows at offset 4");
        payload = count * 8;
    }
    const std::uint64_t available = bytes.size() - kHeaderBytes;
    if (payload > available) {
        throw FormatError(kind + ": truncated payload at offset " + std::to_string(bytes.size()) + " (expected " +
                          std::to_string(kHeaderBytes + payload) + " bytes)");
    }
    if (payload < available) {
        throw FormatError(kind + ": trailing bytes at offset " + std::to_string(kHeaderBytes + payload));
    }
    payload_bytes = static_cast<std::size_t>(payload);
    return {static_cast<std::size_t>(n[0]), static_cast<std::size_t>(n[1]), static_cast<std::size_t>(n[2])};
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_tensor(const Tensor3& t) {
    std::vector<std::uint8_t> out = header(kTensorMagic, t.dims());
    out.reserve(kHeaderBytes + 8 * t.size());
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

Tensor3 decode_tensor(std::span<const std::uint8_t> bytes) {
    std::size_t payload = 0;
    const Dims dims = parse_header(bytes, kTensorMagic, false, payload);
    std::vector<double> data(dims.size());
    for (std::size_t n = 0; n < data.size(); ++n) data[n] = std::bit_cast<double>(get_u64(bytes, kHeaderBytes + 8 * n));
    return Tensor3(dims, std::move(data));
}

void write_tensor(const Tensor3& t, const std::filesystem::path& path) { write_file_bytes(path, encode_tensor(t)); }

Tensor3 read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_mask(const ObservationMask& mask) {
    std::vector<std::uint8_t> out = header(kMaskMagic, mask.dims());
    const std::size_t start = out.size();
    out.resize(start + (mask.size() + 7) / 8, 0);
    for (std::size_t n = 0; n < mask.size(); ++n)
        if (mask[n]) out[start + n / 8] |= static_cast<std::uint8_t>(1u << (n % 8));
    return out;
}

ObservationMask decode_mask(std::span<const std::uint8_t> bytes) {
    std::size_t payload = 0;
    const Dims dims = parse_header(bytes, kMaskMagic, true, payload);
    std::vector<std::uint8_t> observed(dims.size());
    for (std::size_t n = 0; n < observed.size(); ++n) observed[n] = (bytes[kHeaderBytes + n / 8] >> (n % 8)) & 1u;
    if (dims.size() % 8 != 0) {
        const std::uint8_t last = bytes[kHeaderBytes + payload - 1];
        if (last >> (dims.size() % 8) != 0) {
            throw FormatError("T3M1: non-zero padding bits at offset " + std::to_string(kHeaderBytes + payload - 1));
        }
    }
    return ObservationMask(dims, std::move(observed));
}

void write_mask(const ObservationMask& mask, const std::filesystem::path& path) {
    write_file_bytes(path, encode_mask(mask));
}

ObservationMask read_mask(const std::filesystem::path& path) { return decode_mask(read_file_bytes(path)); }

// ---------------------------------------------------------------------------
// Images and frames

Tensor3 image_to_tensor(const Image& image) {
    if (image.channels != 3) {
        throw FormatError("image has " + std::to_string(image.channels) + " channels, expected 3");
    }
    if (image.width == 0 || image.height == 0) throw FormatError("image has an empty extent");
    const Dims dims{image.height, image.width, 3};
    if (image.pixels.size() != dims.size()) {
        throw FormatError("image buffer holds " + std::to_string(image.pixels.size()) + " bytes, expected " +
                          std::to_string(dims.size()));
    }
    std::vector<double> data(dims.size());
    for (std::size_t n = 0; n < data.size(); ++n) data[n] = image.pixels[n] / 255.0;
    return Tensor3(dims, std::move(data));
}

Image tensor_to_image(const Tensor3& t) {
    if (t.n3() != 3) throw FormatError("tensor " + to_string(t.dims()) + " is not a 3-channel image");
    Image image{t.n2(), t.n1(), 3, std::vector<std::uint8_t>(t.size())};
    auto d = t.data();
    for (std::size_t n = 0; n < d.size(); ++n) {
        const double v = std::isnan(d[n]) ? 0.0 : std::clamp(d[n], 0.0, 1.0);
        image.pixels[n] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
    }
    return image;
}

Tensor3 frames_to_tensor(std::span<const GrayFrame> frames) {
    if (frames.empty()) throw FormatError("no frames supplied");
    const std::size_t h = frames.front().height;
    const std::size_t w = frames.front().width;
    if (h == 0 || w == 0) throw FormatError("frame 0 has an empty extent");
    Tensor3 t({h, w, frames.size()});
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const GrayFrame& f = frames[k];
        if (f.height != h || f.width != w) {
            throw FormatError("frame " + std::to_string(k) + " is " + std::to_string(f.height) + "x" +
                              std::to_string(f.width) + ", expected " + std::to_string(h) + "x" + std::to_string(w));
        }
        if (f.pixels.size() != h * w) {
            throw FormatError("frame " + std::to_string(k) + " holds " + std::to_string(f.pixels.size()) +
                              " bytes, expected " + std::to_string(h * w));
        }
        auto slice = t.frontal(k);
        for (std::size_t n = 0; n < slice.size(); ++n) slice[n] = f.pixels[n] / 255.0;
    }
    return t;
}

std::vector<GrayFrame> split_frames(std::span<const std::uint8_t> raw, std::size_t width, std::size_t height,
                                    std::size_t count) {
    const std::size_t plane = width * height;
    if (plane == 0 || count == 0) throw FormatError("frame dump needs positive width, height and count");
    if (raw.size() != plane * count) {
        throw FormatError("frame dump holds " + std::to_string(raw.size()) + " bytes, expected " +
                          std::to_string(plane * count));
    }
    std::vector<GrayFrame> frames;
    for (std::size_t k = 0; k < count; ++k) {
        auto bytes = raw.subspan(k * plane, plane);
        frames.push_back({width, height, std::vector<std::uint8_t>(bytes.begin(), bytes.end())});
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Traffic CSV

namespace {

bool parse_cell(std::string_view cell, double& value) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    if (cell.empty()) {
        value = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    const char* first = cell.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace

TrafficTable parse_traffic_csv(const std::string& text, std::size_t sensors, std::size_t intervals_per_day,
                               std::size_t days) {
    if (sensors == 0 || intervals_per_day == 0 || days == 0) {
        throw FormatError("traffic layout needs positive sensors, intervals per day and days");
    }
    const std::size_t columns = intervals_per_day * days;
    const Dims dims{sensors, intervals_per_day, days};
    Tensor3 tensor(dims);
    std::vector<std::uint8_t> present(dims.size(), 0);
    std::size_t missing = 0;

    std::string_view rest(text);
    if (!rest.empty() && rest.back() == '\n') rest.remove_suffix(1);
    std::size_t row = 0;
    while (true) {
        const std::size_t eol = rest.find('\n');
        std::string_view line = rest.substr(0, eol);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (row >= sensors) {
            throw FormatError("traffic CSV: expected " + std::to_string(sensors) + " rows, found more (line " +
                              std::to_string(row + 1) + ")");
        }
        std::size_t col = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            if (col >= columns) {
                throw FormatError("traffic CSV line " + std::to_string(row + 1) + ": expected " + std::to_string(columns) +
                                  " columns, found more");
            }
            double value = 0.0;
            if (!parse_cell(cell, value)) {
                throw FormatError("traffic CSV line " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) +
                                  ": cannot parse '" + std::string(cell) + "'");
            }
            const std::size_t j = col % intervals_per_day;
            const std::size_t k = col / intervals_per_day;
            tensor(row, j, k) = std::isfinite(value) ? value : 0.0;
            if (std::isfinite(value)) {
                present[dims.offset(row, j, k)] = 1;
            } else {
                ++missing;
            }
            ++col;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (col != columns) {
            throw FormatError("traffic CSV line " + std::to_string(row + 1) + ": expected " + std::to_string(columns) +
                              " columns, found " + std::to_string(col));
        }
        ++row;
        if (eol == std::string_view::npos) break;
        rest.remove_prefix(eol + 1);
    }
    if (row != sensors) {
        throw FormatError("traffic CSV: expected " + std::to_string(sensors) + " rows, found " + std::to_string(row));
    }
    return {std::move(tensor), ObservationMask(dims, std::move(present)), missing};
}

TrafficTable traffic_csv_to_tensor(const std::filesystem::path& path, std::size_t sensors,
                                   std::size_t intervals_per_day, std::size_t days) {
    const auto bytes = read_file_bytes(path);
    return parse_traffic_csv(std::string(bytes.begin(), bytes.end()), sensors, intervals_per_day, days);
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

}  // namespace tubalnet
