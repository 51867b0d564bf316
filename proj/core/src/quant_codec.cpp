#include "cdfgnn/quant_codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "cdfgnn/error.hpp"

namespace cdfgnn {

namespace {

void require_bits(int bits) {
  if (bits < kMinQuantBits || bits > kMaxQuantBits) {
    throw ArgumentError("quantization bits must be in [1,16], got " + std::to_string(bits));
  }
}

template <typename T>
void append_scalar(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T read_scalar(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

template <typename T>
QuantizedVector<T> quantize(std::span<const T> values, int bits) {
  require_bits(bits);
  QuantizedVector<T> out;
  out.bits = bits;
  out.codes.assign(values.size(), 0);
  if (values.empty()) return out;
  for (T v : values) {
    if (!std::isfinite(v)) throw ArgumentError("quantize: non-finite input");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  out.min = *lo;
  out.max = *hi;
  if (out.max == out.min) return out;

  const double range = static_cast<double>(out.max) - static_cast<double>(out.min);
  if (!std::isfinite(range)) throw ArgumentError("quantize: value range overflows");
  const double levels = std::ldexp(1.0, bits);
  const double top = levels - 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double scaled = levels * (static_cast<double>(values[i]) - static_cast<double>(out.min)) / range;
    const double q = std::floor(scaled + 0.5);
    out.codes[i] = static_cast<std::uint16_t>(std::min(q, top));
  }
  return out;
}

template <typename T>
std::vector<T> dequantize(const QuantizedVector<T>& qv) {
  require_bits(qv.bits);
  const std::uint32_t limit = 1u << qv.bits;
  std::vector<T> out(qv.codes.size());
  if (qv.max == qv.min) {
    for (std::uint16_t c : qv.codes) {
      if (c >= limit) throw IntegrityError("dequantize: code exceeds B bits");
    }
    std::fill(out.begin(), out.end(), qv.min);
    return out;
  }
  const double step = (static_cast<double>(qv.max) - static_cast<double>(qv.min)) / std::ldexp(1.0, qv.bits);
  for (std::size_t i = 0; i < qv.codes.size(); ++i) {
    if (qv.codes[i] >= limit) {
      throw IntegrityError("dequantize: code " + std::to_string(qv.codes[i]) + " does not fit in " +
                           std::to_string(qv.bits) + " bits");
    }
    out[i] = static_cast<T>(step * qv.codes[i] + static_cast<double>(qv.min));
  }
  return out;
}

std::vector<std::uint8_t> pack_codes(std::span<const std::uint16_t> codes, int bits) {
  require_bits(bits);
  std::vector<std::uint8_t> out((codes.size() * static_cast<std::size_t>(bits) + 7) / 8, 0);
  std::size_t bit_pos = 0;
  for (std::uint16_t code : codes) {
    for (int b = 0; b < bits; ++b, ++bit_pos) {
      if ((code >> b) & 1u) out[bit_pos / 8] |= static_cast<std::uint8_t>(1u << (bit_pos % 8));
    }
  }
  return out;
}

std::vector<std::uint16_t> unpack_codes(std::span<const std::uint8_t> packed, std::size_t count, int bits) {
  require_bits(bits);
  if (packed.size() * 8 < count * static_cast<std::size_t>(bits)) {
    throw IntegrityError("unpack_codes: packed buffer too short");
  }
  std::vector<std::uint16_t> out(count, 0);
  std::size_t bit_pos = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t code = 0;
    for (int b = 0; b < bits; ++b, ++bit_pos) {
      if ((packed[bit_pos / 8] >> (bit_pos % 8)) & 1u) code |= static_cast<std::uint16_t>(1u << b);
    }
    out[i] = code;
  }
  return out;
}

template <typename T>
std::vector<std::uint8_t> to_wire(const QuantizedVector<T>& qv) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(qv.bits));
  append_scalar<T>(out, qv.min);
  append_scalar<T>(out, qv.max);
  const auto packed = pack_codes(qv.codes, qv.bits);
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

template <typename T>
QuantizedVector<T> from_wire(std::span<const std::uint8_t> bytes, std::size_t length) {
  if (bytes.size() < 1 + 2 * sizeof(T)) throw IntegrityError("from_wire: truncated header");
  QuantizedVector<T> qv;
  qv.bits = bytes[0];
  require_bits(qv.bits);
  qv.min = read_scalar<T>(bytes, 1);
  qv.max = read_scalar<T>(bytes, 1 + sizeof(T));
  const std::size_t expected = 1 + 2 * sizeof(T) + (length * static_cast<std::size_t>(qv.bits) + 7) / 8;
  if (bytes.size() != expected) {
    throw IntegrityError("from_wire: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(bytes.size()));
  }
  if (qv.min > qv.max) throw IntegrityError("from_wire: min > max");
  qv.codes = unpack_codes(bytes.subspan(1 + 2 * sizeof(T)), length, qv.bits);
  return qv;
}

template <typename T>
PayloadCodec<T>::PayloadCodec(bool enabled, int bits) : enabled_(enabled), bits_(bits) {
  require_bits(bits);
}

template <typename T>
Payload<T> PayloadCodec<T>::encode(std::span<const T> values) const {
  if (!enabled_) return std::vector<T>(values.begin(), values.end());
  return quantize<T>(values, bits_);
}

template <typename T>
std::vector<T> PayloadCodec<T>::decode(const Payload<T>& payload) const {
  if (const auto* raw = std::get_if<std::vector<T>>(&payload)) return *raw;
  return dequantize(std::get<QuantizedVector<T>>(payload));
}

template <typename T>
std::size_t PayloadCodec<T>::size_bits(const Payload<T>& payload) const {
  constexpr int kOriginalBits = static_cast<int>(sizeof(T) * 8);
  if (const auto* raw = std::get_if<std::vector<T>>(&payload)) return original_size_bits(raw->size(), kOriginalBits);
  const auto& qv = std::get<QuantizedVector<T>>(payload);
  return message_size_bits(qv.length(), qv.bits, kOriginalBits);
}

#define CDFGNN_INSTANTIATE_QUANT(T)                                                   \
  template QuantizedVector<T> quantize<T>(std::span<const T>, int);                   \
  template std::vector<T> dequantize<T>(const QuantizedVector<T>&);                   \
  template std::vector<std::uint8_t> to_wire<T>(const QuantizedVector<T>&);           \
  template QuantizedVector<T> from_wire<T>(std::span<const std::uint8_t>, std::size_t); \
  template class PayloadCodec<T>;

CDFGNN_INSTANTIATE_QUANT(float)
CDFGNN_INSTANTIATE_QUANT(double)

#undef CDFGNN_INSTANTIATE_QUANT

}  // namespace cdfgnn
