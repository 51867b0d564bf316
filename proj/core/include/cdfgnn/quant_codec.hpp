#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace cdfgnn {

inline constexpr int kMinQuantBits = 1;
inline constexpr int kMaxQuantBits = 16;

/// B-bit linear quantization of one vertex payload.
///
/// Codes are kept unpacked in memory (one per element); `pack_codes` /
/// `to_wire` produce the packed form that is accounted for on the wire.
template <typename T>
struct QuantizedVector {
  int bits = 8;
  T min{0};
  T max{0};
  std::vector<std::uint16_t> codes;

  std::size_t length() const noexcept { return codes.size(); }
  friend bool operator==(const QuantizedVector&, const QuantizedVector&) = default;
};

/// q_i = floor(2^B (m_i - min) / (max - min) + 0.5), clamped to 2^B - 1.
/// A constant vector yields all-zero codes. Throws ArgumentError on
/// non-finite input or B outside [1, 16].
template <typename T>
QuantizedVector<T> quantize(std::span<const T> values, int bits);

/// m~_i = (max - min) / 2^B * q_i + min. Throws IntegrityError if a code
/// does not fit in B bits.
template <typename T>
std::vector<T> dequantize(const QuantizedVector<T>& qv);

/// Quantized message size B*L + 2T in bits (T = bits of the original type).
constexpr std::size_t message_size_bits(std::size_t length, int bits, int original_bits) {
  return static_cast<std::size_t>(bits) * length + 2 * static_cast<std::size_t>(original_bits);
}

/// Unquantized size T*L in bits.
constexpr std::size_t original_size_bits(std::size_t length, int original_bits) {
  return length * static_cast<std::size_t>(original_bits);
}

/// Packs B-bit codes little-endian bit order: code i occupies bits
/// [i*B, (i+1)*B) of the byte stream, least significant bit first.
std::vector<std::uint8_t> pack_codes(std::span<const std::uint16_t> codes, int bits);
std::vector<std::uint16_t> unpack_codes(std::span<const std::uint8_t> packed, std::size_t count, int bits);

/// Wire layout: [u8 B][min as T][max as T][packed codes]. The element count
/// is implied by the layer width and must be supplied on decode.
template <typename T>
std::vector<std::uint8_t> to_wire(const QuantizedVector<T>& qv);
template <typename T>
QuantizedVector<T> from_wire(std::span<const std::uint8_t> bytes, std::size_t length);

/// A vertex message body: either the raw vector or its quantized form.
template <typename T>
using Payload = std::variant<std::vector<T>, QuantizedVector<T>>;

/// Encodes outgoing vertex payloads according to the run's quantization
/// settings and accounts for their size.
template <typename T>
class PayloadCodec {
 public:
  PayloadCodec() = default;
  PayloadCodec(bool enabled, int bits);

  bool enabled() const noexcept { return enabled_; }
  int bits() const noexcept { return bits_; }
  bool lossless() const noexcept { return !enabled_; }

  Payload<T> encode(std::span<const T> values) const;
  std::vector<T> decode(const Payload<T>& payload) const;
  std::size_t size_bits(const Payload<T>& payload) const;

 private:
  bool enabled_ = false;
  int bits_ = 8;
};

}  // namespace cdfgnn
