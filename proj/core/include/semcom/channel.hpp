#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "semcom/render.hpp"
#include "semcom/semantics.hpp"

namespace semcom {

enum class PayloadKind : std::uint8_t { image = 0, semantic = 1, base_knowledge = 2 };

/// Ordered bits (one byte per bit, values 0/1) plus side information used by
/// the dump format. Only `bits` goes over the air.
struct Bitstream {
  PayloadKind kind = PayloadKind::semantic;
  std::int64_t time = 0;
  std::uint32_t view_count = 0;
  std::vector<std::uint8_t> bits;
  // Encoder-side count of scalars that had to be clamped into range.
  std::size_t clamped_fields = 0;

  std::size_t size() const { return bits.size(); }
};

/// Fixed-point layout of the semantic payload. Every pixel quantity is an
/// unsigned 16-bit value with 1/16 px resolution over [0, 2 * width].
///
///   header : time mod 256 (8) | view count (8) | CRC-16 (16)
///   view   : 7 x (x, y) keypoints (14 x 16) | box cx, cy, w, h (4 x 16)
///            | 7 keypoint validity bits
///
/// Views are sent in rig order; the decoder numbers them 0..n-1. The CRC is
/// CRC-16/CCITT-FALSE over every bit except the CRC field itself.
struct SemanticCodec {
  int width = 1200;
  int height = 600;

  static constexpr int kFieldBits = 16;
  static constexpr int kFractionBits = 4;
  static constexpr std::size_t kHeaderBits = 32;
  static constexpr std::size_t kBitsPerView =
      kScalarsPerView * kFieldBits + kKeypointCount;  // 295

  double max_value() const { return 2.0 * width; }
  std::uint32_t max_code() const;
  std::size_t frame_bits(std::size_t views) const { return kHeaderBits + views * kBitsPerView; }
  void validate() const;
};

Bitstream encode_semantic(const SemanticFrame& frame, const SemanticCodec& codec = {});

struct DecodedSemantic {
  SemanticFrame frame;
  bool unreliable = false;  // CRC mismatch or inconsistent header
};

/// Inverse of encode_semantic. Truncated or malformed lengths -> DecodeError.
DecodedSemantic decode_semantic(const Bitstream& bits, const SemanticCodec& codec = {});

/// Raw 8-bit RGB, row-major, MSB first; width*height*24 bits.
Bitstream encode_image(const Image& img);
Image decode_image(const Bitstream& bits, int width, int height);

/// Packs arbitrary bytes MSB first (used for the base-knowledge preamble).
Bitstream encode_bytes(std::span<const std::uint8_t> bytes, PayloadKind kind);

enum class Fading : std::uint8_t { none, rayleigh };

struct ChannelConfig {
  static constexpr double kNoiseless = std::numeric_limits<double>::infinity();

  double snr_db = 10.0;  // kNoiseless disables the noise term
  Fading fading = Fading::rayleigh;
  std::uint64_t seed = 0;
  double link_rate_bps = 160e6;

  void validate() const;
};

struct ChannelReport {
  std::size_t bits_sent = 0;
  std::size_t bit_errors = 0;
  double airtime_s = 0.0;
};

struct Transmission {
  Bitstream received;
  ChannelReport report;
};

/// BPSK over a single-tap channel r = h s + w with unit mean symbol energy.
/// Rayleigh fading draws h ~ CN(0, 1) per symbol; w ~ CN(0, 10^(-snr/10)).
/// Detection is coherent with perfect channel knowledge: sign(Re(conj(h) r)).
Transmission transmit(const Bitstream& bits, const ChannelConfig& cfg);

/// bits / link rate.
double airtime(std::size_t bits, const ChannelConfig& cfg);

/// CRC-16/CCITT-FALSE over a bit sequence (MSB-first semantics).
std::uint16_t crc16_bits(std::span<const std::uint8_t> bits);

// Dump format: u32 LE bit count, u32 LE header word
// (kind << 28 | (time & 0xFFFF) << 12 | views & 0xFFF), then the bits packed
// MSB first and zero padded to a whole byte.
void write_bitstream(std::ostream& out, const Bitstream& bits);
Bitstream read_bitstream(std::istream& in);

}  // namespace semcom
