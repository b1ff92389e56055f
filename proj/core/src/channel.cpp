#include "semcom/channel.hpp"

#include <cmath>
#include <complex>
#include <istream>
#include <ostream>
#include <random>

#include "semcom/errors.hpp"

namespace semcom {

namespace {

void put_field(std::vector<std::uint8_t>& bits, std::uint32_t value, int width) {
  for (int b = width - 1; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((value >> b) & 1u));
}

std::uint32_t get_field(const std::vector<std::uint8_t>& bits, std::size_t& pos, int width) {
  std::uint32_t value = 0;
  for (int b = 0; b < width; ++b) value = (value << 1) | (bits[pos++] & 1u);
  return value;
}

}  // namespace

std::uint32_t SemanticCodec::max_code() const {
  return static_cast<std::uint32_t>(std::lround(max_value() * (1 << kFractionBits)));
}

void SemanticCodec::validate() const {
  if (width <= 0 || height <= 0) throw ContractViolation("codec image size must be positive");
  if (max_code() > 0xFFFFu) {
    throw ContractViolation("image too wide for the 16-bit semantic codec");
  }
}

std::uint16_t crc16_bits(std::span<const std::uint8_t> bits) {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t bit : bits) {
    const bool top = (crc & 0x8000u) != 0;
    crc = static_cast<std::uint16_t>(crc << 1);
    if (top != ((bit & 1u) != 0)) crc ^= 0x1021u;
  }
  return crc;
}

Bitstream encode_semantic(const SemanticFrame& frame, const SemanticCodec& codec) {
  codec.validate();
  if (frame.views.empty()) throw ContractViolation("cannot encode a frame without views");
  if (frame.views.size() > 0xFF) throw ContractViolation("at most 255 views per frame");

  Bitstream out;
  out.kind = PayloadKind::semantic;
  out.time = frame.time;
  out.view_count = static_cast<std::uint32_t>(frame.views.size());
  out.bits.reserve(codec.frame_bits(frame.views.size()));

  const double scale = 1 << SemanticCodec::kFractionBits;
  const auto max_code = static_cast<long>(codec.max_code());
  auto quantize = [&](double v) -> std::uint32_t {
    if (std::isnan(v)) {
      ++out.clamped_fields;
      return 0;
    }
    const double scaled = std::round(v * scale);
    if (scaled < 0.0) {
      ++out.clamped_fields;
      return 0;
    }
    if (scaled > static_cast<double>(max_code)) {
      ++out.clamped_fields;
      return static_cast<std::uint32_t>(max_code);
    }
    return static_cast<std::uint32_t>(scaled);
  };

  put_field(out.bits, static_cast<std::uint32_t>(frame.time) & 0xFFu, 8);
  put_field(out.bits, static_cast<std::uint32_t>(frame.views.size()), 8);
  put_field(out.bits, 0, 16);  // CRC placeholder
  for (const ViewSemantics& view : frame.views) {
    for (const ImagePoint& kp : view.keypoints) {
      put_field(out.bits, quantize(kp.x), SemanticCodec::kFieldBits);
      put_field(out.bits, quantize(kp.y), SemanticCodec::kFieldBits);
    }
    put_field(out.bits, quantize(view.box.cx), SemanticCodec::kFieldBits);
    put_field(out.bits, quantize(view.box.cy), SemanticCodec::kFieldBits);
    put_field(out.bits, quantize(view.box.w), SemanticCodec::kFieldBits);
    put_field(out.bits, quantize(view.box.h), SemanticCodec::kFieldBits);
    for (const ImagePoint& kp : view.keypoints) out.bits.push_back(kp.in_frustum ? 1 : 0);
  }

  std::vector<std::uint8_t> covered(out.bits.begin(), out.bits.begin() + 16);
  covered.insert(covered.end(), out.bits.begin() + 32, out.bits.end());
  const std::uint16_t crc = crc16_bits(covered);
  for (int b = 0; b < 16; ++b) out.bits[16 + b] = static_cast<std::uint8_t>((crc >> (15 - b)) & 1u);
  return out;
}

DecodedSemantic decode_semantic(const Bitstream& bits, const SemanticCodec& codec) {
  codec.validate();
  if (bits.kind != PayloadKind::semantic) {
    throw ContractViolation("decode_semantic needs a semantic bitstream");
  }
  const std::size_t n = bits.bits.size();
  if (n < SemanticCodec::kHeaderBits + SemanticCodec::kBitsPerView ||
      (n - SemanticCodec::kHeaderBits) % SemanticCodec::kBitsPerView != 0) {
    throw DecodeError("semantic stream length " + std::to_string(n) +
                      " is not a whole number of views");
  }
  const std::size_t views = (n - SemanticCodec::kHeaderBits) / SemanticCodec::kBitsPerView;

  DecodedSemantic out;
  std::size_t pos = 0;
  out.frame.time = get_field(bits.bits, pos, 8);
  const std::uint32_t header_views = get_field(bits.bits, pos, 8);
  const std::uint32_t received_crc = get_field(bits.bits, pos, 16);

  std::vector<std::uint8_t> covered(bits.bits.begin(), bits.bits.begin() + 16);
  covered.insert(covered.end(), bits.bits.begin() + 32, bits.bits.end());
  out.unreliable = header_views != views || received_crc != crc16_bits(covered);

  const double scale = 1 << SemanticCodec::kFractionBits;
  const std::uint32_t max_code = codec.max_code();
  auto dequantize = [&](std::uint32_t code) {
    return static_cast<double>(std::min(code, max_code)) / scale;
  };

  out.frame.views.resize(views);
  for (std::size_t v = 0; v < views; ++v) {
    ViewSemantics& view = out.frame.views[v];
    view.camera_id = static_cast<int>(v);
    for (ImagePoint& kp : view.keypoints) {
      kp.x = dequantize(get_field(bits.bits, pos, SemanticCodec::kFieldBits));
      kp.y = dequantize(get_field(bits.bits, pos, SemanticCodec::kFieldBits));
    }
    view.box.cx = dequantize(get_field(bits.bits, pos, SemanticCodec::kFieldBits));
    view.box.cy = dequantize(get_field(bits.bits, pos, SemanticCodec::kFieldBits));
    view.box.w = dequantize(get_field(bits.bits, pos, SemanticCodec::kFieldBits));
    view.box.h = dequantize(get_field(bits.bits, pos, SemanticCodec::kFieldBits));
    for (ImagePoint& kp : view.keypoints) kp.in_frustum = bits.bits[pos++] != 0;
  }
  return out;
}

Bitstream encode_bytes(std::span<const std::uint8_t> bytes, PayloadKind kind) {
  Bitstream out;
  out.kind = kind;
  out.bits.resize(bytes.size() * 8);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    for (int b = 0; b < 8; ++b) out.bits[8 * i + b] = (bytes[i] >> (7 - b)) & 1u;
  }
  return out;
}

Bitstream encode_image(const Image& img) {
  if (img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw ContractViolation("image buffer does not match its dimensions");
  }
  return encode_bytes(img.rgb, PayloadKind::image);
}

Image decode_image(const Bitstream& bits, int width, int height) {
  if (bits.kind != PayloadKind::image) throw ContractViolation("decode_image needs an image bitstream");
  Image img(width, height);
  if (bits.bits.size() != img.rgb.size() * 8) {
    throw DecodeError("image stream has " + std::to_string(bits.bits.size()) +
                      " bits, expected " + std::to_string(img.rgb.size() * 8));
  }
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    std::uint8_t byte = 0;
    for (int b = 0; b < 8; ++b) byte = static_cast<std::uint8_t>((byte << 1) | (bits.bits[8 * i + b] & 1u));
    img.rgb[i] = byte;
  }
  return img;
}

void ChannelConfig::validate() const {
  if (!(link_rate_bps > 0.0)) throw ConfigError("link rate must be > 0");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw ConfigError("SNR must be a number or +inf");
  }
}

Transmission transmit(const Bitstream& bits, const ChannelConfig& cfg) {
  cfg.validate();
  Transmission out;
  out.received = bits;
  out.received.clamped_fields = 0;
  out.report.bits_sent = bits.bits.size();
  out.report.airtime_s = airtime(bits.bits.size(), cfg);

  const bool noisy = std::isfinite(cfg.snr_db);
  const bool faded = cfg.fading == Fading::rayleigh;
  if (!noisy && !faded) return out;

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                    static_cast<std::uint32_t>(cfg.seed >> 32), 0x63686eu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_std = noisy ? std::sqrt(std::pow(10.0, -cfg.snr_db / 10.0) / 2.0) : 0.0;
  const double fade_std = std::sqrt(0.5);

  for (std::uint8_t& bit : out.received.bits) {
    const double symbol = bit ? -1.0 : 1.0;
    std::complex<double> h(1.0, 0.0);
    if (faded) {
      const double re = normal(rng);
      const double im = normal(rng);
      h = {fade_std * re, fade_std * im};
    }
    std::complex<double> r = h * symbol;
    if (noisy) {
      const double re = normal(rng);
      const double im = normal(rng);
      r += std::complex<double>(noise_std * re, noise_std * im);
    }
    const std::uint8_t decided = (std::conj(h) * r).real() < 0.0 ? 1 : 0;
    if (decided != bit) ++out.report.bit_errors;
    bit = decided;
  }
  return out;
}

double airtime(std::size_t bits, const ChannelConfig& cfg) {
  cfg.validate();
  return static_cast<double>(bits) / cfg.link_rate_bps;
}

void write_bitstream(std::ostream& out, const Bitstream& bits) {
  auto put_u32 = [&](std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(bytes, 4);
  };
  if (bits.bits.size() > 0xFFFFFFFFu) throw ContractViolation("bitstream too long to dump");
  put_u32(static_cast<std::uint32_t>(bits.bits.size()));
  put_u32((static_cast<std::uint32_t>(bits.kind) & 0xFu) << 28 |
          (static_cast<std::uint32_t>(bits.time) & 0xFFFFu) << 12 | (bits.view_count & 0xFFFu));
  std::vector<char> packed((bits.bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.bits.size(); ++i) {
    if (bits.bits[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (0x80 >> (i % 8)));
  }
  out.write(packed.data(), static_cast<std::streamsize>(packed.size()));
}

Bitstream read_bitstream(std::istream& in) {
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw DecodeError("bitstream dump is truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  };
  const std::uint32_t length = get_u32();
  const std::uint32_t header = get_u32();
  Bitstream out;
  const std::uint32_t kind = header >> 28;
  if (kind > 2) throw DecodeError("unknown payload kind in bitstream dump");
  out.kind = static_cast<PayloadKind>(kind);
  out.time = (header >> 12) & 0xFFFFu;
  out.view_count = header & 0xFFFu;
  std::vector<char> packed((length + 7) / 8);
  in.read(packed.data(), static_cast<std::streamsize>(packed.size()));
  if (in.gcount() != static_cast<std::streamsize>(packed.size())) {
    throw DecodeError("bitstream dump payload is truncated");
  }
  out.bits.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    out.bits[i] = (static_cast<unsigned char>(packed[i / 8]) >> (7 - i % 8)) & 1u;
  }
  return out;
}

}  // namespace semcom
