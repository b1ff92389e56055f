#include "semcom/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "semcom/errors.hpp"

namespace semcom {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string token;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

std::uint8_t to_byte(double channel) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(channel, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_ppm(std::ostream& out, const Image& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  auto out = open_out(path);
  write_ppm(out, img);
}

Image read_ppm(std::istream& in) {
  if (header_token(in) != "P6") throw DecodeError("not a binary PPM (P6) stream");
  const int w = std::stoi(header_token(in));
  const int h = std::stoi(header_token(in));
  if (std::stoi(header_token(in)) != 255) throw DecodeError("only maxval 255 is supported");
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
    throw DecodeError("PPM pixel data is truncated");
  }
  return img;
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_ppm(in);
}

Image edge_image(const EdgeMap& edges) {
  Image img(edges.width, edges.height);
  for (std::size_t i = 0; i < edges.mask.size(); ++i) {
    const std::uint8_t v = edges.mask[i] ? 255 : 0;
    img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = v;
  }
  return img;
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char line[160];
  for (const CloudPoint& p : cloud.points) {
    const int n = std::snprintf(line, sizeof line, "%.6f %.6f %.6f %u %u %u\n",
                                p.position.x(), p.position.y(), p.position.z(),
                                unsigned{to_byte(p.color.x())}, unsigned{to_byte(p.color.y())},
                                unsigned{to_byte(p.color.z())});
    out.write(line, n);
  }
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  write_ply(out, cloud);
}

}  // namespace semcom
