#include <cctype>
#include <charconv>
#include <string>

#include "wetpred/error.hpp"
#include "wetpred/io.hpp"

namespace wetpred::io {

namespace {

constexpr long long kMaxPixels = 1LL << 28;

class HeaderReader {
public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then reads one unsigned integer.
  long long number(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ == start) {
      if (pos_ >= bytes_.size()) throw CorruptHeader(std::string("missing ") + what);
      throw CorruptHeader(std::string("bad ") + what);
    }
    long long v = 0;
    const auto res = std::from_chars(bytes_.data() + start, bytes_.data() + pos_, v);
    if (res.ec != std::errc{}) throw CorruptHeader(std::string(what) + " out of range");
    return v;
  }

  std::size_t& pos() { return pos_; }

private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 2;
};

} // namespace

texture::GrayImage parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || !std::isdigit(static_cast<unsigned char>(bytes[1])))
    throw CorruptHeader("not a portable anymap");
  const bool binary = bytes[1] == '5';
  if (bytes[1] != '2' && !binary)
    throw UnsupportedFormat(std::string("P") + bytes[1] + " is not a graymap");
  if (bytes.size() > 2 && !std::isspace(static_cast<unsigned char>(bytes[2])) && bytes[2] != '#')
    throw CorruptHeader("bad magic number");

  HeaderReader hdr(bytes);
  const long long width = hdr.number("width");
  const long long height = hdr.number("height");
  const long long maxval = hdr.number("maxval");
  if (width <= 0 || height <= 0) throw CorruptHeader("image dimensions must be positive");
  if (width > kMaxPixels || height > kMaxPixels || width * height > kMaxPixels)
    throw CorruptHeader("image dimensions too large");
  if (maxval <= 0 || maxval > 65535) throw CorruptHeader("maxval must lie in [1, 65535]");
  if (maxval != 255) throw UnsupportedFormat("maxval " + std::to_string(maxval) + ", need 255");

  const auto count = static_cast<std::size_t>(width * height);
  std::vector<std::uint8_t> pixels(count);
  std::size_t& pos = hdr.pos();
  if (binary) {
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
      throw TruncatedData("no pixel data");
    ++pos;
    if (bytes.size() - pos < count)
      throw TruncatedData("expected " + std::to_string(count) + " pixel bytes, got " +
                          std::to_string(bytes.size() - pos));
    for (std::size_t i = 0; i < count; ++i) pixels[i] = static_cast<std::uint8_t>(bytes[pos + i]);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      long long v = 0;
      try {
        v = hdr.number("pixel value");
      } catch (const CorruptHeader&) {
        if (pos >= bytes.size())
          throw TruncatedData("expected " + std::to_string(count) + " pixels, got " +
                              std::to_string(i));
        throw;
      }
      if (v > maxval) throw CorruptHeader("pixel value " + std::to_string(v) + " exceeds maxval");
      pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  return {static_cast<int>(width), static_cast<int>(height), std::move(pixels)};
}

texture::GrayImage load_image(const fs::path& path) { return parse_pgm(read_file(path)); }

std::string format_pgm(const texture::GrayImage& img, bool binary) {
  std::string out = std::string(binary ? "P5" : "P2") + "\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  if (binary) {
    out.append(img.pixels.begin(), img.pixels.end());
    return out;
  }
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (c) out += ' ';
      out += std::to_string(img.at(r, c));
    }
    out += '\n';
  }
  return out;
}

void save_image(const texture::GrayImage& img, const fs::path& path, bool binary) {
  write_file_atomic(path, format_pgm(img, binary));
}

} // namespace wetpred::io
