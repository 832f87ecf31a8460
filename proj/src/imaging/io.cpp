#include "motad/imaging/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "motad/errors.hpp"

namespace motad {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidArgument("short write to " + path.string());
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

}  // namespace

std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + flow.pixel_count() * 8);
  put_f32(out, kFloTag);
  put_u32(out, static_cast<std::uint32_t>(flow.width()));
  put_u32(out, static_cast<std::uint32_t>(flow.height()));
  auto dx = flow.dx_plane();
  auto dy = flow.dy_plane();
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    put_f32(out, dx[i]);
    put_f32(out, dy[i]);
  }
  return out;
}

FlowField decode_flo(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw FormatError("flo: truncated header");
  if (get_f32(bytes.data()) != kFloTag) throw FormatError("flo: bad magic tag");
  const auto w = static_cast<std::int32_t>(get_u32(bytes.data() + 4));
  const auto h = static_cast<std::int32_t>(get_u32(bytes.data() + 8));
  if (w <= 0 || h <= 0 || w > (1 << 15) || h > (1 << 15)) throw FormatError("flo: bad dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() != 12 + n * 8) throw FormatError("flo: payload size mismatch");
  std::vector<float> dx(n);
  std::vector<float> dy(n);
  const std::uint8_t* p = bytes.data() + 12;
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = get_f32(p + 8 * i);
    dy[i] = get_f32(p + 8 * i + 4);
  }
  return FlowField(w, h, std::move(dx), std::move(dy));
}

FlowField read_flo(const fs::path& path) { return decode_flo(read_bytes(path)); }

void write_flo(const FlowField& flow, const fs::path& path) { write_bytes(encode_flo(flow), path); }

Image read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError("png: cannot read " + path.string() + ": " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("png: decode failed for " + path.string() + ": " + image.message);
  }
  const int channels = gray ? 1 : 3;
  std::vector<float> data(buf.size());
  std::transform(buf.begin(), buf.end(), data.begin(), [](std::uint8_t b) { return b / 255.f; });
  return Image(static_cast<int>(image.width), static_cast<int>(image.height), channels,
               std::move(data));
}

void write_png_rgb8(const std::vector<std::uint8_t>& rgb, int width, int height,
                    const fs::path& path) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw InvalidArgument("png: rgb buffer size mismatch");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
    throw InvalidArgument("png: cannot write " + path.string() + ": " + image.message);
  }
}

void write_png(const Image& img, const fs::path& path) {
  std::vector<std::uint8_t> buf(img.size());
  auto src = img.data();
  std::transform(src.begin(), src.end(), buf.begin(), quantize);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw InvalidArgument("png: cannot write " + path.string() + ": " + image.message);
  }
}

Image read_pgm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    std::string tok;
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        ++pos;
      } else {
        tok.push_back(c);
        ++pos;
      }
    }
    return tok;
  };
  if (next_token() != "P5") throw FormatError("pgm: expected P5 header");
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw FormatError("pgm: malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw FormatError("pgm: unsupported dimensions or maxval");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < pos + n) throw FormatError("pgm: truncated payload");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = bytes[pos + i] / 255.f;
  return Image(w, h, 1, std::move(data));
}

void write_pgm(const Image& img, const fs::path& path) {
  if (img.channels() != 1) throw InvalidArgument("pgm: gray images only");
  std::ostringstream hdr;
  hdr << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  for (float v : img.data()) out.push_back(quantize(v));
  write_bytes(out, path);
}

Image read_image(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  return read_png(path);
}

void write_image(const Image& img, const fs::path& path) {
  if (path.extension() == ".pgm") {
    write_pgm(img, path);
  } else {
    write_png(img, path);
  }
}

}  // namespace motad
