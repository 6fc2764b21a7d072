#include "previewflow/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifdef PREVIEWFLOW_HAVE_PNG
#include <png.h>
#endif

#include "previewflow/error.hpp"

namespace pflow::io {

namespace fs = std::filesystem;

void write_f32_le(std::ostream& os, std::span<const float> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("failed writing float payload");
}

std::vector<float> read_f32_le(std::istream& is, std::size_t count) {
  std::vector<char> buf(count * 4);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw IoError("float payload truncated");
  }
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot open " + tmp.string());
    os << text;
    if (!os) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_grid(const fs::path& stem, const LatentGrid& grid) {
  fs::path raw = stem;
  raw += ".f32";
  fs::path meta = stem;
  meta += ".json";
  if (raw.has_parent_path()) fs::create_directories(raw.parent_path());
  {
    std::ofstream os(raw, std::ios::binary);
    if (!os) throw IoError("cannot open " + raw.string());
    write_f32_le(os, grid.data());
  }
  nlohmann::ordered_json j;
  j["h"] = grid.h();
  j["w"] = grid.w();
  j["d"] = grid.d();
  j["t"] = grid.t();
  write_text_atomic(meta, j.dump(2) + "\n");
}

LatentGrid read_grid(const fs::path& stem) {
  fs::path raw = stem;
  raw += ".f32";
  fs::path meta = stem;
  meta += ".json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(meta));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad grid sidecar " + meta.string() + ": " + e.what());
  }
  const int h = j.at("h").get<int>();
  const int w = j.at("w").get<int>();
  const int d = j.at("d").get<int>();
  const double t = j.at("t").get<double>();
  std::ifstream is(raw, std::ios::binary);
  if (!is) throw IoError("cannot open " + raw.string());
  auto data = read_f32_le(is, static_cast<std::size_t>(h) * w * d);
  return LatentGrid(h, w, d, std::move(data), t);
}

std::uint8_t to_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  // std::round is half-away-from-zero.
  return static_cast<std::uint8_t>(std::round(c));
}

namespace {

std::vector<std::uint8_t> to_bytes(const LatentGrid& image) {
  std::vector<std::uint8_t> px(image.size());
  auto v = image.data();
  for (std::size_t i = 0; i < v.size(); ++i) px[i] = to_byte(v[i]);
  return px;
}

#ifdef PREVIEWFLOW_HAVE_PNG
void write_png(const fs::path& path, const LatentGrid& image, const std::vector<std::uint8_t>& px) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  const int color = image.d() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, image.w(), image.h(), 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.w()) * image.d();
  for (int y = 0; y < image.h(); ++y) {
    png_write_row(png, const_cast<png_bytep>(px.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}
#endif

}  // namespace

fs::path write_image(const fs::path& stem, const LatentGrid& image) {
  if (image.d() != 1 && image.d() != 3) {
    throw DimensionError("image export needs 1 or 3 channels");
  }
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  const auto px = to_bytes(image);
#ifdef PREVIEWFLOW_HAVE_PNG
  fs::path path = stem;
  path += ".png";
  write_png(path, image, px);
  return path;
#else
  fs::path path = stem;
  path += image.d() == 1 ? ".pgm" : ".ppm";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string());
  os << (image.d() == 1 ? "P5\n" : "P6\n") << image.w() << " " << image.h() << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  return path;
#endif
}

}  // namespace pflow::io
