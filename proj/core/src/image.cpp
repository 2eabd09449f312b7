#include "reconprobe/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "reconprobe/error.hpp"

namespace reconprobe {

double scale_max(PixelScale scale) { return scale == PixelScale::byte ? 255.0 : 1.0; }

std::string_view to_string(PixelScale scale) { return scale == PixelScale::byte ? "byte" : "unit"; }

PixelScale parse_pixel_scale(std::string_view text) {
  if (text == "unit") return PixelScale::unit;
  if (text == "byte") return PixelScale::byte;
  throw ValidationError("unknown pixel scale '" + std::string(text) + "' (expected unit or byte)");
}

ImageRaster::ImageRaster(int height, int width, int channels, PixelScale scale)
    : ImageRaster(height, width, channels, scale,
                  std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) *
                                      std::max(width, 0) * std::max(channels, 0))) {}

ImageRaster::ImageRaster(int height, int width, int channels, PixelScale scale, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), scale_(scale), data_(std::move(data)) {
  if (height <= 0 || width <= 0) throw ValidationError("image dimensions must be positive");
  if (channels != 1 && channels != 3)
    throw ValidationError("unsupported channel count " + std::to_string(channels) + " (expected 1 or 3)");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels)
    throw ValidationError("pixel buffer size does not match image dimensions");
}

void ImageRaster::check_range() const {
  const double hi = max_value();
  for (double v : data_) {
    if (!(v >= 0.0 && v <= hi))
      throw ValidationError("pixel value " + std::to_string(v) + " outside " + std::string(to_string(scale_)) +
                            " range");
  }
}

void ImageRaster::clamp_to_scale() {
  const double hi = max_value();
  for (double& v : data_) v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, hi);
}

ImageRaster ImageRaster::converted(PixelScale target) const {
  if (target == scale_) return *this;
  ImageRaster out = *this;
  out.scale_ = target;
  const double factor = scale_max(target) / scale_max(scale_);
  for (double& v : out.data_) v *= factor;
  return out;
}

MaskRaster::MaskRaster(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (height <= 0 || width <= 0) throw ValidationError("mask dimensions must be positive");
  if (bits_.size() != static_cast<std::size_t>(height) * width)
    throw ValidationError("mask buffer size does not match mask dimensions");
  bool any = false;
  for (auto& b : bits_) {
    b = b ? 1 : 0;
    any = any || b;
  }
  if (!any) throw ValidationError("mask has no degraded pixels");
}

std::size_t MaskRaster::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

MaskRaster::Box MaskRaster::bounding_box() const {
  Box box{height_, width_, 0, 0};
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      if (!at(r, c)) continue;
      box.row0 = std::min(box.row0, r);
      box.col0 = std::min(box.col0, c);
      box.row1 = std::max(box.row1, r + 1);
      box.col1 = std::max(box.col1, c + 1);
    }
  }
  return box;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("unreadable file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write file: " + path.string());
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Decoded 8-bit samples before scale assignment.
struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<unsigned char> samples;
  std::vector<unsigned char*> row_scratch;  // libpng row pointers, kept out of setjmp frames
};

// ---- PNG ------------------------------------------------------------------

struct PngReadCursor {
  const std::vector<unsigned char>* bytes;
  std::size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes->size()) png_error(png, "truncated data");
  std::memcpy(out, cursor->bytes->data() + cursor->offset, length);
  cursor->offset += length;
}

void png_silent_warning(png_structp, png_const_charp) {}

// Default handler prints to stderr; callers report their own error.
[[noreturn]] void png_silent_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

enum class PngFailure { none, unreadable, bit_depth, channels };

// Runs under setjmp; only trivially destructible locals live in this frame.
PngFailure decode_png_raw(const std::vector<unsigned char>& bytes, Decoded& out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_silent_error, png_silent_warning);
  if (!png) return PngFailure::unreadable;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return PngFailure::unreadable;
  }
  PngReadCursor cursor{&bytes, 0};
  PngFailure failure = PngFailure::none;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return PngFailure::unreadable;
  }
  png_set_read_fn(png, &cursor, png_read_from_memory);
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) failure = PngFailure::channels;
  } else if (bit_depth != 8) {
    failure = PngFailure::bit_depth;
  } else if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
    failure = PngFailure::channels;
  }
  if (failure != PngFailure::none) {
    png_destroy_read_struct(&png, &info, nullptr);
    return failure;
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.samples.resize(stride * out.height);
  out.row_scratch.resize(out.height);
  for (int r = 0; r < out.height; ++r) out.row_scratch[r] = out.samples.data() + stride * r;
  png_read_image(png, out.row_scratch.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return PngFailure::none;
}

Decoded decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  Decoded out;
  switch (decode_png_raw(bytes, out)) {
    case PngFailure::none:
      break;
    case PngFailure::unreadable:
      throw IoError("unreadable file: " + path.string());
    case PngFailure::bit_depth:
      throw IoError("unsupported bit depth in " + path.string() + " (only 8-bit samples are supported)");
    case PngFailure::channels:
      throw IoError("unsupported channel count in " + path.string() + " (expected gray or RGB)");
  }
  if (out.channels != 1 && out.channels != 3)
    throw IoError("unsupported channel count in " + path.string() + " (expected gray or RGB)");
  return out;
}

void png_write_to_memory(png_structp png, png_bytep data, png_size_t length) {
  auto* sink = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  sink->insert(sink->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

bool encode_png_raw(Decoded& img, std::vector<unsigned char>& sink) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_silent_error, png_silent_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  img.row_scratch.resize(img.height);
  for (int r = 0; r < img.height; ++r) img.row_scratch[r] = img.samples.data() + stride * r;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &sink, png_write_to_memory, png_flush_noop);
  png_set_IHDR(png, info, img.width, img.height, 8, img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, img.row_scratch.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

// ---- PNM ------------------------------------------------------------------

class PnmCursor {
 public:
  explicit PnmCursor(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  // Next whitespace-delimited header token, skipping '#' comments.
  bool token(std::string& out) {
    out.clear();
    while (pos_ < bytes_.size()) {
      unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
    return !out.empty();
  }

  bool integer(long& out) {
    std::string t;
    if (!token(t)) return false;
    for (char c : t)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    if (t.size() > 9) return false;
    out = std::stol(t);
    return true;
  }

  // Binary payload begins after exactly one whitespace byte.
  bool skip_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) return false;
    ++pos_;
    return true;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const unsigned char* here() const { return bytes_.data() + pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

Decoded decode_pnm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  const auto unreadable = [&] { return IoError("unreadable file: " + path.string()); };
  PnmCursor cur(bytes);
  std::string magic;
  if (!cur.token(magic)) throw unreadable();
  int channels = 0;
  bool ascii = false;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else if (magic == "P2") channels = 1, ascii = true;
  else if (magic == "P3") channels = 3, ascii = true;
  else throw IoError("unsupported PNM variant '" + magic + "' in " + path.string());

  long width = 0, height = 0, maxval = 0;
  if (!cur.integer(width) || !cur.integer(height) || !cur.integer(maxval)) throw unreadable();
  if (width <= 0 || height <= 0) throw unreadable();
  if (maxval != 255) throw IoError("unsupported bit depth in " + path.string() + " (maxval must be 255)");

  Decoded out;
  out.width = static_cast<int>(width);
  out.height = static_cast<int>(height);
  out.channels = channels;
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  out.samples.resize(n);
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      long v = 0;
      if (!cur.integer(v) || v > 255) throw unreadable();
      out.samples[i] = static_cast<unsigned char>(v);
    }
  } else {
    if (!cur.skip_single_space() || cur.remaining() < n) throw unreadable();
    std::memcpy(out.samples.data(), cur.here(), n);
  }
  return out;
}

std::vector<unsigned char> encode_pnm(const Decoded& img) {
  std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), img.samples.begin(), img.samples.end());
  return bytes;
}

bool is_png(const std::vector<unsigned char>& bytes) {
  static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

Decoded decode_any(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (is_png(bytes)) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes, path);
  if (lower_extension(path) == ".png") throw IoError("unreadable file: " + path.string());
  throw IoError("unsupported image format: " + path.string() + " (expected PNG, PGM or PPM)");
}

void encode_any(Decoded& img, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    std::vector<unsigned char> sink;
    if (!encode_png_raw(img, sink)) throw IoError("PNG encoding failed for " + path.string());
    write_bytes(path, sink);
  } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    if ((ext == ".pgm" && img.channels != 1) || (ext == ".ppm" && img.channels != 3))
      throw ValidationError("channel count does not match extension of " + path.string());
    write_bytes(path, encode_pnm(img));
  } else {
    throw ValidationError("unsupported output format: " + path.string());
  }
}

}  // namespace

ImageRaster load_image(const std::filesystem::path& path, PixelScale scale) {
  const Decoded d = decode_any(path);
  const double divisor = scale == PixelScale::byte ? 1.0 : 255.0;
  std::vector<double> data(d.samples.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = d.samples[i] / divisor;
  return ImageRaster(d.height, d.width, d.channels, scale, std::move(data));
}

void save_image(const ImageRaster& image, const std::filesystem::path& path) {
  Decoded d;
  d.height = image.height();
  d.width = image.width();
  d.channels = image.channels();
  d.samples.resize(image.data().size());
  const double factor = 255.0 / image.max_value();
  const auto src = image.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    d.samples[i] = static_cast<unsigned char>(std::clamp(std::lround(src[i] * factor), 0L, 255L));
  encode_any(d, path);
}

void save_mask(const MaskRaster& mask, const std::filesystem::path& path) {
  Decoded d;
  d.height = mask.height();
  d.width = mask.width();
  d.channels = 1;
  d.samples.reserve(mask.bits().size());
  for (auto b : mask.bits()) d.samples.push_back(b ? 255 : 0);
  encode_any(d, path);
}

MaskRaster load_mask(const std::filesystem::path& path) {
  const Decoded d = decode_any(path);
  if (d.channels != 1) throw IoError("mask file must be single-channel: " + path.string());
  std::vector<std::uint8_t> bits(d.samples.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = d.samples[i] >= 128 ? 1 : 0;
  return MaskRaster(d.height, d.width, std::move(bits));
}

}  // namespace reconprobe
