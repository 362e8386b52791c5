#include "derain/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

namespace derain {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image from_planes(std::vector<Frame> planes) {
  Image img;
  if (planes.size() == 1) {
    img.luma = std::move(planes[0]);
  } else {
    img.luma = luminance(planes[0], planes[1], planes[2]);
    img.channels = std::move(planes);
  }
  return img;
}

// ---- PNM ----

struct PnmCursor {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }
  long number(const fs::path& path) {
    skip_space();
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
      if (v > 1'000'000'000) throw IoError(path.string() + ": header value out of range");
    }
    if (!any) throw IoError(path.string() + ": malformed header");
    return v;
  }
};

Image read_pnm(const fs::path& path) {
  const auto bytes = read_all(path);
  if (bytes.size() < 2 || bytes[0] != 'P') throw IoError(path.string() + ": not a PNM file");
  const char kind = static_cast<char>(bytes[1]);
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    throw IoError(path.string() + ": unsupported PNM variant P" + std::string(1, kind));
  const bool ascii = kind == '2' || kind == '3';
  const int nch = (kind == '3' || kind == '6') ? 3 : 1;
  PnmCursor c{bytes, 2};
  const long w = c.number(path);
  const long h = c.number(path);
  const long maxval = c.number(path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw IoError(path.string() + ": invalid PNM header");
  std::vector<Frame> planes(static_cast<std::size_t>(nch), Frame(static_cast<int>(h), static_cast<int>(w)));
  const double denom = static_cast<double>(maxval);
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i)
      for (int ch = 0; ch < nch; ++ch) planes[ch][i] = static_cast<double>(c.number(path)) / denom;
    return from_planes(std::move(planes));
  }
  ++c.pos;  // single whitespace byte after maxval
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (bytes.size() < c.pos + n * nch * bps) throw IoError(path.string() + ": truncated pixel data");
  const unsigned char* p = bytes.data() + c.pos;
  for (std::size_t i = 0; i < n; ++i) {
    for (int ch = 0; ch < nch; ++ch) {
      unsigned v = bps == 2 ? (static_cast<unsigned>(p[0]) << 8) | p[1] : p[0];
      p += bps;
      if (v > static_cast<unsigned>(maxval)) throw IoError(path.string() + ": sample exceeds maxval");
      planes[ch][i] = static_cast<double>(v) / denom;
    }
  }
  return from_planes(std::move(planes));
}

unsigned quantize(double v, unsigned maxval) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned>(std::lround(c * maxval));
}

void write_pnm(const fs::path& path, const std::vector<const Frame*>& planes, BitDepth depth) {
  const Frame& f = *planes[0];
  const unsigned maxval = depth == BitDepth::k16 ? 65535u : 255u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (planes.size() == 3 ? "P6" : "P5") << '\n' << f.width() << ' ' << f.height() << '\n' << maxval << '\n';
  std::vector<unsigned char> row;
  row.reserve(static_cast<std::size_t>(f.width()) * planes.size() * 2);
  for (int y = 0; y < f.height(); ++y) {
    row.clear();
    for (int x = 0; x < f.width(); ++x) {
      for (const Frame* pl : planes) {
        const unsigned v = quantize((*pl)(y, x), maxval);
        if (depth == BitDepth::k16) row.push_back(static_cast<unsigned char>(v >> 8));
        row.push_back(static_cast<unsigned char>(v & 0xFF));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---- PFM ----

float to_little(float v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  auto u = std::bit_cast<std::uint32_t>(v);
  u = ((u & 0xFF) << 24) | ((u & 0xFF00) << 8) | ((u >> 8) & 0xFF00) | (u >> 24);
  return std::bit_cast<float>(u);
}

Image read_pfm(const fs::path& path) {
  const auto bytes = read_all(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != 'f' && bytes[1] != 'F'))
    throw IoError(path.string() + ": not a PFM file");
  const int nch = bytes[1] == 'F' ? 3 : 1;
  PnmCursor c{bytes, 2};
  const long w = c.number(path);
  const long h = c.number(path);
  c.skip_space();
  std::size_t end = c.pos;
  while (end < bytes.size() && !std::isspace(bytes[end])) ++end;
  const double scale = std::strtod(std::string(bytes.begin() + static_cast<std::ptrdiff_t>(c.pos),
                                               bytes.begin() + static_cast<std::ptrdiff_t>(end)).c_str(),
                                   nullptr);
  if (w < 1 || h < 1 || scale == 0.0) throw IoError(path.string() + ": invalid PFM header");
  const bool little = scale < 0.0;
  const std::size_t start = end + 1;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < start + n * nch * 4) throw IoError(path.string() + ": truncated pixel data");
  std::vector<Frame> planes(static_cast<std::size_t>(nch), Frame(static_cast<int>(h), static_cast<int>(w)));
  const unsigned char* p = bytes.data() + start;
  for (long row = 0; row < h; ++row) {
    const int y = static_cast<int>(h - 1 - row);  // stored bottom to top
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < nch; ++ch) {
        std::uint32_t u;
        std::memcpy(&u, p, 4);
        p += 4;
        const bool swap = little != (std::endian::native == std::endian::little);
        if (swap) u = ((u & 0xFF) << 24) | ((u & 0xFF00) << 8) | ((u >> 8) & 0xFF00) | (u >> 24);
        planes[ch](y, x) = static_cast<double>(std::bit_cast<float>(u));
      }
    }
  }
  return from_planes(std::move(planes));
}

void write_pfm(const fs::path& path, const std::vector<const Frame*>& planes) {
  const Frame& f = *planes[0];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (planes.size() == 3 ? "PF" : "Pf") << '\n' << f.width() << ' ' << f.height() << "\n-1.0\n";
  for (int y = f.height() - 1; y >= 0; --y)
    for (int x = 0; x < f.width(); ++x)
      for (const Frame* pl : planes) {
        const float v = to_little(static_cast<float>((*pl)(y, x)));
        out.write(reinterpret_cast<const char*>(&v), 4);
      }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---- PNG ----

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

// libpng reports through these instead of printing to stderr.
thread_local std::string png_message;

void png_error_handler(png_structp png, png_const_charp msg) {
  png_message = msg ? msg : "unknown error";
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

Image read_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": libpng initialisation failed");
  }
  png_uint_32 w = 0, h = 0;
  int depth = 0, color = 0;
  png_bytepp rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": corrupt PNG (" + png_message + ")");
  }
  png_init_io(png, file.get());
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_PACKING, nullptr);
  png_get_IHDR(png, info, &w, &h, &depth, &color, nullptr, nullptr, nullptr);
  rows = png_get_rows(png, info);
  const int nch = (color & PNG_COLOR_MASK_COLOR) ? 3 : 1;
  const bool wide = depth == 16;
  const double denom = wide ? 65535.0 : 255.0;
  std::vector<Frame> planes(static_cast<std::size_t>(nch), Frame(static_cast<int>(h), static_cast<int>(w)));
  for (png_uint_32 y = 0; y < h; ++y) {
    const png_bytep r = rows[y];
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int ch = 0; ch < nch; ++ch) {
        const std::size_t k = static_cast<std::size_t>(x) * nch + ch;
        const unsigned v = wide ? (static_cast<unsigned>(r[2 * k]) << 8) | r[2 * k + 1] : r[k];
        planes[ch](static_cast<int>(y), static_cast<int>(x)) = v / denom;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return from_planes(std::move(planes));
}

void write_png(const fs::path& path, const std::vector<const Frame*>& planes, BitDepth depth) {
  const Frame& f = *planes[0];
  const bool wide = depth == BitDepth::k16;
  const unsigned maxval = wide ? 65535u : 255u;
  const std::size_t nch = planes.size();
  std::vector<unsigned char> buffer(static_cast<std::size_t>(f.width()) * f.height() * nch * (wide ? 2 : 1));
  std::size_t k = 0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      for (const Frame* pl : planes) {
        const unsigned v = quantize((*pl)(y, x), maxval);
        if (wide) buffer[k++] = static_cast<unsigned char>(v >> 8);
        buffer[k++] = static_cast<unsigned char>(v & 0xFF);
      }
  std::vector<png_bytep> rows(static_cast<std::size_t>(f.height()));
  const std::size_t stride = buffer.size() / rows.size();
  for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = buffer.data() + y * stride;

  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string() + " (" + png_message + ")");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(f.width()), static_cast<png_uint_32>(f.height()), wide ? 16 : 8,
               nch == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Frame luminance(const Frame& r, const Frame& g, const Frame& b) {
  require_same_shape(r.shape(), g.shape(), "luminance");
  require_same_shape(r.shape(), b.shape(), "luminance");
  Frame y(r.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return y;
}

bool is_image_file(const fs::path& path) {
  const std::string e = lower_ext(path);
  return e == ".pgm" || e == ".ppm" || e == ".pnm" || e == ".png" || e == ".pfm";
}

Image read_image(const fs::path& path) {
  const std::string e = lower_ext(path);
  if (e == ".png") return read_png(path);
  if (e == ".pfm") return read_pfm(path);
  if (e == ".pgm" || e == ".ppm" || e == ".pnm") return read_pnm(path);
  throw IoError(path.string() + ": unsupported image format");
}

void write_image(const fs::path& path, const Image& img, BitDepth depth) {
  std::vector<const Frame*> planes;
  if (img.is_color()) {
    for (const Frame& c : img.channels) planes.push_back(&c);
  } else {
    planes.push_back(&img.luma);
  }
  const std::string e = lower_ext(path);
  if (e == ".png") return write_png(path, planes, depth);
  if (e == ".pfm") return write_pfm(path, planes);
  if (e == ".pgm" || e == ".ppm" || e == ".pnm") return write_pnm(path, planes, depth);
  throw IoError(path.string() + ": unsupported image format");
}

void write_frame(const fs::path& path, const Frame& f, BitDepth depth) {
  Image img;
  img.luma = f;
  write_image(path, img, depth);
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

SequenceReader::SequenceReader(SequenceSpec spec) : spec_(std::move(spec)) {
  if (spec_.first < 0) throw std::invalid_argument("sequence: first frame index must be >= 0");
  if (spec_.last >= 0 && spec_.last < spec_.first) throw std::invalid_argument("sequence: empty frame range");
  if (spec_.kind == SequenceSpec::Kind::Directory) {
    files_ = list_frames(spec_.source);
    if (files_.empty()) throw IoError(spec_.source.string() + ": no image files");
  } else {
    if (spec_.raw_height < 1 || spec_.raw_width < 1 || (spec_.raw_channels != 1 && spec_.raw_channels != 3))
      throw std::invalid_argument("sequence: raw streams need height, width and 1 or 3 channels");
    raw_.open(spec_.source, std::ios::binary);
    if (!raw_) throw IoError("cannot open " + spec_.source.string());
    const auto bytes = static_cast<std::streamoff>(spec_.raw_height) * spec_.raw_width * spec_.raw_channels;
    raw_.seekg(bytes * spec_.first);
  }
  cursor_ = spec_.first;
}

std::optional<int> SequenceReader::size() const {
  if (spec_.kind != SequenceSpec::Kind::Directory) return std::nullopt;
  const int total = static_cast<int>(files_.size());
  const int last = spec_.last < 0 ? total - 1 : std::min(spec_.last, total - 1);
  return std::max(0, last - spec_.first + 1);
}

std::optional<Image> SequenceReader::next() {
  if (spec_.last >= 0 && cursor_ > spec_.last) return std::nullopt;
  Image img;
  if (spec_.kind == SequenceSpec::Kind::Directory) {
    if (cursor_ >= static_cast<int>(files_.size())) return std::nullopt;
    const fs::path& p = files_[static_cast<std::size_t>(cursor_)];
    try {
      img = read_image(p);
    } catch (const IoError& e) {
      throw IoError("frame " + std::to_string(cursor_) + ": " + e.what());
    }
    name_ = p.stem().string();
  } else {
    const std::size_t n = static_cast<std::size_t>(spec_.raw_height) * spec_.raw_width;
    std::vector<unsigned char> buf(n * spec_.raw_channels);
    raw_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (raw_.gcount() == 0) return std::nullopt;
    if (static_cast<std::size_t>(raw_.gcount()) != buf.size())
      throw IoError("frame " + std::to_string(cursor_) + ": truncated raw frame");
    std::vector<Frame> planes(static_cast<std::size_t>(spec_.raw_channels), Frame(spec_.raw_height, spec_.raw_width));
    for (int ch = 0; ch < spec_.raw_channels; ++ch)
      for (std::size_t i = 0; i < n; ++i) planes[ch][i] = buf[ch * n + i] / 255.0;
    img = from_planes(std::move(planes));
    char label[32];
    std::snprintf(label, sizeof label, "frame_%06d", cursor_);
    name_ = label;
  }
  if (shape_ && *shape_ != img.luma.shape())
    throw IoError("frame " + std::to_string(cursor_) + ": size changed from " + to_string(*shape_) + " to " +
                  to_string(img.luma.shape()));
  shape_ = img.luma.shape();
  if (!spec_.color) img.channels.clear();
  index_ = cursor_++;
  return img;
}

}  // namespace derain
