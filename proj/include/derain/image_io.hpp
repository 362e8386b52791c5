#pragma once

// Lossless frame I/O: binary PGM/PPM (8 or 16 bit), PNG (8 or 16 bit, gray
// or RGB, alpha dropped) and little-endian PFM for signed layers. Values are
// mapped to [0,1] on read by dividing by the format's maximum value.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A decoded frame. Colour images keep their three channels next to the
/// luminance the solver works on; grayscale images have no channels.
struct Image {
  Frame luma;
  std::vector<Frame> channels;  // empty, or R, G, B

  bool is_color() const { return channels.size() == 3; }
};

/// ITU-R BT.601 weights.
Frame luminance(const Frame& r, const Frame& g, const Frame& b);

Image read_image(const std::filesystem::path& path);

enum class BitDepth { k8 = 8, k16 = 16 };

/// Format from the extension: .pgm/.ppm/.pnm, .png or .pfm. Values are
/// clamped to [0,1] and rounded for the integer formats; PFM stores them
/// unchanged as 32-bit floats.
void write_image(const std::filesystem::path& path, const Image& img, BitDepth depth = BitDepth::k16);
void write_frame(const std::filesystem::path& path, const Frame& f, BitDepth depth = BitDepth::k16);

bool is_image_file(const std::filesystem::path& path);

/// Where frames come from.
struct SequenceSpec {
  enum class Kind { Directory, RawStream };
  Kind kind = Kind::Directory;
  std::filesystem::path source;
  int first = 0;   // inclusive, 0-based
  int last = -1;   // inclusive; -1 means through the end
  bool color = true;  // false folds colour input to luminance only

  // raw streams only: 8-bit planar frames of height * width * channels bytes
  int raw_height = 0;
  int raw_width = 0;
  int raw_channels = 1;
};

/// Image files of a directory in lexicographic name order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// Yields one frame at a time; only the current frame is held in memory.
class SequenceReader {
 public:
  explicit SequenceReader(SequenceSpec spec);

  /// Next frame, or nothing at the end of the range. Throws IoError naming
  /// the frame index on decode failures or a size change.
  std::optional<Image> next();

  /// Index (in the full sequence) of the frame the last next() returned.
  int index() const { return index_; }
  /// Base name of that frame, used to name outputs.
  const std::string& name() const { return name_; }
  /// Frames in the selected range, when known up front.
  std::optional<int> size() const;

 private:
  SequenceSpec spec_;
  std::vector<std::filesystem::path> files_;
  std::ifstream raw_;
  int cursor_ = 0;
  int index_ = -1;
  std::string name_;
  std::optional<Shape> shape_;
};

}  // namespace derain
