#include "derain/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace derain {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'S', 'N', 'A', 'P', 'S', 'H'};

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { uint(v, 4); }
  void i32(std::int32_t v) { uint(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { uint(v, 8); }
  void i64(std::int64_t v) { uint(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v), 8); }
  void reals(std::span<const double> v) {
    for (double x : v) f64(x);
  }
  void grid(const Frame& f) { reals(f.values()); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void uint(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  const std::uint8_t* take(std::size_t n) {
    if (n > in_.size() - pos_) throw SnapshotError("snapshot truncated at byte " + std::to_string(pos_));
    const std::uint8_t* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() { return uint(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(uint(8)); }
  double f64() { return std::bit_cast<double>(uint(8)); }
  Frame grid(Shape g) {
    Frame f(g);
    for (double& v : f.values()) v = f64();
    return f;
  }
  std::size_t count(std::size_t limit, const char* what) {
    const std::uint32_t n = u32();
    if (n > limit) throw SnapshotError(std::string("snapshot: implausible ") + what + " count " + std::to_string(n));
    return n;
  }
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  std::uint64_t uint(int n) {
    const std::uint8_t* p = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_matrix(Writer& w, const Eigen::MatrixXd& m) {
  // row-major
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
}

Eigen::MatrixXd read_matrix(Reader& r, Eigen::Index n) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = r.f64();
  return m;
}

Eigen::VectorXd read_vector(Reader& r, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = r.f64();
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_state(const OnlineState& s) {
  const Shape g = s.grid();
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kSnapshotVersion);
  w.i32(g.height);
  w.i32(g.width);
  w.i64(s.t);
  w.f64(s.sigma2);

  const auto& scales = s.bank.scales();
  w.u32(static_cast<std::uint32_t>(scales.size()));
  for (const ScaleSpec& sc : scales) {
    w.i32(sc.patch_size);
    w.i32(sc.filter_count);
  }
  for (const Frame& f : s.bank.filters()) w.grid(f);
  w.reals(s.scales.b);

  w.grid(s.background);
  w.grid(s.background_anchor);
  w.reals(s.anchor_to_current.params());
  w.bytes(s.mask.labels().data(), s.mask.size());
  w.grid(s.multiplier);
  w.grid(s.object);
  w.grid(s.tv_dual.px);
  w.grid(s.tv_dual.py);

  const bool has_csc = s.csc.matches(s.bank.filter_count(), g);
  w.u8(has_csc ? 1 : 0);
  if (has_csc) {
    for (const Frame& m : s.csc.maps) w.grid(m);
    for (const Frame& d : s.csc.dual) w.grid(d);
    w.f64(s.csc.penalty);
  }

  const DictionaryStats& d = s.dict_stats;
  w.f64(d.forgetting());
  w.i64(d.frames_committed());
  w.u8(d.has_pending() ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(d.tap_count()));
  write_matrix(w, d.past_gram());
  w.reals({d.past_cross().data(), static_cast<std::size_t>(d.past_cross().size())});
  write_matrix(w, d.frame_gram());
  w.reals({d.frame_cross().data(), static_cast<std::size_t>(d.frame_cross().size())});

  w.u32(static_cast<std::uint32_t>(s.recent.size()));
  for (const Frame& f : s.recent) w.grid(f);
  w.u32(static_cast<std::uint32_t>(s.pending.size()));
  for (std::size_t i = 0; i < s.pending.size(); ++i) {
    w.grid(s.pending[i]);
    const std::string& label = i < s.pending_labels.size() ? s.pending_labels[i] : std::string();
    w.u32(static_cast<std::uint32_t>(label.size()));
    w.bytes(label.data(), label.size());
  }
  w.u64(fnv1a(w.buffer()));
  return std::move(w.buffer());
}

OnlineState deserialize_state(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw SnapshotError("not a state snapshot (bad magic)");
  const std::uint64_t stored = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
    return v;
  }();
  Reader r(bytes.first(bytes.size() - 8));
  r.take(sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kSnapshotVersion)
    throw SnapshotError("unsupported snapshot version " + std::to_string(version) + " (expected " +
                        std::to_string(kSnapshotVersion) + ")");
  if (fnv1a(bytes.first(bytes.size() - 8)) != stored) throw SnapshotError("snapshot checksum mismatch");

  OnlineState s;
  const Shape g{r.i32(), r.i32()};
  if (g.height < kMinFrameSide || g.width < kMinFrameSide || g.size() > (std::size_t{1} << 28))
    throw SnapshotError("snapshot: invalid grid " + to_string(g));
  s.t = r.i64();
  s.sigma2 = r.f64();

  std::vector<ScaleSpec> scales(r.count(64, "scale"));
  std::size_t filters = 0;
  for (ScaleSpec& sc : scales) {
    sc.patch_size = r.i32();
    sc.filter_count = r.i32();
    if (sc.patch_size < 1 || sc.patch_size > 255 || sc.filter_count < 1 || sc.filter_count > 256)
      throw SnapshotError("snapshot: invalid scale entry");
    filters += static_cast<std::size_t>(sc.filter_count);
  }
  std::vector<Frame> taps;
  for (const ScaleSpec& sc : scales)
    for (int i = 0; i < sc.filter_count; ++i) taps.push_back(r.grid({sc.patch_size, sc.patch_size}));
  try {
    s.bank = FilterBank(scales, std::move(taps));
  } catch (const std::invalid_argument& e) {
    throw SnapshotError(std::string("snapshot: invalid filter bank: ") + e.what());
  }
  s.scales.b.resize(filters);
  for (double& b : s.scales.b) b = r.f64();

  s.background = r.grid(g);
  s.background_anchor = r.grid(g);
  AffineTransform::Params p;
  for (double& v : p) v = r.f64();
  s.anchor_to_current = AffineTransform(p);
  std::vector<std::uint8_t> labels(g.size());
  const std::uint8_t* raw = r.take(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (raw[i] > 1) throw SnapshotError("snapshot: support mask is not binary");
    labels[i] = raw[i];
  }
  s.mask = SupportMask(g.height, g.width, std::move(labels));
  s.multiplier = r.grid(g);
  s.object = r.grid(g);
  s.tv_dual.px = r.grid(g);
  s.tv_dual.py = r.grid(g);

  if (r.u8()) {
    s.csc.grid = g;
    for (std::size_t i = 0; i < filters; ++i) s.csc.maps.push_back(r.grid(g));
    for (std::size_t i = 0; i < filters; ++i) s.csc.dual.push_back(r.grid(g));
    s.csc.penalty = r.f64();
  }

  const double forgetting = r.f64();
  const long committed = static_cast<long>(r.i64());
  const bool pending = r.u8() != 0;
  const auto n = static_cast<Eigen::Index>(r.count(1u << 16, "tap"));
  Eigen::MatrixXd past_gram = read_matrix(r, n);
  Eigen::VectorXd past_cross = read_vector(r, n);
  Eigen::MatrixXd frame_gram = read_matrix(r, n);
  Eigen::VectorXd frame_cross = read_vector(r, n);
  try {
    s.dict_stats = DictionaryStats::restore(s.bank, forgetting, committed, pending, std::move(past_gram),
                                            std::move(past_cross), std::move(frame_gram), std::move(frame_cross));
  } catch (const std::invalid_argument& e) {
    throw SnapshotError(std::string("snapshot: ") + e.what());
  }

  const std::size_t recent = r.count(4, "recent frame");
  for (std::size_t i = 0; i < recent; ++i) s.recent.push_back(r.grid(g));
  const std::size_t pend = r.count(4, "pending frame");
  for (std::size_t i = 0; i < pend; ++i) {
    s.pending.push_back(r.grid(g));
    const std::size_t len = r.count(4096, "label byte");
    const auto* c = reinterpret_cast<const char*>(r.take(len));
    s.pending_labels.emplace_back(c, len);
  }
  if (!r.at_end()) throw SnapshotError("snapshot: trailing bytes after state");
  try {
    s.check_invariants();
  } catch (const std::logic_error& e) {
    throw SnapshotError(std::string("snapshot violates state invariants: ") + e.what());
  }
  return s;
}

void save_state(const std::filesystem::path& path, const OnlineState& s) {
  const auto bytes = serialize_state(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SnapshotError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SnapshotError("failed writing " + path.string());
}

OnlineState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_state(bytes);
}

std::uint64_t state_hash(const OnlineState& s) {
  const auto bytes = serialize_state(s);
  return fnv1a(std::span<const std::uint8_t>(bytes).first(bytes.size() - 8));
}

}  // namespace derain
