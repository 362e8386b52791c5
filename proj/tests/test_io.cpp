#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "derain/config.hpp"
#include "derain/image_io.hpp"
#include "derain/snapshot.hpp"
#include "derain/synth.hpp"
#include "support.hpp"

using namespace derain;
namespace fs = std::filesystem;
using derain::testing::random_frame;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("derain_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Random frame on the quantization grid of the given maximum value.
Frame quantized(std::mt19937_64& rng, int h, int w, int maxval) {
  std::uniform_int_distribution<int> q(0, maxval);
  Frame f(h, w);
  for (double& v : f.values()) v = q(rng) / static_cast<double>(maxval);
  return f;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

OnlineState engine_state(int frames) {
  SceneParams sp;
  sp.height = 24;
  sp.width = 32;
  const SceneGenerator scene(sp);
  StreamingEngine e{EngineConfig{}};
  for (int i = 0; i < frames; ++i) e.push(scene.frame(i).rainy, "f" + std::to_string(i));
  return e.state();
}

}  // namespace

TEST_CASE("lossless image round trips") {
  TempDir tmp;
  std::mt19937_64 rng(1);
  SUBCASE("gray") {
    for (const char* ext : {".png", ".pgm"})
      for (BitDepth d : {BitDepth::k8, BitDepth::k16}) {
        const int maxval = d == BitDepth::k8 ? 255 : 65535;
        const Frame f = quantized(rng, 17, 23, maxval);
        const fs::path p = tmp.path / (std::string("g") + std::to_string(static_cast<int>(d)) + ext);
        write_frame(p, f, d);
        const Image back = read_image(p);
        CHECK_FALSE(back.is_color());
        CHECK(back.luma == f);
      }
  }
  SUBCASE("rgb") {
    for (const char* ext : {".png", ".ppm"})
      for (BitDepth d : {BitDepth::k8, BitDepth::k16}) {
        const int maxval = d == BitDepth::k8 ? 255 : 65535;
        Image img;
        for (int c = 0; c < 3; ++c) img.channels.push_back(quantized(rng, 12, 9, maxval));
        img.luma = luminance(img.channels[0], img.channels[1], img.channels[2]);
        const fs::path p = tmp.path / (std::string("c") + std::to_string(static_cast<int>(d)) + ext);
        write_image(p, img, d);
        const Image back = read_image(p);
        REQUIRE(back.is_color());
        for (int c = 0; c < 3; ++c) CHECK(back.channels[c] == img.channels[c]);
        CHECK(back.luma == img.luma);
      }
  }
  SUBCASE("pfm keeps signed float values") {
    Frame f = random_frame(rng, 10, 14, -1.0, 1.0);
    for (double& v : f.values()) v = static_cast<float>(v);
    write_frame(tmp.path / "r.pfm", f);
    CHECK(read_image(tmp.path / "r.pfm").luma == f);
  }
  SUBCASE("integer formats clamp") {
    Frame f(4, 4, 1.7);
    f[0] = -0.2;
    write_frame(tmp.path / "c.png", f, BitDepth::k8);
    const Frame back = read_image(tmp.path / "c.png").luma;
    CHECK(back[0] == 0.0);
    CHECK(back[1] == 1.0);
  }
  SUBCASE("unknown extension and missing file") {
    CHECK_THROWS_AS(write_frame(tmp.path / "x.bmp", Frame(4, 4)), IoError);
    CHECK_THROWS_AS(read_image(tmp.path / "missing.png"), IoError);
  }
}

TEST_CASE("directory sequences") {
  TempDir tmp;
  std::mt19937_64 rng(2);
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(quantized(rng, 16, 20, 255));
  // written out of order and in mixed formats; names sort lexicographically
  write_frame(tmp.path / "frame_002.png", frames[2], BitDepth::k8);
  write_frame(tmp.path / "frame_000.pgm", frames[0], BitDepth::k8);
  write_frame(tmp.path / "frame_001.png", frames[1], BitDepth::k8);
  write_bytes(tmp.path / "notes.txt", "ignored");

  SUBCASE("all frames in name order") {
    SequenceReader r({SequenceSpec::Kind::Directory, tmp.path});
    CHECK(r.size() == 3);
    for (int i = 0; i < 3; ++i) {
      const auto img = r.next();
      REQUIRE(img.has_value());
      CHECK(img->luma == frames[i]);
      CHECK(r.index() == i);
      CHECK(r.name() == "frame_00" + std::to_string(i));
    }
    CHECK_FALSE(r.next().has_value());
  }
  SUBCASE("range [2, 2]") {
    SequenceSpec spec{SequenceSpec::Kind::Directory, tmp.path};
    spec.first = 2;
    spec.last = 2;
    SequenceReader r(spec);
    CHECK(r.size() == 1);
    const auto img = r.next();
    REQUIRE(img.has_value());
    CHECK(img->luma == frames[2]);
    CHECK_FALSE(r.next().has_value());
  }
  SUBCASE("size change names the frame") {
    write_frame(tmp.path / "frame_003.png", Frame(8, 8), BitDepth::k8);
    SequenceReader r({SequenceSpec::Kind::Directory, tmp.path});
    for (int i = 0; i < 3; ++i) r.next();
    try {
      r.next();
      FAIL("size change not reported");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }
  SUBCASE("corrupt frame") {
    write_bytes(tmp.path / "frame_001.png", "not a png");
    SequenceReader r({SequenceSpec::Kind::Directory, tmp.path});
    r.next();
    CHECK_THROWS_AS(r.next(), IoError);
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(SequenceReader({SequenceSpec::Kind::Directory, tmp.path / "nope"}), IoError); }
}

TEST_CASE("raw planar stream") {
  TempDir tmp;
  std::string bytes;
  for (int f = 0; f < 3; ++f)
    for (int i = 0; i < 4 * 5; ++i) bytes.push_back(static_cast<char>(f * 40 + i));
  bytes.push_back('x');  // incomplete trailing frame
  write_bytes(tmp.path / "clip.raw", bytes);
  SequenceSpec spec{SequenceSpec::Kind::RawStream, tmp.path / "clip.raw"};
  spec.raw_height = 4;
  spec.raw_width = 5;
  spec.first = 1;
  SequenceReader r(spec);
  const auto a = r.next();
  REQUIRE(a.has_value());
  CHECK(a->luma(0, 0) == 40.0 / 255.0);
  CHECK(a->luma(3, 4) == 59.0 / 255.0);
  REQUIRE(r.next().has_value());
  CHECK_THROWS_AS(r.next(), IoError);
}

TEST_CASE("engine config text") {
  EngineConfig cfg;
  cfg.lambda = 100.0;
  cfg.alpha = 30.0;
  cfg.beta = 1.0 / 3.0;
  cfg.scales = {{11, 2}, {5, 4}};
  cfg.csc.max_iters = 77;
  cfg.enable_alignment = false;
  CHECK(parse_engine_config(format_engine_config(cfg)) == cfg);
  CHECK(parse_engine_config("") == EngineConfig{});

  const EngineConfig partial = parse_engine_config("# comment\n[model]\nlambda = 2.5 ; trailing\n\n[tv]\nmax_iters=7\n");
  CHECK(partial.lambda == 2.5);
  CHECK(partial.tv_max_iters == 7);
  CHECK(partial.alpha == EngineConfig{}.alpha);

  const auto error_line = [](std::string_view text) {
    try {
      parse_engine_config(text, "cfg.ini");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_line("[model]\nlamda = 1\n").find("cfg.ini:2") != std::string::npos);
  CHECK_FALSE(error_line("[modle]\n").empty());
  CHECK_FALSE(error_line("lambda = 1\n").empty());
  CHECK_FALSE(error_line("[model]\nlambda = abc\n").empty());
  CHECK_FALSE(error_line("[model]\nlambda = 1\nlambda = 2\n").empty());
  CHECK_FALSE(error_line("[model]\namelioration_period = 2\n").empty());
  CHECK_FALSE(error_line("[model]\nenable_alignment = maybe\n").empty());
  CHECK_THROWS_AS(load_engine_config("/nonexistent/cfg.ini"), ConfigError);

  CHECK(parse_scale_list("13x3, 9x3, 3x3") == default_scales());
  CHECK(format_scale_list(default_scales()) == "13x3, 9x3, 3x3");
  CHECK_THROWS(parse_scale_list("13x"));
}

TEST_CASE("streak params text") {
  StreakParams p;
  p.angle = -5.0;
  p.density = 2.25;
  p.density_rate = -0.125;
  const StreakParams q = parse_streak_params(format_streak_params(p));
  CHECK(q.angle == p.angle);
  CHECK(q.density == p.density);
  CHECK(q.density_rate == p.density_rate);
  CHECK(q.intensity == p.intensity);
  CHECK_THROWS_AS(parse_streak_params("[streaks]\nspeed = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_streak_params("[streaks]\nintensity = 2\n"), ConfigError);
}

TEST_CASE("shipped config files") {
  const fs::path dir = fs::path(DERAIN_SOURCE_DIR) / "configs";
  CHECK(load_engine_config(dir / "synthetic.ini") == derain::testing::synthetic_config());
  const StreakParams p = load_streak_params(dir / "heavy-to-light.ini");
  CHECK(p.at_frame(0).density == 7.0);
  CHECK(p.at_frame(39).density == doctest::Approx(1.54));
}

TEST_CASE("state snapshots") {
  const OnlineState s = engine_state(6);
  REQUIRE_FALSE(s.pending.empty());
  const std::vector<std::uint8_t> bytes = serialize_state(s);

  SUBCASE("round trip") {
    const OnlineState back = deserialize_state(bytes);
    CHECK(back == s);
    CHECK(state_hash(back) == state_hash(s));
    CHECK(serialize_state(back) == bytes);
    TempDir tmp;
    save_state(tmp.path / "s.bin", s);
    CHECK(state_hash(load_state(tmp.path / "s.bin")) == state_hash(s));
  }
  SUBCASE("different states hash differently") { CHECK(state_hash(engine_state(7)) != state_hash(s)); }
  SUBCASE("corruption is detected") {
    std::vector<std::uint8_t> flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(deserialize_state(flipped), SnapshotError);
    CHECK_THROWS_AS(deserialize_state(std::span(bytes).first(bytes.size() - 9)), SnapshotError);
    std::vector<std::uint8_t> magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_state(magic), SnapshotError);
    std::vector<std::uint8_t> longer = bytes;
    longer.push_back(0);
    CHECK_THROWS_AS(deserialize_state(longer), SnapshotError);
    CHECK_THROWS_AS(deserialize_state({}), SnapshotError);
    CHECK_THROWS_AS(load_state("/nonexistent/state.bin"), SnapshotError);
  }
  SUBCASE("a restored engine continues identically") {
    SceneParams sp;
    sp.height = 24;
    sp.width = 32;
    const SceneGenerator scene(sp);
    StreamingEngine full{EngineConfig{}};
    std::vector<FrameResult> a, b;
    for (int i = 0; i < 10; ++i)
      for (auto& r : full.push(scene.frame(i).rainy)) a.push_back(std::move(r));
    StreamingEngine first{EngineConfig{}};
    for (int i = 0; i < 6; ++i)
      for (auto& r : first.push(scene.frame(i).rainy)) b.push_back(std::move(r));
    StreamingEngine resumed{EngineConfig{}, deserialize_state(serialize_state(first.state()))};
    for (int i = 6; i < 10; ++i)
      for (auto& r : resumed.push(scene.frame(i).rainy)) b.push_back(std::move(r));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].recovered == b[i].recovered);
    CHECK(state_hash(full.state()) == state_hash(resumed.state()));
  }
}
