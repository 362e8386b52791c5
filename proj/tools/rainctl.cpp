// rainctl: derain, synth, evaluate and inspect-state.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "derain/config.hpp"
#include "derain/engine.hpp"
#include "derain/image_io.hpp"
#include "derain/metrics.hpp"
#include "derain/snapshot.hpp"
#include "derain/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace derain;

namespace {

struct DerainArgs {
  fs::path input;
  std::string raw_size;  // HxW or HxWxC for raw streams
  fs::path output;
  fs::path config;
  bool emit_rain_layers = false;
  fs::path state_out;
  fs::path state_in;
  fs::path report;
  int first = 0;
  int last = -1;
  bool gray = false;
  int bit_depth = 16;
  std::string format = "png";
};

struct SynthArgs {
  fs::path clean;
  fs::path out;
  fs::path params;
  std::uint64_t seed = 1;
  bool scene = false;
  int frames = 40;
  int height = 64;
  int width = 96;
  double jitter = 0.0;
};

struct EvaluateArgs {
  fs::path recovered;
  fs::path reference;
  fs::path report;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string frame_name(const std::string& label, long t) {
  if (!label.empty()) return label;
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06ld", t);
  return buf;
}

json diagnostics_json(const FrameResult& r) {
  const FrameDiagnostics& d = r.diagnostics;
  json j;
  j["t"] = d.t;
  j["name"] = frame_name(r.label, d.t);
  j["outer_iterations"] = d.outer_iterations;
  j["converged"] = d.converged;
  j["sigma2"] = d.sigma2;
  j["sigma2_bar"] = d.sigma2_bar;
  j["b"] = d.b;
  j["b_bar"] = d.b_bar;
  j["kl_noise"] = d.kl.noise;
  j["kl_rain"] = d.kl.rain;
  j["lagrangian"] = d.lagrangian_trace;
  j["rain_change"] = d.rain_change_trace;
  j["tau"] = d.tau.params();
  j["delta_tau_norm"] = d.delta_tau_norm;
  j["ameliorated"] = d.ameliorated;
  j["mask_pixels"] = d.mask_pixels;
  j["seconds"] = d.seconds;
  j["warnings"] = d.warnings;
  return j;
}

SequenceSpec sequence_spec(const fs::path& input, const std::string& raw_size, int first, int last, bool color) {
  SequenceSpec spec;
  spec.source = input;
  spec.first = first;
  spec.last = last;
  spec.color = color;
  if (!raw_size.empty()) {
    spec.kind = SequenceSpec::Kind::RawStream;
    int h = 0, w = 0, c = 1;
    const int n = std::sscanf(raw_size.c_str(), "%dx%dx%d", &h, &w, &c);
    if (n < 2) throw std::invalid_argument("--raw-size expects HxW or HxWxC");
    spec.raw_height = h;
    spec.raw_width = w;
    spec.raw_channels = c;
  }
  return spec;
}

// Colour output: every channel loses the luminance that the engine removed.
Image recovered_image(const Image& input, const Frame& recovered) {
  Image out;
  out.luma = recovered;
  if (input.is_color()) {
    Frame removed = input.luma;
    removed -= recovered;
    for (const Frame& c : input.channels) out.channels.push_back(c - removed);
  }
  return out;
}

int run_derain(const DerainArgs& a) {
  const EngineConfig cfg = a.config.empty() ? EngineConfig{} : load_engine_config(a.config);
  const BitDepth depth = a.bit_depth == 8 ? BitDepth::k8 : BitDepth::k16;
  fs::create_directories(a.output);
  if (a.emit_rain_layers) fs::create_directories(a.output / "rain");

  std::optional<StreamingEngine> engine;
  if (!a.state_in.empty()) {
    engine.emplace(cfg, load_state(a.state_in));
  } else {
    engine.emplace(cfg);
  }

  SequenceReader reader(sequence_spec(a.input, a.raw_size, a.first, a.last, !a.gray));
  // colour planes of frames still inside the engine, oldest first
  std::deque<Image> held;
  json frames = json::array();
  double seconds = 0.0;

  auto emit = [&](const FrameResult& r) {
    const Image source = std::move(held.front());
    held.pop_front();
    const std::string name = frame_name(r.label, r.diagnostics.t);
    write_image(a.output / (name + "." + a.format), recovered_image(source, r.recovered), depth);
    if (a.emit_rain_layers) {
      write_frame(a.output / "rain" / (name + ".pfm"), r.rain_layer);
      for (std::size_t k = 0; k < r.scale_layers.size(); ++k)
        write_frame(a.output / "rain" / (name + "_scale" + std::to_string(k) + ".pfm"), r.scale_layers[k]);
    }
    frames.push_back(diagnostics_json(r));
    seconds += r.diagnostics.seconds;
  };

  if (engine->started()) {
    // frames carried over in the snapshot have no colour planes
    for (const Frame& f : engine->state().pending) held.push_back(Image{f, {}});
  }
  while (auto img = reader.next()) {
    const std::string label = reader.name();
    held.push_back(*img);
    for (const FrameResult& r : engine->push(img->luma, label)) emit(r);
  }
  if (!a.state_out.empty()) {
    // Frames waiting for lookahead stay in the snapshot; a resumed run emits them.
    if (!engine->started()) throw std::runtime_error("no frames were read; nothing to snapshot");
    save_state(a.state_out, engine->state());
  } else {
    for (const FrameResult& r : engine->flush()) emit(r);
  }

  json doc;
  doc["config"] = format_engine_config(cfg);
  doc["frames"] = std::move(frames);
  const auto n = doc["frames"].size();
  doc["summary"] = {{"frames", n},
                    {"total_seconds", seconds},
                    {"mean_seconds", n ? seconds / static_cast<double>(n) : 0.0},
                    {"held_in_snapshot", a.state_out.empty() ? 0 : held.size()}};
  const fs::path report = a.report.empty() ? a.output / "report.json" : a.report;
  write_text(report, doc.dump(2) + "\n");
  std::cerr << "derain: " << n << " frames written to " << a.output.string() << "\n";
  return 0;
}

std::uint64_t frame_seed(std::uint64_t seed, int index) {
  return seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(index) + 1;
}

int run_synth(const SynthArgs& a) {
  const StreakParams params = a.params.empty() ? StreakParams{} : load_streak_params(a.params);
  fs::create_directories(a.out / "rainy");
  fs::create_directories(a.out / "rain");
  fs::create_directories(a.out / "clean");
  int count = 0;
  auto save = [&](const Image& clean, int index) {
    const StreakParams p = params.at_frame(index);
    const RainySample s = synthesize_streaks(clean.luma, p, frame_seed(a.seed, index));
    Image rainy;
    rainy.luma = s.rainy;
    for (const Frame& c : clean.channels) {
      Frame ch = c + s.rain;
      for (double& v : ch.values()) v = std::clamp(v, 0.0, 1.0);
      rainy.channels.push_back(std::move(ch));
    }
    char name[32];
    std::snprintf(name, sizeof name, "%06d", index);
    write_image(a.out / "rainy" / (std::string(name) + ".png"), rainy);
    write_image(a.out / "clean" / (std::string(name) + ".png"), clean);
    write_frame(a.out / "rain" / (std::string(name) + ".pfm"), s.rain);
    ++count;
  };
  if (a.scene) {
    SceneParams sp;
    sp.frames = a.frames;
    sp.height = a.height;
    sp.width = a.width;
    sp.jitter = a.jitter;
    sp.seed = a.seed;
    const SceneGenerator gen(sp);
    for (int i = 0; i < a.frames; ++i) save(Image{gen.frame(i).clean, {}}, i);
  } else {
    SequenceReader reader(sequence_spec(a.clean, "", 0, -1, true));
    while (auto img = reader.next()) save(*img, count);
  }
  std::cerr << "synth: " << count << " frames written to " << a.out.string() << "\n";
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  SequenceReader rec(sequence_spec(a.recovered, "", 0, -1, false));
  SequenceReader ref(sequence_spec(a.reference, "", 0, -1, false));
  std::vector<FrameScore> scores;
  while (true) {
    auto r = rec.next();
    auto f = ref.next();
    if (!r && !f) break;
    if (!r || !f) throw std::runtime_error("evaluate: sequences differ in length");
    require_same_shape(r->luma.shape(), f->luma.shape(), "evaluate");
    scores.push_back({rec.name(), psnr(r->luma, f->luma), ssim(r->luma, f->luma)});
  }
  const SequenceReport report = summarize(std::move(scores));
  write_text(a.report, report.to_json());
  std::cout << "frames " << report.frames.size() << "  mean PSNR " << report.mean_psnr << " dB  mean SSIM "
            << report.mean_ssim << "\n";
  return 0;
}

int run_inspect(const fs::path& path, bool as_json) {
  const OnlineState s = load_state(path);
  std::vector<double> norms;
  for (const Frame& f : s.bank.filters()) norms.push_back(frobenius_norm(f));
  if (as_json) {
    json j;
    j["t"] = s.t;
    j["height"] = s.grid().height;
    j["width"] = s.grid().width;
    j["sigma2"] = s.sigma2;
    j["b"] = s.scales.b;
    j["filter_norms"] = norms;
    j["scales"] = format_scale_list(s.bank.scales());
    j["pending_frames"] = s.pending.size();
    j["hash"] = state_hash(s);
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("t             %ld\n", s.t);
  std::printf("grid          %dx%d\n", s.grid().height, s.grid().width);
  std::printf("sigma2        %.10g\n", s.sigma2);
  std::printf("scales        %s\n", format_scale_list(s.bank.scales()).c_str());
  for (std::size_t i = 0; i < norms.size(); ++i)
    std::printf("filter %-3zu    patch %2d  b %.6g  |D|_F %.6f\n", i, s.bank.filter(i).height(), s.scales.b[i],
                norms[i]);
  std::printf("pending       %zu\n", s.pending.size());
  std::printf("hash          %016llx\n", static_cast<unsigned long long>(state_hash(s)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming rain and snow removal"};
  app.require_subcommand(1);

  DerainArgs d;
  auto* derain = app.add_subcommand("derain", "Remove rain from a frame sequence");
  derain->add_option("--input", d.input, "Directory of frames, or a raw 8-bit planar stream")->required();
  derain->add_option("--raw-size", d.raw_size, "Treat --input as a raw stream of HxW or HxWxC frames");
  derain->add_option("--output", d.output, "Output directory")->required();
  derain->add_option("--config", d.config, "Engine configuration file")->check(CLI::ExistingFile);
  derain->add_flag("--emit-rain-layers", d.emit_rain_layers, "Write total and per-scale rain layers (PFM)");
  derain->add_option("--state-out", d.state_out, "Save the engine state after the last frame");
  derain->add_option("--state-in", d.state_in, "Resume from a saved state")->check(CLI::ExistingFile);
  derain->add_option("--report", d.report, "Diagnostics report (default <output>/report.json)");
  derain->add_option("--first", d.first, "First frame index (0-based)")->check(CLI::NonNegativeNumber);
  derain->add_option("--last", d.last, "Last frame index, inclusive");
  derain->add_flag("--gray", d.gray, "Write luminance only");
  derain->add_option("--bit-depth", d.bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
  derain->add_option("--format", d.format, "png, pgm or pfm")->check(CLI::IsMember({"png", "pgm", "pfm"}));

  SynthArgs s;
  auto* synth = app.add_subcommand("synth", "Add procedural rain to clean frames");
  auto* clean_opt = synth->add_option("--clean", s.clean, "Directory of clean frames");
  synth->add_option("--out", s.out, "Output directory (rainy/, rain/, clean/)")->required();
  synth->add_option("--params", s.params, "Streak parameter file")->check(CLI::ExistingFile);
  synth->add_option("--seed", s.seed, "Random seed");
  auto* scene_opt = synth->add_flag("--scene", s.scene, "Generate the built-in textured scene instead of --clean");
  synth->add_option("--frames", s.frames, "Scene length")->check(CLI::PositiveNumber);
  synth->add_option("--height", s.height, "Scene height")->check(CLI::Range(16, 4096));
  synth->add_option("--width", s.width, "Scene width")->check(CLI::Range(16, 4096));
  synth->add_option("--jitter", s.jitter, "Scene background jitter, pixels")->check(CLI::NonNegativeNumber);
  clean_opt->excludes(scene_opt);

  EvaluateArgs e;
  auto* evaluate = app.add_subcommand("evaluate", "PSNR/SSIM of recovered frames against references");
  evaluate->add_option("--recovered", e.recovered, "Recovered frames")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--reference", e.reference, "Reference frames")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--report", e.report, "JSON report path")->required();

  fs::path state_file;
  bool inspect_json = false;
  auto* inspect = app.add_subcommand("inspect-state", "Summarize a saved engine state");
  inspect->add_option("file", state_file, "Snapshot file")->required()->check(CLI::ExistingFile);
  inspect->add_flag("--json", inspect_json, "Machine-readable output");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*derain) return run_derain(d);
    if (*synth) {
      if (s.clean.empty() && !s.scene) throw std::invalid_argument("synth: give --clean <dir> or --scene");
      return run_synth(s);
    }
    if (*evaluate) return run_evaluate(e);
    if (*inspect) return run_inspect(state_file, inspect_json);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
