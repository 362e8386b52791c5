#pragma once

// Per-frame online decomposition
//
//   X^t = H^perp o (B^{t-1} warped by tau) + H o F + R + E,   R ~ sum_ks D_ks (*) M_ks
//
// Every frame runs a few outer ADMM sweeps over tau, H, F, M, D, R, T and
// the noise / rain scale parameters, starting from the previous frame's
// solution. StreamingEngine wraps the per-frame step with the bounded frame
// buffers needed for periodic background amelioration.

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "derain/affine.hpp"
#include "derain/csc.hpp"
#include "derain/dictionary.hpp"
#include "derain/frame.hpp"
#include "derain/tv.hpp"

namespace derain {

struct EngineConfig {
  double lambda = 0.1;  // TV weight on F
  double alpha = 0.3;   // mask smoothness, spatial and temporal
  double beta = 0.15;   // mask sparsity
  double rho = 1.0;     // ADMM penalty on R = sum D (*) M; the R step uses rho / s2_{t-1}
  int amelioration_period = 20;
  int outer_iters = 5;
  double outer_tol = 1e-3;  // relative change of R
  std::vector<ScaleSpec> scales = default_scales();
  double sigma2_init = 1e-3;
  double b_init = 1e-2;
  int bootstrap_frames = 3;  // no alignment or amelioration while t <= this
  bool enable_alignment = true;
  bool enable_amelioration = true;
  bool ameliorate_after_bootstrap = true;  // also at t = bootstrap_frames + 1

  // Running background: after each frame the anchor moves this fraction of
  // the way toward X - max(sum D (*) M, 0) on background pixels. 0 keeps
  // B fixed between ameliorations.
  double background_rate = 0.3;
  // Alignment ignores pixels whose residual exceeds this many robust
  // standard deviations. 0 disables trimming.
  double align_trim = 2.5;
  // F data term over every pixel instead of only H = 1.
  bool object_full_frame = true;

  CscSettings csc;
  DictionarySettings dictionary;
  double tv_tolerance = 1e-4;
  int tv_max_iters = 100;
  AlignSettings align;  // used by amelioration
  int align_halvings = 4;

  void validate() const;
  /// Frames of output delay the streaming wrapper needs.
  int latency() const { return enable_amelioration ? 2 : 0; }
  bool operator==(const EngineConfig&) const = default;
};

inline constexpr double kParameterFloor = 1e-8;

struct OnlineState {
  long t = 1;  // index of the next frame to process
  Frame background;          // B^{t-1}
  Frame background_anchor;   // last initialized or ameliorated background
  AffineTransform anchor_to_current;  // B^{t-1} = warp(anchor, this)
  SupportMask mask;          // H^{t-1}
  FilterBank bank;
  double sigma2 = 1e-3;
  ScaleParams scales;
  Frame multiplier;          // T
  DictionaryStats dict_stats;
  CscWorkspace csc;
  Frame object;              // F warm start
  TvDual tv_dual;
  std::deque<Frame> recent;  // X^{t-1}, X^{t-2} (newest first)
  std::deque<Frame> pending; // lookahead frames held by the streaming wrapper
  std::deque<std::string> pending_labels;

  Shape grid() const { return background.shape(); }
  /// Checks the documented invariants; throws std::logic_error if violated.
  void check_invariants() const;
  bool operator==(const OnlineState& o) const;
};

OnlineState init_state(const Frame& first_frame, const EngineConfig& cfg);

struct KlDiagnostics {
  double noise = 0.0;        // Q_E, N^{t-1} KL(N(0, s_{t-1}) || N(0, s_t))
  std::vector<double> rain;  // Q_R per filter, Laplace scales
};

struct FrameDiagnostics {
  long t = 0;
  int outer_iterations = 0;
  bool converged = false;
  std::vector<double> lagrangian_trace;
  std::vector<double> rain_change_trace;
  double sigma2 = 0.0;
  double sigma2_bar = 0.0;
  std::vector<double> b;
  std::vector<double> b_bar;
  KlDiagnostics kl;
  AffineTransform tau;
  double delta_tau_norm = 0.0;
  bool ameliorated = false;
  std::size_t mask_pixels = 0;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

struct FrameResult {
  Frame recovered;   // H^perp o B + H o F
  Frame rain_layer;  // sum over scales of the layers below
  std::vector<Frame> scale_layers;
  Frame rain_residual;  // the split variable R
  Frame background;
  Frame object;
  SupportMask mask;
  FrameDiagnostics diagnostics;
  std::string label;
};

/// One frame of the online algorithm. `lookahead` holds X^{t+1}, X^{t+2}
/// when available; it is only read on amelioration frames.
FrameResult process_frame(OnlineState& state, const Frame& x, const EngineConfig& cfg,
                          std::span<const Frame> lookahead = {});

// Closed-form pieces of the outer iteration.

/// R = (X - Gamma) / (1 + rho s2), Gamma = H^perp o B + H o F - rho s2 (sum D (*) M + T)
Frame update_rain_layer(const Frame& x, const Frame& background, const Frame& object, const SupportMask& mask,
                        const FeatureMapSet& maps, const FilterBank& bank, const Frame& multiplier, double sigma2,
                        double rho);

/// T + sum D (*) M - R
Frame update_multiplier(const Frame& multiplier, const FeatureMapSet& maps, const FilterBank& bank, const Frame& rain);

struct NoiseUpdate {
  double sigma2 = 0.0;
  double sigma2_bar = 0.0;
};

/// s_t = s_bar / t + (t - 1) / t * s_{t-1}, with s_bar the mean squared
/// residual of the model floored at 1e-8.
NoiseUpdate update_noise_variance(long t, double sigma2_prev, const Frame& x, const Frame& background,
                                  const Frame& object, const Frame& rain, const SupportMask& mask);

struct ScaleUpdate {
  ScaleParams b;
  std::vector<double> b_bar;
};

/// b_t = b_bar / t + (t - 1) / t * b_{t-1}, b_bar = ||M||_1 / d floored at 1e-8.
ScaleUpdate update_scale_params(long t, const ScaleParams& prev, const FeatureMapSet& maps);

KlDiagnostics kl_diagnostics(long t, std::size_t pixels, double sigma2_prev, double sigma2,
                             const ScaleParams& b_prev, const ScaleParams& b);

struct Amelioration {
  std::optional<Frame> background;
  std::vector<std::string> warnings;
};

/// Rank-one background from X^{t-2..t+2} aligned to X^t; `window` is
/// ordered oldest first with X^t in the middle.
Amelioration ameliorate_background(std::span<const Frame> window, std::size_t current, bool align,
                                   const AlignSettings& settings);

/// Streams frames through one engine with the configured output latency.
class StreamingEngine {
 public:
  explicit StreamingEngine(EngineConfig cfg);
  StreamingEngine(EngineConfig cfg, OnlineState restored);

  /// Feeds one frame; returns the results that became ready (zero or one).
  std::vector<FrameResult> push(const Frame& x, const std::string& label = {});
  /// Processes everything still buffered.
  std::vector<FrameResult> flush();

  bool started() const { return state_.has_value(); }
  const OnlineState& state() const;
  const EngineConfig& config() const { return cfg_; }

 private:
  FrameResult step();

  EngineConfig cfg_;
  std::optional<OnlineState> state_;
};

}  // namespace derain
