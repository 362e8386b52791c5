#include "derain/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "derain/fft_conv.hpp"
#include "derain/kernels.hpp"
#include "derain/rank_one.hpp"
#include "derain/support_mrf.hpp"

namespace derain {

void EngineConfig::validate() const {
  if (!(lambda >= 0.0) || !(alpha >= 0.0) || !(beta >= 0.0))
    throw std::invalid_argument("config: lambda, alpha and beta must be non-negative");
  if (!(rho > 0.0)) throw std::invalid_argument("config: rho must be positive");
  if (amelioration_period < 5) throw std::invalid_argument("config: amelioration period must be >= 5");
  if (outer_iters < 1) throw std::invalid_argument("config: outer_iters must be >= 1");
  if (!(outer_tol > 0.0)) throw std::invalid_argument("config: outer_tol must be positive");
  if (!(sigma2_init > 0.0) || !(b_init > 0.0)) throw std::invalid_argument("config: initial sigma^2 and b must be > 0");
  if (bootstrap_frames < 0) throw std::invalid_argument("config: bootstrap_frames must be >= 0");
  if (!(background_rate >= 0.0 && background_rate <= 1.0))
    throw std::invalid_argument("config: background_rate must lie in [0, 1]");
  if (!(align_trim >= 0.0)) throw std::invalid_argument("config: align_trim must be >= 0");
  if (csc.max_iters < 1 || !(csc.tolerance > 0.0) || !(csc.relaxation > 0.0 && csc.relaxation < 2.0))
    throw std::invalid_argument("config: invalid csc settings");
  if (!(dictionary.forgetting > 0.0 && dictionary.forgetting <= 1.0) || dictionary.sweeps < 1)
    throw std::invalid_argument("config: invalid dictionary settings");
  if (tv_max_iters < 1 || !(tv_tolerance > 0.0)) throw std::invalid_argument("config: invalid tv settings");
  if (align.max_iters < 1 || align.pyramid_levels < 1 || align_halvings < 0)
    throw std::invalid_argument("config: invalid alignment settings");
  FilterBank probe = make_streak_bank(scales);  // validates the scale list
  (void)probe;
}

void OnlineState::check_invariants() const {
  if (t < 1) throw std::logic_error("state: t must be >= 1");
  if (!(sigma2 > 0.0)) throw std::logic_error("state: sigma^2 must be positive");
  for (double b : scales.b)
    if (!(b > 0.0)) throw std::logic_error("state: scale parameters must be positive");
  if (scales.size() != bank.filter_count()) throw std::logic_error("state: one scale parameter per filter");
  if (recent.size() + pending.size() > 4) throw std::logic_error("state: frame buffer holds more than 4 frames");
  const Shape g = grid();
  if (g.height < kMinFrameSide || g.width < kMinFrameSide) throw std::logic_error("state: frame below minimum size");
  if (mask.shape() != g || multiplier.shape() != g || object.shape() != g || background_anchor.shape() != g)
    throw std::logic_error("state: grids disagree in size");
  if (!background.all_finite() || !multiplier.all_finite() || !object.all_finite())
    throw std::logic_error("state: non-finite values");
}

bool OnlineState::operator==(const OnlineState& o) const {
  return t == o.t && background == o.background && background_anchor == o.background_anchor &&
         anchor_to_current == o.anchor_to_current && mask == o.mask && bank == o.bank && sigma2 == o.sigma2 &&
         scales == o.scales && multiplier == o.multiplier && dict_stats == o.dict_stats && csc.grid == o.csc.grid &&
         csc.maps == o.csc.maps && csc.dual == o.csc.dual && csc.penalty == o.csc.penalty && object == o.object &&
         tv_dual.px == o.tv_dual.px && tv_dual.py == o.tv_dual.py && recent == o.recent && pending == o.pending &&
         pending_labels == o.pending_labels;
}

OnlineState init_state(const Frame& first_frame, const EngineConfig& cfg) {
  cfg.validate();
  const Shape g = first_frame.shape();
  if (g.height < kMinFrameSide || g.width < kMinFrameSide)
    throw DimensionError("init_state: frames must be at least " + std::to_string(kMinFrameSide) + "x" +
                         std::to_string(kMinFrameSide) + ", got " + to_string(g));
  if (!first_frame.all_finite()) throw std::invalid_argument("init_state: frame has non-finite values");
  OnlineState s;
  s.t = 1;
  s.background = first_frame;
  s.background_anchor = first_frame;
  s.mask = SupportMask(g);
  s.bank = make_streak_bank(cfg.scales);
  s.sigma2 = cfg.sigma2_init;
  s.scales.b.assign(s.bank.filter_count(), cfg.b_init);
  s.multiplier = Frame(g);
  s.dict_stats = DictionaryStats(s.bank, cfg.dictionary.forgetting);
  s.csc.reset(s.bank.filter_count(), g);
  s.object = first_frame;
  s.tv_dual = {Frame(g), Frame(g)};
  return s;
}

Frame update_rain_layer(const Frame& x, const Frame& background, const Frame& object, const SupportMask& mask,
                        const FeatureMapSet& maps, const FilterBank& bank, const Frame& multiplier, double sigma2,
                        double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("update_rain_layer: rho must be >= 0");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("update_rain_layer: sigma^2 must be positive");
  const Shape g = x.shape();
  require_same_shape(g, background.shape(), "update_rain_layer background");
  require_same_shape(g, object.shape(), "update_rain_layer object layer");
  require_same_shape(g, mask.shape(), "update_rain_layer mask");
  require_same_shape(g, multiplier.shape(), "update_rain_layer multiplier");
  const Frame dm = convolve_sum(bank, maps);
  require_same_shape(g, dm.shape(), "update_rain_layer maps");
  const double a = rho * sigma2;
  Frame r(g);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double gamma = (mask[i] ? object[i] : background[i]) - a * (dm[i] + multiplier[i]);
    r[i] = (x[i] - gamma) / (1.0 + a);
  }
  return r;
}

Frame update_multiplier(const Frame& multiplier, const FeatureMapSet& maps, const FilterBank& bank,
                        const Frame& rain) {
  require_same_shape(multiplier.shape(), rain.shape(), "update_multiplier");
  Frame dm = convolve_sum(bank, maps);
  require_same_shape(multiplier.shape(), dm.shape(), "update_multiplier maps");
  Frame out = multiplier;
  out += dm;
  out -= rain;
  return out;
}

NoiseUpdate update_noise_variance(long t, double sigma2_prev, const Frame& x, const Frame& background,
                                  const Frame& object, const Frame& rain, const SupportMask& mask) {
  if (t < 1) throw std::invalid_argument("update_noise_variance: t must be >= 1");
  const Frame pred = elementwise_compose(x, background, object, rain, mask);
  const double mean_sq = kernels::sum_squared_difference(x.values(), pred.values()) / static_cast<double>(x.size());
  NoiseUpdate out;
  out.sigma2_bar = std::max(mean_sq, kParameterFloor);
  const double td = static_cast<double>(t);
  out.sigma2 = out.sigma2_bar / td + (td - 1.0) / td * sigma2_prev;
  return out;
}

ScaleUpdate update_scale_params(long t, const ScaleParams& prev, const FeatureMapSet& maps) {
  if (t < 1) throw std::invalid_argument("update_scale_params: t must be >= 1");
  if (prev.size() != maps.size()) throw DimensionError("update_scale_params: one map per scale parameter");
  ScaleUpdate out;
  const double td = static_cast<double>(t);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const double bar = std::max(sum_abs(maps[i]) / static_cast<double>(maps[i].size()), kParameterFloor);
    out.b_bar.push_back(bar);
    out.b.b.push_back(bar / td + (td - 1.0) / td * prev.b[i]);
  }
  return out;
}

KlDiagnostics kl_diagnostics(long t, std::size_t pixels, double sigma2_prev, double sigma2, const ScaleParams& b_prev,
                             const ScaleParams& b) {
  const double n = static_cast<double>(t - 1) * static_cast<double>(pixels);
  KlDiagnostics out;
  const double ratio = sigma2_prev / sigma2;
  out.noise = n * 0.5 * (ratio - 1.0 - std::log(ratio));
  for (std::size_t i = 0; i < b.size(); ++i)
    out.rain.push_back(n * (std::log(b.b[i] / b_prev.b[i]) + b_prev.b[i] / b.b[i] - 1.0));
  return out;
}

Amelioration ameliorate_background(std::span<const Frame> window, std::size_t current, bool align,
                                   const AlignSettings& settings) {
  Amelioration out;
  if (current >= window.size()) throw std::invalid_argument("ameliorate_background: current frame out of range");
  const Frame& ref = window[current];
  std::vector<const Frame*> columns;
  std::vector<Frame> aligned;
  aligned.reserve(window.size());
  std::size_t current_column = 0;
  for (std::size_t j = 0; j < window.size(); ++j) {
    require_same_shape(window[j].shape(), ref.shape(), "ameliorate_background");
    if (j == current) {
      current_column = aligned.size();
      aligned.push_back(ref);
      continue;
    }
    if (!align) {
      aligned.push_back(window[j]);
      continue;
    }
    Alignment a = align_to_reference(window[j], ref, settings);
    if (!a.warning.empty()) {
      out.warnings.push_back("amelioration: neighbour " + std::to_string(j) + " dropped (" + a.warning + ")");
      continue;
    }
    aligned.push_back(std::move(a.warped));
  }
  if (aligned.size() < 3) {
    out.warnings.push_back("amelioration skipped: fewer than 3 usable frames");
    return out;
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ref.size()), static_cast<Eigen::Index>(aligned.size()));
  for (std::size_t j = 0; j < aligned.size(); ++j)
    for (std::size_t i = 0; i < ref.size(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = aligned[j][i];
  const RankOne r1 = rank_one_approx(m);
  Frame b(ref.shape());
  const double scale = r1.v(static_cast<Eigen::Index>(current_column));
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = r1.u(static_cast<Eigen::Index>(i)) * scale;
  out.background = std::move(b);
  return out;
}

namespace {

// Adds pixels whose alignment residual exceeds `k` robust standard
// deviations (1.4826 MAD) to the excluded set.
SupportMask trim_outliers(const Frame& x, const Frame& rain, const Frame& b_prev, const AffineTransform& tau,
                          const SupportMask& mask, double k) {
  const Frame bw = warp(b_prev, tau);
  std::vector<double> res(x.size());
  std::vector<double> mags;
  mags.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    res[i] = std::abs(x[i] - rain[i] - bw[i]);
    if (!mask[i]) mags.push_back(res[i]);
  }
  SupportMask out = mask;
  if (mags.empty()) return out;
  const auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  const double cut = k * 1.4826 * std::max(*mid, 1e-6);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (res[i] > cut) out.set(i, true);
  return out;
}

// Moves the anchor background toward the rain-free evidence X - max(DM, 0)
// on background pixels, pulled back into anchor coordinates.
void blend_background(OnlineState& state, const Frame& x, const Frame& dm, const SupportMask& mask, double rate) {
  const Shape g = x.shape();
  Frame evidence = x;
  Frame occupied(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    evidence[i] -= std::max(dm[i], 0.0);
    occupied[i] = mask[i] ? 1.0 : 0.0;
  }
  if (!state.anchor_to_current.is_identity()) {
    const AffineTransform back = state.anchor_to_current.inverse();
    evidence = warp(evidence, back);
    occupied = warp(occupied, back);
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    state.background_anchor[i] += rate * (1.0 - occupied[i]) * (evidence[i] - state.background_anchor[i]);
}

double mask_tv3d(const SupportMask& h, const SupportMask& prev) {
  double acc = 0.0;
  for (int y = 0; y < h.height(); ++y) {
    for (int x = 0; x < h.width(); ++x) {
      const auto l = h(y, x);
      if (x + 1 < h.width() && l != h(y, x + 1)) acc += 1.0;
      if (y + 1 < h.height() && l != h(y + 1, x)) acc += 1.0;
      if (l != prev(y, x)) acc += 1.0;
    }
  }
  return acc;
}

struct LagrangianTerms {
  const Frame* x;
  const Frame* background;
  const Frame* object;
  const Frame* rain;
  const Frame* dm;
  const Frame* multiplier;
  const SupportMask* mask;
  const SupportMask* mask_prev;
  const FeatureMapSet* maps;
};

double lagrangian(const LagrangianTerms& v, long t, double sigma2, double sigma2_prev, const ScaleParams& b,
                  const ScaleParams& b_prev, double rho, const EngineConfig& cfg) {
  const double d = static_cast<double>(v.x->size());
  const double n = static_cast<double>(t - 1) * d;
  const Frame pred = elementwise_compose(*v.x, *v.background, *v.object, *v.rain, *v.mask);
  double value = kernels::sum_squared_difference(v.x->values(), pred.values()) / (2.0 * sigma2);
  const double log_sigma = 0.5 * std::log(sigma2);
  value += d * log_sigma + n * (log_sigma + sigma2_prev / (2.0 * sigma2));
  value += cfg.alpha * mask_tv3d(*v.mask, *v.mask_prev) + cfg.beta * static_cast<double>(v.mask->count());
  for (std::size_t i = 0; i < b.size(); ++i) {
    value += d * std::log(b.b[i]) + sum_abs((*v.maps)[i]) / b.b[i];
    value += n * (std::log(b.b[i]) + b_prev.b[i] / b.b[i]);
  }
  value += cfg.lambda * tv_norm(*v.object);
  Frame gap = *v.dm;
  gap -= *v.rain;
  gap += *v.multiplier;
  value += 0.5 * rho * sum_squares(gap);
  return value;
}

}  // namespace

FrameResult process_frame(OnlineState& state, const Frame& x, const EngineConfig& cfg,
                          std::span<const Frame> lookahead) {
  const auto started = std::chrono::steady_clock::now();
  const Shape g = state.grid();
  require_same_shape(g, x.shape(), "process_frame");
  if (!x.all_finite()) throw std::invalid_argument("process_frame: frame has non-finite values");
  const long t = state.t;

  FrameResult result;
  FrameDiagnostics& diag = result.diagnostics;
  diag.t = t;

  const bool warmed_up = t > cfg.bootstrap_frames;
  const bool align = cfg.enable_alignment && warmed_up;

  const bool first_warm = cfg.ameliorate_after_bootstrap && t == cfg.bootstrap_frames + 1;
  if (cfg.enable_amelioration && warmed_up && (t % cfg.amelioration_period == 0 || first_warm)) {
    if (state.recent.size() >= 2 && lookahead.size() >= 2) {
      const std::vector<Frame> window{state.recent[1], state.recent[0], x, lookahead[0], lookahead[1]};
      Amelioration a = ameliorate_background(window, 2, cfg.enable_alignment, cfg.align);
      for (auto& w : a.warnings) diag.warnings.push_back(std::move(w));
      if (a.background) {
        state.background_anchor = std::move(*a.background);
        state.anchor_to_current = AffineTransform::identity();
        state.background = state.background_anchor;
        diag.ameliorated = true;
      }
    } else {
      diag.warnings.push_back("amelioration skipped: neighbouring frames unavailable");
    }
  }

  const Frame& b_prev = state.background;
  const SupportMask h_prev = state.mask;
  const double sigma2_prev = state.sigma2;
  const ScaleParams b_prev_scales = state.scales;

  AffineTransform tau;
  Frame background = b_prev;
  SupportMask mask = h_prev;
  Frame object = state.object;
  Frame rain(g);
  FeatureMapSet maps = state.csc.maps;
  double sigma2 = sigma2_prev;
  double sigma2_bar = sigma2_prev;
  ScaleParams scales = b_prev_scales;
  std::vector<double> b_bar(scales.b);
  double align_residual = align ? alignment_residual(x, rain, b_prev, tau, mask) : 0.0;
  // R-step penalty in units of the previous noise level
  const double rho_r = cfg.rho / (warmed_up ? sigma2_prev : cfg.sigma2_init);

  for (int it = 1; it <= cfg.outer_iters; ++it) {
    if (align) {
      const SupportMask amask = cfg.align_trim > 0.0 ? trim_outliers(x, rain, b_prev, tau, mask, cfg.align_trim) : mask;
      align_residual = alignment_residual(x, rain, b_prev, tau, amask);
      const StepResult step = delta_tau(x, rain, b_prev, tau, amask);
      if (!step.warning.empty()) diag.warnings.push_back(step.warning);
      const DampedStep d = damped_update(x, rain, b_prev, tau, amask, step.delta, align_residual, cfg.align_halvings);
      if (d.accepted) {
        diag.delta_tau_norm = step.delta.norm() * std::pow(0.5, d.halvings);
        tau = d.tau;
        align_residual = d.residual;
      }
      background = warp(state.background_anchor, tau.after(state.anchor_to_current));
    }

    const PixelEnergy energy = build_energy(x, background, object, rain, sigma2, h_prev, cfg.alpha, cfg.beta);
    mask = min_cut_solve(energy);

    Frame observation = x;
    observation -= rain;
    const SupportMask tv_mask = cfg.object_full_frame ? SupportMask(g, 1) : mask;
    const TvProblem tv{std::move(observation), tv_mask, std::max(2.0 * sigma2 * cfg.lambda, 1e-12), cfg.tv_tolerance,
                       cfg.tv_max_iters};
    TvReport tv_report;
    object = solve_tv(tv, object, &tv_report, &state.tv_dual);
    if (!tv_report.warning.empty() && it == cfg.outer_iters) diag.warnings.push_back(tv_report.warning);

    Frame target = rain;
    target -= state.multiplier;
    maps = update_feature_maps(state.bank, target, scales, cfg.rho, state.csc, cfg.csc);
    if (!state.csc.report.warning.empty() && it == cfg.outer_iters) diag.warnings.push_back(state.csc.report.warning);
    state.bank = update_filters(state.bank, maps, target, state.dict_stats, cfg.dictionary);

    const Frame rain_old = rain;
    rain = update_rain_layer(x, background, object, mask, maps, state.bank, state.multiplier, sigma2, rho_r);
    state.multiplier = update_multiplier(state.multiplier, maps, state.bank, rain);

    const NoiseUpdate nu = update_noise_variance(t, sigma2_prev, x, background, object, rain, mask);
    sigma2 = nu.sigma2;
    sigma2_bar = nu.sigma2_bar;
    ScaleUpdate su = update_scale_params(t, b_prev_scales, maps);
    scales = std::move(su.b);
    b_bar = std::move(su.b_bar);

    const Frame dm = convolve_sum(state.bank, maps);
    diag.lagrangian_trace.push_back(lagrangian({&x, &background, &object, &rain, &dm, &state.multiplier, &mask,
                                                &h_prev, &maps},
                                               t, sigma2, sigma2_prev, scales, b_prev_scales, rho_r, cfg));
    const double change = std::sqrt(kernels::sum_squared_difference(rain.values(), rain_old.values()));
    const double rel = change / std::max(frobenius_norm(rain), 1e-12);
    diag.rain_change_trace.push_back(rel);
    diag.outer_iterations = it;
    if (rel < cfg.outer_tol) {
      diag.converged = true;
      break;
    }
  }

  state.dict_stats.commit();
  state.anchor_to_current = tau.after(state.anchor_to_current);
  if (cfg.background_rate > 0.0) {
    blend_background(state, x, convolve_sum(state.bank, maps), mask, cfg.background_rate);
    background = state.anchor_to_current.is_identity() ? state.background_anchor
                                                       : warp(state.background_anchor, state.anchor_to_current);
  }
  state.background = background;
  state.mask = mask;
  state.object = object;
  state.sigma2 = sigma2;
  state.scales = scales;
  state.recent.push_front(x);
  while (state.recent.size() > 2) state.recent.pop_back();
  state.t = t + 1;

  diag.sigma2 = sigma2;
  diag.sigma2_bar = sigma2_bar;
  diag.b = scales.b;
  diag.b_bar = b_bar;
  diag.kl = kl_diagnostics(t, g.size(), sigma2_prev, sigma2, b_prev_scales, scales);
  diag.tau = tau;
  diag.mask_pixels = mask.count();

  result.recovered = recover(background, object, mask);
  result.scale_layers = convolve_per_scale(state.bank, maps);
  result.rain_layer = Frame(g);
  for (const auto& layer : result.scale_layers) result.rain_layer += layer;
  result.rain_residual = std::move(rain);
  result.background = background;
  result.object = std::move(object);
  result.mask = std::move(mask);
  diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

StreamingEngine::StreamingEngine(EngineConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

StreamingEngine::StreamingEngine(EngineConfig cfg, OnlineState restored) : cfg_(std::move(cfg)) {
  cfg_.validate();
  restored.check_invariants();
  if (restored.bank.scales() != cfg_.scales)
    throw std::invalid_argument("restored state was built with a different scale list");
  state_ = std::move(restored);
}

const OnlineState& StreamingEngine::state() const {
  if (!state_) throw std::logic_error("StreamingEngine: no frame has been pushed yet");
  return *state_;
}

FrameResult StreamingEngine::step() {
  OnlineState& s = *state_;
  const Frame x = std::move(s.pending.front());
  std::string label = std::move(s.pending_labels.front());
  s.pending.pop_front();
  s.pending_labels.pop_front();
  const std::vector<Frame> lookahead(s.pending.begin(), s.pending.end());
  FrameResult r = process_frame(s, x, cfg_, lookahead);
  r.label = std::move(label);
  return r;
}

std::vector<FrameResult> StreamingEngine::push(const Frame& x, const std::string& label) {
  if (!state_) state_ = init_state(x, cfg_);
  require_same_shape(state_->grid(), x.shape(), "StreamingEngine::push");
  state_->pending.push_back(x);
  state_->pending_labels.push_back(label);
  std::vector<FrameResult> out;
  while (state_->pending.size() > static_cast<std::size_t>(cfg_.latency())) out.push_back(step());
  return out;
}

std::vector<FrameResult> StreamingEngine::flush() {
  std::vector<FrameResult> out;
  while (state_ && !state_->pending.empty()) out.push_back(step());
  return out;
}

}  // namespace derain
