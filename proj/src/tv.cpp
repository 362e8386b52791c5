#include "derain/tv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "derain/kernels.hpp"

namespace derain {

double tv_norm(const Frame& f) { return kernels::tv_norm(f.values(), f.height(), f.width()); }

double tv_objective(const TvProblem& p, const Frame& f) {
  require_same_shape(p.observation.shape(), f.shape(), "tv_objective");
  double data = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!p.mask[i]) continue;
    const double r = p.observation[i] - f[i];
    data += r * r;
  }
  return data + p.weight * tv_norm(f);
}

Frame solve_tv(const TvProblem& p, const Frame& warm, TvReport* report, TvDual* dual) {
  if (!(p.weight > 0.0)) throw std::invalid_argument("solve_tv: weight must be positive");
  const Shape g = p.observation.shape();
  require_same_shape(g, p.mask.shape(), "solve_tv mask");
  require_same_shape(g, warm.shape(), "solve_tv warm start");
  const int h = g.height;
  const int w = g.width;
  const std::size_t n = g.size();

  TvReport local;
  TvReport& rep = report ? *report : local;
  rep = {};

  // tau * sigma * ||grad||^2 <= 1 with ||grad||^2 <= 8
  const double tau = 0.99 / std::sqrt(8.0);
  const double sigma = 0.99 / std::sqrt(8.0);

  Frame px(g), py(g);
  if (dual && dual->px.shape() == g && dual->py.shape() == g) {
    px = dual->px;
    py = dual->py;
  }
  Frame f = warm;
  Frame fbar = warm;
  Frame gx(g), gy(g), div(g), fnew(g);

  Frame best = warm;
  double best_value = tv_objective(p, warm);
  rep.objective_trace.push_back(best_value);

  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (int it = 1; it <= p.max_iters; ++it) {
    kernels::forward_gradient(fbar.values(), h, w, gx.values(), gy.values());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < sn; ++si) {
      const auto i = static_cast<std::size_t>(si);
      px[i] = std::clamp(px[i] + sigma * gx[i], -p.weight, p.weight);
      py[i] = std::clamp(py[i] + sigma * gy[i], -p.weight, p.weight);
    }
    kernels::divergence(px.values(), py.values(), h, w, div.values());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < sn; ++si) {
      const auto i = static_cast<std::size_t>(si);
      const double v = f[i] + tau * div[i];
      fnew[i] = p.mask[i] ? (v + 2.0 * tau * p.observation[i]) / (1.0 + 2.0 * tau) : v;
    }
    const double change = std::sqrt(kernels::sum_squared_difference(fnew.values(), f.values()));
    const double scale = frobenius_norm(fnew);
    kernels::axpby(2.0, fnew.values(), -1.0, f.values(), fbar.values());
    std::swap(f, fnew);

    const double value = tv_objective(p, f);
    if (value < best_value) {
      best_value = value;
      best = f;
    }
    rep.objective_trace.push_back(best_value);
    rep.iterations = it;
    if (change <= p.tolerance * std::max(scale, 1e-12)) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged) rep.warning = "tv: no convergence after " + std::to_string(rep.iterations) + " iterations";
  rep.objective = best_value;
  if (dual) {
    dual->px = std::move(px);
    dual->py = std::move(py);
  }
  return best;
}

}  // namespace derain
