#include "derain/csc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "derain/kernels.hpp"

namespace derain {

Frame soft_threshold(const Frame& x, double kappa) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("soft_threshold: kappa must be non-negative");
  Frame out(x.shape());
  kernels::soft_threshold(x.values(), kappa, out.values());
  return out;
}

void CscWorkspace::reset(std::size_t filter_count, Shape g) {
  grid = g;
  maps.assign(filter_count, Frame(g));
  dual.assign(filter_count, Frame(g));
  penalty = 0.0;
  report = {};
}

bool CscWorkspace::matches(std::size_t filter_count, Shape g) const {
  return grid == g && maps.size() == filter_count && dual.size() == filter_count;
}

std::vector<double> l1_weights(const ScaleParams& scales, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("l1_weights: rho must be positive");
  std::vector<double> w(scales.b.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = scales.b[i] / rho;
  return w;
}

double csc_objective(const FilterBank& bank, const FeatureMapSet& maps, const Frame& target,
                     const std::vector<double>& weights) {
  const Frame approx = convolve_sum(bank, maps);
  double value = 0.5 * kernels::sum_squared_difference(approx.values(), target.values());
  for (std::size_t i = 0; i < maps.size(); ++i) value += weights[i] * sum_abs(maps[i]);
  return value;
}

namespace {

double sum_squares_all(const FeatureMapSet& maps) {
  double acc = 0.0;
  for (const auto& m : maps) acc += sum_squares(m);
  return acc;
}

}  // namespace

FeatureMapSet update_feature_maps(const FilterBank& bank, const Frame& target, const ScaleParams& scales, double rho,
                                  CscWorkspace& ws, const CscSettings& settings) {
  if (!(rho > 0.0)) throw std::invalid_argument("update_feature_maps: rho must be positive");
  if (scales.size() != bank.filter_count())
    throw DimensionError("update_feature_maps: one scale parameter per filter required");
  for (double b : scales.b)
    if (!(b > 0.0)) throw std::invalid_argument("update_feature_maps: scale parameters must be positive");
  return update_feature_maps_weighted(bank, target, l1_weights(scales, rho), ws, settings);
}

FeatureMapSet update_feature_maps_weighted(const FilterBank& bank, const Frame& target,
                                           const std::vector<double>& kappa, CscWorkspace& ws,
                                           const CscSettings& settings) {
  const std::size_t nf = bank.filter_count();
  if (kappa.size() != nf) throw DimensionError("update_feature_maps: one weight per filter required");
  double mean_kappa = 0.0;
  for (double k : kappa) {
    if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("update_feature_maps: weights must be positive");
    mean_kappa += k / static_cast<double>(nf);
  }
  const Shape grid = target.shape();
  if (!ws.matches(nf, grid)) ws.reset(nf, grid);

  double penalty = settings.penalty_factor * mean_kappa;

  std::vector<Spectrum> dhat;
  dhat.reserve(nf);
  for (std::size_t m = 0; m < nf; ++m) dhat.push_back(kernel_spectrum(bank.filter(m), grid));
  const Spectrum shat = forward_fft(target);
  const std::size_t nbins = shat.bins.size();

  // conj(D_m) S and sum_m |D_m|^2 per bin do not change across iterations
  std::vector<std::vector<Complex>> dts(nf, std::vector<Complex>(nbins));
  std::vector<double> energy(nbins, 0.0);
  for (std::size_t m = 0; m < nf; ++m) {
    for (std::size_t b = 0; b < nbins; ++b) {
      dts[m][b] = std::conj(dhat[m].bins[b]) * shat.bins[b];
      energy[b] += std::norm(dhat[m].bins[b]);
    }
  }

  FeatureMapSet y = ws.maps;
  FeatureMapSet u(nf, Frame(grid));
  for (std::size_t m = 0; m < nf; ++m) {
    u[m] = ws.dual[m];
    u[m] *= 1.0 / penalty;
  }
  FeatureMapSet x(nf, Frame(grid));
  std::vector<Spectrum> rhs(nf);

  CscReport report;
  const double tiny = 1e-12 * std::sqrt(static_cast<double>(grid.size() * nf));

  for (int it = 1; it <= settings.max_iters; ++it) {
    for (std::size_t m = 0; m < nf; ++m) {
      Frame z = y[m];
      z -= u[m];
      rhs[m] = forward_fft(z);
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(nbins); ++bi) {
      const auto b = static_cast<std::size_t>(bi);
      Complex dr = 0.0;
      for (std::size_t m = 0; m < nf; ++m) {
        rhs[m].bins[b] = dts[m][b] + penalty * rhs[m].bins[b];
        dr += dhat[m].bins[b] * rhs[m].bins[b];
      }
      const Complex corr = dr / (penalty + energy[b]);
      for (std::size_t m = 0; m < nf; ++m)
        rhs[m].bins[b] = (rhs[m].bins[b] - std::conj(dhat[m].bins[b]) * corr) / penalty;
    }
    for (std::size_t m = 0; m < nf; ++m) x[m] = inverse_fft(rhs[m]);

    double primal = 0.0;
    double change = 0.0;
    const double relax = settings.relaxation;
    for (std::size_t m = 0; m < nf; ++m) {
      Frame xr = x[m];
      if (relax != 1.0) kernels::axpby(1.0 - relax, y[m].values(), relax, x[m].values(), xr.values());
      Frame v = xr;
      v += u[m];
      Frame ynew = soft_threshold(v, kappa[m] / penalty);
      change += kernels::sum_squared_difference(ynew.values(), y[m].values());
      y[m] = std::move(ynew);
      primal += kernels::sum_squared_difference(x[m].values(), y[m].values());
      u[m] += xr;
      u[m] -= y[m];
    }
    primal = std::sqrt(primal);
    const double dual = penalty * std::sqrt(change);
    const double xnorm = std::sqrt(sum_squares_all(x));
    const double ynorm = std::sqrt(sum_squares_all(y));
    const double unorm = penalty * std::sqrt(sum_squares_all(u));
    const double pscale = std::max(xnorm, ynorm);
    report.primal_residual = pscale > tiny ? primal / pscale : primal / tiny;
    report.dual_residual = unorm > tiny ? dual / unorm : dual / tiny;
    if (pscale <= tiny && primal <= tiny) report.primal_residual = 0.0;
    if (unorm <= tiny && dual <= tiny) report.dual_residual = 0.0;
    report.iterations = it;
    if (settings.track_objective) report.objective_trace.push_back(csc_objective(bank, y, target, kappa));

    if (report.primal_residual < settings.tolerance && report.dual_residual < settings.tolerance) {
      report.converged = true;
      break;
    }
    if (primal > settings.balance_ratio * dual) {
      penalty *= settings.balance_step;
      for (auto& um : u) um *= 1.0 / settings.balance_step;
    } else if (dual > settings.balance_ratio * primal) {
      penalty /= settings.balance_step;
      for (auto& um : u) um *= settings.balance_step;
    }
  }

  if (!report.converged)
    report.warning = "csc: no convergence after " + std::to_string(report.iterations) + " iterations";
  report.penalty = penalty;
  report.objective = settings.track_objective && !report.objective_trace.empty()
                         ? report.objective_trace.back()
                         : csc_objective(bank, y, target, kappa);

  ws.maps = y;
  for (std::size_t m = 0; m < nf; ++m) {
    ws.dual[m] = u[m];
    ws.dual[m] *= penalty;
  }
  ws.penalty = penalty;
  ws.report = std::move(report);
  return y;
}

}  // namespace derain
