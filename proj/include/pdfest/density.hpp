#pragma once

#include <optional>
#include <string>

#include "pdfest/types.hpp"

namespace pdfest {

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  int points = 1024;
};

/// Gaussian-kernel density estimate with the Silverman-style bandwidth
/// h = 1.06 * sigma_hat * n^{-1/5}. Keeps the samples so the estimate can be
/// re-evaluated on other grids; estimates read back from disk lose them and
/// fall back to interpolation.
struct DensityEstimate {
  Vector grid;    // strictly increasing evaluation points
  Vector values;  // non-negative density values
  double bandwidth = 0.0;
  int n_samples = 0;
  double sample_std = 0.0;
  Vector samples;  // provenance; may be empty

  /// Density at x: kernel sum when samples are present, else linear
  /// interpolation of the stored grid (zero outside).
  double evaluate(double x) const;
};

/// KDE with exactly h = 1.06 sigma_hat n^{-1/5} (sigma_hat uses the n-1
/// denominator). The auto grid spans [min - 4h, max + 4h] with 1024 points.
/// Throws on fewer than two samples or zero sample variance.
DensityEstimate kde(const Vector& samples, std::optional<GridSpec> grid_spec = {});

struct KLResult {
  double value = 0.0;    // clipped at zero for reporting
  double raw = 0.0;      // signed trapezoidal integral
  double q_floor_mass = 0.0;  // p-mass over points where q was floored
  bool unreliable = false;    // q floor active over > 50% of p's mass
  double floor = 0.0;         // the q floor used
};

/// KL(p || q) over the union of both supports on a 2048-point common grid.
/// q is floored at 1e-12 before the log; p below 1e-12 contributes nothing.
KLResult kl_divergence(const DensityEstimate& p, const DensityEstimate& q);

/// Two-column CSV (grid, value); the header comment carries h, n, sigma_hat.
void write_density_csv(const std::string& path, const DensityEstimate& estimate);
DensityEstimate read_density_csv(const std::string& path);

}  // namespace pdfest
