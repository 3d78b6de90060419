#include "pdfest/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace pdfest {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kKernelCut = 8.0;  // kernels truncated at 8 h (mass < 1e-15)
constexpr double kQFloor = 1e-12;
constexpr double kPFloor = 1e-12;
constexpr int kCommonGridPoints = 2048;

double kernel_sum(const std::vector<double>& sorted, double x, double h) {
  const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - kKernelCut * h);
  const auto hi = std::upper_bound(sorted.begin(), sorted.end(), x + kKernelCut * h);
  double sum = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (x - *it) / h;
    sum += std::exp(-0.5 * z * z);
  }
  return sum * kInvSqrt2Pi / (static_cast<double>(sorted.size()) * h);
}

}  // namespace

double DensityEstimate::evaluate(double x) const {
  if (samples.size() > 0) {
    std::vector<double> sorted(samples.data(), samples.data() + samples.size());
    std::sort(sorted.begin(), sorted.end());
    return kernel_sum(sorted, x, bandwidth);
  }
  if (grid.size() == 0 || x < grid[0] || x > grid[grid.size() - 1]) return 0.0;
  const auto it = std::lower_bound(grid.data(), grid.data() + grid.size(), x);
  const Eigen::Index hi = std::clamp<Eigen::Index>(it - grid.data(), 1, grid.size() - 1);
  const Eigen::Index lo = hi - 1;
  const double w = (x - grid[lo]) / (grid[hi] - grid[lo]);
  return (1.0 - w) * values[lo] + w * values[hi];
}

DensityEstimate kde(const Vector& samples, std::optional<GridSpec> grid_spec) {
  const Eigen::Index n = samples.size();
  if (n < 2) throw std::invalid_argument("kde: need at least two samples");
  const double mean = samples.mean();
  const double var = (samples.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double sigma = std::sqrt(var);
  if (!(sigma > 0.0)) throw std::invalid_argument("kde: degenerate sample (zero variance)");

  DensityEstimate estimate;
  estimate.n_samples = static_cast<int>(n);
  estimate.sample_std = sigma;
  estimate.bandwidth = 1.06 * sigma * std::pow(static_cast<double>(n), -0.2);
  estimate.samples = samples;

  const double h = estimate.bandwidth;
  double lo, hi;
  int points;
  if (grid_spec) {
    lo = grid_spec->min;
    hi = grid_spec->max;
    points = grid_spec->points;
    if (points < 2 || !(hi > lo)) throw std::invalid_argument("kde: bad grid spec");
  } else {
    lo = samples.minCoeff() - 4.0 * h;
    hi = samples.maxCoeff() + 4.0 * h;
    points = 1024;
  }

  std::vector<double> sorted(samples.data(), samples.data() + n);
  std::sort(sorted.begin(), sorted.end());

  estimate.grid.resize(points);
  estimate.values.resize(points);
  const double step = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double x = lo + step * i;
    estimate.grid[i] = x;
    estimate.values[i] = kernel_sum(sorted, x, h);
  }
  return estimate;
}

KLResult kl_divergence(const DensityEstimate& p, const DensityEstimate& q) {
  if (p.grid.size() < 2 || q.grid.size() < 2)
    throw std::invalid_argument("kl_divergence: estimates must carry evaluation grids");
  const double lo = std::min(p.grid[0], q.grid[0]);
  const double hi = std::max(p.grid[p.grid.size() - 1], q.grid[q.grid.size() - 1]);

  // Re-evaluate both estimates on the union support; sorted-sample reuse
  // avoids the per-point sort in DensityEstimate::evaluate.
  std::vector<double> p_sorted, q_sorted;
  if (p.samples.size() > 0) {
    p_sorted.assign(p.samples.data(), p.samples.data() + p.samples.size());
    std::sort(p_sorted.begin(), p_sorted.end());
  }
  if (q.samples.size() > 0) {
    q_sorted.assign(q.samples.data(), q.samples.data() + q.samples.size());
    std::sort(q_sorted.begin(), q_sorted.end());
  }

  const int m = kCommonGridPoints;
  const double step = (hi - lo) / (m - 1);
  KLResult result;
  result.floor = kQFloor;
  double raw = 0.0, floor_mass = 0.0, p_mass = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = lo + step * i;
    const double pv = p_sorted.empty() ? p.evaluate(x) : kernel_sum(p_sorted, x, p.bandwidth);
    const double qv = q_sorted.empty() ? q.evaluate(x) : kernel_sum(q_sorted, x, q.bandwidth);
    const double w = (i == 0 || i == m - 1) ? 0.5 * step : step;
    p_mass += w * pv;
    if (pv < kPFloor) continue;
    const double q_eff = std::max(qv, kQFloor);
    if (qv < kQFloor) floor_mass += w * pv;
    raw += w * pv * std::log(pv / q_eff);
  }
  result.raw = raw;
  result.value = std::max(raw, 0.0);
  result.q_floor_mass = floor_mass;
  result.unreliable = p_mass > 0.0 && floor_mass > 0.5 * p_mass;
  return result;
}

void write_density_csv(const std::string& path, const DensityEstimate& estimate) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_density_csv: cannot open " + path);
  char header[160];
  std::snprintf(header, sizeof(header), "# kde h=%.17g n=%d sigma=%.17g\n", estimate.bandwidth,
                estimate.n_samples, estimate.sample_std);
  out << header << "grid,density\n";
  char line[80];
  for (Eigen::Index i = 0; i < estimate.grid.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g\n", estimate.grid[i], estimate.values[i]);
    out << line;
  }
  if (!out) throw std::runtime_error("write_density_csv: write failed for " + path);
}

DensityEstimate read_density_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_density_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# kde", 0) != 0)
    throw std::runtime_error("read_density_csv: missing kde header in " + path);
  DensityEstimate estimate;
  {
    std::istringstream header(line.substr(5));
    std::string token;
    while (header >> token) {
      if (token.rfind("h=", 0) == 0) estimate.bandwidth = std::stod(token.substr(2));
      if (token.rfind("n=", 0) == 0) estimate.n_samples = std::stoi(token.substr(2));
      if (token.rfind("sigma=", 0) == 0) estimate.sample_std = std::stod(token.substr(6));
    }
  }
  std::getline(in, line);  // column header
  std::vector<double> xs, ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("read_density_csv: malformed row in " + path);
    xs.push_back(std::stod(line.substr(0, comma)));
    ys.push_back(std::stod(line.substr(comma + 1)));
  }
  estimate.grid = Eigen::Map<Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  estimate.values = Eigen::Map<Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return estimate;
}

}  // namespace pdfest
