#include "qgibbs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qgibbs {
namespace {

void fail(const std::string& what) { throw std::invalid_argument("analysis: " + what); }

RVec hermitian_eigenvalues(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + Mat(m.adjoint())),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double entropy_of_weights(const RVec& w) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k)
    if (w(k) > 0.0) s -= w(k) * std::log(w(k));
  return s;
}

}  // namespace

double trace_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail("trace_distance: dimension mismatch");
  return 0.5 * hermitian_eigenvalues(a - b).cwiseAbs().sum();
}

Mat zero_ground_coherence(const Mat& rho, const EigenDecomposition& eig) {
  Mat r = to_eigenbasis(rho, eig);
  r(0, 1) = 0.0;
  r(1, 0) = 0.0;
  return from_eigenbasis(r, eig);
}

double von_neumann_entropy(const Mat& rho) {
  return entropy_of_weights(hermitian_eigenvalues(rho).cwiseMax(0.0));
}

double quantum_relative_entropy(const Mat& rho, const Mat& sigma) {
  if (rho.rows() != sigma.rows()) fail("quantum_relative_entropy: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> er(0.5 * (rho + Mat(rho.adjoint())));
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sigma + Mat(sigma.adjoint())));
  const RVec p = er.eigenvalues().cwiseMax(0.0);
  const RVec q = es.eigenvalues().cwiseMax(1e-300);
  double value = -entropy_of_weights(p);
  const Mat overlap = er.eigenvectors().adjoint() * es.eigenvectors();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) == 0.0) continue;
    for (Eigen::Index j = 0; j < q.size(); ++j)
      value -= p(i) * std::norm(overlap(i, j)) * std::log(q(j));
  }
  return value;
}

Mat reduce_to_qubit(const Mat& rho, int site, int n_qubits) {
  if (site < 0 || site >= n_qubits) fail("reduce_to_qubit: site out of range");
  const Eigen::Index rest = Eigen::Index(1) << (n_qubits - 1);
  const Eigen::Index low_mask = (Eigen::Index(1) << site) - 1;
  Mat out = Mat::Zero(2, 2);
  for (Eigen::Index r = 0; r < rest; ++r) {
    const Eigen::Index base = (r & low_mask) | ((r & ~low_mask) << 1);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        out(i, j) += rho(base | (Eigen::Index(i) << site),
                         base | (Eigen::Index(j) << site));
  }
  return out;
}

Mat trace_out_qubit(const Mat& rho, int site, int n_qubits) {
  if (site < 0 || site >= n_qubits) fail("trace_out_qubit: site out of range");
  const Eigen::Index rest = Eigen::Index(1) << (n_qubits - 1);
  const Eigen::Index low_mask = (Eigen::Index(1) << site) - 1;
  Mat out = Mat::Zero(rest, rest);
  for (Eigen::Index r = 0; r < rest; ++r) {
    const Eigen::Index br = (r & low_mask) | ((r & ~low_mask) << 1);
    for (Eigen::Index c = 0; c < rest; ++c) {
      const Eigen::Index bc = (c & low_mask) | ((c & ~low_mask) << 1);
      for (Eigen::Index b = 0; b < 2; ++b)
        out(r, c) += rho(br | (b << site), bc | (b << site));
    }
  }
  return out;
}

double mutual_information(const Mat& rho, int site, int n_qubits) {
  const Mat a = reduce_to_qubit(rho, site, n_qubits);
  const Mat rest = trace_out_qubit(rho, site, n_qubits);
  return von_neumann_entropy(a) + von_neumann_entropy(rest) - von_neumann_entropy(rho);
}

double magnetization_z(const Mat& rho, int site, int n_qubits) {
  if (site < 0 || site >= n_qubits) fail("magnetization_z: site out of range");
  const Eigen::Index dim = Eigen::Index(1) << n_qubits;
  double value = 0.0;
  for (Eigen::Index idx = 0; idx < dim; ++idx)
    value += (((idx >> site) & 1) ? -1.0 : 1.0) * rho(idx, idx).real();
  return value;
}

double heat_capacity(const Mat& rho, const Mat& h, double beta) {
  if (beta <= 0) fail("heat_capacity: beta must be > 0");
  if (rho.rows() != h.rows()) fail("heat_capacity: dimension mismatch");
  const double e1 = (rho * h).trace().real();
  const double e2 = (rho * h * h).trace().real();
  return beta * beta * (e2 - e1 * e1);
}

SampledEstimate heat_capacity(const std::vector<double>& energy_samples, double beta) {
  if (beta <= 0) fail("heat_capacity: beta must be > 0");
  const int n = int(energy_samples.size());
  if (n < 2) fail("heat_capacity: need at least 2 energy samples");
  double s1 = 0.0, s2 = 0.0;
  for (double e : energy_samples) {
    s1 += e;
    s2 += e * e;
  }
  const double b2 = beta * beta;
  const double mean = s1 / n;
  SampledEstimate out;
  out.value = b2 * (s2 - n * mean * mean) / (n - 1);

  if (n < 3) {
    out.std_error = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  // Leave-one-out estimates from the sufficient statistics.
  std::vector<double> loo(static_cast<std::size_t>(n));
  double loo_mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = energy_samples[std::size_t(i)];
    const double m_i = (s1 - x) / (n - 1);
    const double v_i = (s2 - x * x - (n - 1) * m_i * m_i) / (n - 2);
    loo[std::size_t(i)] = b2 * v_i;
    loo_mean += loo[std::size_t(i)];
  }
  loo_mean /= n;
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  out.std_error = std::sqrt(ss * (n - 1) / n);
  return out;
}

Mat build_superoperator(const ChannelAction& channel, Eigen::Index dim) {
  if (dim > 32) fail("superoperator: dimension guard (dim <= 32) exceeded");
  Mat s(dim * dim, dim * dim);
  Mat basis = Mat::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      basis(j, k) = 1.0;
      const Mat image = channel(basis);
      basis(j, k) = 0.0;
      s.col(k * dim + j) = Eigen::Map<const Vec>(image.data(), dim * dim);
    }
  }
  return s;
}

FixedPointReport fixed_point_solve(const ChannelAction& channel, Eigen::Index dim,
                                   FixedPointMode mode, int max_cycles, double tol,
                                   const Mat* initial) {
  if (dim < 2) fail("fixed_point_solve: dim must be >= 2");
  if (max_cycles < 4) fail("fixed_point_solve: max_cycles must be >= 4");
  FixedPointReport out;

  if (mode == FixedPointMode::superoperator_eig) {
    const Mat s = build_superoperator(channel, dim);
    Eigen::ComplexEigenSolver<Mat> es(s);
    const Vec vals = es.eigenvalues();
    int near_one = 0;
    int pick = -1;
    double pick_trace = -1.0;
    for (Eigen::Index k = 0; k < vals.size(); ++k) {
      if (std::abs(vals(k) - 1.0) > 1e-8) continue;
      ++near_one;
      const Mat cand =
          Eigen::Map<const Mat>(es.eigenvectors().col(k).data(), dim, dim);
      const double tr = std::abs(cand.trace());
      if (tr > pick_trace) {
        pick_trace = tr;
        pick = int(k);
      }
    }
    out.fixed_space_dim = near_one;
    if (pick < 0) {
      // No eigenvalue near 1: fall back to the one closest to it.
      Eigen::Index best = 0;
      (vals.array() - 1.0).abs().minCoeff(&best);
      pick = int(best);
    }
    Mat sigma = Eigen::Map<const Mat>(es.eigenvectors().col(pick).data(), dim, dim);
    sigma = 0.5 * (sigma + Mat(sigma.adjoint()));
    const double tr = sigma.trace().real();
    if (std::abs(tr) > 1e-12) sigma /= tr;
    out.sigma = sigma;
    out.residual = 2.0 * trace_distance(channel(sigma), sigma);
    out.converged = out.residual <= tol;
    return out;
  }

  Mat sigma = initial ? *initial
                      : Mat(Mat::Identity(dim, dim) / double(dim));
  const int burn = (3 * max_cycles) / 4;
  for (int cycle = 0; cycle < burn; ++cycle) {
    const Mat next = channel(sigma);
    out.residual = 2.0 * trace_distance(next, sigma);
    sigma = next;
    ++out.cycles;
    if (out.residual <= tol) {
      out.sigma = sigma;
      out.converged = true;
      return out;
    }
  }
  // Time-average the last quarter to suppress residual oscillations.
  Mat sum = Mat::Zero(dim, dim);
  int window = 0;
  for (int cycle = burn; cycle < max_cycles; ++cycle) {
    sigma = channel(sigma);
    ++out.cycles;
    sum += sigma;
    ++window;
  }
  out.sigma = sum / double(window);
  out.residual = 2.0 * trace_distance(channel(out.sigma), out.sigma);
  out.converged = out.residual <= tol;
  return out;
}

double mixing_time_estimate(const Mat& superop) {
  if (superop.rows() != superop.cols()) fail("mixing_time_estimate: square matrix required");
  Eigen::ComplexEigenSolver<Mat> es(superop, /*computeEigenvectors=*/false);
  RVec mags = es.eigenvalues().cwiseAbs();
  std::sort(mags.data(), mags.data() + mags.size(), std::greater<double>());
  const double l2 = mags.size() > 1 ? mags(1) : 0.0;
  if (l2 >= 1.0 - 1e-12) return std::numeric_limits<double>::infinity();
  if (l2 < 1e-14) return 0.0;  // numerically zero: instantly mixing
  return -1.0 / std::log(l2);
}

ScalingFit scaling_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) fail("scaling_fit: size mismatch");
  if (xs.size() < 3) fail("scaling_fit: need at least 3 points");
  const int n = int(xs.size());
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (int i = 0; i < n; ++i) {
    if (xs[std::size_t(i)] <= 0 || ys[std::size_t(i)] <= 0)
      fail("scaling_fit: data must be strictly positive");
    lx[std::size_t(i)] = std::log(xs[std::size_t(i)]);
    ly[std::size_t(i)] = std::log(ys[std::size_t(i)]);
  }
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += lx[std::size_t(i)];
    my += ly[std::size_t(i)];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[std::size_t(i)] - mx) * (lx[std::size_t(i)] - mx);
    sxy += (lx[std::size_t(i)] - mx) * (ly[std::size_t(i)] - my);
  }
  if (sxx == 0) fail("scaling_fit: degenerate x data");
  ScalingFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double ss_res = 0, ss_tot = 0;
  fit.residuals.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    const double r = ly[std::size_t(i)] - (fit.intercept + fit.exponent * lx[std::size_t(i)]);
    fit.residuals[std::size_t(i)] = r;
    ss_res += r * r;
    ss_tot += (ly[std::size_t(i)] - my) * (ly[std::size_t(i)] - my);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res <= 1e-30 ? 1.0 : 0.0);
  return fit;
}

}  // namespace qgibbs
