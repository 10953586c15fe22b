#pragma once
// Observables, distance measures, fixed-point solvers, and scaling-law fits
// shared by the experiment harness and the acceptance checks.

#include <functional>
#include <vector>

#include "qgibbs/spectra.hpp"

namespace qgibbs {

// A quantum channel as a black-box action on density matrices.
using ChannelAction = std::function<Mat(const Mat&)>;

// Observable bundle emitted per sweep point by the experiment harness.
struct ObservableReport {
  double energy = 0.0;
  double heat_capacity = 0.0;
  double magnetization_z0 = 0.0;
  double mutual_information = 0.0;      // >= 0
  double trace_distance_to_ref = 0.0;   // in [0, 1]
  double relative_entropy_to_ref = 0.0; // >= -1e-9
  int sample_count = 0;
  struct {
    double energy = 0.0;
    double heat_capacity = 0.0;
    double magnetization_z0 = 0.0;
    double mutual_information = 0.0;
  } standard_errors;
};

// (1/2) sum |eigenvalues of a - b|; throws on dimension mismatch.
double trace_distance(const Mat& a, const Mat& b);

// Copy of rho with the coherence between the two lowest eigenstates of `eig`
// removed (off-diagonal of the 2x2 ground block zeroed in the eigenbasis).
// Used to compare against references that ignore the coherence between
// degenerate ferromagnetic ground states.
Mat zero_ground_coherence(const Mat& rho, const EigenDecomposition& eig);

// -tr(rho log rho) with 0 log 0 := 0 (natural log).
double von_neumann_entropy(const Mat& rho);

// tr[rho (log rho - log sigma)]; eigenvalues of sigma are floored at 1e-300.
double quantum_relative_entropy(const Mat& rho, const Mat& sigma);

// Single-qubit reduced state / complement reduced state (qubit `site` is the
// site-th least significant bit of the computational-basis index).
Mat reduce_to_qubit(const Mat& rho, int site, int n_qubits);
Mat trace_out_qubit(const Mat& rho, int site, int n_qubits);

// S(rho_A) + S(rho_complement) - S(rho) for A = one qubit; >= -1e-9.
double mutual_information(const Mat& rho, int site, int n_qubits);

// <Z_site>.
double magnetization_z(const Mat& rho, int site, int n_qubits);

// beta^2 (<H^2> - <H>^2) from the dense state.
double heat_capacity(const Mat& rho, const Mat& h, double beta);

struct SampledEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
// beta^2 times the unbiased sample variance of the energy samples, with a
// leave-one-out jackknife standard error (NaN when fewer than 3 samples).
// Throws with fewer than 2 samples.
SampledEstimate heat_capacity(const std::vector<double>& energy_samples, double beta);

enum class FixedPointMode { power_iteration, superoperator_eig };

struct FixedPointReport {
  Mat sigma;
  bool converged = false;
  int cycles = 0;
  double residual = 0.0;     // ||channel(sigma) - sigma||_1 of the returned state
  int fixed_space_dim = 1;   // superoperator mode: eigenvalues within 1e-8 of 1
};

// Stationary state of the channel.
//  - power_iteration: repeated application starting from I/dim (or *initial);
//    if the residual tolerance is not met within the first 75% of max_cycles,
//    the iterates of the last 25% are time-averaged to suppress residual
//    oscillations before the final residual check.
//  - superoperator_eig: builds the dim^2 x dim^2 matrix (guard: dim <= 32),
//    takes the eigenvector with eigenvalue closest to 1 (largest-trace member
//    of the near-1 cluster), and reports the near-1 multiplicity so callers
//    can detect symmetry-degenerate fixed-point spaces.
FixedPointReport fixed_point_solve(const ChannelAction& channel, Eigen::Index dim,
                                   FixedPointMode mode, int max_cycles = 20000,
                                   double tol = 1e-9, const Mat* initial = nullptr);

// Column k*dim+j holds vec(channel(|j><k|)), column-major vec.
Mat build_superoperator(const ChannelAction& channel, Eigen::Index dim);

// -1/log|lambda_2| in cycles, lambda_2 the second-largest-magnitude
// eigenvalue. Infinite when |lambda_2| is within 1e-12 of 1; 0 for rank-one
// (instantly mixing) channels.
double mixing_time_estimate(const Mat& superop);

struct ScalingFit {
  double exponent = 0.0;
  double intercept = 0.0;  // in log space
  double r_squared = 0.0;
  std::vector<double> residuals;  // log y_i - (intercept + exponent log x_i)
};

// Least squares on (log x, log y); requires >= 3 strictly positive points.
ScalingFit scaling_fit(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace qgibbs
