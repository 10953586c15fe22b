#pragma once
// Gaussian engine for the reset protocol on free-Majorana chains.
//
// A quadratic Hamiltonian H = (i/4) gamma^T A gamma (A real antisymmetric,
// two Majoranas per site) keeps Gaussian states Gaussian under every layer of
// the protocol, so the whole channel closes on the covariance matrix
//   C_pq = (i/2) <gamma_p gamma_q>   (p != q, zero diagonal),
// a real antisymmetric 2N x 2N matrix whose Williamson values nu_k (the
// nonnegative eigenvalues of iC) satisfy nu_k <= 1/2, with 1/2 meaning the
// mode is pure. One cycle is: attach one auxiliary fermion per site in its
// ground state, evolve the joint chain through the filtered coupling window,
// discard the auxiliaries, and apply the averaged randomization dephasing.
// Every layer is linear in C, so the cycle is an affine map
//   C -> D( E C E^T + F ),
// with E the system block of the window orthogonal, F the noise injected by
// the discarded auxiliaries, and D the dephasing. Steady states are found
// either by iterating cycles or by solving the affine fixed-point equation
// directly.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qgibbs/protocol.hpp"
#include "qgibbs/spectra.hpp"

namespace qgibbs {

using RealMat = Eigen::MatrixXd;

// Open Majorana chain: on-site pairing g between the two Majoranas of a site,
// hopping -J between neighbouring sites. Under the standard spin mapping this
// is the transverse-field chain  sum_j (J/2) X_j X_{j+1} - (g/2) sum_j Z_j.
struct FermionChainSpec {
  int n_sites = 2;
  double j = 1.0;  // nearest-neighbour hopping
  double g = 1.0;  // on-site splitting
};

void validate(const FermionChainSpec& spec);

// A with +g at (2s, 2s+1) and -J at (2s+1, 2s+2), antisymmetrized; 2N x 2N.
RealMat build_coupling_matrix(const FermionChainSpec& spec);

// Mode energies of the chain. `analytic` evaluates the dispersion
//   eps_k = sqrt(J^2 + g^2 + 2 J g cos(pi k / N)),  k = 1..N,
// on the uniform momentum grid (exact quantization shifts each momentum by
// O(1/N) on an open chain); `numeric` holds the N nonnegative eigenvalues of
// i A. Both are sorted ascending. For J > g the numeric spectrum contains one
// exponentially localized edge mode near zero that the bulk grid misses.
struct SingleParticleSpectrum {
  RVec analytic;
  RVec numeric;
};
SingleParticleSpectrum single_particle_energies(const FermionChainSpec& spec);

// Eigenmodes of a quadratic form: i A = V diag(eps) V^dag with eps real
// ascending (signed: modes come in +/- pairs).
struct MajoranaModes {
  RVec eps;
  Mat v;
};
MajoranaModes majorana_modes(const RealMat& a);

// Thermal covariance of H = (i/4) gamma^T A gamma at inverse temperature
// beta >= 0: in the eigenmodes of iA the matrix iC is diagonal with entries
// -(1/2) tanh(beta*eps_alpha/2). beta = 0 gives C = 0; large beta saturates
// every mode at nu = 1/2.
RealMat thermal_covariance(const RealMat& a, double beta);

// Averaged randomization dephasing: in the eigenmode basis, the matrix
// element of iC between modes alpha and beta is divided by
//   1 - i * lambda * t_reset * (eps_beta - eps_alpha),
// the average of the free-evolution phase over an exponentially distributed
// extra evolution time of mean lambda*t_reset. Pair-diagonal elements
// (equal-energy modes, in particular every thermal state) are untouched.
// The result is re-antisymmetrized; lambda = 0 is the identity.
RealMat dephasing_map(const RealMat& c, const MajoranaModes& modes, double lambda,
                      double t_reset);

// E = -(1/2) Tr(A C): reduces to sum_k eps_k (<n_k> - 1/2) in the eigenmodes,
// so the ground state sits at -(1/2) sum_k eps_k.
double fermion_energy(const RealMat& c, const RealMat& a);

// S = -sum_k [(1/2+nu_k) log(1/2+nu_k) + (1/2-nu_k) log(1/2-nu_k)] over the
// N mode pairs; 0 log 0 := 0. Throws if any nu_k > 1/2 + 1e-6.
double fermion_entropy(const RealMat& c);

// Relative entropy against the thermal state of the same chain, written as a
// free-energy difference:
//   S(sigma || sigma_beta) = beta (E(sigma) - E(sigma_beta)) - (S(sigma) - S(sigma_beta)).
// The energy difference is evaluated from C_sigma - C_beta directly so the
// O(theta^4) steady-state values are not lost to cancellation. `pinsker` is
// sqrt(max(value,0)/2), an upper bound on the trace distance.
struct RelativeEntropyReport {
  double value = 0.0;
  double pinsker = 0.0;
};
RelativeEntropyReport fermion_relative_entropy(const RealMat& c_sigma,
                                               const FermionChainSpec& spec, double beta);

// Precomputed one-cycle map. Protocol parameters used: theta, beta, h, delta,
// m, lambda (coupling spec, n_bath, rewind and seed fields are ignored - the
// coupling geometry is fixed to one auxiliary fermion per site, attached
// through A_cpl[2s, y_s] = sqrt(2) theta f(tau), A_cpl[2s+1, y_s] =
// -sqrt(2) theta f(tau), i.e. the Hermitian pairing
// i theta f(tau) (gamma_2s - gamma_{2s+1})/sqrt(2) * eta_{y,s} with eta_{y,s}
// the second Majorana of auxiliary s, whose splitting is h).
class FermionEngine {
 public:
  FermionEngine(const FermionChainSpec& spec, const ProtocolParams& params);

  const FermionChainSpec& spec() const { return spec_; }
  const ProtocolParams& params() const { return params_; }
  const RealMat& coupling_matrix() const { return a_sys_; }
  const MajoranaModes& modes() const { return modes_; }
  const FilterFunction& filter() const { return filter_; }

  // Full window orthogonal O = O(m) ... O(-m) on the 4N joint Majoranas,
  // system block first.  One step O(tau) = exp(delta theta f(tau) A_cpl) *
  // exp(delta A_fixed): free evolution followed by a coupling kick, keeping
  // the sampled filter's spectral weights (and the stationary temperature
  // they encode) exact at finite step width.
  const RealMat& window_orthogonal() const { return o_window_; }
  // System block E of O and the auxiliary noise term F = E_SB C_vac E_SB^T.
  const RealMat& system_block() const { return e_ss_; }
  const RealMat& vacuum_noise() const { return f_vac_; }

  // One full cycle C -> D(E C E^T + F). Throws std::runtime_error when the
  // input has lost antisymmetry beyond 1e-8 (numerical breakdown); the output
  // is exactly antisymmetrized.
  RealMat propagate_cycle(const RealMat& c) const;

  // The same map in the eigenmode basis, acting on X = V^dag (iC) V:
  // X -> D .* (M X M^dag + X_F) with M = V^dag E V. Used by the long-run
  // iterator and the fixed-point solver; X stays Hermitian.
  Mat cycle_in_modes(const Mat& x) const;
  Mat to_modes(const RealMat& c) const;
  RealMat from_modes(const Mat& x) const;

  // Direct solution of X = D .* (M X M^dag + X_F): preconditioned residual
  // iteration that inverts the pair-diagonal part 1 - D_ab M_aa conj(M_bb)
  // exactly (the near-stationary pairs that make plain cycling slow).
  // `residual` reports the genuine one-cycle defect max|propagate(C*) - C*|.
  struct FixedPoint {
    RealMat c;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
  };
  FixedPoint steady_state(double tol = 1e-11, int max_iter = 500) const;

 private:
  FermionChainSpec spec_;
  ProtocolParams params_;
  FilterFunction filter_;
  RealMat a_sys_;     // 2N x 2N chain quadratic form
  MajoranaModes modes_;
  RealMat o_window_;  // 4N x 4N window orthogonal
  RealMat e_ss_;      // system block of o_window_
  RealMat f_vac_;     // noise from the discarded auxiliaries
  Mat m_modes_;       // V^dag E V
  Mat xf_modes_;      // V^dag (iF) V
  Mat deph_;          // elementwise dephasing multipliers (all ones if lambda=0)
};

// Literal protocol run: iterate cycles from c0 (default C = 0, the maximally
// mixed state) until the cycle-to-cycle covariance change drops below
// `convergence_tol` in max norm (measured in the eigenmode basis, which is
// unitarily equivalent) - but never before ceil(3/theta^2) cycles -
// or until n_cycles is exhausted. theta = 0 has no dissipation and is flagged
// as such. energy_trace holds E after every cycle; rel_entropy_trace is
// sampled every entropy_stride cycles (index k -> cycle (k+1)*stride).
struct FermionRunReport {
  RealMat c;
  bool converged = false;
  bool zero_dissipation = false;
  int cycles_run = 0;
  double final_delta = 0.0;  // last cycle-to-cycle max-norm change
  std::vector<double> energy_trace;
  std::vector<double> rel_entropy_trace;
  int entropy_stride = 1;
};
FermionRunReport run_fermion_protocol(const FermionChainSpec& spec,
                                      const ProtocolParams& params, int n_cycles,
                                      double convergence_tol = 1e-9,
                                      const RealMat* c0 = nullptr);

}  // namespace qgibbs
