#pragma once
// Modulated-coupling reset channel: one "cycle" couples the system to a fresh
// register of bath qubits through a Gaussian-filtered time-dependent
// interaction, traces the bath out, and optionally applies a random extra
// number of free Floquet steps (dephasing in the Floquet eigenbasis) plus a
// deterministic rewind of the free evolution accumulated during the window.
//
// The walk-out over the window tau = -M..M applies, per step,
//   U(tau) = exp(-i delta theta V(tau)) * U_B * U_S,
// with U_B = exp(-i delta H_B), H_B = -(h/2) sum_mu Z_mu on the bath, and
// V(tau) = f(tau) sum_mu A_mu (x) Y_mu. The filter f is a Gaussian of spectral
// width a = sqrt(4h/beta) normalized to delta*sum|f| = 1, which targets
// transitions of frequency ~h and enforces approximate detailed balance at
// inverse temperature beta.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qgibbs/rng.hpp"
#include "qgibbs/spectra.hpp"
#include "qgibbs/statevector.hpp"

namespace qgibbs {

struct FilterFunction {
  double delta = 0.0;
  int m = 0;                     // window half-width in steps; reset time T = m*delta
  std::vector<double> samples;   // f(tau) for tau = -m..m (index tau + m)
  double a = 0.0;                // spectral width
  double peak = 0.0;             // f(0), the normalization prefactor

  double at(int tau) const { return samples[std::size_t(tau + m)]; }
};

// One realized system-bath coupling: 2x2 Hermitian op acting on system qubit
// `site`, conjugate bath Y on bath qubit `bath`.
struct CouplingTerm {
  Mat op;
  int site = 0;
  int bath = 0;
};

struct CouplingSpec {
  enum class Mode { fixed, random_geometry_per_cycle };
  Mode mode = Mode::fixed;
  // random_geometry_per_cycle: every bath qubit couples through this template
  // to a uniformly drawn system site (collisions allowed).
  Mat op_template;
  // fixed: explicit term list (size must equal ProtocolParams::n_bath).
  std::vector<CouplingTerm> fixed;
};

// Standard coupling templates.
Mat coupling_y();
Mat coupling_z();
Mat coupling_zy();  // (Z+Y)/sqrt(2)

// Full-register system operators for a realized geometry: one embedded
// single-site operator per coupling term, in geometry order.
std::vector<Mat> coupling_operators(const std::vector<CouplingTerm>& geometry,
                                    int n_sys_qubits);

struct ProtocolParams {
  double theta = 0.1;            // system-bath coupling strength
  double beta = 1.0;             // target inverse temperature
  double h = 1.0;                // bath level splitting
  double delta = 0.01;           // Trotter step
  int m = 200;                   // reset time T = m*delta
  double lambda = 0.0;           // randomization strength (mean extra depth = lambda*m)
  int n_bath = 1;
  CouplingSpec coupling;
  double rewind_fraction = 0.0;  // T*/T, applied as Floquet phase power -2*r*m
  std::uint64_t seed = 1;

  double reset_time() const { return m * delta; }
  double filter_width() const;   // a = sqrt(4h/beta)
};

// Validation: throws std::invalid_argument on out-of-domain parameters.
void validate(const ProtocolParams& p);

// Non-fatal contract warnings (window too short for the filter width;
// step too coarse for the filter bandwidth).
std::vector<std::string> parameter_warnings(const ProtocolParams& p);

// Gaussian filter samples exp(-a^2 delta^2 tau^2 / 2), normalized so that
// delta * sum |f| = 1 exactly.
FilterFunction build_filter(const ProtocolParams& p);
// Same filter from the bare window geometry (no full-parameter validation);
// used by engines whose coupling layout is fixed rather than spec-driven.
FilterFunction build_filter(double delta, int m, double a);

// Extra free-step count M_R: geometric on {0,1,...} with success probability
// 1/(1 + lambda*m), so the mean is lambda*m; lambda = 0 always returns 0.
int sample_randomization_depth(double lambda, int m, SubstreamRng& rng);

class ProtocolEngine {
 public:
  // sys_u: one free Floquet step on 2^{n_sys_qubits}; params validated here.
  ProtocolEngine(const Mat& sys_u, int n_sys_qubits, const ProtocolParams& params);

  const ProtocolParams& params() const { return params_; }
  const FilterFunction& filter() const { return filter_; }
  int n_sys_qubits() const { return n_sys_; }
  int joint_qubits() const { return n_sys_ + params_.n_bath; }
  Eigen::Index sys_dim() const { return Eigen::Index(1) << n_sys_; }

  // Coupling geometry for one cycle (fixed list, or fresh uniform site draws).
  std::vector<CouplingTerm> realize_geometry(SubstreamRng& rng) const;

  // Optional streaming replacement for the free system step inside the
  // walk-out: the kernel must act on a joint state exactly as sys_u does on
  // the system factor (bath bits untouched). Structured systems can swap the
  // dense per-step GEMM for gate kernels; every walk-out consumer (dense
  // channel, Kraus set, trajectories) inherits the kernel automatically.
  void set_free_step(std::function<void(State&)> kernel) {
    free_step_ = std::move(kernel);
  }

  // Applies the full walk-out product U(M)...U(-M) (no randomization, no
  // rewind) in place to a joint system+bath state.
  void apply_walkout(State& joint, const std::vector<CouplingTerm>& geometry) const;

  // Dense walk-out matrix (diagnostic/test use; small dimensions only).
  Mat walkout_matrix(const std::vector<CouplingTerm>& geometry) const;

  // Kraus operators K_b = <b|Q|0...0>, b over all bath basis states.
  std::vector<Mat> kraus_set(const std::vector<CouplingTerm>& geometry) const;

  // U_S^{power} on a system state / conjugating a system density matrix,
  // evaluated through the Floquet eigenphases (exact for integer powers;
  // principal-branch phases for fractional rewinds).
  State floquet_power_state(const State& sys, double power) const;
  Mat floquet_power_conjugate(const Mat& rho, double power) const;

  // Exact average over the geometric randomization depth, combined with the
  // deterministic rewind: an elementwise multiplier in the Floquet eigenbasis.
  Mat dephase_and_rewind(const Mat& rho) const;

  // One full cycle on a density matrix. Geometry is drawn from geometry_rng
  // when the coupling mode is randomized. The randomization layer is applied
  // as its exact average (deterministic map). Trace drift beyond 1e-8 throws.
  Mat dense_cycle(const Mat& rho, SubstreamRng& geometry_rng) const;

  // Same, but with a sampled randomization depth (stochastic map).
  Mat dense_cycle_sampled(const Mat& rho, SubstreamRng& geometry_rng,
                          SubstreamRng& depth_rng) const;

  // One cycle of the trajectory unraveling: attach bath in |0...0>, walk out,
  // measure the bath in the computational basis, reset, then apply the
  // sampled randomization depth and the rewind.
  struct TrajectoryStreams {
    SubstreamRng geometry;
    SubstreamRng reset_depth;
    SubstreamRng measure;
  };
  State trajectory_step(const State& sys, TrajectoryStreams& streams) const;

 private:
  void build_kick_cache();
  const std::vector<Mat>& kick_gates_for(const Mat& op) const;

  ProtocolParams params_;
  int n_sys_ = 0;
  FilterFunction filter_;
  Mat sys_u_;
  std::function<void(State&)> free_step_;  // empty = dense sys_u GEMM
  Mat floquet_basis_;   // unitary Schur basis of sys_u
  Vec floquet_units_;   // unit-modulus eigenvalues of sys_u
  RVec floquet_args_;   // principal-branch phases of the eigenvalues
  Vec bath_phases_;     // diagonal of U_B over bath basis states
  // Kick gate cache: per distinct coupling operator, gates for tau = 0..m.
  std::vector<std::pair<Mat, std::vector<Mat>>> kick_cache_;
};

// Convenience streams bundle for one trajectory of one master seed.
ProtocolEngine::TrajectoryStreams make_trajectory_streams(std::uint64_t master_seed,
                                                          std::uint64_t trajectory);

// Free-step kernel for the square-lattice Ising Floquet step: applies
// exp(+i delta J sum XX) (bond list order) then exp(+i delta g sum Z) to the
// system qubits of a joint register of n_qubits total, matching
// build_floquet_unitary(spec, delta) on the system factor while streaming over
// amplitudes instead of multiplying a dense 2^n matrix. The returned functor
// only accepts states of exactly 2^n_qubits amplitudes.
std::function<void(State&)> make_ising_free_step(const QuantumIsing2D& spec,
                                                 double delta, int n_qubits);

// Iterates the dense averaged cycle; calls hook(cycle_index, state) after
// every cycle when provided. Returns the final state.
Mat run_protocol(const Mat& rho0, const ProtocolEngine& engine, int n_cycles,
                 SubstreamRng& geometry_rng,
                 const std::function<void(int, const Mat&)>& hook = {});

// Ensemble average (1/K) sum |phi_k><phi_k| of trajectory snapshots.
Mat steady_state_ensemble(const std::vector<State>& samples);

}  // namespace qgibbs
