#pragma once
// Dense statevector kernels for the trajectory engine.
//
// Qubit convention matches spectra.hpp: site 0 is the least significant bit of
// the basis index, bath qubits occupy the most significant bits. A state on
// n qubits is a length-2^n complex vector.

#include <cstdint>
#include <vector>

#include "qgibbs/rng.hpp"
#include "qgibbs/spectra.hpp"

namespace qgibbs {

using State = Eigen::VectorXcd;

// In-place single-qubit gate: 2x2 matrix u acting on `qubit`.
void apply_one_qubit(State& psi, const Eigen::Matrix2cd& u, int qubit);

// In-place two-qubit gate: 4x4 matrix u acting on (q_low, q_high) where the
// basis of u is |b_high b_low> (i.e. column index = b_low + 2*b_high).
void apply_two_qubit(State& psi, const Eigen::Matrix4cd& u, int q_low, int q_high);

// In-place diagonal gate given as a per-basis-state phase/amplitude vector.
void apply_diagonal(State& psi, const Vec& diag);

// exp(i*angle*X_a X_b) applied in place (Hadamard sandwich free: implemented
// as the explicit 4x4 kernel cos*I + i sin*XX, which is sparse per pair).
void apply_xx_rotation(State& psi, double angle, int a, int b);

// Phase rotation exp(i*angle*Z_q) per qubit, all qubits at once: angle vector
// of length n_qubits; applies prod_q exp(i*angles[q]*Z_q) as one diagonal pass.
void apply_z_rotations(State& psi, const std::vector<double>& angles);

// Probability that qubit block [first, first+count) reads all-zero.
double block_zero_probability(const State& psi, int first, int count);

// Projective measurement of the qubit block [first, first+count) in the
// computational basis, followed by reset of the block to |0...0>. Samples the
// outcome with `rng`, collapses, renormalizes, and moves the surviving
// amplitudes to the block-zero sector. Returns the sampled outcome bits.
std::uint64_t measure_and_reset_block(State& psi, int first, int count, SubstreamRng& rng);

// <psi| embedded-operator |psi> for a dense operator on the low `n_low` qubits
// (identity on the rest). op has dimension 2^n_low.
cxd expval_low_qubits(const State& psi, const Mat& op, int n_low);

// ||H|psi>||^2 for H on the low n_low qubits: needed for variance estimates.
double h_squared_expval_low_qubits(const State& psi, const Mat& op, int n_low);

// Reduced density matrix of the low n_low qubits (trace out the rest).
Mat reduced_density_low_qubits(const State& psi, int n_low);

// Computational basis state |index> on n_qubits.
State basis_state(int n_qubits, std::uint64_t index);

}  // namespace qgibbs
