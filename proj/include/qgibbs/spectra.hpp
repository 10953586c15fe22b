#pragma once
#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qgibbs {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr cxd kI{0.0, 1.0};

// Qubit ordering convention used everywhere: site/qubit q is bit q of the
// basis-state index (site 0 = least significant factor). Bath qubits, when
// present, occupy the most significant bits above the system qubits.

namespace pauli {
Mat i2();
Mat x();
Mat y();
Mat z();
}  // namespace pauli

Mat kron(const Mat& a, const Mat& b);

// Embed a single-qubit operator acting on bit `site` of an n-qubit register.
Mat embed_one_qubit(const Mat& op, int site, int n_qubits);

bool is_hermitian(const Mat& m, double tol = 1e-12);

// ---- Hamiltonians -----------------------------------------------------------

struct SingleSpinZeeman {
  double g = 1.0;  // H = -(g/2) Z, so |0> is the ground state for g > 0
};

struct QuantumIsing2D {
  int lx = 3;
  int ly = 3;
  double j = 1.0;  // ferromagnetic XX coupling strength
  double g = 1.0;  // transverse (Z) field strength
  bool periodic = true;
};

// Nearest-neighbour bond list (right + down edge per site). On a periodic
// lattice of extent 2 the wrap bond coincides with the interior one and is kept
// twice: every site contributes its right and down edge unconditionally.
std::vector<std::pair<int, int>> ising_bonds(const QuantumIsing2D& spec);

// H = -(g/2) Z on one qubit.
Mat build_hamiltonian(const SingleSpinZeeman& spec);

// H = -J sum_<ij> X_i X_j - g sum_i Z_i on lx*ly qubits (<= 16 sites).
Mat build_hamiltonian(const QuantumIsing2D& spec);

// One Floquet period U = exp(+i delta g sum Z) * exp(+i delta J sum XX),
// i.e. the XX layer acts first.
Mat build_floquet_unitary(const QuantumIsing2D& spec, double delta);

// Effective Hamiltonian of the Floquet unitary to first order in delta:
// H_QI + (i delta/2) [H_J, H_g] with H_J = -J sum XX and H_g = -g sum Z.
Mat first_order_floquet(const QuantumIsing2D& spec, double delta);

// Single-spin free step: exactly exp(-i delta H), no splitting needed.
Mat build_floquet_unitary(const SingleSpinZeeman& spec, double delta);

// exp(-i t H) for Hermitian H via eigendecomposition.
Mat evolution_unitary(const Mat& h, double t);

// Hermitian H_F with u = exp(-i delta H_F): principal branch of the matrix
// logarithm of a (normal) unitary, energies in (-pi/delta, pi/delta]. This is
// the exact generator of the digital free step, so conjugation by powers of u
// equals Heisenberg evolution under H_F at integer multiples of delta.
Mat floquet_hamiltonian(const Mat& u, double delta);

// ---- Norms ------------------------------------------------------------------

double operator_norm(const Mat& x);  // largest singular value
double trace_norm(const Mat& x);     // sum of singular values

// ---- Eigen machinery --------------------------------------------------------

struct EigenDecomposition {
  RVec energies;  // ascending
  Mat basis;      // columns are eigenvectors; H = basis * diag(energies) * basis^dag
};

EigenDecomposition eigendecompose(const Mat& h);

Mat to_eigenbasis(const Mat& a, const EigenDecomposition& eig);    // V^dag A V
Mat from_eigenbasis(const Mat& a, const EigenDecomposition& eig);  // V A V^dag

// Gibbs weights e^{-beta e_a}/Z with the spectrum shifted by min(e) before
// exponentiation so large beta cannot overflow.
RVec gibbs_weights(const RVec& energies, double beta);

// Gibbs state in the computational basis.
Mat gibbs_state(const EigenDecomposition& eig, double beta);

// ---- Bohr decomposition -----------------------------------------------------

// One frequency component of an operator: entries of A (in the eigenbasis)
// restricted to matrix positions (a,b) whose transition frequency
// omega_ab = e_b - e_a falls in this cluster.
struct BohrTerm {
  double omega = 0.0;  // cluster representative (mean of member frequencies)
  Mat component;       // eigenbasis representation, zero outside the cluster
};

// Cluster the transition frequencies with gap tolerance `tol` (frequencies
// sorted; a gap > tol starts a new cluster) and split A accordingly.
// The terms sum back to V^dag A V exactly.
std::vector<BohrTerm> bohr_decompose(const Mat& a, const EigenDecomposition& eig,
                                     double tol);

}  // namespace qgibbs
