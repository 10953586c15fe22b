#pragma once
// Weak-coupling generator machinery for the reset protocol: jump operators,
// two independent Lamb-shift computations, the detailed-balance Hamiltonian,
// stationarity/QDB diagnostics, perturbative steady-state corrections, and
// the rigorous norm/replacement bounds that certify them.
//
// Conventions (shared with the channel engine):
//   * eig is the eigendecomposition of the system Hamiltonian; transition
//     frequency omega_ab = e_b - e_a, so element (a,b) of a jump operator
//     moves population from level b down/up to level a.
//   * All LindbladData operators, and the density matrices passed to the
//     *_apply functions, live in the eigenbasis. Coupling operators passed to
//     the builders are full-register operators in the lab basis.
//   * width a = sqrt(4h/beta) ties the filter bandwidth to the detailed
//     balance condition (the Gaussian weight obeys w(omega) =
//     e^{beta omega/2} w(-omega) exactly at that width).

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qgibbs/protocol.hpp"

namespace qgibbs {

// ---- Dawson's function ------------------------------------------------------

// F(x) = e^{-x^2} int_0^x e^{t^2} dt, exactly odd, absolute accuracy <= 1e-10
// over the real line (achieved ~1e-12). |x| < 4: Maclaurin series accumulated
// in long double (cancellation is bounded by e^{x^2} eps_ld < 1e-12 there).
// |x| >= 4: exponentially convergent sampling series
//   F(x) = (1/sqrt(pi)) sum_{n odd} e^{-(x-nh)^2} / n,
// whose discretization error is e^{-(pi/2h)^2} (= 7e-18 at h = 1/4); the odd
// grid straddles the principal-value pole of the underlying Hilbert transform.
double dawson(double x);

namespace detail {
double dawson_series(double x);    // |x| < 4 branch
double dawson_sampling(double x);  // |x| >= 4 branch (valid for any x > 0)
}  // namespace detail

// ---- Jump operators and Lamb shifts ----------------------------------------

// Windowed discrete-time jump operator, elementwise in the eigenbasis:
//   L_ab = A_ab * delta * sum_{tau=-M}^{M} f(tau) e^{i(h - omega_ab) delta tau}.
Mat jump_discrete(const Mat& a_op, const EigenDecomposition& eig,
                  const FilterFunction& filter, double h);

// Continuous-time limit of the same object:
//   L_ab = A_ab * exp(-(omega_ab - h)^2 / (2 a^2)).
// Satisfies the detailed balance relation <a|L|b> = e^{beta omega_ab/2}<a|L†|b>
// exactly when width = sqrt(4h/beta).
Mat jump_continuous(const Mat& a_op, const EigenDecomposition& eig, double h,
                    double width);

// Coherent second-order (Lamb-type) shift, direct double time sum:
//   G = (delta^2/2i) sum_mu sum_{tau,tau'} sgn(tau - tau')
//         e^{i h delta (tau' - tau)} f(tau) f(tau') A_mu(tau) A_mu(tau'),
// with sgn(0) = 0 and A(tau) the Heisenberg operator, evaluated in the
// eigenbasis with prefix sums (O(M d^3)). Hermitian up to rounding.
Mat lamb_shift_timedomain(const std::vector<Mat>& a_ops,
                          const EigenDecomposition& eig,
                          const FilterFunction& filter, double h);

// Same object in the continuous limit via the Gaussian Hilbert transform:
//   G = sum_mu sum_{w,w'} A_mu,w† A_mu,w' (1/sqrt(pi))
//         e^{-(w-w')^2/4a^2} F((wbar - h)/a),   wbar = (w + w')/2,
// where the w-sums run over Bohr frequency components and F is Dawson's
// function.
Mat lamb_shift_dawson(const std::vector<Mat>& a_ops,
                      const EigenDecomposition& eig, double h, double width);

// The unique (up to diagonal gauge, fixed to zero) Hermitian G making the
// Lindbladian with detailed-balance jumps stationary on the Gibbs state:
//   G_ab = -i tanh(beta omega_ab / 4) K_ab  (a != b),  G_aa = 0.
Mat detailed_balance_hamiltonian(const Mat& k_eig, const EigenDecomposition& eig,
                                 double beta);

// ---- Assembled generator data ----------------------------------------------

enum class JumpMethod { continuous, discrete };
enum class LambMethod { dawson, timedomain };

struct LindbladData {
  EigenDecomposition eig;
  std::vector<Mat> jumps;  // L_mu, eigenbasis
  Mat k;                   // (1/2) sum L†L
  Mat g_ls;                // second-order coherent shift
  Mat g_db;                // detailed-balance Hamiltonian from k
  Mat delta_g;             // g_ls - g_db
  ProtocolParams params;   // snapshot of the protocol the data describes
};

// Build the full generator data for lab-basis coupling operators a_ops.
// The filter width a = sqrt(4 h / beta) and (for the discrete methods) the
// window come from params. Defaults give the detailed-balance machinery; the
// discrete/timedomain variants reproduce the digital protocol's second-order
// generator exactly.
LindbladData build_lindblad_data(const std::vector<Mat>& a_ops,
                                 const EigenDecomposition& eig,
                                 const ProtocolParams& params,
                                 JumpMethod jump_method = JumpMethod::continuous,
                                 LambMethod lamb_method = LambMethod::dawson);

// -i[G, rho] - {K, rho} + sum_mu L rho L†, with G = g_db (trace annihilating;
// exactly stationary on the Gibbs state for continuous jumps) or G = g_ls
// (the protocol's actual second-order generator). rho in the eigenbasis.
Mat db_lindbladian_apply(const Mat& rho_eig, const LindbladData& data);
Mat ls_lindbladian_apply(const Mat& rho_eig, const LindbladData& data);

// ---- Diagnostics ------------------------------------------------------------

// Trace-norm distance between the protocol's measured second-order map and
// the predicted generator:  || (E_I(rho) - rho)/theta^2 - L^LS(rho) ||_1.
// E_I is extracted from the fully rewound channel (rewind_fraction = 1,
// lambda = 0) by stripping the known residual free step:
//   E_rw = S^-M o E_I o S^{M+1}  =>  E_I = S^M o E_rw o S^{-(M+1)}.
// rho is given in the lab basis; data supplies L^LS in the eigenbasis.
double interaction_map_residual(const Mat& rho_lab, const LindbladData& data,
                                double theta, const ProtocolEngine& rewound_engine);

// Max violation of the stationarity-compatible balance condition
//   <a|E(|c><d|)|b> = sqrt(p_a p_b / (p_c p_d)) conj(<c|E(|a><b|)|d>)
// over n_samples random index quadruples; quadruples whose right-hand matrix
// element vanishes are skipped. channel_action maps matrix units (in the basis
// of `weights`) through the channel or generator under test. Throws if every
// sampled denominator vanishes.
double qdb_violation(const std::function<Mat(const Mat&)>& channel_action,
                     const Eigen::VectorXd& weights, int n_samples,
                     SubstreamRng& rng);

// ---- Perturbative steady-state corrections ----------------------------------

struct PerturbativePrediction {
  Mat coherences;               // zeta_ab, eigenbasis, zero diagonal
  Eigen::MatrixXd bound_matrix; // elementwise bound when available (else empty)
  std::vector<std::pair<Eigen::Index, Eigen::Index>> resonant_pairs;
};

// First-order steady-state coherences of the cycle:
//   zeta_ab = i theta^2 (G_DB - G_LS)_ab (p_b - p_a)
//             / (1 - e^{2i(T - T*) omega_ab} - i omega_ab lambda T),
// diagonal zero; the shift mismatch counts from the detailed-balance
// reference point (verified against the dense steady state, which equals
// e^{i omega T} zeta at the cycle boundary). At lambda = 0, pairs with
// |omega (T - T*)| within 1e-6 of a multiple of pi are flagged as resonant;
// an exactly vanishing denominator throws.
PerturbativePrediction predicted_coherences(const LindbladData& data, double beta,
                                            double t_window, double lambda,
                                            double theta, double t_star);

// Rigorous elementwise bound on |zeta_ab| for randomized resets (lambda > 2):
//   C1 theta^2 nB e^{-omega^2/4a^2} min(beta/2T, 1/(|omega| T)) max(p_a, p_b),
// C1 = supA^2 / (lambda - 2). Throws for lambda <= 2.
Eigen::MatrixXd coherence_bound(const LindbladData& data, double beta,
                                double t_window, double lambda, double width,
                                int n_bath, double sup_a_norm);

// Effective Hamiltonian renormalization reproducing the steady-state
// coherences as a Gibbs perturbation (same mismatch sign convention as
// predicted_coherences):
//   (C0)_ab = i omega_ab e^{i omega_ab T} (G_DB - G_LS)_ab
//             / (1 - i omega_ab (T0 + lambda T) - e^{2 i omega_ab T}),
// off-diagonal only (diagonal gauge left at zero). The Gibbs state of
// H + theta^2 C0 tracks the dense steady state to higher order than the
// Gibbs state of H.
Mat renormalized_correction(const LindbladData& data,
                            const EigenDecomposition& eig, double t_window,
                            double lambda, double t0);

// ---- Rigorous bounds --------------------------------------------------------

struct BoundCheck {
  std::string name;
  double value = 0.0;  // measured quantity
  double bound = 0.0;  // certified bound
  bool holds = false;
};

struct NormBoundReport {
  std::vector<BoundCheck> checks;
  bool all_hold = false;
};

// Certifies, for the given data and its lab-basis coupling operators:
//   * ||L_mu|| <= ||A_mu|| for every jump,
//   * ||G_LS|| <= (1/2) sum_mu ||A_mu||^2,
//   * induced trace norm of the generator <= 3 nB sup ||A_mu||^2
//     (estimated over a random batch of 256 unit-trace-norm probes, half of
//     them rank-1, which are extremal for the induced norm),
//   * |DeltaG_ab| <= 2 e^{-omega_ab^2/4a^2} nB sup ||A_mu||^2 elementwise.
NormBoundReport norm_bound_suite(const LindbladData& data,
                                 const std::vector<Mat>& a_ops,
                                 std::uint64_t seed = 0);

// Rigorous bound on the discrete-vs-continuous jump replacement error:
//   4 ||A|| e^{-(Ta)^2/2} / ((aN)(aT))  +  2 ||A|| e^{-pi^2/(2 (delta a)^2)},
// where N = delta sum_tau e^{-a^2 delta^2 tau^2/2} is the filter normalization.
// The first term covers the truncated Gaussian tails: the discrete weight is
// the ratio S(nu)/S(0) of two windowed sums, so both the numerator tail and
// the weight-carried denominator tail contribute (factor 1 + W <= 2 on the
// two-sided tail 2 e^{-(Ta)^2/2}/(a^2 T)). The second term covers spectral
// aliasing of the time grid. Depends on the window only through the products
// Ta and delta*a.
double fourier_replacement_error(int m, double delta, double width, double norm_a);

}  // namespace qgibbs
