#include "qgibbs/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qgibbs/protocol.hpp"
#include "qgibbs/rng.hpp"
#include "qgibbs/spectra.hpp"

namespace qgibbs {
namespace {

Mat random_density(Eigen::Index dim, std::uint64_t seed) {
  SubstreamRng rng(seed, 0, Stream::generic);
  Mat g(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c)
      g(r, c) = cxd(rng.next_gaussian(), rng.next_gaussian());
  Mat rho = g * g.adjoint();
  return rho / rho.trace().real();
}

ProtocolParams single_spin_params(double theta, double lambda) {
  ProtocolParams p;
  p.theta = theta;
  p.beta = 1.0;
  p.h = 1.0;  // matched to the qubit splitting g = 1
  p.delta = 0.05;
  p.m = 100;
  p.lambda = lambda;
  p.n_bath = 1;
  p.coupling.mode = CouplingSpec::Mode::fixed;
  p.coupling.fixed = {CouplingTerm{pauli::x(), 0, 0}};
  return p;
}

// Deterministic averaged cycle of the single-spin protocol as a ChannelAction.
// Built from the Kraus set directly so it stays linear on arbitrary (including
// traceless) inputs, as superoperator construction requires.
ChannelAction single_spin_channel(const ProtocolEngine& engine) {
  SubstreamRng rng(1u, 0u, Stream::geometry);
  auto kraus = std::make_shared<const std::vector<Mat>>(
      engine.kraus_set(engine.realize_geometry(rng)));
  return [&engine, kraus](const Mat& rho) {
    Mat next = Mat::Zero(rho.rows(), rho.cols());
    for (const Mat& k : *kraus) next.noalias() += k * rho * k.adjoint();
    return engine.dephase_and_rewind(next);
  };
}

TEST(TraceDistance, ExtremesAndErrors) {
  const Mat rho = random_density(4, 3);
  EXPECT_NEAR(trace_distance(rho, rho), 0.0, 1e-14);
  Mat p0 = Mat::Zero(2, 2), p1 = Mat::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  EXPECT_NEAR(trace_distance(p0, p1), 1.0, 1e-14);
  EXPECT_THROW(trace_distance(p0, random_density(4, 1)), std::invalid_argument);
}

TEST(TraceDistance, TriangleInequalityOnRandomTriples) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Mat a = random_density(8, 3 * seed + 10);
    const Mat b = random_density(8, 3 * seed + 11);
    const Mat c = random_density(8, 3 * seed + 12);
    EXPECT_LE(trace_distance(a, c),
              trace_distance(a, b) + trace_distance(b, c) + 1e-10);
  }
}

TEST(TraceDistance, SteadyStateErrorByTwoComputationPaths) {
  const SingleSpinZeeman model{1.0};
  const Mat h = build_hamiltonian(model);
  const auto eig = eigendecompose(h);
  const ProtocolParams p = single_spin_params(0.25, 1.0);
  const ProtocolEngine engine(evolution_unitary(h, p.delta), 1, p);
  const auto fp = fixed_point_solve(single_spin_channel(engine), 2,
                                    FixedPointMode::power_iteration, 4000, 1e-12);
  EXPECT_TRUE(fp.converged);

  const Mat sigma_beta = gibbs_state(eig, p.beta);
  const double direct = trace_distance(fp.sigma, sigma_beta);
  // 2x2 traceless Hermitian difference: eigenvalues +-sqrt(pop^2 + |coh|^2).
  const Mat d = to_eigenbasis(fp.sigma - sigma_beta, eig);
  const double from_components =
      std::sqrt(std::norm(d(0, 0)) + std::norm(d(0, 1)));
  EXPECT_NEAR(direct, from_components, 1e-10);
  EXPECT_GT(direct, 0.0);
}

TEST(Entropy, KnownValues) {
  Mat pure = Mat::Zero(4, 4);
  pure(2, 2) = 1.0;
  EXPECT_NEAR(von_neumann_entropy(pure), 0.0, 1e-12);
  EXPECT_NEAR(von_neumann_entropy(Mat::Identity(8, 8) / 8.0), std::log(8.0), 1e-12);

  const auto eig = eigendecompose(build_hamiltonian(SingleSpinZeeman{1.0}));
  const double pg = 1.0 / (1.0 + std::exp(-1.0));
  const double binary = -pg * std::log(pg) - (1 - pg) * std::log(1 - pg);
  EXPECT_NEAR(von_neumann_entropy(gibbs_state(eig, 1.0)), binary, 1e-12);
}

TEST(RelativeEntropyDense, ClosedFormAndKleinInequality) {
  const auto eig = eigendecompose(build_hamiltonian(SingleSpinZeeman{1.0}));
  const Mat r1 = gibbs_state(eig, 0.7);
  const Mat r2 = gibbs_state(eig, 1.6);
  const RVec p = gibbs_weights(eig.energies, 0.7);
  const RVec q = gibbs_weights(eig.energies, 1.6);
  double expected = 0.0;
  for (int k = 0; k < 2; ++k) expected += p(k) * (std::log(p(k)) - std::log(q(k)));
  EXPECT_NEAR(quantum_relative_entropy(r1, r2), expected, 1e-12);
  EXPECT_NEAR(quantum_relative_entropy(r1, r1), 0.0, 1e-12);
  for (std::uint64_t seed = 50; seed < 54; ++seed) {
    const Mat a = random_density(4, seed);
    const Mat b = random_density(4, seed + 100);
    EXPECT_GE(quantum_relative_entropy(a, b), -1e-9);
  }
}

TEST(MutualInformation, ProductAndBellStates) {
  const Mat rho_a = random_density(2, 21);
  const Mat rho_b = random_density(2, 22);
  EXPECT_NEAR(mutual_information(kron(rho_b, rho_a), 0, 2), 0.0, 1e-12);

  Vec bell = Vec::Zero(4);
  bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
  const Mat rho_bell = bell * bell.adjoint();
  EXPECT_NEAR(mutual_information(rho_bell, 0, 2), 2.0 * std::log(2.0), 1e-12);
  EXPECT_THROW(mutual_information(rho_bell, 2, 2), std::invalid_argument);
}

TEST(MutualInformation, IsingThermalSymmetryAndCorrelationBound) {
  const QuantumIsing2D model{3, 3, 1.0, 1.0, true};
  const Mat h = build_hamiltonian(model);
  const Mat rho = gibbs_state(eigendecompose(h), 0.5);

  const double i0 = mutual_information(rho, 0, 9);
  EXPECT_GT(i0, 0.0);
  for (int corner : {2, 6, 8})  // all corners equivalent on the periodic torus
    EXPECT_NEAR(mutual_information(rho, corner, 9), i0, 1e-9);

  // I(A:rest) upper-bounds connected correlations: I >= <OA OB>_c^2 / 2.
  for (int partner : {1, 4, 8}) {
    const Mat za = embed_one_qubit(pauli::z(), 0, 9);
    const Mat zb = embed_one_qubit(pauli::z(), partner, 9);
    const double corr = ((rho * za * zb).trace() - (rho * za).trace() * (rho * zb).trace())
                            .real();
    EXPECT_GE(i0, corr * corr / 2.0 - 1e-12) << "partner " << partner;
  }
}

TEST(Magnetization, BasisAndThermalValues) {
  Mat up = Mat::Zero(4, 4);
  up(0, 0) = 1.0;  // both qubits |0>
  EXPECT_NEAR(magnetization_z(up, 0, 2), 1.0, 1e-14);
  const auto eig = eigendecompose(build_hamiltonian(SingleSpinZeeman{1.0}));
  // H = -(1/2)Z: <Z> = tanh(beta/2).
  EXPECT_NEAR(magnetization_z(gibbs_state(eig, 1.3), 0, 1), std::tanh(0.65), 1e-12);
}

TEST(HeatCapacity, DenseClosedFormAndEigenstate) {
  const Mat h = build_hamiltonian(SingleSpinZeeman{1.0});
  const auto eig = eigendecompose(h);
  Mat ground = eig.basis.col(0) * eig.basis.col(0).adjoint();
  EXPECT_NEAR(heat_capacity(ground, h, 1.0), 0.0, 1e-12);
  const double expected = 0.25 / std::pow(std::cosh(0.5), 2);
  EXPECT_NEAR(heat_capacity(gibbs_state(eig, 1.0), h, 1.0), expected, 1e-12);
}

TEST(HeatCapacity, SampledEstimatorMatchesDense) {
  const Mat h = build_hamiltonian(SingleSpinZeeman{1.0});
  const auto eig = eigendecompose(h);
  const double dense = heat_capacity(gibbs_state(eig, 1.0), h, 1.0);

  SubstreamRng rng(7u, 0u, Stream::measure);
  const double p_ground = 1.0 / (1.0 + std::exp(-1.0));
  std::vector<double> samples;
  for (int i = 0; i < 20000; ++i)
    samples.push_back(rng.next_double() < p_ground ? -0.5 : 0.5);
  const auto est = heat_capacity(samples, 1.0);
  EXPECT_GT(est.std_error, 0.0);
  EXPECT_NEAR(est.value, dense, 4.0 * est.std_error);

  const auto flat = heat_capacity(std::vector<double>(100, 0.25), 1.0);
  EXPECT_EQ(flat.value, 0.0);
  EXPECT_EQ(flat.std_error, 0.0);
  EXPECT_THROW(heat_capacity(std::vector<double>{1.0}, 1.0), std::invalid_argument);
}

TEST(HeatCapacity, IsingSweepPeaksNearCriticalTemperature) {
  const QuantumIsing2D model{3, 3, 1.0, 1.0, true};
  const Mat h = build_hamiltonian(model);
  const auto eig = eigendecompose(h);
  double best_beta = 0.0, best_c = -1.0;
  for (double beta = 0.2; beta <= 1.2001; beta += 0.05) {
    const double c = heat_capacity(gibbs_state(eig, beta), h, beta);
    if (c > best_c) {
      best_c = c;
      best_beta = beta;
    }
  }
  EXPECT_GE(best_beta, 0.3);
  EXPECT_LE(best_beta, 0.7);
}

TEST(FixedPoint, PowerAndSuperoperatorModesAgree) {
  const Mat h = build_hamiltonian(SingleSpinZeeman{1.0});
  const ProtocolParams p = single_spin_params(0.1, 1.0);
  const ProtocolEngine engine(evolution_unitary(h, p.delta), 1, p);
  const auto channel = single_spin_channel(engine);

  const auto power =
      fixed_point_solve(channel, 2, FixedPointMode::power_iteration, 8000, 1e-10);
  const auto super =
      fixed_point_solve(channel, 2, FixedPointMode::superoperator_eig, 8000, 1e-9);
  EXPECT_TRUE(power.converged);
  EXPECT_TRUE(super.converged);
  EXPECT_EQ(super.fixed_space_dim, 1);
  EXPECT_LE((power.sigma - super.sigma).cwiseAbs().maxCoeff(), 1e-8);
  // Invariance under one further channel application.
  EXPECT_LE(2.0 * trace_distance(channel(power.sigma), power.sigma), 1e-8);
}

TEST(FixedPoint, ImmediateConvergenceAtExactFixedPoint) {
  const Mat h = build_hamiltonian(SingleSpinZeeman{1.0});
  const ProtocolParams p = single_spin_params(0.0, 0.0);
  const ProtocolEngine engine(evolution_unitary(h, p.delta), 1, p);
  const auto channel = single_spin_channel(engine);
  const Mat sigma_beta = gibbs_state(eigendecompose(h), p.beta);
  const auto fp = fixed_point_solve(channel, 2, FixedPointMode::power_iteration,
                                    100, 1e-9, &sigma_beta);
  EXPECT_TRUE(fp.converged);
  EXPECT_EQ(fp.cycles, 1);
}

TEST(FixedPoint, UnitaryChannelTriggersDegeneracyDetection) {
  const Mat h = build_hamiltonian(SingleSpinZeeman{1.0});
  const Mat u = evolution_unitary(h, 0.37);  // generic angle, nondegenerate H
  const ChannelAction channel = [&u](const Mat& rho) {
    return Mat(u * rho * u.adjoint());
  };
  const auto fp =
      fixed_point_solve(channel, 2, FixedPointMode::superoperator_eig, 100, 1e-9);
  EXPECT_EQ(fp.fixed_space_dim, 2);  // every eigenbasis-diagonal state is fixed
  EXPECT_TRUE(fp.converged);
}

TEST(FixedPoint, SuperoperatorGuardRejectsLargeDims) {
  const ChannelAction identity = [](const Mat& rho) { return rho; };
  EXPECT_THROW(fixed_point_solve(identity, 64, FixedPointMode::superoperator_eig),
               std::invalid_argument);
}

TEST(MixingTime, TrivialChannels) {
  const Mat target = random_density(2, 5);
  const ChannelAction project = [&target](const Mat& rho) {
    return Mat(rho.trace() * target);
  };
  EXPECT_EQ(mixing_time_estimate(build_superoperator(project, 2)), 0.0);

  const ChannelAction identity = [](const Mat& rho) { return rho; };
  EXPECT_TRUE(std::isinf(mixing_time_estimate(build_superoperator(identity, 2))));
}

TEST(MixingTime, SingleSpinSweepScalesInverseSquare) {
  const Mat h = build_hamiltonian(SingleSpinZeeman{1.0});
  std::vector<double> thetas{0.05, 0.1, 0.2, 0.4}, times;
  for (double theta : thetas) {
    const ProtocolParams p = single_spin_params(theta, 1.0);
    const ProtocolEngine engine(evolution_unitary(h, p.delta), 1, p);
    const double t = mixing_time_estimate(
        build_superoperator(single_spin_channel(engine), 2));
    ASSERT_TRUE(std::isfinite(t));
    times.push_back(t);
  }
  const auto fit = scaling_fit(thetas, times);
  EXPECT_GE(fit.exponent, -2.3);
  EXPECT_LE(fit.exponent, -1.7);
}

TEST(ScalingFit, ExactPowerLawsAndValidation) {
  const std::vector<double> xs{1.0, 2.0, 4.0, 8.0};
  std::vector<double> quad, root;
  for (double x : xs) {
    quad.push_back(x * x);
    root.push_back(3.0 * std::sqrt(x));
  }
  const auto f2 = scaling_fit(xs, quad);
  EXPECT_NEAR(f2.exponent, 2.0, 1e-12);
  EXPECT_NEAR(f2.r_squared, 1.0, 1e-12);
  const auto fh = scaling_fit(xs, root);
  EXPECT_NEAR(fh.exponent, 0.5, 1e-12);
  EXPECT_NEAR(fh.intercept, std::log(3.0), 1e-12);
  for (double r : fh.residuals) EXPECT_NEAR(r, 0.0, 1e-12);

  EXPECT_THROW(scaling_fit({1.0, 2.0}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(scaling_fit({1.0, -2.0, 3.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST(GroundCoherence, SubtractionRemovesOnlyGroundBlockOffDiagonal) {
  // Nearly degenerate ground doublet: 2x2 ferromagnetic Ising at small field.
  const QuantumIsing2D model{2, 2, 1.0, 0.05, false};
  const Mat h = build_hamiltonian(model);
  const auto eig = eigendecompose(h);

  // Equal superposition of the two lowest eigenstates: full ground coherence.
  Vec psi = (eig.basis.col(0) + eig.basis.col(1)) / std::sqrt(2.0);
  const Mat rho = psi * psi.adjoint();
  const Mat cleaned = zero_ground_coherence(rho, eig);

  const Mat r_eig = to_eigenbasis(cleaned, eig);
  EXPECT_NEAR(std::abs(r_eig(0, 1)), 0.0, 1e-14);
  EXPECT_NEAR(r_eig(0, 0).real(), 0.5, 1e-12);
  EXPECT_NEAR(r_eig(1, 1).real(), 0.5, 1e-12);

  // The incoherent ground mixture is unaffected.
  const Mat mix = 0.5 * (eig.basis.col(0) * eig.basis.col(0).adjoint() +
                         eig.basis.col(1) * eig.basis.col(1).adjoint());
  EXPECT_LE((zero_ground_coherence(mix, eig) - mix).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(trace_distance(cleaned, mix), 0.0, 1e-12);
}

}  // namespace
}  // namespace qgibbs
