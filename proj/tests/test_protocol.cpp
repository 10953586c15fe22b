#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qgibbs/protocol.hpp"
#include "qgibbs/spectra.hpp"

namespace qgibbs {
namespace {

Mat random_density(Eigen::Index d, std::uint64_t seed) {
  SubstreamRng rng(seed, 0, Stream::generic);
  Mat g(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) g(r, c) = cxd(rng.next_gaussian(), rng.next_gaussian());
  Mat rho = g * g.adjoint();
  return rho / rho.trace();
}

ProtocolParams single_spin_params(double theta, double delta, int m, double lambda) {
  ProtocolParams p;
  p.theta = theta;
  p.beta = 1.0;
  p.h = 1.0;
  p.delta = delta;
  p.m = m;
  p.lambda = lambda;
  p.n_bath = 1;
  p.coupling.mode = CouplingSpec::Mode::fixed;
  p.coupling.fixed = {{coupling_zy(), 0, 0}};
  return p;
}

// Independent construction of the interaction-picture walk-out
//   Q_I = prod_{tau=M..-M} exp(-i delta theta f(tau) sum_mu A_mu(tau) (x) Y_mu(tau))
// with A(tau) = U_S^{-tau} A U_S^{tau} and Y(tau) = U_B^{-tau} Y U_B^{tau},
// built from explicit dense matrix powers and exponentials.
Mat interaction_walkout(const Mat& sys_u, int n_sys, const ProtocolParams& p,
                        const FilterFunction& f, const std::vector<CouplingTerm>& geometry) {
  const Eigen::Index d_sys = Eigen::Index(1) << n_sys;
  const Eigen::Index d_joint = d_sys << p.n_bath;
  Mat ub1 = Mat::Zero(2, 2);
  ub1(0, 0) = std::exp(cxd(0, p.delta * p.h / 2.0));
  ub1(1, 1) = std::exp(cxd(0, -p.delta * p.h / 2.0));

  // Dense powers U_S^{tau}, U_B^{tau} for tau in [-m, m].
  std::vector<Mat> us_pow(std::size_t(2 * p.m + 1)), ub_pow(std::size_t(2 * p.m + 1));
  us_pow[std::size_t(p.m)] = Mat::Identity(d_sys, d_sys);
  ub_pow[std::size_t(p.m)] = Mat::Identity(2, 2);
  for (int k = 1; k <= p.m; ++k) {
    us_pow[std::size_t(p.m + k)] = us_pow[std::size_t(p.m + k - 1)] * sys_u;
    us_pow[std::size_t(p.m - k)] = us_pow[std::size_t(p.m - k + 1)] * sys_u.adjoint();
    ub_pow[std::size_t(p.m + k)] = ub_pow[std::size_t(p.m + k - 1)] * ub1;
    ub_pow[std::size_t(p.m - k)] = ub_pow[std::size_t(p.m - k + 1)] * ub1.adjoint();
  }
  auto us_at = [&](int tau) -> const Mat& { return us_pow[std::size_t(tau + p.m)]; };
  auto ub_at = [&](int tau) -> const Mat& { return ub_pow[std::size_t(tau + p.m)]; };

  Mat q = Mat::Identity(d_joint, d_joint);
  for (int tau = p.m; tau >= -p.m; --tau) {
    Mat kick = Mat::Identity(d_joint, d_joint);
    for (const auto& term : geometry) {
      const Mat a_sys = embed_one_qubit(term.op, term.site, n_sys);
      const Mat a_i = us_at(-tau) * a_sys * us_at(tau);
      const Mat y_i = ub_at(-tau) * pauli::y() * ub_at(tau);
      const Mat gen = kron(embed_one_qubit(y_i, term.bath, p.n_bath), a_i);
      const EigenDecomposition eig = eigendecompose(gen);
      Vec phases(eig.energies.size());
      for (Eigen::Index k = 0; k < phases.size(); ++k)
        phases[k] = std::exp(cxd(0, -p.delta * p.theta * f.at(tau) * eig.energies[k]));
      kick = eig.basis * phases.asDiagonal() * eig.basis.adjoint() * kick;
    }
    q = q * kick;
  }
  return q;
}

Mat channel_from_kraus(const std::vector<Mat>& kraus, const Mat& rho) {
  Mat out = Mat::Zero(rho.rows(), rho.cols());
  for (const Mat& k : kraus) out.noalias() += k * rho * k.adjoint();
  return out;
}

std::vector<Mat> kraus_from_joint_unitary(const Mat& q, Eigen::Index d_sys) {
  const Eigen::Index blocks = q.rows() / d_sys;
  std::vector<Mat> kraus;
  for (Eigen::Index b = 0; b < blocks; ++b)
    kraus.push_back(q.block(b * d_sys, 0, d_sys, d_sys));
  return kraus;
}

TEST(Filter, NormalizationSymmetryWidth) {
  {
    ProtocolParams p = single_spin_params(0.1, 0.01, 200, 0.0);
    const FilterFunction f = build_filter(p);
    EXPECT_NEAR(f.a, 2.0, 1e-14);  // a = sqrt(4h/beta), h = beta = 1
    double sum = 0;
    for (double v : f.samples) sum += std::abs(v);
    EXPECT_NEAR(p.delta * sum, 1.0, 1e-12);
    for (int tau = 1; tau <= p.m; ++tau) EXPECT_DOUBLE_EQ(f.at(tau), f.at(-tau));
    EXPECT_DOUBLE_EQ(f.peak, f.at(0));
    EXPECT_GT(f.at(0), f.at(p.m));
  }
  {
    ProtocolParams p = single_spin_params(0.1, 0.01, 200, 0.0);
    p.beta = 4.0;
    EXPECT_NEAR(build_filter(p).a, 1.0, 1e-14);
  }
}

TEST(Filter, Warnings) {
  ProtocolParams good = single_spin_params(0.1, 0.01, 200, 0.0);  // Ta = 4, delta*a = 0.02
  EXPECT_TRUE(parameter_warnings(good).empty());
  ProtocolParams short_window = good;
  short_window.m = 40;  // T*a = 0.8 < 1
  EXPECT_EQ(parameter_warnings(short_window).size(), 1u);
  ProtocolParams coarse = good;
  coarse.delta = 0.3;  // delta*a = 0.6 > 0.5; T*a = 120, fine
  EXPECT_EQ(parameter_warnings(coarse).size(), 1u);
}

TEST(Randomization, DepthSampler) {
  SubstreamRng rng(11, 0, Stream::reset_depth);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(sample_randomization_depth(0.0, 10, rng), 0);
  const double lambda = 1.0;
  const int m = 10;
  const int n = 100000;
  double sum = 0;
  for (int k = 0; k < n; ++k) {
    const int d = sample_randomization_depth(lambda, m, rng);
    ASSERT_GE(d, 0);
    sum += d;
  }
  // Geometric with success p = 1/11: mean 10, variance (1-p)/p^2 = 110.
  const double sigma_mean = std::sqrt(110.0 / n);
  EXPECT_NEAR(sum / n, 10.0, 3.0 * sigma_mean);
}

TEST(Randomization, GeometricPhaseAverageMatchesClosedForm) {
  // The dense engine replaces the sampled depth by E[z^{M_R}]; check the
  // closed form against a Monte Carlo average of the sampler itself.
  const double lambda = 1.0;
  const int m = 10;
  const double p = 1.0 / (1.0 + lambda * m);
  const cxd z = std::exp(cxd(0, 0.7));
  SubstreamRng rng(3, 1, Stream::reset_depth);
  cxd mc = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k)
    mc += std::pow(z, sample_randomization_depth(lambda, m, rng));
  mc /= double(n);
  const cxd exact = p / (1.0 - (1.0 - p) * z);
  EXPECT_LT(std::abs(mc - exact), 4.0 / std::sqrt(double(n)));
}

TEST(Walkout, FreeCaseFactorizes) {
  ProtocolParams p = single_spin_params(0.0, 0.05, 6, 0.0);
  const Mat us = build_floquet_unitary(SingleSpinZeeman{1.0}, p.delta);
  const ProtocolEngine engine(us, 1, p);
  SubstreamRng rng(1, 0, Stream::geometry);
  const Mat q = engine.walkout_matrix(engine.realize_geometry(rng));
  Mat ub = Mat::Zero(2, 2);
  ub(0, 0) = std::exp(cxd(0, p.delta * p.h / 2.0));
  ub(1, 1) = std::exp(cxd(0, -p.delta * p.h / 2.0));
  Mat u0 = kron(ub, us);
  Mat expected = Mat::Identity(4, 4);
  for (int k = 0; k < 2 * p.m + 1; ++k) expected = u0 * expected;
  EXPECT_LT((q - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Walkout, UnitarityAndKrausCompleteness) {
  // 2x2 Ising + 2 bath qubits at the strong-ish coupling used in experiments.
  ProtocolParams p;
  p.theta = 0.25;
  p.beta = 1.0;
  p.h = 4.0;  // max(2g, 4J) at J = g = 1
  p.delta = kPi / 40.0;
  p.m = 10;
  p.lambda = 0.0;
  p.n_bath = 2;
  p.coupling.mode = CouplingSpec::Mode::fixed;
  p.coupling.fixed = {{coupling_zy(), 0, 0}, {coupling_zy(), 3, 1}};
  const QuantumIsing2D spec{2, 2, 1.0, 1.0, true};
  const ProtocolEngine engine(build_floquet_unitary(spec, p.delta), 4, p);
  SubstreamRng rng(1, 0, Stream::geometry);
  const auto geometry = engine.realize_geometry(rng);
  const Mat q = engine.walkout_matrix(geometry);
  EXPECT_LT((q.adjoint() * q - Mat::Identity(64, 64)).cwiseAbs().maxCoeff(), 1e-10);
  const auto kraus = engine.kraus_set(geometry);
  ASSERT_EQ(kraus.size(), 4u);
  Mat sum = Mat::Zero(16, 16);
  for (const Mat& k : kraus) sum.noalias() += k.adjoint() * k;
  EXPECT_LT((sum - Mat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Walkout, ZeroWindowLinearization) {
  // m = 0: Q = exp(-i delta theta f(0) V) U_B U_S with delta*f(0) = 1, so the
  // distance to the linearization is bounded by theta^2 (norm of V is 1 here).
  const double theta = 0.05;
  ProtocolParams p = single_spin_params(theta, 0.05, 0, 0.0);
  const Mat us = build_floquet_unitary(SingleSpinZeeman{1.0}, p.delta);
  const ProtocolEngine engine(us, 1, p);
  SubstreamRng rng(1, 0, Stream::geometry);
  const Mat q = engine.walkout_matrix(engine.realize_geometry(rng));
  Mat ub = Mat::Zero(2, 2);
  ub(0, 0) = std::exp(cxd(0, p.delta * p.h / 2.0));
  ub(1, 1) = std::exp(cxd(0, -p.delta * p.h / 2.0));
  const Mat v = kron(pauli::y(), coupling_zy());  // bath factor is the high qubit
  const FilterFunction f = engine.filter();
  const Mat linear =
      (Mat::Identity(4, 4) - kI * p.delta * theta * f.peak * v) * kron(ub, us);
  EXPECT_LT((q - linear).cwiseAbs().maxCoeff(), theta * theta);
}

TEST(Channel, TracePositivityHermiticity) {
  ProtocolParams p;
  p.theta = 0.25;
  p.beta = 0.8;
  p.h = 4.0;
  p.delta = kPi / 40.0;
  p.m = 10;
  p.lambda = 0.5;
  p.rewind_fraction = 0.3;
  p.n_bath = 2;
  p.coupling.mode = CouplingSpec::Mode::random_geometry_per_cycle;
  p.coupling.op_template = coupling_zy();
  const QuantumIsing2D spec{2, 2, 1.0, 1.0, true};
  const ProtocolEngine engine(build_floquet_unitary(spec, p.delta), 4, p);
  SubstreamRng rng(5, 0, Stream::geometry);
  for (int rep = 0; rep < 5; ++rep) {
    const Mat rho = random_density(16, 100 + std::uint64_t(rep));
    const Mat out = engine.dense_cycle(rho, rng);
    EXPECT_LT(std::abs(out.trace() - cxd(1.0, 0.0)), 1e-10);
    EXPECT_TRUE(is_hermitian(out, 1e-10));
    const Eigen::SelfAdjointEigenSolver<Mat> solver(out);
    EXPECT_GT(solver.eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(Channel, FreeGibbsFixedPoint) {
  // theta = 0, lambda = 0: pure free conjugation, Gibbs is exactly stationary.
  ProtocolParams p = single_spin_params(0.0, 0.05, 10, 0.0);
  const Mat us = build_floquet_unitary(SingleSpinZeeman{1.0}, p.delta);
  const ProtocolEngine engine(us, 1, p);
  const Mat h = build_hamiltonian(SingleSpinZeeman{1.0});
  const Mat sigma = gibbs_state(eigendecompose(h), p.beta);
  SubstreamRng rng(7, 0, Stream::geometry);
  const Mat out = engine.dense_cycle(sigma, rng);
  EXPECT_LT((out - sigma).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Channel, RewindEqualsInteractionPictureMap) {
  // With full rewind and no randomization the cycle must coincide with the
  // interaction-picture channel up to integer free steps: the walk-out
  // satisfies Q = U0^m Q_I U0^{m+1}, so after tracing the bath and rewinding
  // by two windows the residual free motion is a single step:
  //   E = S^{-m} o E_I o S^{m+1}.
  struct Case {
    Mat sys_u;
    int n_sys;
    ProtocolParams p;
  };
  std::vector<Case> cases;
  {
    ProtocolParams p = single_spin_params(0.25, 0.05, 10, 0.0);
    p.rewind_fraction = 1.0;
    cases.push_back({build_floquet_unitary(SingleSpinZeeman{1.0}, p.delta), 1, p});
  }
  {
    // Trotterized two-site chain: exercises the Floquet-power convention on a
    // system whose free step is not the exponential of the target Hamiltonian.
    ProtocolParams p;
    p.theta = 0.2;
    p.beta = 1.0;
    p.h = 2.0;
    p.delta = 0.05;
    p.m = 8;
    p.lambda = 0.0;
    p.rewind_fraction = 1.0;
    p.n_bath = 2;
    p.coupling.mode = CouplingSpec::Mode::fixed;
    p.coupling.fixed = {{coupling_zy(), 0, 0}, {coupling_zy(), 1, 1}};
    const QuantumIsing2D chain{2, 1, 0.8, 1.0, false};
    cases.push_back({build_floquet_unitary(chain, p.delta), 2, p});
  }
  for (const auto& c : cases) {
    const ProtocolEngine engine(c.sys_u, c.n_sys, c.p);
    SubstreamRng rng(1, 0, Stream::geometry);
    const auto geometry = engine.realize_geometry(rng);
    const Mat qi =
        interaction_walkout(c.sys_u, c.n_sys, c.p, engine.filter(), geometry);
    const auto kraus_i = kraus_from_joint_unitary(qi, engine.sys_dim());
    for (int rep = 0; rep < 5; ++rep) {
      const Mat rho = random_density(engine.sys_dim(), 300 + std::uint64_t(rep));
      const Mat lhs = engine.dense_cycle(rho, rng);
      Mat rhs = engine.floquet_power_conjugate(rho, c.p.m + 1);
      rhs = channel_from_kraus(kraus_i, rhs);
      rhs = engine.floquet_power_conjugate(rhs, -c.p.m);
      EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Channel, FloquetPowers) {
  const QuantumIsing2D chain{2, 1, 0.8, 1.0, false};
  const Mat us = build_floquet_unitary(chain, 0.05);
  ProtocolParams p = single_spin_params(0.1, 0.05, 5, 0.0);
  p.coupling.fixed = {{coupling_zy(), 0, 0}};
  const ProtocolEngine engine(us, 2, p);
  const Mat rho = random_density(4, 9);
  const Mat u3 = us * us * us;
  EXPECT_LT((engine.floquet_power_conjugate(rho, 3.0) - u3 * rho * u3.adjoint())
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_LT((engine.floquet_power_conjugate(
                  engine.floquet_power_conjugate(rho, -3.0), 3.0) -
              rho)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  // Fractional powers compose.
  const Mat half_twice = engine.floquet_power_conjugate(
      engine.floquet_power_conjugate(rho, 0.5), 0.5);
  EXPECT_LT((half_twice - engine.floquet_power_conjugate(rho, 1.0)).cwiseAbs().maxCoeff(),
            1e-12);
  SubstreamRng srng(2, 0, Stream::generic);
  State psi(4);
  for (int k = 0; k < 4; ++k) psi[k] = cxd(srng.next_gaussian(), srng.next_gaussian());
  psi.normalize();
  EXPECT_LT((engine.floquet_power_state(psi, 2.0) - us * us * psi).norm(), 1e-12);
}

TEST(Channel, TrajectoryAverageMatchesDense) {
  ProtocolParams p = single_spin_params(0.3, 0.1, 20, 1.0);
  const Mat us = build_floquet_unitary(SingleSpinZeeman{1.0}, p.delta);
  const ProtocolEngine engine(us, 1, p);
  State plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const Mat rho0 = plus * plus.adjoint();
  SubstreamRng geo(42, 0, Stream::geometry);
  const Mat dense = engine.dense_cycle(rho0, geo);
  const int n = 10000;
  Mat avg = Mat::Zero(2, 2);
  for (int k = 0; k < n; ++k) {
    auto streams = make_trajectory_streams(42, std::uint64_t(k));
    const State out = engine.trajectory_step(plus, streams);
    avg.noalias() += out * out.adjoint();
  }
  avg /= double(n);
  // Trace distance of 2x2 Hermitian difference = sum of |eigenvalues| / 2.
  const Eigen::SelfAdjointEigenSolver<Mat> solver(dense - avg);
  const double dist = solver.eigenvalues().cwiseAbs().sum() / 2.0;
  EXPECT_LT(dist, 5.0 / std::sqrt(double(n)));
}

TEST(Channel, SingleSpinFixedPointNearGibbs) {
  // Long iteration of the dense averaged cycle relaxes the populations to
  // within O(theta^2) of the Gibbs values.
  ProtocolParams p = single_spin_params(0.1, 0.01, 200, 0.0);
  const Mat us = build_floquet_unitary(SingleSpinZeeman{1.0}, p.delta);
  const ProtocolEngine engine(us, 1, p);
  SubstreamRng rng(13, 0, Stream::geometry);
  Mat rho = Mat::Identity(2, 2) / 2.0;
  for (int cycle = 0; cycle < 2400; ++cycle) rho = engine.dense_cycle(rho, rng);
  const Mat before = rho;
  for (int cycle = 0; cycle < 200; ++cycle) rho = engine.dense_cycle(rho, rng);
  EXPECT_LT((rho - before).cwiseAbs().maxCoeff(), 1e-5);  // converged
  const double p0_gibbs = 1.0 / (1.0 + std::exp(-p.beta));
  EXPECT_NEAR(rho(0, 0).real(), p0_gibbs, 5.0 * p.theta * p.theta);
  EXPECT_LT(std::abs(rho(0, 0).real() - 0.5), 1.0);  // sanity: moved from mixed
  EXPECT_GT(rho(0, 0).real(), 0.6);
}

TEST(Protocol, RunLoopAndEnsembleHelpers) {
  ProtocolParams p = single_spin_params(0.2, 0.05, 10, 0.0);
  const Mat us = build_floquet_unitary(SingleSpinZeeman{1.0}, p.delta);
  const ProtocolEngine engine(us, 1, p);
  const Mat rho0 = Mat::Identity(2, 2) / 2.0;
  SubstreamRng a(21, 0, Stream::geometry), b(21, 0, Stream::geometry);
  int hook_calls = 0;
  const Mat via_run = run_protocol(rho0, engine, 1, a,
                                   [&](int, const Mat&) { ++hook_calls; });
  const Mat direct = engine.dense_cycle(rho0, b);
  EXPECT_EQ(hook_calls, 1);
  EXPECT_LT((via_run - direct).cwiseAbs().maxCoeff(), 1e-14);

  State e0 = State::Zero(2);
  e0[0] = 1.0;
  const Mat proj = steady_state_ensemble({e0, e0});
  EXPECT_NEAR(proj(0, 0).real(), 1.0, 1e-14);
  EXPECT_NEAR(proj.trace().real(), 1.0, 1e-14);
  EXPECT_THROW(steady_state_ensemble({}), std::invalid_argument);
}

TEST(Protocol, Validation) {
  ProtocolParams p = single_spin_params(0.1, 0.01, 100, 0.0);
  p.theta = -1;
  EXPECT_THROW(validate(p), std::invalid_argument);
  p = single_spin_params(0.1, 0.01, 100, 0.0);
  p.coupling.fixed.clear();
  EXPECT_THROW(validate(p), std::invalid_argument);
  p = single_spin_params(0.1, 0.01, 100, 0.0);
  p.rewind_fraction = 1.5;
  EXPECT_THROW(validate(p), std::invalid_argument);
}

}  // namespace
}  // namespace qgibbs
