#include "qgibbs/fermion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCore>

namespace qgibbs {

namespace {

void fail(const std::string& what) { throw std::invalid_argument("fermion: " + what); }

// b <- exp(delta * a) * b for a sparse generator. Plain Taylor with an
// absolute tail cutoff: protocol step sizes keep ||delta a|| well below 1, so
// a dozen sparse-times-dense products reach round-off.
void apply_step_exponential(const Eigen::SparseMatrix<double>& a, double delta,
                            RealMat& b) {
  RealMat term = b;
  for (int k = 1; k <= 48; ++k) {
    term = (delta / k) * (a * term).eval();
    b += term;
    if (term.cwiseAbs().maxCoeff() < 1e-17) return;
  }
  throw std::runtime_error("fermion: one-step exponential did not converge");
}

double max_abs(const RealMat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

void validate(const FermionChainSpec& spec) {
  if (spec.n_sites < 2) fail("chain needs at least 2 sites");
  if (!std::isfinite(spec.j) || !std::isfinite(spec.g)) fail("couplings must be finite");
}

RealMat build_coupling_matrix(const FermionChainSpec& spec) {
  validate(spec);
  const int d = 2 * spec.n_sites;
  RealMat upper = RealMat::Zero(d, d);
  for (int s = 0; s < spec.n_sites; ++s) upper(2 * s, 2 * s + 1) = spec.g;
  for (int s = 0; s + 1 < spec.n_sites; ++s) upper(2 * s + 1, 2 * s + 2) = -spec.j;
  RealMat a = upper - upper.transpose();
  return a;
}

MajoranaModes majorana_modes(const RealMat& a) {
  if (a.rows() != a.cols()) fail("quadratic form must be square");
  if (max_abs(a + a.transpose()) > 1e-10) fail("quadratic form must be antisymmetric");
  Mat b = kI * a.cast<cxd>();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (b + Mat(b.adjoint())));
  if (es.info() != Eigen::Success) throw std::runtime_error("fermion: mode eigensolve failed");
  return MajoranaModes{es.eigenvalues(), es.eigenvectors()};
}

SingleParticleSpectrum single_particle_energies(const FermionChainSpec& spec) {
  validate(spec);
  const int n = spec.n_sites;
  SingleParticleSpectrum out;
  out.analytic.resize(n);
  for (int k = 1; k <= n; ++k) {
    const double c = std::cos(kPi * k / n);
    out.analytic(k - 1) =
        std::sqrt(std::max(0.0, spec.j * spec.j + spec.g * spec.g + 2.0 * spec.j * spec.g * c));
  }
  std::sort(out.analytic.data(), out.analytic.data() + n);
  const MajoranaModes modes = majorana_modes(build_coupling_matrix(spec));
  out.numeric = modes.eps.tail(n);
  return out;
}

RealMat thermal_covariance(const RealMat& a, double beta) {
  if (beta < 0) fail("beta must be >= 0");
  const MajoranaModes mm = majorana_modes(a);
  const Eigen::Index d = a.rows();
  Mat x = Mat::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k)
    x(k, k) = -0.5 * std::tanh(0.5 * beta * mm.eps(k));
  RealMat c = ((-kI) * (mm.v * x * mm.v.adjoint())).real();
  return 0.5 * (c - RealMat(c.transpose()));
}

RealMat dephasing_map(const RealMat& c, const MajoranaModes& modes, double lambda,
                      double t_reset) {
  if (lambda < 0) fail("lambda must be >= 0");
  if (lambda == 0) return c;
  const Eigen::Index d = c.rows();
  Mat x = modes.v.adjoint() * (kI * c.cast<cxd>()) * modes.v;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      x(a, b) /= cxd(1.0, -lambda * t_reset * (modes.eps(b) - modes.eps(a)));
  RealMat out = ((-kI) * (modes.v * x * modes.v.adjoint())).real();
  return 0.5 * (out - RealMat(out.transpose()));
}

double fermion_energy(const RealMat& c, const RealMat& a) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) fail("dimension mismatch");
  // Tr(A C) = sum_pq A_pq C_qp, contracted elementwise against C^T.
  const double tr_ac = (a.cwiseProduct(c.transpose())).sum();
  return -0.5 * tr_ac;
}

double fermion_entropy(const RealMat& c) {
  Mat b = kI * c.cast<cxd>();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (b + Mat(b.adjoint())),
                                        Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    double nu = std::abs(es.eigenvalues()(k));
    if (nu > 0.5 + 1e-6) fail("occupation eigenvalue exceeds 1/2: not a fermionic state");
    nu = std::min(nu, 0.5);
    const double p = 0.5 + nu;
    const double q = 0.5 - nu;
    s -= p * std::log(p) + (q > 0.0 ? q * std::log(q) : 0.0);
  }
  return 0.5 * s;  // the +/- mode pairs each contribute twice
}

RelativeEntropyReport fermion_relative_entropy(const RealMat& c_sigma,
                                               const FermionChainSpec& spec,
                                               double beta) {
  const RealMat a = build_coupling_matrix(spec);
  const RealMat c_beta = thermal_covariance(a, beta);
  // The energy is linear in C: evaluating it on the difference keeps the
  // O(theta^4) relative entropies of near-thermal states above round-off.
  const double de = fermion_energy(c_sigma - c_beta, a);
  const double ds = fermion_entropy(c_sigma) - fermion_entropy(c_beta);
  RelativeEntropyReport out;
  out.value = beta * de - ds;
  out.pinsker = std::sqrt(std::max(out.value, 0.0) / 2.0);
  return out;
}

FermionEngine::FermionEngine(const FermionChainSpec& spec, const ProtocolParams& params)
    : spec_(spec), params_(params) {
  validate(spec_);
  if (params_.theta < 0) fail("theta must be >= 0");
  if (params_.beta <= 0) fail("beta must be > 0");
  if (params_.h <= 0) fail("h must be > 0");
  if (params_.delta <= 0) fail("delta must be > 0");
  if (params_.m < 1) fail("m must be >= 1");
  if (params_.lambda < 0) fail("lambda must be >= 0");
  filter_ = build_filter(params_.delta, params_.m, params_.filter_width());
  a_sys_ = build_coupling_matrix(spec_);
  modes_ = majorana_modes(a_sys_);

  const int n = spec_.n_sites;
  const int d = 2 * n;
  const int dj = 4 * n;  // joint: system Majoranas first, auxiliaries after

  std::vector<Eigen::Triplet<double>> fixed_t;
  for (int s = 0; s < n; ++s) {
    fixed_t.emplace_back(2 * s, 2 * s + 1, spec_.g);
    fixed_t.emplace_back(2 * s + 1, 2 * s, -spec_.g);
    fixed_t.emplace_back(d + 2 * s, d + 2 * s + 1, params_.h);
    fixed_t.emplace_back(d + 2 * s + 1, d + 2 * s, -params_.h);
  }
  for (int s = 0; s + 1 < n; ++s) {
    fixed_t.emplace_back(2 * s + 1, 2 * s + 2, -spec_.j);
    fixed_t.emplace_back(2 * s + 2, 2 * s + 1, spec_.j);
  }
  Eigen::SparseMatrix<double> a_fixed(dj, dj);
  a_fixed.setFromTriplets(fixed_t.begin(), fixed_t.end());

  // Coupling i (gamma_2s - gamma_{2s+1})/sqrt(2) * eta_{y,s} as quadratic-form
  // entries sqrt(2) (resp. -sqrt(2)) against the second auxiliary Majorana.
  const double r2 = std::sqrt(2.0);
  std::vector<Eigen::Triplet<double>> cpl_t;
  for (int s = 0; s < n; ++s) {
    const int y = d + 2 * s + 1;
    cpl_t.emplace_back(2 * s, y, r2);
    cpl_t.emplace_back(y, 2 * s, -r2);
    cpl_t.emplace_back(2 * s + 1, y, -r2);
    cpl_t.emplace_back(y, 2 * s + 1, r2);
  }
  Eigen::SparseMatrix<double> a_cpl(dj, dj);
  a_cpl.setFromTriplets(cpl_t.begin(), cpl_t.end());

  // One step = uncoupled evolution followed by a coupling kick.  Splitting the
  // step this way keeps the coupling concentrated at the sample instants, so
  // the discrete filter's spectral weights — and with them the up/down rate
  // ratio fixing the stationary temperature — are exact.  Exponentiating the
  // full instantaneous generator instead smears the coupling across the step
  // width and multiplies the rate filter by sinc^2((omega -+ h) delta / 2),
  // which shifts the stationary inverse temperature by beta (delta a)^2 / 12.
  o_window_ = RealMat::Identity(dj, dj);
  for (int tau = -params_.m; tau <= params_.m; ++tau) {
    apply_step_exponential(a_fixed, params_.delta, o_window_);
    const double w = params_.theta * filter_.at(tau);
    if (w != 0.0) apply_step_exponential(a_cpl, params_.delta * w, o_window_);
  }

  e_ss_ = o_window_.topLeftCorner(d, d);
  RealMat c_vac = RealMat::Zero(d, d);
  for (int s = 0; s < n; ++s) {
    c_vac(2 * s, 2 * s + 1) = -0.5;  // auxiliary ground state, nu = 1/2
    c_vac(2 * s + 1, 2 * s) = 0.5;
  }
  const RealMat e_sb = o_window_.topRightCorner(d, d);
  f_vac_ = e_sb * c_vac * e_sb.transpose();
  f_vac_ = 0.5 * (f_vac_ - RealMat(f_vac_.transpose()));

  m_modes_ = modes_.v.adjoint() * e_ss_.cast<cxd>() * modes_.v;
  Mat xf = modes_.v.adjoint() * (kI * f_vac_.cast<cxd>()) * modes_.v;
  xf_modes_ = 0.5 * (xf + Mat(xf.adjoint()));
  if (params_.lambda > 0) {
    deph_.resize(d, d);
    const double lt = params_.lambda * params_.reset_time();
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        deph_(a, b) = 1.0 / cxd(1.0, -lt * (modes_.eps(b) - modes_.eps(a)));
  }
}

RealMat FermionEngine::propagate_cycle(const RealMat& c) const {
  const int d = 2 * spec_.n_sites;
  if (c.rows() != d || c.cols() != d) fail("covariance dimension mismatch");
  if (max_abs(c + c.transpose()) > 1e-8)
    throw std::runtime_error("fermion: covariance lost antisymmetry beyond 1e-8");
  RealMat next = e_ss_ * c * e_ss_.transpose() + f_vac_;
  if (params_.lambda > 0)
    next = dephasing_map(next, modes_, params_.lambda, params_.reset_time());
  return 0.5 * (next - RealMat(next.transpose()));
}

Mat FermionEngine::cycle_in_modes(const Mat& x) const {
  Mat y = m_modes_ * x * m_modes_.adjoint() + xf_modes_;
  if (params_.lambda > 0) y = deph_.cwiseProduct(y);
  return 0.5 * (y + Mat(y.adjoint()));
}

Mat FermionEngine::to_modes(const RealMat& c) const {
  Mat x = modes_.v.adjoint() * (kI * c.cast<cxd>()) * modes_.v;
  return 0.5 * (x + Mat(x.adjoint()));
}

RealMat FermionEngine::from_modes(const Mat& x) const {
  RealMat c = ((-kI) * (modes_.v * x * modes_.v.adjoint())).real();
  return 0.5 * (c - RealMat(c.transpose()));
}

FermionEngine::FixedPoint FermionEngine::steady_state(double tol, int max_iter) const {
  const int d = 2 * spec_.n_sites;
  Mat x = Mat::Zero(d, d);
  for (int k = 0; k < d; ++k) x(k, k) = -0.5 * std::tanh(0.5 * params_.beta * modes_.eps(k));

  // Pair-diagonal part of the affine map, inverted exactly: without the
  // off-diagonal remainder of M the update for each element is scalar,
  // x_ab <- (rhs)_ab / (1 - D_ab M_aa conj(M_bb)). Those denominators are
  // O(theta^2) small exactly on the slowly mixing pairs, which is what makes
  // plain cycling take ~1/theta^2 iterations.
  Mat den(d, d);
  const Vec mdiag = m_modes_.diagonal();
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const cxd mult = (params_.lambda > 0) ? deph_(a, b) : cxd(1.0, 0.0);
      den(a, b) = 1.0 - mult * mdiag(a) * std::conj(mdiag(b));
    }
  }

  FixedPoint out;
  double target = 0.1 * tol;
  double best = std::numeric_limits<double>::infinity();
  Mat x_best = x;
  int grow = 0;
  bool damped = false;
  int it = 0;
  for (int round = 0; round < 4; ++round) {
    for (; it < max_iter; ) {
      ++it;
      const Mat r = cycle_in_modes(x) - x;
      const double res = r.cwiseAbs().maxCoeff();
      if (res < best) {
        best = res;
        x_best = x;
        grow = 0;
      } else if (++grow >= 3) {
        damped = true;
      }
      if (res <= target) break;
      const double step = damped ? 0.5 : 1.0;
      x += step * Mat(r.cwiseQuotient(den));
      x = 0.5 * (x + Mat(x.adjoint()));
    }
    out.c = from_modes(x_best);
    const RealMat pc = propagate_cycle(out.c);
    out.residual = max_abs(pc - out.c);
    out.converged = out.residual <= tol;
    if (out.converged || it >= max_iter) break;
    target *= 0.1;  // mode-basis and covariance max norms differ by O(1)
  }
  out.iterations = it;
  return out;
}

FermionRunReport run_fermion_protocol(const FermionChainSpec& spec,
                                      const ProtocolParams& params, int n_cycles,
                                      double convergence_tol, const RealMat* c0) {
  if (n_cycles < 1) fail("n_cycles must be >= 1");
  const FermionEngine engine(spec, params);
  const int d = 2 * spec.n_sites;
  Mat x = c0 ? engine.to_modes(*c0) : Mat(Mat::Zero(d, d));

  FermionRunReport report;
  report.zero_dissipation = params.theta == 0.0;
  const int min_cycles =
      report.zero_dissipation
          ? n_cycles + 1
          : int(std::min<double>(n_cycles + 1.0,
                                 std::ceil(3.0 / (params.theta * params.theta))));

  const RealMat& a_s = engine.coupling_matrix();
  const RealMat c_beta = thermal_covariance(a_s, params.beta);
  const double e_beta = fermion_energy(c_beta, a_s);
  const double s_beta = fermion_entropy(c_beta);
  const int stride = std::max(1, n_cycles / 256);
  report.entropy_stride = stride;
  report.energy_trace.reserve(std::size_t(n_cycles));

  double delta = 0.0;
  int cycle = 0;
  while (cycle < n_cycles) {
    ++cycle;
    const Mat xn = engine.cycle_in_modes(x);
    delta = (xn - x).cwiseAbs().maxCoeff();
    x = xn;

    double energy = 0.0;
    for (int k = 0; k < d; ++k) energy += 0.5 * engine.modes().eps(k) * x(k, k).real();
    report.energy_trace.push_back(energy);

    if (cycle % stride == 0) {
      Eigen::SelfAdjointEigenSolver<Mat> es(x, Eigen::EigenvaluesOnly);
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double nu = std::min(std::abs(es.eigenvalues()(k)), 0.5);
        const double p = 0.5 + nu;
        const double q = 0.5 - nu;
        s -= p * std::log(p) + (q > 0.0 ? q * std::log(q) : 0.0);
      }
      s *= 0.5;
      report.rel_entropy_trace.push_back(params.beta * (energy - e_beta) - (s - s_beta));
    }

    if (cycle >= min_cycles && delta < convergence_tol) {
      report.converged = true;
      break;
    }
  }
  report.cycles_run = cycle;
  report.final_delta = delta;
  report.c = engine.from_modes(x);
  return report;
}

}  // namespace qgibbs
