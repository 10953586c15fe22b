#include "qgibbs/protocol.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qgibbs {

namespace {

constexpr double kTraceDriftAbort = 1e-8;

Eigen::Matrix4cd hermitian_exp_4x4(const Mat& generator, double angle) {
  // exp(-i angle G) for Hermitian 4x4 G.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(generator);
  Eigen::Vector4cd phases;
  for (int k = 0; k < 4; ++k) phases[k] = std::exp(cxd(0, -angle * solver.eigenvalues()[k]));
  return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace

Mat coupling_y() { return pauli::y(); }
Mat coupling_z() { return pauli::z(); }
Mat coupling_zy() { return Mat((pauli::z() + pauli::y()) / std::sqrt(2.0)); }

std::vector<Mat> coupling_operators(const std::vector<CouplingTerm>& geometry,
                                    int n_sys_qubits) {
  std::vector<Mat> ops;
  ops.reserve(geometry.size());
  for (const auto& term : geometry)
    ops.push_back(embed_one_qubit(term.op, term.site, n_sys_qubits));
  return ops;
}

double ProtocolParams::filter_width() const { return std::sqrt(4.0 * h / beta); }

void validate(const ProtocolParams& p) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("protocol params: " + what); };
  if (p.theta < 0) fail("theta must be >= 0");
  if (p.beta <= 0) fail("beta must be > 0");
  if (p.h <= 0) fail("h must be > 0");
  if (p.delta <= 0) fail("delta must be > 0");
  if (p.m < 0) fail("m must be >= 0");
  if (p.lambda < 0) fail("lambda must be >= 0");
  if (p.n_bath < 1) fail("n_bath must be >= 1");
  if (p.rewind_fraction < 0 || p.rewind_fraction > 1) fail("rewind_fraction must be in [0,1]");
  if (p.coupling.mode == CouplingSpec::Mode::fixed) {
    if (int(p.coupling.fixed.size()) != p.n_bath) fail("fixed coupling list size must equal n_bath");
    for (const auto& term : p.coupling.fixed) {
      if (term.op.rows() != 2 || term.op.cols() != 2 || !is_hermitian(term.op, 1e-10))
        fail("coupling operators must be 2x2 Hermitian");
      if (term.bath < 0 || term.bath >= p.n_bath) fail("bath index out of range");
    }
  } else {
    const Mat& t = p.coupling.op_template;
    if (t.rows() != 2 || t.cols() != 2 || !is_hermitian(t, 1e-10))
      fail("coupling template must be 2x2 Hermitian");
  }
}

std::vector<std::string> parameter_warnings(const ProtocolParams& p) {
  std::vector<std::string> out;
  const double a = p.filter_width();
  const double t = p.reset_time();
  if (t * a < 1.0) {
    std::ostringstream os;
    os << "reset window too short for the filter width (T*a = " << t * a
       << " < 1): the truncated Gaussian tail is not negligible";
    out.push_back(os.str());
  }
  if (p.delta * a > 0.5) {
    std::ostringstream os;
    os << "step too coarse for the filter bandwidth (delta*a = " << p.delta * a
       << " > 0.5): spectral aliasing is not negligible";
    out.push_back(os.str());
  }
  return out;
}

FilterFunction build_filter(const ProtocolParams& p) {
  validate(p);
  return build_filter(p.delta, p.m, p.filter_width());
}

FilterFunction build_filter(double delta, int m, double a) {
  if (delta <= 0 || m < 0 || a <= 0)
    throw std::invalid_argument("filter: need delta > 0, m >= 0, a > 0");
  FilterFunction f;
  f.delta = delta;
  f.m = m;
  f.a = a;
  f.samples.resize(std::size_t(2 * m + 1));
  double sum = 0;
  for (int tau = -m; tau <= m; ++tau) {
    const double arg = a * delta * tau;
    const double v = std::exp(-arg * arg / 2.0);
    f.samples[std::size_t(tau + m)] = v;
    sum += v;
  }
  const double scale = 1.0 / (delta * sum);  // delta * sum |f| = 1 exactly
  for (double& v : f.samples) v *= scale;
  f.peak = f.at(0);
  return f;
}

int sample_randomization_depth(double lambda, int m, SubstreamRng& rng) {
  if (lambda <= 0 || m <= 0) return 0;
  const double mean = lambda * m;
  const double p = 1.0 / (1.0 + mean);
  // Geometric on {0,1,...}: inverse CDF of P(X = k) = p (1-p)^k.
  const double u = rng.next_double_open();
  const double k = std::floor(std::log(u) / std::log1p(-p));
  return int(k);
}

ProtocolEngine::ProtocolEngine(const Mat& sys_u, int n_sys_qubits, const ProtocolParams& params)
    : params_(params), n_sys_(n_sys_qubits), sys_u_(sys_u) {
  validate(params_);
  if (n_sys_ < 1) throw std::invalid_argument("protocol engine: need at least one system qubit");
  const Eigen::Index d = sys_dim();
  if (sys_u.rows() != d || sys_u.cols() != d)
    throw std::invalid_argument("protocol engine: free-step dimension mismatch");
  if ((sys_u.adjoint() * sys_u - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("protocol engine: free step is not unitary");

  filter_ = build_filter(params_);

  // Unitary matrices are normal, so the Schur form is diagonal: this yields an
  // orthonormal eigenbasis even through eigenvalue degeneracies.
  Eigen::ComplexSchur<Mat> schur(sys_u_, true);
  if (schur.info() != Eigen::Success)
    throw std::runtime_error("protocol engine: Schur decomposition failed");
  const Mat& t = schur.matrixT();
  double offdiag = 0;
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = r + 1; c < d; ++c) offdiag = std::max(offdiag, std::abs(t(r, c)));
  if (offdiag > 1e-9)
    throw std::runtime_error("protocol engine: free step not numerically normal");
  floquet_basis_ = schur.matrixU();
  floquet_units_ = Vec(d);
  floquet_args_ = RVec(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const cxd unit = t(k, k) / std::abs(t(k, k));
    floquet_units_[k] = unit;
    floquet_args_[k] = std::arg(unit);
  }

  bath_phases_ = Vec(Eigen::Index(1) << params_.n_bath);
  for (Eigen::Index b = 0; b < bath_phases_.size(); ++b) {
    const int ones = __builtin_popcountll(static_cast<unsigned long long>(b));
    // U_B = exp(+i delta (h/2) sum Z): each |0> bath bit adds +delta*h/2.
    const double phase = params_.delta * (params_.h / 2.0) * (params_.n_bath - 2 * ones);
    bath_phases_[b] = std::exp(cxd(0, phase));
  }

  build_kick_cache();
}

void ProtocolEngine::build_kick_cache() {
  auto add_op = [&](const Mat& op) {
    for (const auto& [cached, gates] : kick_cache_)
      if ((cached - op).cwiseAbs().maxCoeff() < 1e-14) return;
    // Joint generator on (system site qubit, bath qubit) with the bath qubit
    // as the high factor of the 4x4 basis.
    const Mat generator = kron(pauli::y(), op);
    std::vector<Mat> gates(std::size_t(params_.m + 1));
    for (int tau = 0; tau <= params_.m; ++tau) {
      const double angle = params_.delta * params_.theta * filter_.at(tau);
      gates[std::size_t(tau)] = hermitian_exp_4x4(generator, angle);
    }
    kick_cache_.emplace_back(op, std::move(gates));
  };
  if (params_.coupling.mode == CouplingSpec::Mode::fixed) {
    for (const auto& term : params_.coupling.fixed) add_op(term.op);
  } else {
    add_op(params_.coupling.op_template);
  }
}

const std::vector<Mat>& ProtocolEngine::kick_gates_for(const Mat& op) const {
  for (const auto& [cached, gates] : kick_cache_)
    if ((cached - op).cwiseAbs().maxCoeff() < 1e-14) return gates;
  throw std::logic_error("protocol engine: coupling operator not in kick cache");
}

std::vector<CouplingTerm> ProtocolEngine::realize_geometry(SubstreamRng& rng) const {
  if (params_.coupling.mode == CouplingSpec::Mode::fixed) return params_.coupling.fixed;
  std::vector<CouplingTerm> out;
  out.reserve(std::size_t(params_.n_bath));
  for (int mu = 0; mu < params_.n_bath; ++mu) {
    const int site = int(rng.next_below(std::uint64_t(n_sys_)));
    out.push_back({params_.coupling.op_template, site, mu});
  }
  return out;
}

void ProtocolEngine::apply_walkout(State& joint, const std::vector<CouplingTerm>& geometry) const {
  if (int(geometry.size()) != params_.n_bath)
    throw std::invalid_argument("apply_walkout: geometry size != n_bath");
  const Eigen::Index d_sys = sys_dim();
  const Eigen::Index n_blocks = Eigen::Index(1) << params_.n_bath;
  if (joint.size() != d_sys * n_blocks)
    throw std::invalid_argument("apply_walkout: joint state dimension mismatch");

  Mat work(d_sys, n_blocks);
  for (int tau = -params_.m; tau <= params_.m; ++tau) {
    // Free system step: streaming kernel when installed, else one GEMM over
    // all bath blocks.
    if (free_step_) {
      free_step_(joint);
    } else {
      Eigen::Map<Mat> view(joint.data(), d_sys, n_blocks);
      work.noalias() = sys_u_ * view;
      view = work;
    }
    // Bath splitting phases (diagonal over bath blocks).
    for (Eigen::Index b = 0; b < n_blocks; ++b)
      joint.segment(b * d_sys, d_sys) *= bath_phases_[b];
    // Modulated coupling kicks: commuting two-qubit gates, one per bath qubit.
    for (const auto& term : geometry) {
      const auto& gates = kick_gates_for(term.op);
      const Mat& g = gates[std::size_t(std::abs(tau))];
      apply_two_qubit(joint, Eigen::Matrix4cd(g), term.site, n_sys_ + term.bath);
    }
  }
}

Mat ProtocolEngine::walkout_matrix(const std::vector<CouplingTerm>& geometry) const {
  const Eigen::Index d = Eigen::Index(1) << joint_qubits();
  if (joint_qubits() > 14)
    throw std::invalid_argument("walkout_matrix: dimension too large for dense assembly");
  Mat q(d, d);
  for (Eigen::Index col = 0; col < d; ++col) {
    State e = State::Zero(d);
    e[col] = 1.0;
    apply_walkout(e, geometry);
    q.col(col) = e;
  }
  return q;
}

std::vector<Mat> ProtocolEngine::kraus_set(const std::vector<CouplingTerm>& geometry) const {
  const Eigen::Index d_sys = sys_dim();
  const Eigen::Index n_blocks = Eigen::Index(1) << params_.n_bath;
  std::vector<Mat> kraus(std::size_t(n_blocks), Mat(d_sys, d_sys));
  State joint(d_sys * n_blocks);
  for (Eigen::Index s = 0; s < d_sys; ++s) {
    joint.setZero();
    joint[s] = 1.0;  // bath block 0 = |0...0>
    apply_walkout(joint, geometry);
    for (Eigen::Index b = 0; b < n_blocks; ++b)
      kraus[std::size_t(b)].col(s) = joint.segment(b * d_sys, d_sys);
  }
  return kraus;
}

State ProtocolEngine::floquet_power_state(const State& sys, double power) const {
  Vec tilde = floquet_basis_.adjoint() * sys;
  for (Eigen::Index k = 0; k < tilde.size(); ++k)
    tilde[k] *= std::exp(cxd(0, power * floquet_args_[k]));
  return floquet_basis_ * tilde;
}

Mat ProtocolEngine::floquet_power_conjugate(const Mat& rho, double power) const {
  Mat tilde = floquet_basis_.adjoint() * rho * floquet_basis_;
  for (Eigen::Index r = 0; r < tilde.rows(); ++r)
    for (Eigen::Index c = 0; c < tilde.cols(); ++c)
      tilde(r, c) *= std::exp(cxd(0, power * (floquet_args_[r] - floquet_args_[c])));
  return floquet_basis_ * tilde * floquet_basis_.adjoint();
}

Mat ProtocolEngine::dephase_and_rewind(const Mat& rho) const {
  Mat tilde = floquet_basis_.adjoint() * rho * floquet_basis_;
  const double mean = params_.lambda * params_.m;
  const double p = 1.0 / (1.0 + mean);
  const double rewind_power = -2.0 * params_.rewind_fraction * params_.m;
  for (Eigen::Index r = 0; r < tilde.rows(); ++r) {
    for (Eigen::Index c = 0; c < tilde.cols(); ++c) {
      cxd factor = std::exp(cxd(0, rewind_power * (floquet_args_[r] - floquet_args_[c])));
      if (params_.lambda > 0) {
        // E[z^{M_R}] for geometric M_R and z = t_r * conj(t_c) on the circle.
        const cxd z = floquet_units_[r] * std::conj(floquet_units_[c]);
        factor *= p / (1.0 - (1.0 - p) * z);
      }
      tilde(r, c) *= factor;
    }
  }
  return floquet_basis_ * tilde * floquet_basis_.adjoint();
}

Mat ProtocolEngine::dense_cycle(const Mat& rho, SubstreamRng& geometry_rng) const {
  const auto geometry = realize_geometry(geometry_rng);
  const auto kraus = kraus_set(geometry);
  Mat next = Mat::Zero(rho.rows(), rho.cols());
  for (const Mat& k : kraus) next.noalias() += k * rho * k.adjoint();
  const double drift = std::abs(next.trace().real() - 1.0) + std::abs(next.trace().imag());
  if (drift > kTraceDriftAbort)
    throw std::runtime_error("dense cycle: trace drift " + std::to_string(drift) +
                             " signals numerical breakdown");
  return dephase_and_rewind(next);
}

Mat ProtocolEngine::dense_cycle_sampled(const Mat& rho, SubstreamRng& geometry_rng,
                                        SubstreamRng& depth_rng) const {
  const auto geometry = realize_geometry(geometry_rng);
  const auto kraus = kraus_set(geometry);
  Mat next = Mat::Zero(rho.rows(), rho.cols());
  for (const Mat& k : kraus) next.noalias() += k * rho * k.adjoint();
  const double drift = std::abs(next.trace().real() - 1.0) + std::abs(next.trace().imag());
  if (drift > kTraceDriftAbort)
    throw std::runtime_error("dense cycle: trace drift " + std::to_string(drift) +
                             " signals numerical breakdown");
  const int depth = sample_randomization_depth(params_.lambda, params_.m, depth_rng);
  const double power = depth - 2.0 * params_.rewind_fraction * params_.m;
  return floquet_power_conjugate(next, power);
}

State ProtocolEngine::trajectory_step(const State& sys, TrajectoryStreams& streams) const {
  const Eigen::Index d_sys = sys_dim();
  if (sys.size() != d_sys) throw std::invalid_argument("trajectory_step: state dimension mismatch");
  const auto geometry = realize_geometry(streams.geometry);
  State joint = State::Zero(d_sys << params_.n_bath);
  joint.head(d_sys) = sys;
  apply_walkout(joint, geometry);
  measure_and_reset_block(joint, n_sys_, params_.n_bath, streams.measure);
  State next = joint.head(d_sys);
  const int depth = sample_randomization_depth(params_.lambda, params_.m, streams.reset_depth);
  const double power = depth - 2.0 * params_.rewind_fraction * params_.m;
  if (power != 0.0) next = floquet_power_state(next, power);
  const double norm = next.norm();
  if (std::abs(norm - 1.0) > 1e-10)
    throw std::runtime_error("trajectory_step: norm drift " + std::to_string(std::abs(norm - 1.0)));
  return next / norm;
}

ProtocolEngine::TrajectoryStreams make_trajectory_streams(std::uint64_t master_seed,
                                                          std::uint64_t trajectory) {
  return ProtocolEngine::TrajectoryStreams{
      SubstreamRng(master_seed, trajectory, Stream::geometry),
      SubstreamRng(master_seed, trajectory, Stream::reset_depth),
      SubstreamRng(master_seed, trajectory, Stream::measure),
  };
}

std::function<void(State&)> make_ising_free_step(const QuantumIsing2D& spec,
                                                 double delta, int n_qubits) {
  const auto bonds = ising_bonds(spec);
  const int n_sys = spec.lx * spec.ly;
  if (n_qubits < n_sys)
    throw std::invalid_argument("make_ising_free_step: register smaller than the lattice");
  const double bond_angle = delta * spec.j;
  // Transverse-field phases depend only on the system bits, so the whole
  // exp(+i delta g sum Z) layer is one precomputed diagonal (shared across
  // threads; no trig in the hot loop).
  const Eigen::Index dim = Eigen::Index(1) << n_qubits;
  Vec field_diag(dim);
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    const int ones = __builtin_popcountll(static_cast<unsigned long long>(idx) &
                                          ((1ULL << n_sys) - 1));
    const double phase = delta * spec.g * (n_sys - 2 * ones);
    field_diag[idx] = std::exp(cxd(0, phase));
  }
  return [bonds, bond_angle, field_diag = std::move(field_diag)](State& joint) {
    if (joint.size() != field_diag.size())
      throw std::invalid_argument("ising free step: register size mismatch");
    for (const auto& [p, q] : bonds) apply_xx_rotation(joint, bond_angle, p, q);
    apply_diagonal(joint, field_diag);
  };
}

Mat run_protocol(const Mat& rho0, const ProtocolEngine& engine, int n_cycles,
                 SubstreamRng& geometry_rng, const std::function<void(int, const Mat&)>& hook) {
  if (n_cycles < 1) throw std::invalid_argument("run_protocol: n_cycles must be >= 1");
  Mat rho = rho0;
  for (int cycle = 0; cycle < n_cycles; ++cycle) {
    rho = engine.dense_cycle(rho, geometry_rng);
    if (hook) hook(cycle, rho);
  }
  return rho;
}

Mat steady_state_ensemble(const std::vector<State>& samples) {
  if (samples.empty()) throw std::invalid_argument("steady_state_ensemble: no samples");
  const Eigen::Index d = samples.front().size();
  Mat rho = Mat::Zero(d, d);
  for (const State& psi : samples) {
    if (psi.size() != d) throw std::invalid_argument("steady_state_ensemble: mixed dimensions");
    rho.noalias() += psi * psi.adjoint();
  }
  return rho / double(samples.size());
}

}  // namespace qgibbs
