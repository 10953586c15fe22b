#include "qgibbs/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qgibbs {

namespace pauli {
Mat i2() { return Mat::Identity(2, 2); }
Mat x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Mat y() {
  Mat m(2, 2);
  m << 0, cxd(0, -1), cxd(0, 1), 0;
  return m;
}
Mat z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat embed_one_qubit(const Mat& op, int site, int n_qubits) {
  if (op.rows() != 2 || op.cols() != 2) throw std::invalid_argument("embed_one_qubit: need a 2x2 operator");
  if (site < 0 || site >= n_qubits) throw std::invalid_argument("embed_one_qubit: site out of range");
  // Site 0 is the least significant bit, so it sits rightmost in the kron chain.
  const Eigen::Index lo = Eigen::Index(1) << site;
  const Eigen::Index hi = Eigen::Index(1) << (n_qubits - 1 - site);
  return kron(Mat::Identity(hi, hi), kron(op, Mat::Identity(lo, lo)));
}

bool is_hermitian(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

std::vector<std::pair<int, int>> ising_bonds(const QuantumIsing2D& spec) {
  if (spec.lx < 1 || spec.ly < 1) throw std::invalid_argument("ising_bonds: lattice extents must be >= 1");
  std::vector<std::pair<int, int>> bonds;
  auto site = [&](int x, int y) { return x + spec.lx * y; };
  for (int y = 0; y < spec.ly; ++y) {
    for (int x = 0; x < spec.lx; ++x) {
      if (x + 1 < spec.lx) {
        bonds.emplace_back(site(x, y), site(x + 1, y));
      } else if (spec.periodic && spec.lx > 1) {
        bonds.emplace_back(site(x, y), site(0, y));
      }
      if (y + 1 < spec.ly) {
        bonds.emplace_back(site(x, y), site(x, y + 1));
      } else if (spec.periodic && spec.ly > 1) {
        bonds.emplace_back(site(x, y), site(x, 0));
      }
    }
  }
  return bonds;
}

Mat build_hamiltonian(const SingleSpinZeeman& spec) {
  return -0.5 * spec.g * pauli::z();
}

Mat build_hamiltonian(const QuantumIsing2D& spec) {
  const int n = spec.lx * spec.ly;
  if (n > 16) throw std::invalid_argument("build_hamiltonian: dense Ising lattice limited to 16 sites");
  const Eigen::Index dim = Eigen::Index(1) << n;
  Mat h = Mat::Zero(dim, dim);
  // Both terms are diagonal or XX-type; assemble without full kron products:
  // diagonal Z part first.
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    double zsum = 0;
    for (int q = 0; q < n; ++q) zsum += ((idx >> q) & 1) ? -1.0 : 1.0;
    h(idx, idx) = -spec.g * zsum;
  }
  // X_i X_j flips both bits with amplitude 1.
  for (const auto& [i, j] : ising_bonds(spec)) {
    const Eigen::Index mask = (Eigen::Index(1) << i) | (Eigen::Index(1) << j);
    for (Eigen::Index idx = 0; idx < dim; ++idx) h(idx ^ mask, idx) += -spec.j;
  }
  return h;
}

Mat build_floquet_unitary(const QuantumIsing2D& spec, double delta) {
  if (delta <= 0) throw std::invalid_argument("build_floquet_unitary: delta must be positive");
  const int n = spec.lx * spec.ly;
  const Eigen::Index dim = Eigen::Index(1) << n;
  // XX layer: exp(+i delta J sum XX). Bond terms commute, so exponentiate
  // bond-by-bond: exp(i a XX) = cos(a) I + i sin(a) XX on the bond.
  Mat u = Mat::Identity(dim, dim);
  const double a = delta * spec.j;
  const cxd c = std::cos(a), s = cxd(0, 1) * std::sin(a);
  for (const auto& [i, j] : ising_bonds(spec)) {
    const Eigen::Index mask = (Eigen::Index(1) << i) | (Eigen::Index(1) << j);
    Mat next(dim, dim);
    for (Eigen::Index col = 0; col < dim; ++col)
      for (Eigen::Index row = 0; row < dim; ++row)
        next(row, col) = c * u(row, col) + s * u(row ^ mask, col);
    u = std::move(next);
  }
  // Z layer acts after: exp(+i delta g sum Z) is diagonal.
  for (Eigen::Index row = 0; row < dim; ++row) {
    double zsum = 0;
    for (int q = 0; q < n; ++q) zsum += ((row >> q) & 1) ? -1.0 : 1.0;
    u.row(row) *= std::exp(cxd(0, delta * spec.g * zsum));
  }
  return u;
}

Mat first_order_floquet(const QuantumIsing2D& spec, double delta) {
  QuantumIsing2D xx_only = spec;
  xx_only.g = 0;
  QuantumIsing2D z_only = spec;
  z_only.j = 0;
  const Mat hj = build_hamiltonian(xx_only);
  const Mat hg = build_hamiltonian(z_only);
  const Mat comm = hj * hg - hg * hj;
  return hj + hg + (kI * delta / 2.0) * comm;
}

Mat build_floquet_unitary(const SingleSpinZeeman& spec, double delta) {
  Mat u = Mat::Zero(2, 2);
  u(0, 0) = std::exp(cxd(0, delta * spec.g / 2.0));
  u(1, 1) = std::exp(cxd(0, -delta * spec.g / 2.0));
  return u;
}

Mat evolution_unitary(const Mat& h, double t) {
  const EigenDecomposition eig = eigendecompose(h);
  Vec phases(eig.energies.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k)
    phases[k] = std::exp(cxd(0, -t * eig.energies[k]));
  return eig.basis * phases.asDiagonal() * eig.basis.adjoint();
}

Mat floquet_hamiltonian(const Mat& u, double delta) {
  if (delta <= 0) throw std::invalid_argument("floquet_hamiltonian: delta must be positive");
  if (u.rows() != u.cols()) throw std::invalid_argument("floquet_hamiltonian: square matrix required");
  const Eigen::Index d = u.rows();
  if ((u.adjoint() * u - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("floquet_hamiltonian: input is not unitary");
  const Eigen::ComplexSchur<Mat> schur(u);
  const Mat& t = schur.matrixT();
  double offdiag = 0.0;
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r < c; ++r) offdiag = std::max(offdiag, std::abs(t(r, c)));
  if (offdiag > 1e-9)
    throw std::runtime_error("floquet_hamiltonian: Schur form not diagonal (non-normal input)");
  Mat h = Mat::Zero(d, d);
  const Mat& q = schur.matrixU();
  for (Eigen::Index k = 0; k < d; ++k) {
    // u = e^{i phi} on this eigenvector and u = e^{-i delta E}, so E = -phi/delta.
    const double energy = -std::arg(t(k, k)) / delta;
    h.noalias() += energy * (q.col(k) * q.col(k).adjoint());
  }
  return (h + h.adjoint()) / 2.0;
}

double operator_norm(const Mat& x) {
  if (x.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(x).singularValues().maxCoeff();
}

double trace_norm(const Mat& x) {
  if (x.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(x).singularValues().sum();
}

EigenDecomposition eigendecompose(const Mat& h) {
  if (!is_hermitian(h, 1e-10)) throw std::invalid_argument("eigendecompose: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecompose: eigensolver failed");
  return EigenDecomposition{solver.eigenvalues(), solver.eigenvectors()};
}

Mat to_eigenbasis(const Mat& a, const EigenDecomposition& eig) {
  return eig.basis.adjoint() * a * eig.basis;
}

Mat from_eigenbasis(const Mat& a, const EigenDecomposition& eig) {
  return eig.basis * a * eig.basis.adjoint();
}

RVec gibbs_weights(const RVec& energies, double beta) {
  if (beta < 0) throw std::invalid_argument("gibbs_weights: beta must be nonnegative");
  const double e0 = energies.minCoeff();
  RVec w = (-(energies.array() - e0) * beta).exp();
  return w / w.sum();
}

Mat gibbs_state(const EigenDecomposition& eig, double beta) {
  const RVec w = gibbs_weights(eig.energies, beta);
  return eig.basis * w.asDiagonal() * eig.basis.adjoint();
}

std::vector<BohrTerm> bohr_decompose(const Mat& a, const EigenDecomposition& eig,
                                     double tol) {
  if (tol <= 0) throw std::invalid_argument("bohr_decompose: tol must be positive");
  const Eigen::Index d = eig.energies.size();
  const Mat ae = to_eigenbasis(a, eig);

  struct Entry {
    double omega;
    Eigen::Index row, col;
  };
  std::vector<Entry> entries;
  entries.reserve(d * d);
  for (Eigen::Index b = 0; b < d; ++b)
    for (Eigen::Index r = 0; r < d; ++r)
      entries.push_back({eig.energies(b) - eig.energies(r), r, b});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& l, const Entry& r) { return l.omega < r.omega; });

  std::vector<BohrTerm> terms;
  std::size_t start = 0;
  while (start < entries.size()) {
    std::size_t end = start + 1;
    while (end < entries.size() && entries[end].omega - entries[end - 1].omega <= tol) ++end;
    BohrTerm term;
    term.component = Mat::Zero(d, d);
    double omega_sum = 0;
    for (std::size_t k = start; k < end; ++k) {
      const Entry& e = entries[k];
      term.component(e.row, e.col) = ae(e.row, e.col);
      omega_sum += e.omega;
    }
    term.omega = omega_sum / double(end - start);
    terms.push_back(std::move(term));
    start = end;
  }
  return terms;
}

}  // namespace qgibbs
