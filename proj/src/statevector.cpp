#include "qgibbs/statevector.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace qgibbs {

void apply_one_qubit(State& psi, const Eigen::Matrix2cd& u, int qubit) {
  const std::size_t dim = std::size_t(psi.size());
  const std::size_t bit = std::size_t(1) << qubit;
  for (std::size_t base = 0; base < dim; ++base) {
    if (base & bit) continue;
    const cxd a0 = psi[Eigen::Index(base)];
    const cxd a1 = psi[Eigen::Index(base | bit)];
    psi[Eigen::Index(base)] = u(0, 0) * a0 + u(0, 1) * a1;
    psi[Eigen::Index(base | bit)] = u(1, 0) * a0 + u(1, 1) * a1;
  }
}

void apply_two_qubit(State& psi, const Eigen::Matrix4cd& u, int q_low, int q_high) {
  assert(q_low != q_high);
  // One branchless loop over compressed indices: the two target bits are
  // re-inserted arithmetically, so the quad enumeration never degenerates when
  // a target bit is low (tiny runs) or high (tiny outer blocks).
  const std::size_t dim = std::size_t(psi.size());
  const int lo = q_low < q_high ? q_low : q_high;
  const int hi = q_low < q_high ? q_high : q_low;
  const std::size_t blo = std::size_t(1) << lo;
  const std::size_t bhi = std::size_t(1) << hi;
  const std::size_t mask_lo = blo - 1;         // base bits below lo
  const std::size_t mask_mid = bhi - 2 * blo;  // base bits lo+1 .. hi-1
  const std::size_t mask_hi = ~(2 * bhi - 1);  // base bits above hi
  // Map the (q_low, q_high) basis of u onto the (lo, hi) bit offsets: when the
  // bits swap order, basis states |b_high b_low> permute as 1 <-> 2.
  const bool swapped = q_low > q_high;
  Eigen::Matrix4cd m = u;
  if (swapped) {
    const Eigen::Vector4i perm{0, 2, 1, 3};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = u(perm[r], perm[c]);
  }
  const cxd m00 = m(0, 0), m01 = m(0, 1), m02 = m(0, 2), m03 = m(0, 3);
  const cxd m10 = m(1, 0), m11 = m(1, 1), m12 = m(1, 2), m13 = m(1, 3);
  const cxd m20 = m(2, 0), m21 = m(2, 1), m22 = m(2, 2), m23 = m(2, 3);
  const cxd m30 = m(3, 0), m31 = m(3, 1), m32 = m(3, 2), m33 = m(3, 3);
  cxd* data = psi.data();
  for (std::size_t idx = 0; idx < dim / 4; ++idx) {
    const std::size_t base =
        (idx & mask_lo) | ((idx << 1) & mask_mid) | ((idx << 2) & mask_hi);
    cxd* p0 = data + base;
    const cxd a0 = p0[0], a1 = p0[blo], a2 = p0[bhi], a3 = p0[blo + bhi];
    p0[0] = m00 * a0 + m01 * a1 + m02 * a2 + m03 * a3;
    p0[blo] = m10 * a0 + m11 * a1 + m12 * a2 + m13 * a3;
    p0[bhi] = m20 * a0 + m21 * a1 + m22 * a2 + m23 * a3;
    p0[blo + bhi] = m30 * a0 + m31 * a1 + m32 * a2 + m33 * a3;
  }
}

void apply_diagonal(State& psi, const Vec& diag) {
  psi.array() *= diag.array();
}

void apply_xx_rotation(State& psi, double angle, int a, int b) {
  // exp(i t XX) on the pair: |00>,|11> couple to each other, as do |01>,|10>.
  // Branchless loop over compressed indices with the two target bits
  // re-inserted arithmetically (no degenerate runs for low target bits).
  const cxd c(std::cos(angle), 0.0), is(0.0, std::sin(angle));
  const std::size_t dim = std::size_t(psi.size());
  const int lo = a < b ? a : b, hi = a < b ? b : a;
  const std::size_t blo = std::size_t(1) << lo;
  const std::size_t bhi = std::size_t(1) << hi;
  const std::size_t mask_lo = blo - 1;
  const std::size_t mask_mid = bhi - 2 * blo;
  const std::size_t mask_hi = ~(2 * bhi - 1);
  cxd* data = psi.data();
  for (std::size_t idx = 0; idx < dim / 4; ++idx) {
    const std::size_t base =
        (idx & mask_lo) | ((idx << 1) & mask_mid) | ((idx << 2) & mask_hi);
    cxd* p = data + base;
    const cxd x0 = p[0], y0 = p[blo + bhi];
    p[0] = c * x0 + is * y0;
    p[blo + bhi] = is * x0 + c * y0;
    const cxd x1 = p[blo], y1 = p[bhi];
    p[blo] = c * x1 + is * y1;
    p[bhi] = is * x1 + c * y1;
  }
}

void apply_z_rotations(State& psi, const std::vector<double>& angles) {
  const std::size_t dim = std::size_t(psi.size());
  for (std::size_t idx = 0; idx < dim; ++idx) {
    double phase = 0;
    for (std::size_t q = 0; q < angles.size(); ++q)
      phase += ((idx >> q) & 1) ? -angles[q] : angles[q];
    psi[Eigen::Index(idx)] *= cxd(std::cos(phase), std::sin(phase));
  }
}

double block_zero_probability(const State& psi, int first, int count) {
  const std::size_t dim = std::size_t(psi.size());
  const std::size_t mask = ((std::size_t(1) << count) - 1) << first;
  double p = 0;
  for (std::size_t idx = 0; idx < dim; ++idx)
    if ((idx & mask) == 0) p += std::norm(psi[Eigen::Index(idx)]);
  return p;
}

std::uint64_t measure_and_reset_block(State& psi, int first, int count, SubstreamRng& rng) {
  const std::size_t dim = std::size_t(psi.size());
  const std::size_t n_outcomes = std::size_t(1) << count;
  const std::size_t low_mask = (std::size_t(1) << first) - 1;

  std::vector<double> probs(n_outcomes, 0.0);
  for (std::size_t idx = 0; idx < dim; ++idx)
    probs[(idx >> first) & (n_outcomes - 1)] += std::norm(psi[Eigen::Index(idx)]);

  const double u = rng.next_double();
  double acc = 0;
  std::size_t outcome = n_outcomes - 1;
  for (std::size_t b = 0; b < n_outcomes; ++b) {
    acc += probs[b];
    if (u < acc) { outcome = b; break; }
  }
  const double p = probs[outcome];
  if (p <= 0) throw std::runtime_error("measure_and_reset_block: sampled zero-probability outcome");

  // Collapse onto the outcome block, move it to block zero, renormalize.
  const double inv = 1.0 / std::sqrt(p);
  State next = State::Zero(psi.size());
  const std::size_t block = outcome << first;
  for (std::size_t rest_hi = 0; rest_hi < (dim >> (first + count)); ++rest_hi) {
    for (std::size_t rest_lo = 0; rest_lo <= low_mask; ++rest_lo) {
      const std::size_t src = (rest_hi << (first + count)) | block | rest_lo;
      const std::size_t dst = (rest_hi << (first + count)) | rest_lo;
      next[Eigen::Index(dst)] = psi[Eigen::Index(src)] * inv;
    }
  }
  psi.swap(next);
  return outcome;
}

cxd expval_low_qubits(const State& psi, const Mat& op, int n_low) {
  const std::size_t d_low = std::size_t(1) << n_low;
  assert(op.rows() == Eigen::Index(d_low));
  const std::size_t n_blocks = std::size_t(psi.size()) / d_low;
  cxd out = 0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const auto seg = psi.segment(Eigen::Index(b * d_low), Eigen::Index(d_low));
    out += seg.dot(op * seg);  // Eigen dot conjugates the left argument
  }
  return out;
}

double h_squared_expval_low_qubits(const State& psi, const Mat& op, int n_low) {
  const std::size_t d_low = std::size_t(1) << n_low;
  const std::size_t n_blocks = std::size_t(psi.size()) / d_low;
  double out = 0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const auto seg = psi.segment(Eigen::Index(b * d_low), Eigen::Index(d_low));
    out += (op * seg).squaredNorm();
  }
  return out;
}

Mat reduced_density_low_qubits(const State& psi, int n_low) {
  const std::size_t d_low = std::size_t(1) << n_low;
  const std::size_t n_blocks = std::size_t(psi.size()) / d_low;
  Mat rho = Mat::Zero(Eigen::Index(d_low), Eigen::Index(d_low));
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const auto seg = psi.segment(Eigen::Index(b * d_low), Eigen::Index(d_low));
    rho.noalias() += seg * seg.adjoint();
  }
  return rho;
}

State basis_state(int n_qubits, std::uint64_t index) {
  State psi = State::Zero(Eigen::Index(std::size_t(1) << n_qubits));
  psi[Eigen::Index(index)] = 1.0;
  return psi;
}

}  // namespace qgibbs
