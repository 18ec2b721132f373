#pragma once

// Packed state vectors, finite-difference Jacobian products, the per-harmonic
// block preconditioner and restarted GMRES.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <limits>
#include <string>
#include <vector>

#include "rmhd/errors.hpp"
#include "rmhd/state.hpp"

namespace rmhd {

using Vec = Eigen::VectorXd;
using ResidualFn = std::function<Vec(const Vec&)>;
using LinearOp = std::function<Vec(const Vec&)>;

/// ((var * 3 + h) * NR + i) * NZ + j over the evolved variables.
struct FlatLayout {
  int nvars = kNumVars;
  int NR = 0, NZ = 0;

  FlatLayout() = default;
  FlatLayout(const Grid& g, const ModelFlags& f) : nvars(f.num_vars()), NR(g.NR), NZ(g.NZ) {}
  FlatLayout(int nv, int nr, int nz) : nvars(nv), NR(nr), NZ(nz) {}

  std::size_t plane() const { return std::size_t(NR) * NZ; }
  std::size_t size() const { return std::size_t(nvars) * 3 * plane(); }
  std::size_t index(int var, int h, int i, int j) const {
    return ((std::size_t(var) * 3 + h) * NR + i) * NZ + j;
  }
};

inline Vec pack(const State& s, const FlatLayout& L) {
  Vec x(L.size());
  const std::size_t P = L.plane();
  for (int v = 0; v < L.nvars; ++v)
    for (int h = 0; h < 3; ++h) {
      const auto& c = s[v].comp(h);
      std::copy(c.begin(), c.end(), x.data() + (std::size_t(v) * 3 + h) * P);
    }
  return x;
}

/// Variables beyond nvars come back as zero fields.
inline State unpack(const Vec& x, const Grid& g, const FlatLayout& L) {
  if (std::size_t(x.size()) != L.size()) throw std::invalid_argument("unpack: length mismatch");
  State s(g);
  const std::size_t P = L.plane();
  for (int v = 0; v < L.nvars; ++v)
    for (int h = 0; h < 3; ++h) {
      auto& c = s[v].comp(h);
      const double* src = x.data() + (std::size_t(v) * 3 + h) * P;
      std::copy(src, src + P, c.begin());
    }
  return s;
}

inline bool all_finite(const Vec& x) { return x.allFinite(); }

/// (G(U + eps v) - G(U)) / eps, eps = sqrt(machine eps) (1 + |U|) / |v|.
inline Vec jacobian_vector_product(const ResidualFn& G, const Vec& U, const Vec& v, const Vec* GU = nullptr) {
  const double nv = v.norm();
  if (nv == 0.0) return Vec::Zero(U.size());
  if (!std::isfinite(nv)) throw NumericalError("jacobian-vector product: direction not finite");
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + U.norm()) / nv;
  const Vec g1 = G(U + eps * v);
  const Vec g0 = GU ? *GU : G(U);
  if (!g1.allFinite() || !g0.allFinite())
    throw NumericalError("jacobian-vector product: residual not finite");
  return (g1 - g0) / eps;
}

// ---------------- block preconditioner ----------------

/// Harmonic groups: mode 0, and (cos, sin) together.
class BlockPreconditioner {
 public:
  struct Options {
    int stencil_radius = 2;  // residual at a node reads unknowns up to this many nodes away
    double drop_tol = 0.0;   // entries below drop_tol * max|block| are discarded
  };

  BlockPreconditioner() = default;

  /// Probes G around U with colored finite differences, one harmonic group at a time.
  void assemble(const ResidualFn& G, const Vec& U, const FlatLayout& L, long stamp, const Options& opt,
                const Vec* GU = nullptr) {
    L_ = L;
    stamp_ = stamp;
    ready_ = false;
    const Vec g0 = GU ? *GU : G(U);
    if (!g0.allFinite()) throw NumericalError("preconditioner: residual not finite");
    const int period = 2 * opt.stencil_radius + 1;
    const double root = std::sqrt(std::numeric_limits<double>::epsilon());
    probes_ = 0;
    for (int grp = 0; grp < 2; ++grp) {
      const std::vector<int> hs = grp == 0 ? std::vector<int>{0} : std::vector<int>{1, 2};
      const int nh = int(hs.size());
      const std::size_t n = std::size_t(L.nvars) * nh * L.plane();
      std::vector<Eigen::Triplet<double>> trip;
      double amax = 0;
      std::vector<Eigen::Triplet<double>> raw;
      for (int v = 0; v < L.nvars; ++v)
        for (int hi = 0; hi < nh; ++hi)
          for (int ci = 0; ci < period; ++ci)
            for (int cj = 0; cj < period; ++cj) {
              Vec Up = U;
              std::vector<std::pair<std::size_t, double>> cols;  // global index, eps
              for (int i = ci; i < L.NR; i += period)
                for (int j = cj; j < L.NZ; j += period) {
                  const std::size_t k = L.index(v, hs[hi], i, j);
                  const double e = root * std::max(1.0, std::abs(U[k]));
                  Up[k] += e;
                  cols.push_back({k, e});
                }
              if (cols.empty()) continue;
              const Vec g1 = G(Up);
              ++probes_;
              if (!g1.allFinite()) throw NumericalError("preconditioner: probe residual not finite");
              const Vec dg = g1 - g0;
              for (const auto& [k, e] : cols) {
                const int i = int((k / L.NZ) % L.NR), j = int(k % L.NZ);
                const std::size_t col = local(v, hi, i, j, nh);
                for (int rv = 0; rv < L.nvars; ++rv)
                  for (int rh = 0; rh < nh; ++rh)
                    for (int di = -opt.stencil_radius; di <= opt.stencil_radius; ++di)
                      for (int dj = -opt.stencil_radius; dj <= opt.stencil_radius; ++dj) {
                        const int ri = i + di, rj = j + dj;
                        if (ri < 0 || rj < 0 || ri >= L.NR || rj >= L.NZ) continue;
                        const double val = dg[L.index(rv, hs[rh], ri, rj)] / e;
                        if (val == 0.0) continue;
                        amax = std::max(amax, std::abs(val));
                        raw.emplace_back(int(local(rv, rh, ri, rj, nh)), int(col), val);
                      }
              }
            }
      for (const auto& t : raw)
        if (std::abs(t.value()) > opt.drop_tol * amax) trip.push_back(t);
      Eigen::SparseMatrix<double> A{Eigen::Index(n), Eigen::Index(n)};
      A.setFromTriplets(trip.begin(), trip.end());
      A.makeCompressed();
      blocks_[grp] = A;
      lu_[grp] = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>>();
      lu_[grp]->analyzePattern(A);
      lu_[grp]->factorize(A);
      if (lu_[grp]->info() != Eigen::Success)
        throw SingularBlockError(grp == 0 ? "n=0" : "n=n_p", lu_[grp]->lastErrorMessage());
    }
    ready_ = true;
  }

  void assemble(const ResidualFn& G, const Vec& U, const FlatLayout& L, long stamp = 0) {
    assemble(G, U, L, stamp, Options{});
  }

  /// y = M^{-1} b, blockwise.
  Vec apply(const Vec& b) const {
    if (!ready_) throw std::logic_error("preconditioner applied before assembly");
    Vec y(b.size());
    for (int grp = 0; grp < 2; ++grp) {
      const Vec bg = gather(b, grp);
      const Vec yg = lu_[grp]->solve(bg);
      scatter(yg, grp, y);
    }
    return y;
  }

  /// M x, blockwise (cross-harmonic coupling dropped).
  Vec multiply(const Vec& x) const {
    Vec y(x.size());
    for (int grp = 0; grp < 2; ++grp) scatter(blocks_[grp] * gather(x, grp), grp, y);
    return y;
  }

  bool ready() const { return ready_; }
  long stamp() const { return stamp_; }
  int probes() const { return probes_; }
  const Eigen::SparseMatrix<double>& block(int grp) const { return blocks_[grp]; }

  /// Position of (var, harmonic, i, j) inside its group's block.
  std::size_t block_index(int var, int h, int i, int j) const {
    const int nh = h == 0 ? 1 : 2;
    return local(var, h == 0 ? 0 : h - 1, i, j, nh);
  }

 private:
  FlatLayout L_;
  long stamp_ = -1;
  bool ready_ = false;
  int probes_ = 0;
  Eigen::SparseMatrix<double> blocks_[2];
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_[2];

  std::size_t local(int v, int hi, int i, int j, int nh) const {
    return ((std::size_t(v) * nh + hi) * L_.NR + i) * L_.NZ + j;
  }
  Vec gather(const Vec& b, int grp) const {
    const int nh = grp == 0 ? 1 : 2;
    const std::size_t P = L_.plane();
    Vec out(Eigen::Index(std::size_t(L_.nvars) * nh * P));
    for (int v = 0; v < L_.nvars; ++v)
      for (int hi = 0; hi < nh; ++hi)
        out.segment(Eigen::Index((std::size_t(v) * nh + hi) * P), Eigen::Index(P)) =
            b.segment(Eigen::Index(L_.index(v, grp == 0 ? 0 : 1 + hi, 0, 0)), Eigen::Index(P));
    return out;
  }
  void scatter(const Vec& yg, int grp, Vec& y) const {
    const int nh = grp == 0 ? 1 : 2;
    const std::size_t P = L_.plane();
    for (int v = 0; v < L_.nvars; ++v)
      for (int hi = 0; hi < nh; ++hi)
        y.segment(Eigen::Index(L_.index(v, grp == 0 ? 0 : 1 + hi, 0, 0)), Eigen::Index(P)) =
            yg.segment(Eigen::Index((std::size_t(v) * nh + hi) * P), Eigen::Index(P));
  }
};

// ---------------- GMRES ----------------

struct GmresResult {
  Vec x;
  int iters = 0;            // inner iterations over all cycles
  double residual = 0;      // |M^{-1}(b - A x)| / |M^{-1} b|
  bool converged = false;
  std::vector<double> history;  // relative preconditioned residual after each inner step
};

/// Left-preconditioned restarted GMRES (modified Gram-Schmidt, Givens rotations).
/// `precond` may be empty for the identity.
inline GmresResult gmres(const LinearOp& A, const LinearOp& precond, const Vec& b, double tol,
                         int restart = 200, int maxit = 500, const Vec* x0 = nullptr) {
  if (!(tol > 0)) throw std::invalid_argument("gmres: tol must be > 0");
  if (restart < 1) throw std::invalid_argument("gmres: restart must be >= 1");
  auto M = [&](const Vec& v) { return precond ? precond(v) : v; };
  GmresResult out;
  const Eigen::Index n = b.size();
  out.x = x0 ? *x0 : Vec::Zero(n);
  const Vec Mb = M(b);
  const double bnorm = Mb.norm();
  if (bnorm == 0.0) {
    out.x.setZero();
    out.converged = true;
    return out;
  }
  Vec r = M(b - A(out.x));
  double beta = r.norm();
  out.residual = beta / bnorm;
  if (out.residual <= tol) {
    out.converged = true;
    return out;
  }
  while (out.iters < maxit) {
    const int m = std::min(restart, maxit - out.iters);
    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Vec cs = Vec::Zero(m), sn = Vec::Zero(m), g = Vec::Zero(m + 1);
    V.col(0) = r / beta;
    g[0] = beta;
    int k = 0;
    for (; k < m; ++k) {
      Vec w = M(A(V.col(k)));
      if (!w.allFinite()) throw NumericalError("gmres: operator returned non-finite values");
      for (int i = 0; i <= k; ++i) {
        H(i, k) = V.col(i).dot(w);
        w -= H(i, k) * V.col(i);
      }
      H(k + 1, k) = w.norm();
      if (H(k + 1, k) > 0) V.col(k + 1) = w / H(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double d = std::hypot(H(k, k), H(k + 1, k));
      cs[k] = d == 0 ? 1.0 : H(k, k) / d;
      sn[k] = d == 0 ? 0.0 : H(k + 1, k) / d;
      H(k, k) = d;
      H(k + 1, k) = 0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++out.iters;
      out.history.push_back(std::abs(g[k + 1]) / bnorm);
      if (std::abs(g[k + 1]) / bnorm <= tol || H(k, k) == 0.0) {
        ++k;
        break;
      }
    }
    // back substitution on the k x k triangle
    Vec y = Vec::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int l = i + 1; l < k; ++l) s -= H(i, l) * y[l];
      y[i] = H(i, i) != 0 ? s / H(i, i) : 0.0;
    }
    out.x += V.leftCols(k) * y;
    // the recurrence residual decides; with a finite-difference operator the
    // recomputed one sits at the differencing noise floor
    const double est = std::abs(g[k]) / bnorm;
    if (est <= tol) {
      out.residual = est;
      out.converged = true;
      return out;
    }
    r = M(b - A(out.x));
    beta = r.norm();
    out.residual = beta / bnorm;
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    if (beta == 0.0) break;
  }
  return out;
}

/// Refactorize when there is no factorization yet or the last two Newton steps
/// took more than 50 GMRES iterations together.
inline bool refactor_policy(const std::vector<int>& window, bool have_factorization = true,
                            int threshold = 50) {
  if (!have_factorization || window.empty()) return true;
  int sum = 0;
  const std::size_t from = window.size() > 2 ? window.size() - 2 : 0;
  for (std::size_t k = from; k < window.size(); ++k) sum += window[k];
  return sum > threshold;
}

}  // namespace rmhd
