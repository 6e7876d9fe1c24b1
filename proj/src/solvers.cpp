#include "sxlmd/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sxlmd {

SolveResult cg_solve(const ModelSpec& model, const Vec& r, const Vec& x0,
                     double tol, int max_iter) {
  if (tol <= 0.0) throw std::invalid_argument("cg_solve: tol must be > 0");
  if (model.has_extra_q)
    throw std::invalid_argument(
        "cg_solve requires a purely quadratic latent energy");
  const Mat a = model.matrix_a(r);
  const Vec b = model.vector_b(r);

  SolveResult out;
  out.x = x0;
  Vec res = b - a * x0;
  out.matvec_count = 1;
  out.residual_norm = res.norm();
  if (out.residual_norm <= tol) {
    out.converged = true;
    return out;
  }

  Vec dir = res;
  Vec a_dir(b.size());
  double res_sq = res.squaredNorm();
  for (int i = 1; i <= max_iter; ++i) {
    a_dir.noalias() = a * dir;
    ++out.matvec_count;
    out.iterations = i;
    const double step = res_sq / dir.dot(a_dir);
    out.x += step * dir;
    res -= step * a_dir;
    const double res_sq_next = res.squaredNorm();
    out.residual_norm = std::sqrt(res_sq_next);
    if (out.residual_norm <= tol) {
      out.converged = true;
      return out;
    }
    dir = res + (res_sq_next / res_sq) * dir;
    res_sq = res_sq_next;
  }
  return out;  // converged stays false; x holds the last iterate
}

SolveResult anderson_solve(const ModelSpec& model, const Vec& r, const Vec& x0,
                           double tol, double alpha, int depth, int max_iter) {
  if (tol <= 0.0)
    throw std::invalid_argument("anderson_solve: tol must be > 0");
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("anderson_solve: alpha must be in (0,1]");
  if (depth < 0) throw std::invalid_argument("anderson_solve: depth < 0");

  const int n = model.d_x;
  SolveResult out;
  out.x = x0;

  // Residual of the fixed-point map g(x) = x - alpha*grad Q is q = -alpha*f.
  // The mixing coefficients only depend on q up to the -alpha factor, so the
  // least squares runs directly on stored values of f.
  Vec f = grad_q_x(model, r, out.x);
  out.matvec_count = 1;
  out.residual_norm = f.norm();

  std::vector<Vec> x_hist{out.x};
  std::vector<Vec> f_hist{f};

  for (int i = 1; out.residual_norm > tol && i <= max_iter; ++i) {
    const int m = std::min<int>(depth, static_cast<int>(x_hist.size()) - 1);
    Vec x_next;
    if (m == 0) {
      x_next = out.x - alpha * f;
    } else {
      Mat df(n, m);
      Mat dx(n, m);
      const int last = static_cast<int>(x_hist.size()) - 1;
      for (int j = 0; j < m; ++j) {
        const int idx = last - m + j;
        df.col(j) = f_hist[idx + 1] - f_hist[idx];
        dx.col(j) = x_hist[idx + 1] - x_hist[idx];
      }
      // Normal equations with scale-relative Tikhonov damping; a damped or
      // truncated solve never aborts the iteration.
      Mat gram = df.transpose() * df;
      const double damp = 1e-12 * std::max(gram.trace(), 1e-300);
      gram.diagonal().array() += damp;
      Vec theta = gram.ldlt().solve(df.transpose() * f);
      if (!theta.allFinite()) theta.setZero();
      x_next = out.x - dx * theta - alpha * (f - df * theta);
    }

    out.x = x_next;
    f = grad_q_x(model, r, out.x);
    ++out.matvec_count;
    out.iterations = i;
    out.residual_norm = f.norm();

    x_hist.push_back(out.x);
    f_hist.push_back(f);
    if (static_cast<int>(x_hist.size()) > depth + 1) {
      x_hist.erase(x_hist.begin());
      f_hist.erase(f_hist.begin());
    }
  }
  out.converged = out.residual_norm <= tol;
  return out;
}

}  // namespace sxlmd
