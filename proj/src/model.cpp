#include "sxlmd/model.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

namespace sxlmd {

namespace {

void check_dims(const ModelSpec& model, const Vec& r, const Vec* x = nullptr) {
  if (r.size() != model.d_r)
    throw std::invalid_argument("r has length " + std::to_string(r.size()) +
                                ", model expects " + std::to_string(model.d_r));
  if (x && x->size() != model.d_x)
    throw std::invalid_argument("x has length " + std::to_string(x->size()) +
                                ", model expects " + std::to_string(model.d_x));
}

Vec solve_spd(const Mat& a, const Vec& rhs) {
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("A(r) is not positive definite");
  return llt.solve(rhs);
}

// ============================================================
// Sobol sampling for the kappa estimate
// ============================================================

// Direction numbers for the first three Sobol dimensions; enough for the
// builtin models (d_r <= 3).  Dimension 1 is the van der Corput sequence.
struct SobolDim {
  unsigned s;
  unsigned a;
  std::vector<std::uint32_t> m;
};

std::vector<std::vector<std::uint32_t>> sobol_directions(int dims, int bits) {
  static const std::vector<SobolDim> table = {
      {1, 0, {1}},     // dimension 2
      {2, 1, {1, 3}},  // dimension 3
  };
  std::vector<std::vector<std::uint32_t>> v(dims);
  for (int d = 0; d < dims; ++d) {
    v[d].resize(bits + 1);
    if (d == 0) {
      for (int j = 1; j <= bits; ++j) v[0][j] = 1u << (32 - j);
      continue;
    }
    const SobolDim& dim = table.at(d - 1);
    std::vector<std::uint32_t> m = dim.m;
    m.resize(bits + 1);
    for (unsigned j = dim.s; j < static_cast<unsigned>(bits); ++j) {
      std::uint32_t mj = m[j - dim.s] ^ (m[j - dim.s] << dim.s);
      for (unsigned i = 1; i < dim.s; ++i)
        if ((dim.a >> (dim.s - 1 - i)) & 1u) mj ^= m[j - i] << i;
      m[j] = mj;
    }
    // shift m_j (stored at index j-1) into 32-bit direction integers
    for (int j = 1; j <= bits; ++j) v[d][j] = m[j - 1] << (32 - j);
  }
  return v;
}

// First n points of the Sobol sequence in [0,1)^dims (Gray-code order).
std::vector<Vec> sobol_points(int dims, int n) {
  const int bits = 31;
  auto v = sobol_directions(dims, bits);
  std::vector<std::uint32_t> state(dims, 0);
  std::vector<Vec> pts;
  pts.reserve(n);
  Vec u(dims);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dims; ++d)
      u[d] = static_cast<double>(state[d]) * 0x1.0p-32;
    pts.push_back(u);
    std::uint32_t idx = i + 1;
    int c = 1;
    while ((idx & 1u) == 0) {
      idx >>= 1;
      ++c;
    }
    for (int d = 0; d < dims; ++d) state[d] ^= v[d][c];
  }
  return pts;
}

// Numeric kappa: minimum eigenvalue of A(r) over a Sobol sample of
// [-2,2]^{d_r}.  An estimate, not a proof; adequate for spectral-gap
// formulas and sanity checks.
double estimate_kappa(const std::function<Mat(const Vec&)>& matrix_a, int d_r) {
  double kappa = std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  for (const Vec& u : sobol_points(d_r, 10000)) {
    Vec r = 4.0 * u;
    r.array() -= 2.0;
    eig.compute(matrix_a(r), Eigen::EigenvaluesOnly);
    kappa = std::min(kappa, eig.eigenvalues().minCoeff());
  }
  return kappa;
}

double cached_kappa(const std::string& key,
                    const std::function<Mat(const Vec&)>& matrix_a, int d_r) {
  static std::map<std::string, double> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, estimate_kappa(matrix_a, d_r)).first;
  return it->second;
}

// ============================================================
// Builtin models
// ============================================================

ModelSpec make_model_a() {
  ModelSpec m;
  m.name = "model_a";
  m.d_r = 2;
  m.d_x = 2;
  m.potential = [](const Vec& r) { return r.squaredNorm(); };
  m.force = [](const Vec& r) { return Vec(-2.0 * r); };
  m.matrix_a = [](const Vec& r) {
    const double s = r.squaredNorm();
    Mat a(2, 2);
    a << 2.0 + s, s, s, 1.0 + s;
    return a;
  };
  m.vector_b = [](const Vec& r) {
    Vec b(2);
    b << std::sin(r[0] + r[1]), std::cos(r[0] - 2.0 * r[1]);
    return b;
  };
  m.da_dr = [](const Vec& r, int k) {
    return Mat(2.0 * r[k] * Mat::Ones(2, 2));
  };
  m.db_dr = [](const Vec& r, int k) {
    Vec db(2);
    const double c1 = std::cos(r[0] + r[1]);
    const double s2 = std::sin(r[0] - 2.0 * r[1]);
    if (k == 0)
      db << c1, -s2;
    else
      db << c1, 2.0 * s2;
    return db;
  };
  m.kappa = cached_kappa(m.name, m.matrix_a, m.d_r);
  return m;
}

// Shared r-dependence of models b and c.  b_k keeps r_2 in both slots as
// published; the r1 variant moves the first slot to r_1.
ModelSpec make_model_bc(bool with_extra, bool variant_r1) {
  ModelSpec m;
  m.name = with_extra ? "model_c" : "model_b";
  // The variant must be visible in the name: reference caches key on it.
  if (variant_r1) m.name += "_r1";
  m.d_r = 3;
  m.d_x = 20;
  m.potential = [](const Vec& r) {
    return 0.25 * std::pow(r.squaredNorm(), 2) +
           0.01 * std::cos(400.0 * r.sum());
  };
  m.force = [](const Vec& r) {
    const double s = r.squaredNorm();
    Vec f = -s * r;
    f.array() += 4.0 * std::sin(400.0 * r.sum());
    return f;
  };
  m.matrix_a = [](const Vec& r) {
    const double s = r.squaredNorm();
    Mat a = Mat::Zero(20, 20);
    for (int k = 0; k < 20; ++k) {
      a(k, k) = 2.0 + s;
      if (k + 1 < 20) a(k, k + 1) = a(k + 1, k) = -1.0;
      if (k + 2 < 20) a(k, k + 2) = a(k + 2, k) = 0.5 * (1.0 - s);
    }
    return a;
  };
  m.da_dr = [](const Vec& r, int k) {
    Mat da = Mat::Zero(20, 20);
    for (int j = 0; j < 20; ++j) {
      da(j, j) = 2.0 * r[k];
      if (j + 2 < 20) da(j, j + 2) = da(j + 2, j) = -r[k];
    }
    return da;
  };
  m.vector_b = [variant_r1](const Vec& r) {
    Vec b(20);
    for (int j = 0; j < 20; ++j) {
      const double k = j + 1;
      const double first = variant_r1 ? r[0] : r[1];
      b[j] = std::sin(k * first / 10.0 + (1.0 - k / 20.0) * r[1] + r[2]);
    }
    return b;
  };
  m.db_dr = [variant_r1](const Vec& r, int k) {
    Vec db(20);
    for (int j = 0; j < 20; ++j) {
      const double kk = j + 1;
      const double first = variant_r1 ? r[0] : r[1];
      const double c =
          std::cos(kk * first / 10.0 + (1.0 - kk / 20.0) * r[1] + r[2]);
      double slope = 0.0;
      if (k == 0)
        slope = variant_r1 ? kk / 10.0 : 0.0;
      else if (k == 1)
        slope = (variant_r1 ? 0.0 : kk / 10.0) + 1.0 - kk / 20.0;
      else
        slope = 1.0;
      db[j] = c * slope;
    }
    return db;
  };
  if (with_extra) {
    // E(x) = 0.15 (|x|^2 + 1/2 sum_k sin 2x_k); Hessian diag 0.3(1-sin 2x_k)
    // is non-negative, so the x-Hessian of Q dominates A(r) and the kappa of
    // the quadratic part remains valid.
    m.has_extra_q = true;
    m.extra_q = [](const Vec& x) {
      double s = 0.0;
      for (int k = 0; k < x.size(); ++k) s += std::sin(2.0 * x[k]);
      return 0.15 * (x.squaredNorm() + 0.5 * s);
    };
    m.extra_q_grad = [](const Vec& x) {
      Vec g(x.size());
      for (int k = 0; k < x.size(); ++k)
        g[k] = 0.15 * (2.0 * x[k] + std::cos(2.0 * x[k]));
      return g;
    };
    m.extra_q_hess_diag = [](const Vec& x) {
      Vec h(x.size());
      for (int k = 0; k < x.size(); ++k)
        h[k] = 0.3 * (1.0 - std::sin(2.0 * x[k]));
      return h;
    };
  }
  // A(r) is shared between models b and c, so the estimate is cached under
  // one key; the extra term only adds non-negative curvature.
  m.kappa = cached_kappa("model_b", m.matrix_a, m.d_r);
  return m;
}

}  // namespace

Vec grad_q_x(const ModelSpec& model, const Vec& r, const Vec& x) {
  check_dims(model, r, &x);
  Vec g = model.matrix_a(r) * x - model.vector_b(r);
  if (model.has_extra_q) g += model.extra_q_grad(x);
  return g;
}

Vec h_force(const ModelSpec& model, const Vec& r, const Vec& x) {
  check_dims(model, r, &x);
  Vec h = model.force(r);
  for (int k = 0; k < model.d_r; ++k) {
    const Mat da = model.da_dr(r, k);
    h[k] += -0.5 * x.dot(da * x) + model.db_dr(r, k).dot(x);
  }
  return h;
}

Vec hbar_force(const ModelSpec& model, const Vec& r) {
  check_dims(model, r);
  const Vec u = solve_spd(model.matrix_a(r), model.vector_b(r));
  Vec h = model.force(r);
  for (int k = 0; k < model.d_r; ++k) {
    const Mat da = model.da_dr(r, k);
    h[k] += -0.5 * u.dot(da * u) + model.db_dr(r, k).dot(u);
  }
  return h;
}

Vec g_vector(const ModelSpec& model, const Vec& r) {
  check_dims(model, r);
  Eigen::LLT<Mat> llt(model.matrix_a(r));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("A(r) is not positive definite");
  const Mat a_inv = llt.solve(Mat::Identity(model.d_x, model.d_x));
  Vec g(model.d_r);
  for (int k = 0; k < model.d_r; ++k)
    g[k] = 0.5 * (model.da_dr(r, k) * a_inv).trace();
  return g;
}

EnergyBreakdown total_energy(const ModelSpec& model, const ExtendedState& s) {
  EnergyBreakdown e;
  e.physical = 0.5 * s.p.squaredNorm() + model.potential(s.r) +
               0.5 * s.x.dot(model.matrix_a(s.r) * s.x) -
               model.vector_b(s.r).dot(s.x);
  if (model.has_extra_q) e.physical += model.extra_q(s.x);
  if (s.y.size() > 0) e.latent_kinetic = 0.5 * s.y.squaredNorm();
  return e;
}

ModelSpec builtin_model(const std::string& tag, bool b_variant_r1) {
  if (tag == "model_a" || tag == "a") return make_model_a();
  if (tag == "model_b" || tag == "b") return make_model_bc(false, b_variant_r1);
  if (tag == "model_c" || tag == "c") return make_model_bc(true, b_variant_r1);
  throw std::invalid_argument("unknown model tag: " + tag);
}

void builtin_initial(const std::string& tag, Vec& r0, Vec& p0) {
  if (tag == "model_a" || tag == "a") {
    r0.resize(2);
    p0.resize(2);
    r0 << 0.587, -0.810;
    p0 << -1.00, 0.500;
    return;
  }
  if (tag == "model_b" || tag == "b" || tag == "model_c" || tag == "c" ||
      tag == "model_b_r1" || tag == "model_c_r1") {
    r0.resize(3);
    p0.resize(3);
    r0 << 0.0, 0.500, 1.00;
    p0 << 1.00, 0.500, -1.00;
    return;
  }
  throw std::invalid_argument("unknown model tag: " + tag);
}

ModelSpec frozen_model(const ModelSpec& model, const Vec& r_frozen) {
  ModelSpec f = model;
  f.name = model.name + "_frozen";
  const Mat a0 = model.matrix_a(r_frozen);
  const Vec b0 = model.vector_b(r_frozen);
  f.potential = [](const Vec&) { return 0.0; };
  f.force = [d = model.d_r](const Vec&) { return Vec(Vec::Zero(d)); };
  f.matrix_a = [a0](const Vec&) { return a0; };
  f.vector_b = [b0](const Vec&) { return b0; };
  f.da_dr = [d = model.d_x](const Vec&, int) { return Mat(Mat::Zero(d, d)); };
  f.db_dr = [d = model.d_x](const Vec&, int) { return Vec(Vec::Zero(d)); };
  return f;
}

}  // namespace sxlmd
