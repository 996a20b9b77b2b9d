#include "percolab/gaussian_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <string>

#if defined(PERCOLAB_HAVE_FFTW)
#include <fftw3.h>
#endif

namespace percolab {

namespace {

// iterate coords of [lo, hi] in row-major ascending order
template <class Fn>
void walk_box(int d, const Coords& lo, const Coords& hi, Fn&& fn) {
  for (int a = 0; a < d; ++a) {
    if (lo[a] > hi[a]) return;
  }
  Coords c = lo;
  while (true) {
    fn(c);
    int a = d - 1;
    while (a >= 0 && c[a] == hi[a]) c[a] = lo[a], --a;
    if (a < 0) break;
    ++c[a];
  }
}

}  // namespace

double smooth_cutoff(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / (1.0 - t));       // h(1 - t)
  const double b = std::exp(-1.0 / (t - 0.5));       // h(t - 1/2)
  return a / (a + b);
}

Kernel make_bargmann_fock_kernel(int d, double mesh, double support_radius) {
  require_that(support_radius >= 4.0, ErrorKind::invalid_parameter,
               "window must be wide enough for the Gaussian tail; truncate afterwards if needed");
  Kernel k;
  k.geom = make_grid(d, mesh, cells_for_length(mesh, support_radius));
  k.support_radius = support_radius;
  const double amp = std::pow(2.0 / M_PI, d / 4.0);
  const std::int64_t n = k.geom.count();
  k.values.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const Coords c = k.geom.cell(i);
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += (c[a] * mesh) * (c[a] * mesh);
    k.values[static_cast<std::size_t>(i)] = amp * std::exp(-r2);
  }
  return k;
}

Kernel truncate_kernel(const Kernel& k, double r_cut) {
  require_that(r_cut > 0.0, ErrorKind::invalid_parameter, "cutoff radius must be positive");
  Kernel out;
  const int nh = std::min(k.half(), cells_for_length(k.geom.mesh, r_cut));
  out.geom = make_grid(k.geom.d, k.geom.mesh, nh);
  out.support_radius = std::min(k.support_radius, r_cut);
  const std::int64_t n = out.geom.count();
  out.values.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const Coords c = out.geom.cell(i);
    double r2 = 0.0;
    for (int a = 0; a < out.geom.d; ++a) r2 += (c[a] * k.geom.mesh) * (c[a] * k.geom.mesh);
    out.values[static_cast<std::size_t>(i)] = k.value(c) * smooth_cutoff(std::sqrt(r2) / r_cut);
  }
  return out;
}

Kernel kernel_self_convolution(const Kernel& k) {
  Kernel out;
  out.geom = make_grid(k.geom.d, k.geom.mesh, 2 * k.half());
  out.support_radius = 2.0 * k.support_radius;
  const std::int64_t n = out.geom.count();
  out.values.assign(static_cast<std::size_t>(n), 0.0);
  const double cellw = std::pow(k.geom.mesh, k.geom.d);
  const int h = k.half();
  if (k.geom.d == 2) {
    const int side = k.geom.side(0);
    const double* q = k.values.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t t = 0; t < n; ++t) {
      const Coords tc = out.geom.cell(t);
      const int t0 = tc[0], t1 = tc[1];
      double acc = 0.0;
      const int u0_lo = std::max(-h, -h - t0), u0_hi = std::min(h, h - t0);
      const int u1_lo = std::max(-h, -h - t1), u1_hi = std::min(h, h - t1);
      for (int u0 = u0_lo; u0 <= u0_hi; ++u0) {
        const double* row_a = q + static_cast<std::int64_t>(u0 + h) * side;
        const double* row_b = q + static_cast<std::int64_t>(u0 + t0 + h) * side;
        for (int u1 = u1_lo; u1 <= u1_hi; ++u1) acc += row_a[u1 + h] * row_b[u1 + t1 + h];
      }
      out.values[static_cast<std::size_t>(t)] = acc * cellw;
    }
    return out;
  }
  for (std::int64_t t = 0; t < n; ++t) {
    const Coords tc = out.geom.cell(t);
    double acc = 0.0;
    Coords lo{}, hi{};
    for (int a = 0; a < k.geom.d; ++a) lo[a] = -h, hi[a] = h;
    walk_box(k.geom.d, lo, hi, [&](const Coords& u) {
      Coords v = u;
      for (int a = 0; a < k.geom.d; ++a) v[a] += tc[a];
      if (k.geom.contains(v)) acc += k.value(u) * k.value(v);
    });
    out.values[static_cast<std::size_t>(t)] = acc * cellw;
  }
  return out;
}

void kernel_to_csv(const Kernel& k, std::ostream& out) {
  out << "d,mesh,support_radius,half\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", k.geom.d, k.geom.mesh, k.support_radius,
                k.half());
  out << buf;
  const std::int64_t n = k.geom.count();
  for (std::int64_t i = 0; i < n; ++i) {
    const Coords c = k.geom.cell(i);
    for (int a = 0; a < k.geom.d; ++a) out << c[a] << ',';
    std::snprintf(buf, sizeof buf, "%.17g\n", k.values[static_cast<std::size_t>(i)]);
    out << buf;
  }
}

Kernel kernel_from_csv(std::istream& in) {
  std::string line;
  require_that(static_cast<bool>(std::getline(in, line)), ErrorKind::invalid_data,
               "kernel csv: missing header");
  require_that(static_cast<bool>(std::getline(in, line)), ErrorKind::invalid_data,
               "kernel csv: missing geometry line");
  int d = 0, half = 0;
  double mesh = 0.0, support = 0.0;
  require_that(std::sscanf(line.c_str(), "%d,%lg,%lg,%d", &d, &mesh, &support, &half) == 4,
               ErrorKind::invalid_data, "kernel csv: bad geometry line");
  require_that(d >= 1 && d <= kMaxDim && mesh > 0.0 && half >= 0, ErrorKind::invalid_data,
               "kernel csv: bad geometry values");
  Kernel k;
  k.geom = make_grid(d, mesh, half);
  k.support_radius = support;
  k.values.assign(static_cast<std::size_t>(k.geom.count()), 0.0);
  std::vector<std::uint8_t> seen(k.values.size(), 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    Coords c{};
    char comma;
    for (int a = 0; a < d; ++a) {
      require_that(static_cast<bool>(row >> c[a] >> comma) && comma == ',', ErrorKind::invalid_data,
                   "kernel csv: bad row");
    }
    double v = 0.0;
    require_that(static_cast<bool>(row >> v), ErrorKind::invalid_data, "kernel csv: bad value");
    require_that(k.geom.contains(c), ErrorKind::invalid_data, "kernel csv: cell out of range");
    const std::size_t idx = static_cast<std::size_t>(k.geom.index(c));
    k.values[idx] = v;
    seen[idx] = 1;
  }
  for (std::uint8_t s : seen)
    require_that(s == 1, ErrorKind::invalid_data, "kernel csv: missing cells");
  return k;
}

// ---- direct convolution ----

double field_value_at(const Kernel& q, const GridGeom& noise_geom, const double* w,
                      const Coords& i) {
  const int d = q.geom.d;
  if (d == 2) {
    const int kh = q.half();
    const int kside = q.geom.side(0);
    const int n1 = noise_geom.side(1);
    const double* qv = q.values.data();
    double acc = 0.0;
    // kernel offsets in row-major order; u = (a0 - kh, a1 - kh)
    for (int a0 = 0; a0 < kside; ++a0) {
      const std::int64_t nrow = static_cast<std::int64_t>(i[0] - (a0 - kh) + noise_geom.half[0]) * n1;
      const int base1 = i[1] + kh + noise_geom.half[1];
      const double* qrow = qv + static_cast<std::int64_t>(a0) * kside;
      for (int a1 = 0; a1 < kside; ++a1) acc += qrow[a1] * w[nrow + base1 - a1];
    }
    return acc;
  }
  double acc = 0.0;
  const std::int64_t kn = q.geom.count();
  for (std::int64_t t = 0; t < kn; ++t) {
    const Coords u = q.geom.cell(t);
    Coords j{};
    for (int a = 0; a < d; ++a) j[a] = i[a] - u[a];
    acc += q.values[static_cast<std::size_t>(t)] * w[noise_geom.index(j)];
  }
  return acc;
}

namespace {

double conv_at(const Kernel& q, const NoiseGrid& noise, const Coords& i) {
  return field_value_at(q, noise.geom, noise.w.data(), i);
}

}  // namespace

void moving_average_direct_serial(const Kernel& q, const NoiseGrid& noise, FieldSample& out) {
  out.geom = field_geom_for(noise.geom, q);
  const std::int64_t n = out.geom.count();
  out.f.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    out.f[static_cast<std::size_t>(i)] = conv_at(q, noise, out.geom.cell(i));
}

void moving_average_direct(const Kernel& q, const NoiseGrid& noise, FieldSample& out, int workers) {
  require_that(workers >= 1, ErrorKind::invalid_parameter, "workers must be >= 1");
  out.geom = field_geom_for(noise.geom, q);
  const std::int64_t n = out.geom.count();
  out.f.resize(static_cast<std::size_t>(n));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(workers)
#endif
  for (std::int64_t i = 0; i < n; ++i)
    out.f[static_cast<std::size_t>(i)] = conv_at(q, noise, out.geom.cell(i));
}

// ---- frequency-domain sampler ----

#if defined(PERCOLAB_HAVE_FFTW)
namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// smallest size >= n whose factors are all in {2,3,5,7}
int good_fft_size(int n) {
  for (;; ++n) {
    int m = n;
    for (int f : {2, 3, 5, 7}) {
      while (m % f == 0) m /= f;
    }
    if (m == 1) return n;
  }
}

}  // namespace
#endif

struct FieldSampler::Impl {
  Kernel q;
  GridGeom ngeom;
  GridGeom fgeom;
  bool fft = false;
#if defined(PERCOLAB_HAVE_FFTW)
  int L0 = 0, L1 = 0;
  std::vector<double> qhat;  // interleaved re,im of the kernel transform
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
#endif
};

FieldSampler::FieldSampler(const Kernel& q, const GridGeom& noise_geom) : impl_(new Impl) {
  impl_->q = q;
  impl_->ngeom = noise_geom;
  impl_->fgeom = field_geom_for(noise_geom, q);
#if defined(PERCOLAB_HAVE_FFTW)
  if (noise_geom.d == 2) {
    const int n0 = noise_geom.side(0), n1 = noise_geom.side(1);
    const int m = q.geom.side(0);
    impl_->L0 = good_fft_size(n0 + m - 1);
    impl_->L1 = good_fft_size(n1 + m - 1);
    const std::int64_t nreal = static_cast<std::int64_t>(impl_->L0) * impl_->L1;
    const std::int64_t ncplx = static_cast<std::int64_t>(impl_->L0) * (impl_->L1 / 2 + 1);
    double* real = fftw_alloc_real(static_cast<std::size_t>(nreal));
    fftw_complex* cplx = fftw_alloc_complex(static_cast<std::size_t>(ncplx));
    {
      std::lock_guard<std::mutex> lock(plan_mutex());
      impl_->fwd = fftw_plan_dft_r2c_2d(impl_->L0, impl_->L1, real, cplx, FFTW_ESTIMATE);
      impl_->inv = fftw_plan_dft_c2r_2d(impl_->L0, impl_->L1, cplx, real, FFTW_ESTIMATE);
    }
    // kernel transform, computed once
    std::fill(real, real + nreal, 0.0);
    for (int a0 = 0; a0 < m; ++a0)
      for (int a1 = 0; a1 < m; ++a1)
        real[static_cast<std::int64_t>(a0) * impl_->L1 + a1] =
            q.values[static_cast<std::size_t>(a0) * m + a1];
    fftw_execute_dft_r2c(impl_->fwd, real, cplx);
    impl_->qhat.resize(static_cast<std::size_t>(2 * ncplx));
    for (std::int64_t i = 0; i < ncplx; ++i) {
      impl_->qhat[static_cast<std::size_t>(2 * i)] = cplx[i][0];
      impl_->qhat[static_cast<std::size_t>(2 * i + 1)] = cplx[i][1];
    }
    fftw_free(real);
    fftw_free(cplx);
    impl_->fft = true;
  }
#endif
}

FieldSampler::~FieldSampler() {
#if defined(PERCOLAB_HAVE_FFTW)
  if (impl_ && impl_->fft) {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(impl_->fwd);
    fftw_destroy_plan(impl_->inv);
  }
#endif
}

const Kernel& FieldSampler::kernel() const { return impl_->q; }
const GridGeom& FieldSampler::noise_geom() const { return impl_->ngeom; }
const GridGeom& FieldSampler::field_geom() const { return impl_->fgeom; }
bool FieldSampler::uses_fft() const { return impl_->fft; }

void FieldSampler::sample(const NoiseGrid& noise, FieldSample& out) const {
  require_that(noise.geom.d == impl_->ngeom.d && noise.geom.mesh == impl_->ngeom.mesh,
               ErrorKind::invalid_parameter, "noise grid does not match the sampler");
  for (int a = 0; a < noise.geom.d; ++a)
    require_that(noise.geom.half[a] == impl_->ngeom.half[a], ErrorKind::invalid_parameter,
                 "noise grid does not match the sampler");
#if defined(PERCOLAB_HAVE_FFTW)
  if (impl_->fft) {
    const int L0 = impl_->L0, L1 = impl_->L1;
    const std::int64_t nreal = static_cast<std::int64_t>(L0) * L1;
    const std::int64_t ncplx = static_cast<std::int64_t>(L0) * (L1 / 2 + 1);
    double* real = fftw_alloc_real(static_cast<std::size_t>(nreal));
    fftw_complex* cplx = fftw_alloc_complex(static_cast<std::size_t>(ncplx));
    std::fill(real, real + nreal, 0.0);
    const int n0 = noise.geom.side(0), n1 = noise.geom.side(1);
    for (int a0 = 0; a0 < n0; ++a0) {
      const double* src = noise.w.data() + static_cast<std::int64_t>(a0) * n1;
      double* dst = real + static_cast<std::int64_t>(a0) * L1;
      std::copy(src, src + n1, dst);
    }
    fftw_execute_dft_r2c(impl_->fwd, real, cplx);
    const double scale = 1.0 / static_cast<double>(nreal);
    const double* qh = impl_->qhat.data();
    for (std::int64_t i = 0; i < ncplx; ++i) {
      const double re = cplx[i][0], im = cplx[i][1];
      const double qr = qh[2 * i], qi = qh[2 * i + 1];
      cplx[i][0] = (re * qr - im * qi) * scale;
      cplx[i][1] = (re * qi + im * qr) * scale;
    }
    fftw_execute_dft_c2r(impl_->inv, cplx, real);
    out.geom = impl_->fgeom;
    const std::int64_t fn = out.geom.count();
    out.f.resize(static_cast<std::size_t>(fn));
    const int f1 = out.geom.side(1);
    const int off = 2 * impl_->q.half();  // linear-convolution output offset
    for (int a0 = 0; a0 < out.geom.side(0); ++a0) {
      const double* src = real + static_cast<std::int64_t>(a0 + off) * L1 + off;
      std::copy(src, src + f1, out.f.begin() + static_cast<std::int64_t>(a0) * f1);
    }
    fftw_free(real);
    fftw_free(cplx);
    return;
  }
#endif
  moving_average_direct_serial(impl_->q, noise, out);
}

// ---- box components ----

FieldSample box_component(const NoiseGrid& noise, const BoxPartition& part, const Coords& box,
                          const Kernel& q) {
  FieldSample out;
  out.geom = field_geom_for(noise.geom, q);
  out.f.assign(static_cast<std::size_t>(out.geom.count()), 0.0);
  const int d = noise.geom.d;
  const int kh = q.half();
  Coords cl{}, ch{}, xlo{}, xhi{};
  bool empty = false;
  for (int a = 0; a < d; ++a) {
    cl[a] = part.cell_lo(box, a, noise.geom);
    ch[a] = part.cell_hi(box, a, noise.geom);
    if (cl[a] > ch[a]) empty = true;
    xlo[a] = std::max(cl[a] - kh, -out.geom.half[a]);
    xhi[a] = std::min(ch[a] + kh, out.geom.half[a]);
  }
  if (empty) return out;
  walk_box(d, xlo, xhi, [&](const Coords& x) {
    Coords jlo{}, jhi{};
    for (int a = 0; a < d; ++a) {
      jlo[a] = std::max(cl[a], x[a] - kh);
      jhi[a] = std::min(ch[a], x[a] + kh);
    }
    double acc = 0.0;
    walk_box(d, jlo, jhi, [&](const Coords& j) {
      Coords u{};
      for (int a = 0; a < d; ++a) u[a] = x[a] - j[a];
      acc += q.value(u) * noise.w[static_cast<std::size_t>(noise.geom.index(j))];
    });
    out.f[static_cast<std::size_t>(out.geom.index(x))] = acc;
  });
  return out;
}

NoiseGrid resample_boxes(const NoiseGrid& noise, const BoxPartition& part,
                         const std::vector<Coords>& boxes, Rng& rng) {
  NoiseGrid out = noise;
  const double sd = std::pow(noise.geom.mesh, noise.geom.d / 2.0);
  for (const Coords& b : boxes) {
    Coords cl{}, ch{};
    bool empty = false;
    for (int a = 0; a < noise.geom.d; ++a) {
      cl[a] = part.cell_lo(b, a, noise.geom);
      ch[a] = part.cell_hi(b, a, noise.geom);
      if (cl[a] > ch[a]) empty = true;
    }
    if (empty) continue;
    walk_box(noise.geom.d, cl, ch, [&](const Coords& c) {
      out.w[static_cast<std::size_t>(noise.geom.index(c))] = sd * rng.next_normal();
    });
  }
  return out;
}

// ---- orthogonal decomposition diagnostics ----

double orthogonal_decomposition_check(const Kernel& q, const Coords& s_lo, const Coords& s_hi,
                                      std::int64_t n_basis) {
  const int d = q.geom.d;
  std::vector<Coords> cells;
  walk_box(d, s_lo, s_hi, [&](const Coords& c) { cells.push_back(c); });
  require_that(!cells.empty(), ErrorKind::invalid_parameter, "empty box");
  require_that(n_basis >= 1 && n_basis <= static_cast<std::int64_t>(cells.size()),
               ErrorKind::invalid_parameter, "basis size exceeds the cell count");
  const int kh = q.half();
  Coords xlo{}, xhi{};
  for (int a = 0; a < d; ++a) xlo[a] = s_lo[a] - kh, xhi[a] = s_hi[a] + kh;
  std::vector<Coords> points;
  walk_box(d, xlo, xhi, [&](const Coords& c) { points.push_back(c); });

  // A[i][p] = q(x_p - c_i); the rank-n covariance drops the rows i >= n
  const std::size_t np = points.size();
  std::vector<double> A(cells.size() * np, 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t p = 0; p < np; ++p) {
      Coords u{};
      for (int a = 0; a < d; ++a) u[a] = points[p][a] - cells[i][a];
      if (q.geom.contains(u)) A[i * np + p] = q.value(u);
    }
  }
  const double cellw = std::pow(q.geom.mesh, d);
  double worst = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t r = 0; r < np; ++r) {
      double tail = 0.0;
      for (std::size_t i = static_cast<std::size_t>(n_basis); i < cells.size(); ++i)
        tail += A[i * np + p] * A[i * np + r];
      worst = std::max(worst, std::abs(tail) * cellw);
    }
  }
  return worst;
}

double constant_component_value(const Kernel& q, const Coords& s_lo, const Coords& s_hi,
                                const Coords& x) {
  const int d = q.geom.d;
  double acc = 0.0;
  std::int64_t ns = 0;
  walk_box(d, s_lo, s_hi, [&](const Coords& c) {
    ++ns;
    Coords u{};
    for (int a = 0; a < d; ++a) u[a] = x[a] - c[a];
    if (q.geom.contains(u)) acc += q.value(u);
  });
  require_that(ns > 0, ErrorKind::invalid_parameter, "empty box");
  const double cellw = std::pow(q.geom.mesh, d);
  return acc * cellw / std::sqrt(static_cast<double>(ns) * cellw);
}

}  // namespace percolab
