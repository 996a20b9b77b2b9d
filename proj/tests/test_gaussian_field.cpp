#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "percolab/connectivity.hpp"
#include "percolab/error.hpp"
#include "percolab/gaussian_field.hpp"
#include "percolab/rng.hpp"

using namespace percolab;

namespace {

template <class Fn>
ErrorKind thrown_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::internal;
}

double diff_l2(const Kernel& full, const Kernel& cut) {
  // ||q - q_r||_2 with q_r extended by zero outside its window
  NeumaierSum s;
  const std::int64_t n = full.geom.count();
  for (std::int64_t i = 0; i < n; ++i) {
    const Coords c = full.geom.cell(i);
    const double qr = cut.geom.contains(c) ? cut.value(c) : 0.0;
    const double dv = full.value(c) - qr;
    s.add(dv * dv);
  }
  return std::sqrt(s.value() * std::pow(full.geom.mesh, full.geom.d));
}

}  // namespace

TEST_CASE("grid geometry round trips and strides") {
  const GridGeom g = make_grid_box(2, 0.5, Coords{2, 3, 0});
  CHECK(g.side(0) == 5);
  CHECK(g.side(1) == 7);
  CHECK(g.count() == 35);
  for (std::int64_t i = 0; i < g.count(); ++i) CHECK(g.index(g.cell(i)) == i);
  // row-major: last axis fastest
  CHECK(g.index(Coords{-2, -3, 0}) == 0);
  CHECK(g.index(Coords{-2, -2, 0}) == 1);
  CHECK(g.index(Coords{-1, -3, 0}) == 7);
  CHECK(!g.contains(Coords{3, 0, 0}));
  CHECK(thrown_kind([] { make_grid(4, 0.5, 2); }) == ErrorKind::unsupported_dimension);
  CHECK(thrown_kind([] { make_grid(2, 0.0, 2); }) == ErrorKind::invalid_parameter);
  CHECK(thrown_kind([] { make_grid(2, 0.5, -1); }) == ErrorKind::invalid_parameter);
}

TEST_CASE("cells_for_length floors with a guard for exact multiples") {
  CHECK(cells_for_length(0.25, 1.0) == 4);
  CHECK(cells_for_length(0.25, 0.9999999999) == 4);
  CHECK(cells_for_length(0.25, 0.99) == 3);
  CHECK(cells_for_length(1.0, 0.0) == 0);
  CHECK(thrown_kind([] { cells_for_length(0.25, -1.0); }) == ErrorKind::invalid_parameter);
}

TEST_CASE("bargmann-fock kernel has the right shape and norms") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.1, 4.0);
  CHECK(q.half() == 40);
  CHECK(q.value(Coords{0, 0, 0}) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
  // even in every axis
  CHECK(q.value(Coords{7, -3, 0}) == q.value(Coords{-7, 3, 0}));
  CHECK(q.value(Coords{7, -3, 0}) == q.value(Coords{3, 7, 0}));
  // L2 norm 1 and integral sqrt(2 pi) up to discretization
  CHECK(q.l2() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(q.integral() == doctest::Approx(std::sqrt(2.0 * M_PI)).epsilon(1e-3));
  CHECK(thrown_kind([] { make_bargmann_fock_kernel(2, 0.1, 2.0); }) ==
        ErrorKind::invalid_parameter);

  const Kernel q1 = make_bargmann_fock_kernel(1, 0.05, 4.0);
  CHECK(q1.l2() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("kernel self-convolution reproduces the gaussian covariance") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.1, 4.0);
  const Kernel K = kernel_self_convolution(q);
  CHECK(K.half() == 80);
  // K(0) is the squared L2 norm, same summands
  CHECK(K.value(Coords{0, 0, 0}) == doctest::Approx(q.l2() * q.l2()).epsilon(1e-12));
  // symmetric
  CHECK(K.value(Coords{13, -5, 0}) == doctest::Approx(K.value(Coords{-13, 5, 0})).epsilon(1e-12));
  // matches exp(-|x|^2/2) for |x| <= 3
  double worst = 0.0;
  for (int c0 = -30; c0 <= 30; ++c0) {
    for (int c1 = -30; c1 <= 30; ++c1) {
      const double r2 = 0.01 * (c0 * c0 + c1 * c1);
      worst = std::max(worst, std::abs(K.value(Coords{c0, c1, 0}) - std::exp(-r2 / 2.0)));
    }
  }
  CHECK(worst <= 1e-2);
}

TEST_CASE("smooth cutoff is 1 then decreasing then 0") {
  CHECK(smooth_cutoff(0.0) == 1.0);
  CHECK(smooth_cutoff(0.5) == 1.0);
  CHECK(smooth_cutoff(1.0) == 0.0);
  CHECK(smooth_cutoff(2.0) == 0.0);
  double prev = 1.0;
  for (double t = 0.55; t < 1.0; t += 0.05) {
    const double v = smooth_cutoff(t);
    CHECK(v > 0.0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("truncation is the identity for a wide cutoff and vanishes outside") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.25, 4.0);
  const Kernel same = truncate_kernel(q, 2.0 * std::sqrt(2.0) * 4.0 + 0.1);
  REQUIRE(same.half() == q.half());
  CHECK(same.values == q.values);

  const Kernel cut = truncate_kernel(q, 2.0);
  CHECK(cut.half() == 8);
  CHECK(cut.support_radius == 2.0);
  for (std::int64_t i = 0; i < cut.geom.count(); ++i) {
    const Coords c = cut.geom.cell(i);
    const double r = 0.25 * std::sqrt(static_cast<double>(c[0] * c[0] + c[1] * c[1]));
    if (r >= 2.0) CHECK(cut.values[static_cast<std::size_t>(i)] == 0.0);
    if (r <= 1.0) CHECK(cut.values[static_cast<std::size_t>(i)] == q.value(c));
  }
  CHECK(thrown_kind([&] { truncate_kernel(q, 0.0); }) == ErrorKind::invalid_parameter);
}

TEST_CASE("truncation error decreases in the cutoff and obeys the tail bound") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.25, 4.0);
  double prev = 1e100;
  for (double r : {1.0, 1.5, 2.0, 3.0, 4.0}) {
    const Kernel qr = truncate_kernel(q, r);
    const double err = diff_l2(q, qr);
    CHECK(err <= prev);
    prev = err;
    // termwise: q - q_r is supported on |x| > r/2 and bounded by q there
    NeumaierSum tail;
    for (std::int64_t i = 0; i < q.geom.count(); ++i) {
      const Coords c = q.geom.cell(i);
      const double rr = 0.25 * std::sqrt(static_cast<double>(c[0] * c[0] + c[1] * c[1]));
      if (rr > r / 2.0) tail.add(q.values[static_cast<std::size_t>(i)] * q.values[static_cast<std::size_t>(i)]);
    }
    CHECK(err <= std::sqrt(tail.value() * 0.25 * 0.25) + 1e-12);
  }
}

TEST_CASE("kernel csv round trip is exact") {
  const Kernel q = truncate_kernel(make_bargmann_fock_kernel(2, 0.5, 4.0), 3.0);
  std::ostringstream out;
  kernel_to_csv(q, out);
  std::istringstream in(out.str());
  const Kernel back = kernel_from_csv(in);
  CHECK(back.geom.d == q.geom.d);
  CHECK(back.geom.mesh == q.geom.mesh);
  CHECK(back.support_radius == q.support_radius);
  CHECK(back.half() == q.half());
  CHECK(back.values == q.values);

  std::istringstream empty("");
  CHECK(thrown_kind([&] { kernel_from_csv(empty); }) == ErrorKind::invalid_data);
  std::istringstream trunc("d,mesh,support_radius,half\n2,0.5,4,1\n0,0,1.0\n");
  CHECK(thrown_kind([&] { kernel_from_csv(trunc); }) == ErrorKind::invalid_data);
}

TEST_CASE("white noise is reproducible with unit variance per cell measure") {
  const GridGeom g = make_grid(2, 0.5, 20);
  Rng rng_a(99, 0), rng_b(99, 0);
  const NoiseGrid a = white_noise_grid(g, rng_a);
  const NoiseGrid b = white_noise_grid(g, rng_b);
  CHECK(a.w == b.w);

  // Var w = mesh^d = 0.25
  double sum = 0.0, sq = 0.0;
  for (double v : a.w) sum += v, sq += v * v;
  const double n = static_cast<double>(a.w.size());
  CHECK(std::abs(sum / n) <= 4.0 * 0.5 / std::sqrt(n));
  CHECK(sq / n == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("parallel moving average is bit-identical to the serial reference") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.5, 4.0);
  const GridGeom ng = make_grid(2, 0.5, 12);
  Rng rng(7, 1);
  const NoiseGrid noise = white_noise_grid(ng, rng);
  FieldSample serial, par1, par4;
  moving_average_direct_serial(q, noise, serial);
  moving_average_direct(q, noise, par1, 1);
  moving_average_direct(q, noise, par4, 4);
  CHECK(serial.geom.half[0] == 4);
  CHECK(serial.f == par1.f);
  CHECK(serial.f == par4.f);
}

TEST_CASE("fft sampler agrees with the direct convolution") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.25, 4.0);
  const GridGeom ng = make_grid(2, 0.25, 24);
  const FieldSampler sampler(q, ng);
#if defined(PERCOLAB_HAVE_FFTW)
  CHECK(sampler.uses_fft());
#endif
  Rng rng(11, 2);
  const NoiseGrid noise = white_noise_grid(ng, rng);
  FieldSample fft_out, direct_out;
  sampler.sample(noise, fft_out);
  moving_average_direct_serial(q, noise, direct_out);
  REQUIRE(fft_out.f.size() == direct_out.f.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < fft_out.f.size(); ++i)
    worst = std::max(worst, std::abs(fft_out.f[i] - direct_out.f[i]));
  CHECK(worst <= 1e-8);

  // zero noise maps to zero field
  NoiseGrid zero = noise;
  std::fill(zero.w.begin(), zero.w.end(), 0.0);
  FieldSample zf;
  sampler.sample(zero, zf);
  for (double v : zf.f) CHECK(v == 0.0);

  const GridGeom other = make_grid(2, 0.25, 30);
  Rng rng2(11, 3);
  const NoiseGrid wrong = white_noise_grid(other, rng2);
  FieldSample dummy;
  CHECK(thrown_kind([&] { sampler.sample(wrong, dummy); }) == ErrorKind::invalid_parameter);
  CHECK(thrown_kind([&] { field_geom_for(make_grid(2, 0.25, 3), q); }) ==
        ErrorKind::invalid_geometry);
}

TEST_CASE("sampled field has the kernel covariance and is stationary") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.25, 4.0);
  const Kernel K = kernel_self_convolution(q);
  const GridGeom ng = make_grid(2, 0.25, 20);
  const FieldSampler sampler(q, ng);

  const int n = 4000;
  // f(0), f(0) shifted by one unit, and an off-centre point
  double s0 = 0.0, s00 = 0.0, s1 = 0.0, s11 = 0.0, s01 = 0.0, sp = 0.0, spp = 0.0;
  FieldSample f;
  NoiseGrid noise;
  for (int i = 0; i < n; ++i) {
    Rng rng(20250801, static_cast<std::uint64_t>(i));
    white_noise_fill(ng, rng, noise);
    sampler.sample(noise, f);
    const double v0 = f.f[static_cast<std::size_t>(f.geom.index(Coords{0, 0, 0}))];
    const double v1 = f.f[static_cast<std::size_t>(f.geom.index(Coords{4, 0, 0}))];
    const double vp = f.f[static_cast<std::size_t>(f.geom.index(Coords{-3, 2, 0}))];
    s0 += v0, s00 += v0 * v0;
    s1 += v1, s11 += v1 * v1;
    s01 += v0 * v1;
    sp += vp, spp += vp * vp;
  }
  const double var0 = s00 / n - (s0 / n) * (s0 / n);
  const double var1 = s11 / n - (s1 / n) * (s1 / n);
  const double varp = spp / n - (sp / n) * (sp / n);
  const double cov01 = s01 / n - (s0 / n) * (s1 / n);
  const double k0 = K.value(Coords{0, 0, 0});
  CHECK(var0 == doctest::Approx(k0).epsilon(0.08));
  CHECK(var1 == doctest::Approx(k0).epsilon(0.08));
  CHECK(varp == doctest::Approx(k0).epsilon(0.08));
  CHECK(cov01 == doctest::Approx(K.value(Coords{4, 0, 0})).epsilon(0.12));
  CHECK(k0 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(K.value(Coords{4, 0, 0}) == doctest::Approx(std::exp(-0.5)).epsilon(1e-2));
}

TEST_CASE("excursion sets are monotone in the level") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.5, 4.0);
  const GridGeom ng = make_grid(2, 0.5, 14);
  Rng rng(5, 0);
  const NoiseGrid noise = white_noise_grid(ng, rng);
  FieldSample f;
  moving_average_direct_serial(q, noise, f);
  const CellMask lo = excursion_set(f, -0.7);
  const CellMask mid = excursion_set(f, 0.0);
  const CellMask hi = excursion_set(f, 0.7);
  for (std::size_t i = 0; i < mid.bits.size(); ++i) {
    CHECK(lo.bits[i] <= mid.bits[i]);
    CHECK(mid.bits[i] <= hi.bits[i]);
  }
  const CellMask all = excursion_set(f, 1e9);
  for (std::uint8_t b : all.bits) CHECK(b == 1);
}

TEST_CASE("zero-level excursion covers about half the cells") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.5, 4.0);
  const GridGeom ng = make_grid(2, 0.5, 12);
  const FieldSampler sampler(q, ng);
  double frac = 0.0;
  const int n = 600;
  FieldSample f;
  NoiseGrid noise;
  CellMask m;
  for (int i = 0; i < n; ++i) {
    Rng rng(31, static_cast<std::uint64_t>(i));
    white_noise_fill(ng, rng, noise);
    sampler.sample(noise, f);
    excursion_fill(f, 0.0, m);
    double ones = 0.0;
    for (std::uint8_t b : m.bits) ones += b;
    frac += ones / static_cast<double>(m.bits.size());
  }
  frac /= n;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("positive crossing and negative dual crossing partition every mask") {
  // x in [-1,1], y in [-2,2] at mesh 1: 3 x 5 cells, all 2^15 masks
  const GridGeom g = make_grid_box(2, 1.0, Coords{1, 2, 0});
  CellMask m;
  m.geom = g;
  m.bits.assign(15, 0);
  Scratch ws;
  for (std::uint32_t pat = 0; pat < (1u << 15); ++pat) {
    for (int b = 0; b < 15; ++b) m.bits[static_cast<std::size_t>(b)] = (pat >> b) & 1u;
    const bool cross = field_crossing_event(m, 2.0, 1.0, ws);
    const bool dual = field_dual_tb_crossing(m, 2.0, 1.0, ws);
    REQUIRE(cross != dual);
  }
}

TEST_CASE("matched two-arm implies the interface two-arm implies one arm") {
  const GridGeom g = make_grid_box(2, 1.0, Coords{2, 1, 0});
  CellMask m;
  m.geom = g;
  m.bits.assign(15, 0);
  Scratch ws;
  for (std::uint32_t pat = 0; pat < (1u << 15); ++pat) {
    for (int b = 0; b < 15; ++b) m.bits[static_cast<std::size_t>(b)] = (pat >> b) & 1u;
    const bool matched = field_two_arm_matched_event(m, 0.0, 1.0, ws);
    const bool two = field_two_arm_event(m, 0.0, 1.0, ws);
    const bool one = field_one_arm_event(m, 0.0, 1.0, ws);
    if (matched) REQUIRE(two);
    if (two) REQUIRE(one);
  }
}

TEST_CASE("field arm events behave on constant masks") {
  const GridGeom g = make_grid(2, 0.5, 8);
  CellMask ones, zeros;
  ones.geom = zeros.geom = g;
  ones.bits.assign(static_cast<std::size_t>(g.count()), 1);
  zeros.bits.assign(static_cast<std::size_t>(g.count()), 0);
  Scratch ws;
  CHECK(field_one_arm_event(ones, 1.0, 4.0, ws));
  CHECK(!field_negative_arm_event(ones, 1.0, 4.0, ws));
  CHECK(!field_two_arm_event(ones, 1.0, 4.0, ws));
  CHECK(field_crossing_event(ones, 1.0, 4.0, ws));
  CHECK(!field_dual_tb_crossing(ones, 1.0, 4.0, ws));
  CHECK(!field_one_arm_event(zeros, 1.0, 4.0, ws));
  CHECK(field_negative_arm_event(zeros, 1.0, 4.0, ws));
  CHECK(!field_two_arm_event(zeros, 1.0, 4.0, ws));
  // degenerate annulus is trivially connected
  CHECK(field_one_arm_event(zeros, 4.0, 4.0, ws));
  CHECK(thrown_kind([&] { field_one_arm_event(ones, 5.0, 4.0, ws); }) == ErrorKind::invalid_query);
  // sub-unit aspects are legal (flat boxes); non-positive ones are not
  CHECK(field_crossing_event(ones, 0.5, 4.0, ws));
  CHECK(thrown_kind([&] { field_crossing_event(ones, 0.0, 4.0, ws); }) ==
        ErrorKind::invalid_parameter);
}

TEST_CASE("box partition tiles the grid exactly once") {
  const GridGeom g = make_grid_box(2, 0.25, Coords{10, 7, 0});
  const BoxPartition part = partition_for(g, 0.75);
  CHECK(part.box_cells == 3);
  for (std::int64_t i = 0; i < part.count(); ++i) CHECK(part.index(part.box_coords(i)) == i);

  std::vector<int> hits(static_cast<std::size_t>(g.count()), 0);
  for (std::int64_t bi = 0; bi < part.count(); ++bi) {
    const Coords b = part.box_coords(bi);
    Coords c{};
    for (int c0 = part.cell_lo(b, 0, g); c0 <= part.cell_hi(b, 0, g); ++c0) {
      for (int c1 = part.cell_lo(b, 1, g); c1 <= part.cell_hi(b, 1, g); ++c1) {
        c[0] = c0, c[1] = c1;
        hits[static_cast<std::size_t>(g.index(c))]++;
        CHECK(part.box_of_cell(c)[0] == b[0]);
        CHECK(part.box_of_cell(c)[1] == b[1]);
      }
    }
  }
  for (int h : hits) CHECK(h == 1);
  CHECK(thrown_kind([&] { partition_for(g, 0.3); }) == ErrorKind::invalid_parameter);
}

TEST_CASE("box components sum to the field with fixed order bit for bit") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.5, 4.0);
  const GridGeom ng = make_grid(2, 0.5, 10);
  Rng rng(17, 0);
  const NoiseGrid noise = white_noise_grid(ng, rng);
  const BoxPartition part = partition_for(ng, 2.0);
  const GridGeom fg = field_geom_for(ng, q);
  const int kh = q.half();

  std::vector<double> total(static_cast<std::size_t>(fg.count()), 0.0);
  for (std::int64_t bi = 0; bi < part.count(); ++bi) {
    const FieldSample fs = box_component(noise, part, part.box_coords(bi), q);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += fs.f[i];
  }

  // reference with the same grouping and summation order
  std::vector<double> grouped(static_cast<std::size_t>(fg.count()), 0.0);
  for (std::int64_t bi = 0; bi < part.count(); ++bi) {
    const Coords b = part.box_coords(bi);
    const int cl0 = part.cell_lo(b, 0, ng), ch0 = part.cell_hi(b, 0, ng);
    const int cl1 = part.cell_lo(b, 1, ng), ch1 = part.cell_hi(b, 1, ng);
    for (std::int64_t xi = 0; xi < fg.count(); ++xi) {
      const Coords x = fg.cell(xi);
      if (x[0] < cl0 - kh || x[0] > ch0 + kh || x[1] < cl1 - kh || x[1] > ch1 + kh) continue;
      double sub = 0.0;
      for (int j0 = std::max(cl0, x[0] - kh); j0 <= std::min(ch0, x[0] + kh); ++j0) {
        for (int j1 = std::max(cl1, x[1] - kh); j1 <= std::min(ch1, x[1] + kh); ++j1) {
          sub += q.value(Coords{x[0] - j0, x[1] - j1, 0}) *
                 noise.w[static_cast<std::size_t>(ng.index(Coords{j0, j1, 0}))];
        }
      }
      grouped[static_cast<std::size_t>(xi)] += sub;
    }
  }
  CHECK(total == grouped);

  FieldSample direct;
  moving_average_direct_serial(q, noise, direct);
  double worst = 0.0;
  for (std::size_t i = 0; i < total.size(); ++i)
    worst = std::max(worst, std::abs(total[i] - direct.f[i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("a box component vanishes away from its box") {
  const Kernel q = truncate_kernel(make_bargmann_fock_kernel(2, 0.5, 4.0), 2.0);
  const GridGeom ng = make_grid(2, 0.5, 12);
  Rng rng(23, 0);
  const NoiseGrid noise = white_noise_grid(ng, rng);
  const BoxPartition part = partition_for(ng, 1.0);
  const Coords box{0, 0, 0};  // cells [0,1]^2
  const FieldSample fs = box_component(noise, part, box, q);
  const int kh = q.half();
  bool saw_nonzero = false;
  for (std::int64_t i = 0; i < fs.geom.count(); ++i) {
    const Coords x = fs.geom.cell(i);
    const bool near = x[0] >= -kh && x[0] <= 1 + kh && x[1] >= -kh && x[1] <= 1 + kh;
    if (!near) CHECK(fs.f[static_cast<std::size_t>(i)] == 0.0);
    if (fs.f[static_cast<std::size_t>(i)] != 0.0) saw_nonzero = true;
  }
  CHECK(saw_nonzero);
}

TEST_CASE("resampling boxes changes only their cells") {
  const GridGeom ng = make_grid(2, 0.5, 10);
  Rng rng(29, 0);
  const NoiseGrid noise = white_noise_grid(ng, rng);
  const BoxPartition part = partition_for(ng, 1.5);

  Rng r_empty(77, 0);
  const NoiseGrid same = resample_boxes(noise, part, {}, r_empty);
  CHECK(same.w == noise.w);

  Rng r_one_a(77, 1), r_one_b(77, 1);
  const Coords box{1, -2, 0};
  const NoiseGrid fresh_a = resample_boxes(noise, part, {box}, r_one_a);
  const NoiseGrid fresh_b = resample_boxes(noise, part, {box}, r_one_b);
  CHECK(fresh_a.w == fresh_b.w);
  int changed = 0;
  for (std::int64_t i = 0; i < ng.count(); ++i) {
    const Coords c = ng.cell(i);
    const bool inside = part.box_of_cell(c)[0] == box[0] && part.box_of_cell(c)[1] == box[1];
    if (inside) {
      if (fresh_a.w[static_cast<std::size_t>(i)] != noise.w[static_cast<std::size_t>(i)]) ++changed;
    } else {
      CHECK(fresh_a.w[static_cast<std::size_t>(i)] == noise.w[static_cast<std::size_t>(i)]);
    }
  }
  CHECK(changed == part.box_cells * part.box_cells);
}

TEST_CASE("disjoint box components are uncorrelated") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.5, 4.0);
  const GridGeom ng = make_grid(2, 0.5, 10);
  const BoxPartition part = partition_for(ng, 1.0);
  const Coords ba{0, 0, 0}, bb{1, 0, 0};
  const Coords x{1, 1, 0};  // within reach of both boxes
  double sa = 0.0, sb = 0.0, sab = 0.0, saa = 0.0, sbb = 0.0;
  const int n = 1500;
  for (int i = 0; i < n; ++i) {
    Rng rng(41, static_cast<std::uint64_t>(i));
    const NoiseGrid noise = white_noise_grid(ng, rng);
    const FieldSample fa = box_component(noise, part, ba, q);
    const FieldSample fb = box_component(noise, part, bb, q);
    const double va = fa.f[static_cast<std::size_t>(fa.geom.index(x))];
    const double vb = fb.f[static_cast<std::size_t>(fb.geom.index(x))];
    sa += va, sb += vb, sab += va * vb;
    saa += va * va, sbb += vb * vb;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double sd = std::sqrt((saa / n) * (sbb / n) / n);
  CHECK(saa / n > 0.01);  // the components are not degenerate
  CHECK(sbb / n > 0.01);
  CHECK(std::abs(cov) <= 5.0 * sd);
}

TEST_CASE("rank-n decomposition error is zero at full rank and shrinks with n") {
  const Kernel q = truncate_kernel(make_bargmann_fock_kernel(2, 0.5, 4.0), 2.0);
  const Coords s_lo{0, 0, 0}, s_hi{2, 1, 0};  // 6 cells
  CHECK(orthogonal_decomposition_check(q, s_lo, s_hi, 6) == 0.0);
  double prev = orthogonal_decomposition_check(q, s_lo, s_hi, 1);
  CHECK(prev > 0.0);
  for (std::int64_t nb = 2; nb <= 6; ++nb) {
    const double err = orthogonal_decomposition_check(q, s_lo, s_hi, nb);
    CHECK(err <= prev);
    prev = err;
  }
  CHECK(thrown_kind([&] { orthogonal_decomposition_check(q, s_lo, s_hi, 7); }) ==
        ErrorKind::invalid_parameter);
  CHECK(thrown_kind([&] { orthogonal_decomposition_check(q, s_lo, s_hi, 0); }) ==
        ErrorKind::invalid_parameter);
}

TEST_CASE("constant component matches a hand-written sum") {
  const Kernel q = make_bargmann_fock_kernel(2, 0.5, 4.0);
  const Coords s_lo{-1, 0, 0}, s_hi{1, 1, 0};  // 6 cells
  const Coords x{2, 3, 0};
  double acc = 0.0;
  for (int c0 = -1; c0 <= 1; ++c0)
    for (int c1 = 0; c1 <= 1; ++c1) acc += q.value(Coords{x[0] - c0, x[1] - c1, 0});
  const double expect = acc * 0.25 / std::sqrt(6.0 * 0.25);
  CHECK(constant_component_value(q, s_lo, s_hi, x) == doctest::Approx(expect).epsilon(1e-12));
}
