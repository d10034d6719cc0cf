#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "wetpred/error.hpp"
#include "wetpred/texture.hpp"

using namespace wetpred;
using namespace wetpred::texture;

namespace {

MaskVector mask(MaskName name, const MaskBank& bank = default_mask_bank()) {
  for (const auto& m : bank)
    if (m.name == name) return m;
  throw std::logic_error("missing mask");
}

FilteredMap filtered_from(const oracle::Grid& g) {
  FilteredMap f(g.w, g.h);
  f.values = g.v;
  return f;
}

EnergyMap energy_from(int w, int h, std::vector<double> v) {
  EnergyMap e(w, h);
  e.values = std::move(v);
  return e;
}

IntensityPlane random_plane(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  IntensityPlane p(w, h);
  for (auto& v : p.values) v = u(rng);
  return p;
}

} // namespace

TEST_CASE("mask bank") {
  const auto bank = default_mask_bank();
  REQUIRE(bank.size() == 5);
  CHECK(mask(MaskName::Level).coeffs == std::array<int, 5>{1, 4, 6, 4, 1});
  CHECK(mask(MaskName::Edge).coeffs == std::array<int, 5>{-1, -2, 0, 3, 1});
  CHECK(mask(MaskName::Spot).coeffs == std::array<int, 5>{-1, 0, 2, 0, -1});
  CHECK(mask(MaskName::Wave).coeffs == std::array<int, 5>{-1, 2, 0, -2, 1});
  CHECK(mask(MaskName::Ripple).coeffs == std::array<int, 5>{1, -4, 6, -4, 1});
  CHECK(mask(MaskName::Edge, classic_laws_bank()).coeffs == std::array<int, 5>{-1, -2, 0, 2, 1});
  CHECK(mask_label(MaskName::Ripple) == "R5R5");
}

TEST_CASE("build_kernel is the outer product") {
  const auto l5 = build_kernel(mask(MaskName::Level), mask(MaskName::Level));
  CHECK(l5.values[2][2] == 36);
  CHECK(l5.sum() == 256);
  CHECK(build_kernel(mask(MaskName::Ripple), mask(MaskName::Ripple)).sum() == 0);
  for (const auto& a : default_mask_bank())
    for (const auto& b : default_mask_bank()) {
      const auto k = build_kernel(a, b);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(k.values[i][j] == a.coeffs[i] * b.coeffs[j]);
    }
}

TEST_CASE("convolve") {
  std::mt19937_64 rng(11);

  SUBCASE("zero-sum kernel kills a constant image") {
    const GrayImage img(12, 9, 137);
    const auto out = convolve(img, build_kernel(mask(MaskName::Ripple), mask(MaskName::Ripple)));
    for (double v : out.values) CHECK(v == 0.0);
  }

  SUBCASE("impulse response stamps the kernel") {
    GrayImage img(9, 9, 0);
    img.at(4, 4) = 1;
    const auto k = build_kernel(mask(MaskName::Edge), mask(MaskName::Wave));
    for (auto border : {BorderPolicy::Reflect, BorderPolicy::Zero}) {
      const auto out = convolve(img, k, border);
      for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c) {
          const int i = r - 4 + 2;
          const int j = c - 4 + 2;
          const double want = (i >= 0 && i < 5 && j >= 0 && j < 5)
                                  ? k.values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                                  : 0.0;
          CHECK(out.at(r, c) == want);
        }
    }
  }

  SUBCASE("matches brute force on random images") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto img = oracle::random_image(16, 16, rng);
      for (const auto& a : default_mask_bank())
        for (const auto& b : default_mask_bank())
          for (auto border : {BorderPolicy::Reflect, BorderPolicy::Zero}) {
            const auto k = build_kernel(a, b);
            const auto got = convolve(img, k, border);
            const auto want = oracle::convolve(oracle::from_image(img), k, border);
            CHECK(oracle::max_rel_error(got.values, want.v) < 1e-12);
          }
    }
  }

  SUBCASE("non-square images") {
    const auto img = oracle::random_image(7, 13, rng);
    const auto k = build_kernel(mask(MaskName::Spot), mask(MaskName::Edge));
    const auto got = convolve(img, k);
    CHECK(got.width == 7);
    CHECK(got.height == 13);
    CHECK(oracle::max_rel_error(got.values,
                                oracle::convolve(oracle::from_image(img), k, BorderPolicy::Reflect).v) <
          1e-12);
  }

  SUBCASE("linearity") {
    const auto p1 = random_plane(20, 17, rng);
    const auto p2 = random_plane(20, 17, rng);
    const double alpha = 1.7, beta = -0.6;
    IntensityPlane mix(20, 17);
    for (std::size_t i = 0; i < mix.values.size(); ++i)
      mix.values[i] = alpha * p1.values[i] + beta * p2.values[i];
    const auto k = build_kernel(mask(MaskName::Wave), mask(MaskName::Ripple));
    const auto c1 = convolve(p1, k);
    const auto c2 = convolve(p2, k);
    const auto cm = convolve(mix, k);
    std::vector<double> combined(cm.values.size());
    for (std::size_t i = 0; i < combined.size(); ++i)
      combined[i] = alpha * c1.values[i] + beta * c2.values[i];
    CHECK(oracle::max_rel_error(cm.values, combined) < 1e-10);
  }

  SUBCASE("too small") {
    const auto k = build_kernel(mask(MaskName::Level), mask(MaskName::Level));
    CHECK_THROWS_AS(convolve(GrayImage(4, 10), k), ImageTooSmall);
    CHECK_THROWS_AS(convolve(GrayImage(10, 4), k), ImageTooSmall);
    CHECK_NOTHROW(convolve(GrayImage(5, 5), k));
  }
}

TEST_CASE("energy_map") {
  std::mt19937_64 rng(12);

  SUBCASE("constant response gives 225 |v| in the interior") {
    FilteredMap f(40, 40, -2.5);
    const auto e = energy_map(f);
    CHECK(e.at(20, 20) == doctest::Approx(225 * 2.5).epsilon(1e-15));
    CHECK(e.at(7, 7) == doctest::Approx(225 * 2.5).epsilon(1e-15));
    // Clipped corner window: 8 x 8 cells.
    CHECK(e.at(0, 0) == doctest::Approx(64 * 2.5).epsilon(1e-15));
  }

  SUBCASE("zero map") {
    const auto e = energy_map(FilteredMap(10, 10, 0.0));
    for (double v : e.values) CHECK(v == 0.0);
  }

  SUBCASE("matches the direct double sum") {
    for (int h : {0, 1, 3, 7}) {
      oracle::Grid g{20, 20, {}};
      std::normal_distribution<double> n(0, 50);
      for (int i = 0; i < 400; ++i) g.v.push_back(n(rng));
      const auto got = energy_map(filtered_from(g), h);
      CHECK(oracle::max_rel_error(got.values, oracle::energy(g, h).v) < 1e-12);
    }
  }

  SUBCASE("non-negative and positively homogeneous") {
    oracle::Grid g{23, 11, {}};
    std::normal_distribution<double> n(0, 5);
    for (int i = 0; i < 23 * 11; ++i) g.v.push_back(n(rng));
    const auto e = energy_map(filtered_from(g));
    for (double v : e.values) CHECK(v >= 0.0);
    oracle::Grid scaled = g;
    for (auto& v : scaled.v) v *= 4.0;
    const auto es = energy_map(filtered_from(scaled));
    for (std::size_t i = 0; i < e.values.size(); ++i) CHECK(es.values[i] == 4.0 * e.values[i]);
  }
}

TEST_CASE("otsu_threshold") {
  std::mt19937_64 rng(13);

  SUBCASE("two well separated groups") {
    std::vector<double> v(100, 50.0);
    std::fill(v.begin() + 50, v.end(), 200.0);
    const auto e = energy_from(10, 10, v);
    const auto t = otsu_threshold(e);
    REQUIRE(t.has_value());
    CHECK(*t >= 50.0);
    CHECK(*t < 200.0);
    const auto scan = oracle::otsu_scan(v, 256);
    CHECK(*t == otsu_cut(50.0, 200.0, 256, scan.best_k));
    // Every cut between the groups ties; the lowest wins.
    CHECK(scan.best_k == 0);
  }

  SUBCASE("constant map is degenerate") {
    CHECK_FALSE(otsu_threshold(energy_from(3, 3, std::vector<double>(9, 4.0))).has_value());
  }

  SUBCASE("agrees with the exhaustive scan") {
    for (int trial = 0; trial < 200; ++trial) {
      const int w = 3 + static_cast<int>(rng() % 12);
      const int h = 3 + static_cast<int>(rng() % 12);
      std::vector<double> v(static_cast<std::size_t>(w * h));
      std::gamma_distribution<double> g(0.5 + static_cast<double>(trial % 5), 10.0);
      for (auto& x : v) x = trial % 3 == 0 ? std::round(g(rng)) : g(rng);
      const int bins = trial % 4 == 0 ? 16 : 256;
      const auto t = otsu_threshold(energy_from(w, h, v), bins);
      const auto scan = oracle::otsu_scan(v, bins);
      REQUIRE(t.has_value() == !scan.degenerate);
      if (!t) continue;
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      CHECK(*t == otsu_cut(*lo, *hi, bins, scan.best_k));
    }
  }

  SUBCASE("segmentation is invariant under positive affine rescaling") {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> v(144);
      std::exponential_distribution<double> ex(0.1);
      for (auto& x : v) x = std::round(ex(rng));
      const auto e = energy_from(12, 12, v);
      std::vector<double> w(v);
      for (auto& x : w) x = 0.5 * x + 8.0;
      const auto e2 = energy_from(12, 12, w);
      const auto t1 = otsu_threshold(e);
      const auto t2 = otsu_threshold(e2);
      REQUIRE(t1.has_value() == t2.has_value());
      if (!t1) continue;
      CHECK(segment(e, *t1).values == segment(e2, *t2).values);
    }
  }
}

TEST_CASE("segment") {
  std::mt19937_64 rng(14);
  std::vector<double> v(64);
  std::uniform_real_distribution<double> u(0, 10);
  for (auto& x : v) x = u(rng);
  const auto e = energy_from(8, 8, v);
  const double mx = *std::max_element(v.begin(), v.end());
  const double mn = *std::min_element(v.begin(), v.end());
  for (auto b : segment(e, mx).values) CHECK(b == 0);
  for (auto b : segment(e, mn - 1).values) CHECK(b == 1);
  std::vector<double> sorted(v);
  std::nth_element(sorted.begin(), sorted.begin() + 32, sorted.end());
  const double t = sorted[32];
  const auto m = segment(e, t);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK((m.values[i] == 1) == (v[i] > t));
}

TEST_CASE("label_components") {
  SUBCASE("single pixel") {
    BinaryMask m(5, 5, 0);
    m.at(2, 3) = 1;
    const auto c = label_components(m);
    REQUIRE(c.count() == 1);
    CHECK(c.areas[0] == 1);
  }

  SUBCASE("diagonal neighbours") {
    BinaryMask m(4, 4, 0);
    m.at(1, 1) = 1;
    m.at(2, 2) = 1;
    CHECK(label_components(m, Connectivity::Eight).count() == 1);
    CHECK(label_components(m, Connectivity::Four).count() == 2);
  }

  SUBCASE("matches recursive flood fill") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 40; ++trial) {
      BinaryMask m(32, 32, 0);
      std::bernoulli_distribution on(0.2 + 0.015 * trial);
      for (auto& b : m.values) b = on(rng) ? 1 : 0;
      for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
        const auto got = label_components(m, conn);
        const auto want = oracle::flood_fill(m.values, 32, 32, static_cast<int>(conn));
        CHECK(got.areas == want.areas);
        CHECK(got.labels.values == want.label);
        const auto fg = static_cast<std::size_t>(std::count(m.values.begin(), m.values.end(), 1));
        CHECK(std::accumulate(got.areas.begin(), got.areas.end(), std::size_t{0}) == fg);
      }
    }
  }
}

TEST_CASE("texture_features") {
  std::mt19937_64 rng(16);
  std::vector<double> v(30);
  std::uniform_real_distribution<double> u(0, 5);
  for (auto& x : v) x = u(rng);
  const auto e = energy_from(6, 5, v);

  SUBCASE("full foreground") {
    const BinaryMask m(6, 5, 1);
    const auto f = texture_features(e, m, label_components(m), MaskName::Spot);
    CHECK(f.texture_count == 30);
    CHECK(f.mean_feature_area == 30.0);
    CHECK(f.mean_energy == doctest::Approx(std::accumulate(v.begin(), v.end(), 0.0) / 30).epsilon(1e-14));
  }

  SUBCASE("empty foreground") {
    const BinaryMask m(6, 5, 0);
    const auto f = texture_features(e, m, label_components(m), MaskName::Spot);
    CHECK(f.texture_count == 0);
    CHECK(f.mean_feature_area == 0.0);
    CHECK(f.mean_energy == 0.0);
  }

  SUBCASE("definitions on random masks") {
    for (int trial = 0; trial < 20; ++trial) {
      BinaryMask m(6, 5, 0);
      std::bernoulli_distribution on(0.4);
      for (auto& b : m.values) b = on(rng) ? 1 : 0;
      const auto comps = label_components(m);
      const auto f = texture_features(e, m, comps, MaskName::Wave, 2.5);
      std::size_t count = 0;
      double sum = 0;
      for (std::size_t i = 0; i < v.size(); ++i)
        if (m.values[i]) {
          ++count;
          sum += v[i];
        }
      CHECK(f.texture_count == count);
      if (count == 0) continue;
      CHECK(f.mean_energy == doctest::Approx(sum / static_cast<double>(count)).epsilon(1e-14));
      const double mean_area = std::accumulate(comps.areas.begin(), comps.areas.end(), 0.0) /
                               static_cast<double>(comps.count());
      CHECK(f.mean_feature_area == doctest::Approx(2.5 * mean_area).epsilon(1e-14));
      CHECK(f.mean_feature_area / 2.5 * static_cast<double>(comps.count()) ==
            doctest::Approx(static_cast<double>(count)).epsilon(1e-14));
    }
  }
}

TEST_CASE("extract_all") {
  std::mt19937_64 rng(17);

  SUBCASE("five masks, fixed column names") {
    const auto fv = extract_all(oracle::random_image(24, 24, rng), default_mask_bank());
    REQUIRE(fv.masks.size() == 5);
    const auto names = fv.column_names();
    REQUIRE(names.size() == 15);
    CHECK(names.front() == "L5L5_count");
    CHECK(names[5] == "E5E5_energy");
    CHECK(names.back() == "R5R5_energy");
    CHECK(fv.values().size() == 15);
  }

  SUBCASE("constant image zeroes the zero-sum masks") {
    const auto fv = extract_all(GrayImage(20, 20, 90), default_mask_bank());
    for (const auto& m : fv.masks) {
      if (m.mask == MaskName::Level || m.mask == MaskName::Edge) continue;
      CHECK(m.texture_count == 0);
      CHECK(m.mean_feature_area == 0.0);
      CHECK(m.mean_energy == 0.0);
    }
  }

  SUBCASE("ripple texture raises the ripple count") {
    GrayImage flat(64, 64, 128);
    flat.at(10, 10) = 129;
    GrayImage ripple(64, 64, 128);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c)
        if (r >= 16 && r < 48 && c >= 16 && c < 48)
          ripple.at(r, c) = static_cast<std::uint8_t>(128 + 100 * std::cos(3.14159265358979 * c));
    const auto f_flat = extract_all(flat, default_mask_bank());
    const auto f_rip = extract_all(ripple, default_mask_bank());
    CHECK(f_rip.masks[4].texture_count > f_flat.masks[4].texture_count);
  }

  SUBCASE("deterministic") {
    const auto img = oracle::random_image(30, 20, rng);
    ExtractOptions opt;
    opt.normalize_contrast = true;
    const auto a = extract_all(img, default_mask_bank(), opt);
    const auto b = extract_all(img, default_mask_bank(), opt);
    CHECK(a.values() == b.values());
  }

  SUBCASE("classic bank only changes the edge mask") {
    const auto img = oracle::random_image(32, 32, rng);
    const auto a = extract_all(img, default_mask_bank()).values();
    const auto b = extract_all(img, classic_laws_bank()).values();
    for (std::size_t i = 0; i < 15; ++i)
      if (i / 3 != 1) CHECK(a[i] == b[i]);
  }

  SUBCASE("too small") {
    CHECK_THROWS_AS(extract_all(GrayImage(4, 4), default_mask_bank()), ImageTooSmall);
  }
}
