#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "leakdet/error.hpp"
#include "leakdet/banding.hpp"
#include "leakdet/stats.hpp"
#include "leakdet/synth.hpp"

using namespace leakdet;

namespace {

// Sort-and-interpolate quantile, written independently of stats::quantile.
double naive_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Spectrogram random_spec(std::size_t bins, std::size_t secs, std::uint64_t seed,
                        double max_freq = kMaxFreqHz) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> d(1.0);
  std::vector<double> v(bins * secs);
  for (auto& x : v) x = d(rng);
  return Spectrogram(bins, secs, std::move(v), max_freq);
}

BandedSeries from_rows(std::vector<std::vector<double>> rows) {
  BandedSeries b;
  b.duration_s = rows[0].size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.bands.push_back({1000.0 * i, 1000.0 * (i + 1)});
    b.values.insert(b.values.end(), rows[i].begin(), rows[i].end());
  }
  b.config = {1000, Metric::mean};
  return b;
}

}  // namespace

TEST_CASE("band layout") {
  const auto b5 = band_layout(65536, 5000);
  REQUIRE(b5.size() == 14);
  CHECK(b5.back().lo_hz == 65000);
  CHECK(b5.back().hi_hz == 65536);
  CHECK(band_layout(65536, 1000).size() == 66);
  CHECK(band_layout(65536, 2000).size() == 33);
  CHECK(b5[2].label() == "10k_15k");
  CHECK(b5.back().label() == "65k_65536");
  CHECK(Band{0, 2000}.label() == "0_2k");
}

TEST_CASE("granularity validation") {
  CHECK_THROWS_AS((BandingConfig{1500, Metric::mean}.validate()), Error);
  CHECK_NOTHROW((BandingConfig{5000, Metric::iqr}.validate()));
  CHECK(parse_metric("median") == Metric::median);
  CHECK_THROWS_AS(parse_metric("max"), Error);
}

TEST_CASE("band metric on four cells") {
  std::vector<double> cells{4, 1, 3, 2};
  CHECK(band_metric(cells, Metric::mean) == doctest::Approx(2.5));
  cells = {4, 1, 3, 2};
  CHECK(band_metric(cells, Metric::median) == doctest::Approx(2.5));
  cells = {4, 1, 3, 2};
  CHECK(band_metric(cells, Metric::iqr) == doctest::Approx(1.5));
  CHECK(naive_quantile({1, 2, 3, 4}, 0.75) - naive_quantile({1, 2, 3, 4}, 0.25) == 1.5);
}

TEST_CASE("quantiles match the naive routine") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(1 + rng() % 40);
    for (auto& x : v) x = g(rng);
    for (double p : {0.0, 0.05, 0.25, 0.5, 0.75, 0.99, 1.0}) {
      CHECK(stats::quantile(v, p) == doctest::Approx(naive_quantile(v, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant matrix") {
  const Spectrogram s(500, 4, std::vector<double>(2000, 3.25));
  for (Metric m : kMetrics) {
    const auto b = aggregate(s, {2000, m});
    for (double v : b.values) CHECK(v == doctest::Approx(m == Metric::iqr ? 0.0 : 3.25));
  }
}

TEST_CASE("aggregation matches a direct evaluation") {
  const auto s = random_spec(300, 6, 12);
  for (int g : kGranularities) {
    for (Metric m : kMetrics) {
      const auto b = aggregate(s, {g, m});
      REQUIRE(b.bands.size() == band_layout(s.max_freq_hz(), g).size());
      for (std::size_t bi = 0; bi < b.bands.size(); ++bi) {
        for (std::size_t t = 0; t < s.duration_s(); ++t) {
          std::vector<double> cells;
          for (std::size_t k = 0; k < s.n_bins(); ++k) {
            const double f = s.bin_center_hz(k);
            if (f >= b.bands[bi].lo_hz && f < b.bands[bi].hi_hz) cells.push_back(s.at(k, t));
          }
          double want = 0;
          if (m == Metric::mean) {
            for (double c : cells) want += c / static_cast<double>(cells.size());
          } else if (m == Metric::median) {
            want = naive_quantile(cells, 0.5);
          } else {
            want = naive_quantile(cells, 0.75) - naive_quantile(cells, 0.25);
          }
          CHECK(b.series(bi)[t] == doctest::Approx(want).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("parallel aggregation equals serial") {
  const auto s = random_spec(1000, 30, 13);
  for (Metric m : kMetrics) {
    const auto a = aggregate(s, {1000, m});
    const auto b = aggregate_serial(s, {1000, m});
    CHECK(a.values == b.values);
  }
}

TEST_CASE("bands partition the bins") {
  // Every bin center lands in exactly one band.
  const auto s = random_spec(777, 3, 14);
  for (int g : kGranularities) {
    const auto layout = band_layout(s.max_freq_hz(), g);
    for (std::size_t k = 0; k < s.n_bins(); ++k) {
      const double f = s.bin_center_hz(k);
      const auto hits = std::count_if(layout.begin(), layout.end(), [&](const Band& b) {
        return f >= b.lo_hz && f < b.hi_hz;
      });
      CHECK(hits == 1);
    }
  }
}

TEST_CASE("a band with no bins is rejected") {
  const Spectrogram s(3, 2, std::vector<double>(6, 1.0));
  CHECK_THROWS_AS(aggregate(s, {1000, Metric::mean}), Error);
}

TEST_CASE("ranking by absolute correlation") {
  std::vector<double> labels_d{0, 0, 1, 1, 0, 1, 0, 0, 1, 1};
  std::vector<std::uint8_t> labels(labels_d.begin(), labels_d.end());
  std::vector<double> noisy = labels_d;
  noisy[0] = 0.5;
  std::vector<double> inverse;
  for (double v : labels_d) inverse.push_back(1.0 - 0.9 * v);
  const auto b = from_rows({noisy, labels_d, std::vector<double>(10, 2.0), inverse});
  const auto r = rank_bands(b, labels);
  REQUIRE(r.entries.size() == 3);
  // Bands 1 and 3 tie at |r| = 1 up to rounding, so only the pair is pinned.
  const bool direct_first = r.entries[0].band == b.bands[1];
  CHECK(r.entries[direct_first ? 0 : 1].band == b.bands[1]);
  CHECK(r.entries[direct_first ? 0 : 1].r == doctest::Approx(1.0));
  CHECK(r.entries[direct_first ? 1 : 0].band == b.bands[3]);
  CHECK(r.entries[direct_first ? 1 : 0].r == doctest::Approx(-1.0));
  CHECK(r.entries[0].abs_rank == 1);
  CHECK(r.entries[2].band == b.bands[0]);
  REQUIRE(r.zero_variance.size() == 1);
  CHECK(r.zero_variance[0] == b.bands[2]);

  const auto top = select_top2(r);
  CHECK(top.first == b.bands[1]);
  CHECK(top.second == b.bands[3]);

  std::vector<std::uint8_t> one_class(10, 1);
  CHECK_THROWS_AS(rank_bands(b, one_class), Error);
}

TEST_CASE("pearson matches the direct formula") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin(0.4);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(50), y(50);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = coin(rng);
    if (stats::is_constant(y)) continue;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      mx += x[i] / 50;
      my += y[i] / 50;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    const double want = sxy / (std::sqrt(sxx / 50) * std::sqrt(syy / 50) * 50);
    CHECK(std::fabs(stats::pearson(x, y) - want) < 1e-12);
  }
}

TEST_CASE("correlation is invariant under positive affine maps") {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> a(0.1, 10), c(-5, 5);
  std::vector<double> x(60), y(60);
  for (auto& v : x) v = g(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3 == 0 ? 1.0 : 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const double s = a(rng), t = c(rng);
    std::vector<double> z;
    for (double v : x) z.push_back(s * v + t);
    CHECK(stats::pearson(z, y) == doctest::Approx(stats::pearson(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("pairs") {
  const auto p = normalize_pair(Band{2000, 3000}, Band{1000, 2000});
  CHECK(p.first == Band{1000, 2000});
  CHECK(p.second == Band{2000, 3000});
  CHECK(p.name() == "band_1k_2k_2k_3k");
  CHECK_THROWS_AS(normalize_pair(Band{0, 1000}, Band{0, 1000}), Error);

  const auto b = from_rows({{1, 2}, {3, 4}, {5, 6}});
  CHECK(select_explicit(b, Band{2000, 3000}, Band{0, 1000}).first == Band{0, 1000});
  CHECK_THROWS_AS(select_explicit(b, Band{9000, 10000}, Band{0, 1000}), Error);

  const auto r = restrict_to(b, normalize_pair(Band{2000, 3000}, Band{0, 1000}));
  REQUIRE(r.bands.size() == 2);
  CHECK(r.series(1)[0] == 5);
}

TEST_CASE("candidate pairs from the top bands") {
  BandRanking r;
  for (int i = 0; i < 7; ++i) {
    r.entries.push_back({Band{1000.0 * i, 1000.0 * (i + 1)}, 0.9 - 0.1 * i, std::size_t(i + 1)});
  }
  const auto pairs = candidate_pairs(r, 5);
  CHECK(pairs.size() == 10);
  for (const auto& p : pairs) {
    CHECK(p.first.lo_hz < p.second.lo_hz);
    CHECK(p.second.lo_hz < 5000);
  }
  CHECK(candidate_pairs(r, 2).size() == 1);
}

TEST_CASE("leak band ranks above process band on the preset") {
  auto cfg = synth::table1_preset(synth::Preset::leak_process, 5);
  cfg.n_bins = 1000;
  const auto d = synth::generate(cfg);
  const auto labels = expand_labels(d.annotation, d.spectrogram.duration_s());
  const auto b = aggregate(d.spectrogram, {1000, Metric::mean});
  const auto r = rank_bands(b, labels, 0, 1857);
  CHECK(r.entries[0].band.hi_hz <= 4000);
  const auto csv = format_ranking_csv(r);
  CHECK(csv.rfind("band_lo_hz,band_hi_hz,r,abs_rank\n", 0) == 0);
}
