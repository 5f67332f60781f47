#include <doctest.h>

#include <cmath>
#include <random>

#include "leakdet/error.hpp"
#include "leakdet/svm.hpp"
#include "svm_fixtures.hpp"

using namespace leakdet;

namespace {

std::vector<std::uint8_t> to01(const std::vector<int>& y) {
  std::vector<std::uint8_t> s;
  for (int v : y) s.push_back(v > 0 ? 1 : 0);
  return s;
}

}  // namespace

TEST_CASE("standardizer") {
  Matrix x(3, 2, {2, 5, 4, 5, 6, 5});
  const auto s = fit_standardizer(x);
  const auto z = s.apply(x);
  CHECK(z(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z(1, 0) == doctest::Approx(0.0));
  CHECK(z(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
  for (std::size_t i = 0; i < 3; ++i) CHECK(z(i, 1) == 0);
  CHECK(s.std[1] == 0);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(3.0, 7.0);
  Matrix r(50, 4);
  for (auto& v : r.data) v = g(rng);
  const auto zr = fit_standardizer(r).apply(r);
  for (std::size_t j = 0; j < 4; ++j) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 50; ++i) m += zr(i, j) / 50;
    for (std::size_t i = 0; i < 50; ++i) v += (zr(i, j) - m) * (zr(i, j) - m) / 50;
    CHECK(std::fabs(m) < 1e-9);
    CHECK(v == doctest::Approx(1.0));
  }
}

TEST_CASE("kernels") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  const KernelSpec rbf{KernelKind::rbf, 0.37};
  const KernelSpec lin{KernelKind::linear, 1};
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    CHECK(rbf(a, a) == 1.0);
    CHECK(rbf(a, b) == rbf(b, a));
    CHECK(lin(a, b) == lin(b, a));
  }
  CHECK_THROWS_AS((KernelSpec{KernelKind::rbf, 0.0}.validate()), Error);
  CHECK(parse_kernel("rbf") == KernelKind::rbf);
  CHECK_THROWS_AS(parse_kernel("poly"), Error);
}

TEST_CASE("gram matrix is symmetric and positive semidefinite") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix x(30, 3);
  for (auto& v : x.data) v = g(rng);
  for (const KernelSpec k : {KernelSpec{KernelKind::linear, 1}, KernelSpec{KernelKind::rbf, 0.5}}) {
    const auto gm = gram_matrix(x, k);
    CHECK(gm.data == gram_matrix_serial(x, k).data);
    for (std::size_t i = 0; i < 30; ++i) {
      for (std::size_t j = 0; j < 30; ++j) CHECK(gm(i, j) == gm(j, i));
    }
    // Smallest eigenvalue via Cholesky with a shift: K + 1e-8 I must factor.
    Matrix l(30, 30);
    bool ok = true;
    for (std::size_t i = 0; i < 30 && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = gm(i, j) + (i == j ? 1e-8 : 0.0);
        for (std::size_t k2 = 0; k2 < j; ++k2) s -= l(i, k2) * l(j, k2);
        if (i == j) {
          if (s <= 0.0) {
            ok = false;
            break;
          }
          l(i, i) = std::sqrt(s);
        } else {
          l(i, j) = s / l(j, j);
        }
      }
    }
    CHECK(ok);
  }
}

TEST_CASE("symmetric pair puts the boundary at zero") {
  Matrix x(2, 1, {-1, 1});
  const std::vector<std::uint8_t> y{0, 1};
  TrainOptions o;
  o.C = 1000;
  const auto m = train(x, y, o);
  CHECK(std::fabs(decision_function(m, std::vector<double>{0.0})) < 1e-9);
  CHECK(predict(m, std::vector<double>{0.5}) == 1);
  CHECK(predict(m, std::vector<double>{-0.5}) == 0);
}

TEST_CASE("ties go to class 0") {
  SvmModel m;
  m.standardizer.mean = {0.0};
  m.standardizer.std = {1.0};
  m.support_vectors = Matrix(0, 1);
  m.bias = 0.0;
  CHECK(predict(m, std::vector<double>{3.0}) == 0);
}

TEST_CASE("xor with an rbf kernel") {
  Matrix x(4, 2, {0, 0, 1, 1, 0, 1, 1, 0});
  const std::vector<std::uint8_t> y{0, 0, 1, 1};
  TrainOptions o;
  o.C = 1000;
  o.kernel = {KernelKind::rbf, 1.0};
  const auto m = train(x, y, o);
  CHECK(predict_all(m, x) == y);
}

TEST_CASE("dual objective matches the primal optimum") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = fixtures::random_problem(seed);
    const auto gm = gram_matrix(fixtures::to_matrix(p), {KernelKind::linear, 1});
    const auto sol = smo_solve(gm, p.y, p.C, {1e-8, 10'000'000});
    REQUIRE(sol.converged);
    const double primal = oracle::primal_optimum(p, 10.0);
    CHECK(std::fabs(sol.dual_objective - primal) <= 1e-3);
    double s = 0;
    for (std::size_t i = 0; i < p.y.size(); ++i) s += sol.alpha[i] * p.y[i];
    CHECK(std::fabs(s) <= 1e-6);
  }
}

TEST_CASE("solutions satisfy KKT at the default tolerance") {
  for (std::uint64_t seed = 10; seed < 35; ++seed) {
    const auto p = fixtures::random_problem(seed);
    const auto gm = gram_matrix(fixtures::to_matrix(p), {KernelKind::linear, 1});
    const auto sol = smo_solve(gm, p.y, p.C);
    const auto c = fixtures::check_dual(gm, p.y, p.C, sol, 1e-3);
    CHECK(std::fabs(c.sum_alpha_y) <= 1e-6);
    CHECK(c.box_ok);
    CHECK(c.kkt_fraction >= 0.99);
  }
}

TEST_CASE("kernel and primal forms agree for linear models") {
  const auto p = fixtures::random_problem(40, 60);
  const auto x = fixtures::to_matrix(p);
  TrainOptions o;
  const auto m = train(x, to01(p.y), o);
  const auto w = m.primal_weights();
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::vector<double> v{g(rng), g(rng)};
    std::vector<double> z(2);
    m.standardizer.apply_row(v, z);
    const double primal = w[0] * z[0] + w[1] * z[1] + m.bias;
    CHECK(std::fabs(decision_function(m, v) - primal) <= 1e-10);
  }
}

TEST_CASE("duplicating a point keeps the separating direction") {
  oracle::Problem2D p;
  p.C = 1e6;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const int y = i % 2 ? 1 : -1;
    p.x.push_back({u(rng) + 2.5 * y, u(rng) + 1.0 * y});
    p.y.push_back(y);
  }
  auto weights = [](const oracle::Problem2D& q) {
    const auto gm = gram_matrix(fixtures::to_matrix(q), {KernelKind::linear, 1});
    const auto sol = smo_solve(gm, q.y, q.C, {1e-10, 10'000'000});
    std::array<double, 2> w{0, 0};
    for (std::size_t i = 0; i < q.y.size(); ++i) {
      w[0] += sol.alpha[i] * q.y[i] * q.x[i][0];
      w[1] += sol.alpha[i] * q.y[i] * q.x[i][1];
    }
    return w;
  };
  const auto w0 = weights(p);
  for (std::size_t dup : {0u, 7u, 12u}) {
    auto q = p;
    q.x.push_back(p.x[dup]);
    q.y.push_back(p.y[dup]);
    const auto w1 = weights(q);
    const double cosang = (w0[0] * w1[0] + w0[1] * w1[1]) /
                          (std::hypot(w0[0], w0[1]) * std::hypot(w1[0], w1[1]));
    CHECK(1.0 - cosang <= 1e-6);
  }
}

TEST_CASE("training errors") {
  Matrix x(3, 1, {1, 2, 3});
  CHECK_THROWS_AS(train(x, std::vector<std::uint8_t>{1, 1, 1}, {}), Error);
  Matrix bad(2, 1, {1, std::nan("")});
  CHECK_THROWS_AS(train(bad, std::vector<std::uint8_t>{0, 1}, {}), Error);
  TrainOptions o;
  o.C = 0;
  CHECK_THROWS_AS(train(x, std::vector<std::uint8_t>{0, 1, 1}, o), Error);
  const auto m = train(x, std::vector<std::uint8_t>{0, 1, 1}, {});
  CHECK_THROWS_AS(decision_function(m, std::vector<double>{1, 2}), Error);
}

TEST_CASE("model round trip is bit exact") {
  std::mt19937_64 rng(50);
  std::normal_distribution<double> g;
  Matrix x(80, 5);
  std::vector<std::uint8_t> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    y[i] = i % 3 == 0;
    for (std::size_t j = 0; j < 5; ++j) x(i, j) = g(rng) + (y[i] ? 0.8 : 0.0);
  }
  TrainOptions o;
  o.kernel = {KernelKind::rbf, 0.1};
  o.C = 10;
  auto m = train(x, y, o, {"a", "b", "c", "d", "e"});
  PipelineMeta meta;
  meta.banding = {2000, Metric::mean};
  meta.max_freq_hz = 65536;
  meta.pair = normalize_pair(Band{0, 2000}, Band{2000, 4000});
  meta.edges.bands = {meta.pair.first, meta.pair.second};
  meta.edges.edges = {{0.1, 0.2, 0.3, 0.4}, {1, 2, 3, 4}};
  m.meta = meta;

  const auto text = format_model(m);
  CHECK(text.rfind("LEAKDET-SVM 1\n", 0) == 0);
  CHECK(text.find("meta.band_pair_name band_0_2k_2k_4k\n") != std::string::npos);
  const auto back = parse_model(text);
  CHECK(format_model(back) == text);
  CHECK(back.meta == m.meta);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v(5);
    for (auto& e : v) e = 2.0 * g(rng);
    CHECK(decision_function(back, v) == decision_function(m, v));
    CHECK(predict(back, v) == predict(m, v));
  }

  CHECK_THROWS_AS(parse_model("NOT-A-MODEL 1\n"), Error);
  std::string wrong_version = text;
  wrong_version.replace(0, 13, "LEAKDET-SVM 9");
  CHECK_THROWS_AS(parse_model(wrong_version), Error);
  CHECK_THROWS_AS(parse_model(text.substr(0, text.size() / 2)), Error);
}

TEST_CASE("stored vectors all carry weight") {
  const auto p = fixtures::random_problem(60);
  const auto m = train(fixtures::to_matrix(p), to01(p.y), {});
  double s = 0;
  for (double c : m.dual_coefs) {
    CHECK(c != 0.0);
    CHECK(std::fabs(c) <= m.C);
    s += c;
  }
  CHECK(std::fabs(s) <= 1e-6);
}
