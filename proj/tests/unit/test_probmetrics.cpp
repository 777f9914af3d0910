#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ltm/gradcheck.hpp"
#include "ltm/metrics.hpp"
#include "ltm/quadrature.hpp"
#include "support.hpp"

using namespace ltm;

namespace {

double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

StudentTParams constant_params(std::size_t rows, std::size_t cols, double mu, double sigma, double nu) {
  return {Tensor::full({rows, cols}, mu), Tensor::full({rows, cols}, sigma), Tensor::full({rows, cols}, nu)};
}

std::filesystem::path data_dir() {
  const char* env = std::getenv("LTM_TEST_DATA");
  return env ? std::filesystem::path(env) : std::filesystem::path("tests/data");
}

}  // namespace

TEST_CASE("student-t log density") {
  CHECK(studentt_logpdf(0.0, 0.0, 1.0, 1.0) == doctest::Approx(-std::log(std::numbers::pi)).epsilon(1e-14));
  CHECK(std::abs(studentt_logpdf(0.0, 0.0, 1.0, 1.0) + 1.144729885849) < 1e-12);
  for (double y : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
    const double gauss = -0.5 * y * y - 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(std::abs(studentt_logpdf(y, 0.0, 1.0, 1e6) - gauss) < 1e-4);
    for (double nu : {1.5, 4.0, 40.0}) {
      const double mu = 0.7, sigma = 2.5;
      CHECK(studentt_logpdf(y, mu, sigma, nu) ==
            doctest::Approx(studentt_logpdf((y - mu) / sigma, 0.0, 1.0, nu) - std::log(sigma)).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(studentt_logpdf(0.0, 0.0, 0.0, 3.0), DomainError);
  CHECK_THROWS_AS(studentt_logpdf(0.0, 0.0, 1.0, -1.0), DomainError);
  CHECK(studentt_cdf(0.0, 3.0) == 0.5);
  CHECK(studentt_pdf(0.0, 1.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("nll loss") {
  SUBCASE("single position Cauchy") {
    Tape tape;
    auto p = constant_params(1, 1, 0.0, 1.0, 1.0);
    auto loss = nll_loss(tape, p, Tensor({1, 1}, {0.0}), Tensor({1, 1}, {1.0}));
    CHECK(std::abs(loss.item() - 1.144729885849) < 1e-12);
  }
  SUBCASE("masked mean and all-masked error") {
    Tape tape;
    StudentTParams p{Tensor({1, 3}, {0, 0, 50}), Tensor::full({1, 3}, 1.0), Tensor::full({1, 3}, 3.0)};
    Tensor y({1, 3}, {0.5, -0.5, 0.0});
    auto loss = nll_loss(tape, p, y, Tensor({1, 3}, {1, 1, 0}));
    CHECK(loss.item() == doctest::Approx(-studentt_logpdf(0.5, 0, 1, 3)).epsilon(1e-14));
    CHECK_THROWS_AS(nll_loss(tape, p, y, Tensor::zeros({1, 3})), ContractError);
  }
  SUBCASE("invariant to permuting batch rows") {
    Rng rng(1);
    auto mu = ltm::test::random_tensor({3, 4}, rng, 1.0, false);
    auto y = ltm::test::random_tensor({3, 4}, rng, 1.0, false);
    StudentTParams p{mu, Tensor::full({3, 4}, 0.8), Tensor::full({3, 4}, 4.0)};
    Tape tape;
    const double a = nll_loss(tape, p, y, Tensor::full({3, 4}, 1.0)).item();
    auto rot = [](const Tensor& t) {
      auto v = ltm::test::values(t);
      std::rotate(v.begin(), v.begin() + 4, v.end());
      return Tensor({3, 4}, v);
    };
    StudentTParams q{rot(mu), p.sigma, p.nu};
    CHECK(nll_loss(tape, q, rot(y), Tensor::full({3, 4}, 1.0)).item() == doctest::Approx(a).epsilon(1e-15));
  }
  SUBCASE("gradient in mu vanishes at y = mu") {
    Tape tape;
    Tensor mu({1, 2}, {0.3, -1.0}, true);
    StudentTParams p{mu, Tensor::full({1, 2}, 1.3), Tensor::full({1, 2}, 5.0)};
    backward(nll_loss(tape, p, Tensor({1, 2}, {0.3, -1.0}), Tensor::full({1, 2}, 1.0)), tape);
    for (double g : mu.grad()) CHECK(std::abs(g) < 1e-15);
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(2);
    Tensor mu = ltm::test::random_tensor({2, 5}, rng);
    Tensor sigma = ltm::test::random_tensor({2, 5}, rng);
    Tensor nu = ltm::test::random_tensor({2, 5}, rng);
    for (double& v : sigma.mutable_data()) v = 0.5 + std::abs(v);
    for (double& v : nu.mutable_data()) v = 2.5 + 3.0 * std::abs(v);
    Tensor y = ltm::test::random_tensor({2, 5}, rng, 2.0, false);
    Tensor mask({2, 5}, {1, 1, 1, 0, 1, 1, 1, 1, 1, 0});
    auto loss = [&](Tape& t) { return nll_loss(t, StudentTParams{mu, sigma, nu}, y, mask); };
    CHECK(finite_diff_check(loss, {mu, sigma, nu}, 1e-5).max_rel_error < 1e-4);
  }
}

TEST_CASE("point mse") {
  Tensor y({2, 2}, {1, 2, 3, 4});
  Tensor ones = Tensor::full({2, 2}, 1.0);
  auto p = [](const Tensor& mu) { return StudentTParams{mu, Tensor::full({2, 2}, 1.0), Tensor::full({2, 2}, 3.0)}; };
  CHECK(point_mse(p(y), y, ones) == 0.0);
  CHECK(point_mse(p(Tensor({2, 2}, {2, 3, 4, 5})), y, ones) == 1.0);
  // Errors 1, -2, 0.5 on the unmasked positions.
  CHECK(point_mse(p(Tensor({2, 2}, {2, 0, 3.5, 100})), y, Tensor({2, 2}, {1, 1, 1, 0})) ==
        doctest::Approx((1.0 + 4.0 + 0.25) / 3.0).epsilon(1e-15));
}

TEST_CASE("analytic CRPS") {
  CHECK(std::abs(crps_studentt(0.0, 0.0, 1.0, 3.0) - 0.275664447711) < 1e-11);
  const double gauss0 = 2.0 / std::sqrt(2.0 * std::numbers::pi) - 1.0 / std::sqrt(std::numbers::pi);
  CHECK(std::abs(crps_gaussian(0.0, 0.0, 1.0) - gauss0) < 1e-15);
  CHECK(std::abs(gauss0 - 0.233695) < 1e-6);
  CHECK(std::abs(crps_studentt(0.0, 0.0, 1.0, 1e6) - gauss0) < 1e-4);
  for (double y : {-2.0, 0.3, 4.0}) CHECK(std::abs(crps_studentt(y, 0.0, 1.0, 1e6) - crps_gaussian(y, 0, 1)) < 1e-4);

  for (double y : {-3.0, 0.0, 0.2, 7.0}) CHECK(std::abs(crps_studentt(y, 0.5, 1e-9, 4.0) - std::abs(y - 0.5)) < 1e-7);

  for (double nu : {1.2, 2.5, 7.0, 100.0}) {
    for (double y : {-4.0, -0.3, 0.0, 2.0}) {
      const double mu = -0.4, sigma = 1.7;
      const double c = crps_studentt(y, mu, sigma, nu);
      CHECK(c > 0.0);
      CHECK(std::abs(c - sigma * crps_studentt((y - mu) / sigma, 0.0, 1.0, nu)) < 1e-10);
    }
  }
  CHECK_THROWS_AS(crps_studentt(0.0, 0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(crps_studentt(0.0, 0.0, -1.0, 3.0), DomainError);
}

TEST_CASE("analytic CRPS agrees with the quadrature oracle on a grid") {
  for (double nu : {2.5, 5.0, 30.0}) {
    for (double y = -5.0; y <= 5.0; y += 0.5) {
      const double q = crps_quadrature(y, [nu](double x) { return studentt_cdf(x, nu); }, -50.0, 50.0, 1e-9);
      CHECK(std::abs(q - crps_studentt(y, 0.0, 1.0, nu)) < 1e-6);
    }
  }
}

TEST_CASE("golden CRPS vectors") {
  std::ifstream in(data_dir() / "crps_golden.csv");
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# ltm-golden/1", 0) == 0);
  std::getline(in, line);
  CHECK(line == "nu,y,crps");
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    double nu, y, expect;
    char comma;
    ss >> nu >> comma >> y >> comma >> expect;
    CHECK(std::abs(crps_studentt(y, 0.0, 1.0, nu) - expect) < 1e-9);
    ++rows;
  }
  CHECK(rows == 30);
}

TEST_CASE("quadrature oracle") {
  auto step = [](double x) { return x >= 0.25 ? 1.0 : 0.0; };
  for (double y : {-2.0, 0.25, 1.0}) CHECK(std::abs(crps_quadrature(y, step, -10, 10, 1e-9) - std::abs(y - 0.25)) < 1e-8);
  CHECK(std::abs(crps_quadrature(0.0, gaussian_cdf, -10, 10, 1e-9) - 0.233695) < 1e-6);

  auto r = integrate([](double x) { return std::exp(-x); }, 0.0, 3.0, 1e-12);
  CHECK(std::abs(r.value - (1.0 - std::exp(-3.0))) < 1e-12);

  // 1 - F ~ x^(-1/2) makes the upper tail integral diverge like ln x, so extension never settles.
  auto fat = [](double x) { return x <= 1.0 ? 0.0 : 1.0 - 1.0 / std::sqrt(x); };
  try {
    crps_quadrature(2.0, fat, 0, 10, 1e-6);
    FAIL("expected QuadratureError");
  } catch (const QuadratureError& e) {
    CHECK(e.achieved_accuracy() > 1e-6);
  }
}

TEST_CASE("score accumulator is a flat mean over positions") {
  ScoreAccumulator acc;
  auto p1 = constant_params(1, 2, 0.0, 1.0, 3.0);
  acc.add(p1, Tensor({1, 2}, {1.0, 0.0}), Tensor({1, 2}, {1, 1}));
  auto p2 = constant_params(1, 4, 0.0, 1.0, 3.0);
  acc.add(p2, Tensor({1, 4}, {2.0, 0.0, 0.0, 9.0}), Tensor({1, 4}, {1, 1, 1, 0}));
  CHECK(acc.count() == 5);
  auto m = acc.mean();
  CHECK(m.mse == doctest::Approx((1.0 + 0 + 4.0 + 0 + 0) / 5.0).epsilon(1e-15));
  const double crps = (crps_studentt(1, 0, 1, 3) + 3 * crps_studentt(0, 0, 1, 3) + crps_studentt(2, 0, 1, 3)) / 5.0;
  CHECK(m.crps == doctest::Approx(crps).epsilon(1e-14));
  CHECK(m.crps >= 0.0);
  CHECK(m.reported_loglik() == m.nll + 2.0);
}
