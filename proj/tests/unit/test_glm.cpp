#include "ecoassoc/glm.hpp"
#include "ecoassoc/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ecoassoc;

TEST_CASE("Poisson GLM recovers a log-linear mean") {
  Rng rng(1);
  const int n = 4000;
  Matrix x(n, 1);
  Vector y(n);
  for (int k = 0; k < n; ++k) {
    x(k, 0) = uniform(rng, -1.0, 1.0);
    std::poisson_distribution<int> pois(std::exp(0.7 * x(k, 0) + 0.4));
    y(k) = pois(rng);
  }
  const GlmFit fit = fit_glm(glm_design(x), y, FamilyKind::poisson);
  CHECK(fit.converged);
  CHECK(fit.coef(0) == doctest::Approx(0.7).epsilon(0.08));
  CHECK(fit.coef(1) == doctest::Approx(0.4).epsilon(0.08));
}

TEST_CASE("GLM score vanishes at the fit") {
  Rng rng(2);
  const int n = 200;
  Matrix x(n, 2);
  Vector y(n);
  for (int k = 0; k < n; ++k) {
    x(k, 0) = uniform(rng, -1, 1);
    x(k, 1) = uniform(rng, -1, 1);
    y(k) = bernoulli(rng, sigmoid(x(k, 0) - 0.5 * x(k, 1))) ? 1.0 : 0.0;
  }
  const Matrix design = glm_design(x);
  GlmOptions opt;
  opt.ridge = 0.0;
  const GlmFit fit = fit_glm(design, y, FamilyKind::bernoulli, 0.0, opt);
  const Vector mu = (design * fit.coef).unaryExpr([](double e) { return sigmoid(e); });
  const Vector score = design.transpose() * (mu - y);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(glm_nll(design, y, fit.coef, FamilyKind::bernoulli, 0.0, 0.0) == doctest::Approx(fit.nll));
}

TEST_CASE("NB GLM estimates a finite dispersion") {
  Rng rng(3);
  const int n = 2000;
  Matrix x = Matrix::Zero(n, 1);
  Vector y(n);
  std::gamma_distribution<double> gam(2.0, 1.5);
  for (int k = 0; k < n; ++k) {
    std::poisson_distribution<int> pois(gam(rng));
    y(k) = pois(rng);
  }
  const GlmFit fit = fit_glm(glm_design(x), y, FamilyKind::negative_binomial);
  CHECK(std::exp(fit.log_dispersion) == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("habitat family follows the aggregation") {
  CHECK(habitat_family(AggregationMode::hierarchical, FamilyKind::zero_inflated_nb) == FamilyKind::bernoulli);
  CHECK(habitat_family(AggregationMode::additive, FamilyKind::poisson) == FamilyKind::poisson);
}
