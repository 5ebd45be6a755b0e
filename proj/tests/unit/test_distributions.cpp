#include "ecoassoc/distributions.hpp"
#include "ecoassoc/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace ecoassoc;

TEST_CASE("nll at reference points") {
  CHECK(nll(ResponseFamily::of(FamilyKind::bernoulli), 1.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(nll(ResponseFamily::of(FamilyKind::negative_binomial, 1.0), 0.0, 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(nll(ResponseFamily::of(FamilyKind::poisson), 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nll rejects values outside the support") {
  CHECK_THROWS_AS(nll(ResponseFamily::of(FamilyKind::poisson), -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(nll(ResponseFamily::of(FamilyKind::bernoulli), 2.0, 0.5), DomainError);
  CHECK_THROWS_AS(nll(ResponseFamily::of(FamilyKind::poisson), 1.5, 1.0), DomainError);
}

TEST_CASE("nll gradient at reference points") {
  CHECK(nll_gradient(ResponseFamily::of(FamilyKind::bernoulli), 1.0, 0.0) == doctest::Approx(-0.5));
  CHECK(nll_gradient(ResponseFamily::of(FamilyKind::poisson), 2.0, 0.0) == doctest::Approx(-1.0));
  CHECK(nll_gradient(ResponseFamily::of(FamilyKind::negative_binomial, 2.0), 3.0, 0.0) ==
        doctest::Approx(-4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("nll gradient matches central differences") {
  Rng rng = make_stream(3, "distributions");
  const double h = 1e-5;
  for (FamilyKind k : {FamilyKind::bernoulli, FamilyKind::poisson, FamilyKind::negative_binomial, FamilyKind::normal}) {
    for (int t = 0; t < 100; ++t) {
      const double eta = uniform(rng, -3.0, 3.0);
      double y = std::floor(uniform(rng, 0.0, 10.0));
      if (k == FamilyKind::bernoulli)
        y = bernoulli(rng, 0.5) ? 1.0 : 0.0;
      if (k == FamilyKind::normal)
        y = uniform(rng, -3.0, 3.0);
      const auto fam = ResponseFamily::of(k, uniform(rng, 0.5, 3.0));
      const double analytic = nll_gradient(fam, y, eta);
      const double fd =
          (nll(fam, y, inverse_link(k, eta + h)) - nll(fam, y, inverse_link(k, eta - h))) / (2.0 * h);
      CHECK(std::abs(analytic - fd) / std::max(1.0, std::abs(analytic)) < 1e-4);
    }
  }
}

TEST_CASE("eta_loss dispersion derivative matches central differences") {
  const double h = 1e-6;
  for (FamilyKind k : {FamilyKind::negative_binomial, FamilyKind::normal}) {
    const double y = 3.0, eta = 0.4, logd = 0.3;
    const double fd =
        (eta_loss(k, y, eta, std::exp(logd + h)).value - eta_loss(k, y, eta, std::exp(logd - h)).value) / (2.0 * h);
    CHECK(eta_loss(k, y, eta, std::exp(logd)).d_log_dispersion == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("nll is minimised at mean = y") {
  for (FamilyKind k : {FamilyKind::poisson, FamilyKind::normal}) {
    const double y = 4.0;
    const auto fam = ResponseFamily::of(k, 1.0);
    const double at = nll(fam, y, y);
    for (double m = 0.5; m < 10.0; m += 0.25)
      CHECK(nll(fam, y, m) >= at - 1e-12);
  }
}

TEST_CASE("zero-inflated NB") {
  CHECK(zinb_nll(1.0, 2.0, 1.5, 3.0) == doctest::Approx(nb_nll(3.0, 2.0, 1.5)).epsilon(1e-12));
  CHECK(zinb_nll(1.0, 2.0, 1.5, 0.0) == doctest::Approx(nb_nll(0.0, 2.0, 1.5)).epsilon(1e-12));
  CHECK(zinb_nll(0.0, 1.0, 1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(zinb_nll(0.5, 1.0, 1.0, 0.0) == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(zinb_nll(0.3, 2.0, 1.5, 4.0) == doctest::Approx(-std::log(0.3) + nb_nll(4.0, 2.0, 1.5)).epsilon(1e-12));
}

TEST_CASE("zero-inflated NB derivatives match central differences") {
  const double h = 1e-6;
  for (double y : {0.0, 1.0, 5.0}) {
    const double ep = 0.3, ea = 0.7, th = 1.7;
    const ZinbLoss l = zinb_loss(y, ep, ea, th);
    CHECK(l.value == doctest::Approx(zinb_nll(sigmoid(ep), std::exp(ea), th, y)).epsilon(1e-12));
    CHECK(l.d_eta_presence ==
          doctest::Approx((zinb_loss(y, ep + h, ea, th).value - zinb_loss(y, ep - h, ea, th).value) / (2 * h)).epsilon(1e-6));
    CHECK(l.d_eta_abundance ==
          doctest::Approx((zinb_loss(y, ep, ea + h, th).value - zinb_loss(y, ep, ea - h, th).value) / (2 * h)).epsilon(1e-6));
    CHECK(l.d_log_theta == doctest::Approx((zinb_loss(y, ep, ea, th * std::exp(h)).value -
                                            zinb_loss(y, ep, ea, th * std::exp(-h)).value) /
                                           (2 * h))
                               .epsilon(1e-6));
  }
}

TEST_CASE("poisson deviance") {
  const std::vector<double> y{1.0, 3.0, 7.0};
  CHECK(poisson_deviance(y, y) == doctest::Approx(0.0));
  CHECK(poisson_deviance(std::vector<double>{0.0}, std::vector<double>{1.0}) == doctest::Approx(2.0));
  CHECK(poisson_deviance(std::vector<double>{2.0}, std::vector<double>{1.0}) ==
        doctest::Approx(2.0 * (2.0 * std::log(2.0) - 1.0)).epsilon(1e-12));
}

TEST_CASE("guards keep extreme predictors finite") {
  CHECK(std::isfinite(inverse_link(FamilyKind::poisson, 1e6)));
  CHECK(inverse_link(FamilyKind::bernoulli, -1e6) > 0.0);
  CHECK(std::isfinite(softplus(800.0)));
  CHECK(softplus(-800.0) >= 0.0);
}

TEST_CASE("family names round-trip") {
  for (FamilyKind k : {FamilyKind::bernoulli, FamilyKind::poisson, FamilyKind::negative_binomial,
                       FamilyKind::zero_inflated_nb, FamilyKind::normal})
    CHECK(parse_family(to_string(k)) == k);
  CHECK_THROWS(parse_family("gamma"));
}
