#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cocycle/certify.hpp"
#include "cocycle/stats.hpp"
#include "support.hpp"

using namespace cocycle;

namespace {

const SeedPath kSeed{11, experiment_id("certify"), 0};

PairSearchConfig small_search(int mc = 2000) {
  PairSearchConfig s;
  s.grid_size = 8;
  s.refine_rounds = 2;
  s.mc_per_pair = mc;
  s.validate_top = 4;
  return s;
}

void expect_consistent(const CertificateReport& r) {
  EXPECT_LE(r.ci_low, r.estimate) << r.condition;
  EXPECT_LE(r.estimate, r.ci_high) << r.condition;
  if (r.verdict == Verdict::Certified) {
    EXPECT_GT(r.margin, 0.0);
    EXPECT_LT(r.ci_high, r.threshold);
  }
  if (r.verdict == Verdict::Refuted) EXPECT_GE(r.ci_low, r.threshold);
}

EnsembleSpec svd_family(NormLaw sigma1, AngleLaw right = {}, bool unimodular = true, double gap = 4.0) {
  EnsembleSpec s;
  s.family = Family::SvdStructured;
  SvdParams p;
  p.sigma1 = sigma1;
  p.right_angle = right;
  p.unimodular = unimodular;
  p.gap = gap;
  s.params = p;
  s.validate();
  return s;
}

EnsembleSpec contracting(double scale, Matrix m = {}, ContractingParams::Orthogonal o = ContractingParams::Orthogonal::Haar) {
  EnsembleSpec s;
  s.family = Family::ContractingNorm;
  ContractingParams p;
  p.scale = scale;
  p.matrix = std::move(m);
  p.orthogonal = o;
  s.params = p;
  s.validate();
  return s;
}

EnsembleSpec two_state_chain() {
  EnsembleSpec s;
  s.family = Family::MarkovChain;
  MarkovParams p;
  p.modes = {{4.0, MarkovMode::Input::Uniform, 0.0}, {1.2, MarkovMode::Input::Aligned, 0.0}};
  p.transition = {{0.0, 1.0}, {1.0, 0.0}};
  p.initial = {0.5, 0.5};
  s.params = p;
  s.validate();
  return s;
}

double sine_distance(const Vector& x, const Vector& y) {
  return projective_distance(Direction(x), Direction(y));
}

}  // namespace

TEST(CBound, Examples) {
  testing_support::Fixtures fx(1);
  const SquareMatrix a(fx.matrix(3));
  EXPECT_EQ(c_bound(a, a), 0.0);
  EXPECT_EQ(c_tilde(a, a), 0.0);
  const SquareMatrix i = SquareMatrix::identity(2);
  const SquareMatrix two = SquareMatrix::diagonal({2.0, 2.0});
  // (||I|| + ||2I||) ||I - 2I|| (1/1 + 4/(1*4))
  EXPECT_NEAR(c_bound(i, two), 6.0, 1e-12);
  EXPECT_NEAR(c_tilde(i, two), 6.0, 1e-12);
  EXPECT_THROW(c_bound(i, SquareMatrix::identity(3)), DomainError);
}

TEST(CBound, FormulaOracleAndTildeAgreement) {
  testing_support::Fixtures fx(2);
  for (int t = 0; t < 10000; ++t) {
    const int d = 2 + t % 3;
    const Matrix a = fx.matrix(d), b = fx.matrix(d);
    Eigen::JacobiSVD<Matrix> sa(a), sb(b), sd(a - b);
    const double na = sa.singularValues()(0), nb = sb.singularValues()(0);
    const double ma = sa.singularValues()(d - 1), mb = sb.singularValues()(d - 1);
    const double oracle = (na + nb) * sd.singularValues()(0) * (1.0 / (ma * ma) + nb * nb / (ma * ma * mb * mb));
    const double cb = c_bound(SquareMatrix(a), SquareMatrix(b));
    const double ct = c_tilde(SquareMatrix(a), SquareMatrix(b));
    ASSERT_NEAR(cb, oracle, 1e-9 * oracle);
    ASSERT_GE(ct, cb * (1 - 1e-12));
    ASSERT_NEAR(ct, cb, 1e-9 * cb);
  }
}

TEST(CBound, LemmaInequalityWitness) {
  testing_support::Fixtures fx(3);
  int checked = 0;
  double worst = std::numeric_limits<double>::infinity();
  while (checked < 10000) {
    const int d = 2 + checked % 3;
    const Matrix a = fx.matrix(d), b = fx.matrix(d);
    const Vector x = fx.unit(d), y = fx.unit(d);
    const double dxy = sine_distance(x, y);
    if (dxy < 1e-4) continue;
    const double lhs = sine_distance(a * x, a * y) / dxy;
    const double rhs = sine_distance(b * x, b * y) / dxy;
    const SquareMatrix A(a), B(b);
    worst = std::min(worst, c_bound(A, B) + rhs - lhs);
    worst = std::min(worst, c_tilde(A, B) + rhs - lhs);
    ++checked;
  }
  EXPECT_GE(worst, -1e-9);
}

TEST(LogContraction, IidRotationCertified) {
  const CertificateReport r = estimate_log_contraction(make_rotation_spec(2.0), 1, 8, small_search(), kSeed);
  expect_consistent(r);
  EXPECT_EQ(r.verdict, Verdict::Certified);
  EXPECT_EQ(r.condition, "log_contraction");
  // Brute-force fixture from a 256-pair grid with 1e4 samples per pair.
  EXPECT_NEAR(r.estimate, -3.57, 0.25);
  EXPECT_NEAR(r.extra["delta"].get<double>(), -r.ci_high, 0.0);
}

TEST(LogContraction, IsometriesAreNeverCertified) {
  const CertificateReport r =
      estimate_log_contraction(make_fixed_spec(SquareMatrix::rotation(0.7).values()), 1, 4, small_search(200), kSeed);
  expect_consistent(r);
  EXPECT_NEAR(r.estimate, 0.0, 1e-9);
  EXPECT_NE(r.verdict, Verdict::Certified);
  const CertificateReport h = estimate_holder_contraction(make_fixed_spec(SquareMatrix::rotation(0.7).values()), 1, 4,
                                                          0.5, small_search(200), kSeed);
  EXPECT_NEAR(h.estimate, 1.0, 1e-9);
  EXPECT_NE(h.verdict, Verdict::Certified);
}

TEST(LogContraction, ScaleDoesNotChangeTheProjectiveAction) {
  const Matrix m = SquareMatrix::diagonal({3.0, 1.0 / 3.0}).values();
  const CertificateReport a = estimate_log_contraction(contracting(0.5, m), 1, 2, small_search(), kSeed);
  const CertificateReport b = estimate_log_contraction(contracting(1.0, m), 1, 2, small_search(), kSeed);
  EXPECT_NEAR(a.estimate, b.estimate, 1e-9);
  EXPECT_EQ(a.verdict, b.verdict);
}

TEST(LogContraction, BlockSubadditivity) {
  const EnsembleSpec spec = make_rotation_spec(2.0);
  const CertificateReport one = estimate_log_contraction(spec, 1, 2, small_search(), kSeed);
  const CertificateReport two = estimate_log_contraction(spec, 1, 4, small_search(), kSeed);
  EXPECT_LE(two.estimate, 2.0 * one.estimate + (one.ci_high - one.ci_low) + (two.ci_high - two.ci_low));
}

TEST(LogContraction, RejectsBadArguments) {
  EXPECT_THROW(estimate_log_contraction(make_rotation_spec(2.0), 1, 0, small_search(), kSeed), DomainError);
  PairSearchConfig bad = small_search();
  bad.mc_per_pair = 0;
  EXPECT_THROW(estimate_log_contraction(make_rotation_spec(2.0), 1, 1, bad, kSeed), DomainError);
}

TEST(HolderContraction, CertifiedWithJensenCheck) {
  const CertificateReport r = estimate_holder_contraction(make_rotation_spec(2.0), 1, 8, 0.5, small_search(), kSeed);
  expect_consistent(r);
  EXPECT_EQ(r.verdict, Verdict::Certified);
  EXPECT_LT(r.estimate, 1.0);
  EXPECT_TRUE(r.extra["jensen_ok"].get<bool>());
  EXPECT_GE(r.extra["jensen_min_slack"].get<double>(), -1e-12);
  EXPECT_THROW(estimate_holder_contraction(make_rotation_spec(2.0), 1, 8, 1.5, small_search(), kSeed), DomainError);
}

TEST(Decay, ScaledOrthogonalCancels) {
  const CertificateReport r = check_decay_condition(contracting(0.9), 1, 4, 200, kSeed);
  expect_consistent(r);
  EXPECT_NEAR(r.estimate, 0.0, 1e-12);
  EXPECT_EQ(r.verdict, Verdict::Certified);
}

TEST(Decay, FixedDiagonalRefuted) {
  const CertificateReport r =
      check_decay_condition(make_fixed_spec(SquareMatrix::diagonal({3.0, 1.0 / 3.0}).values()), 1, 2, 100, kSeed);
  expect_consistent(r);
  EXPECT_NEAR(r.estimate, 2.0 * std::log(3.0), 1e-12);
  EXPECT_EQ(r.verdict, Verdict::Refuted);
}

TEST(Decay, SupOverJMatchesPerIndexEstimates) {
  EnsembleSpec spec = make_rotation_spec(1.1);
  std::get<RotationParams>(spec.params).modulation = {0.05, 0.7, 0.0};
  spec.validate();
  const CertificateReport r = check_decay_condition(spec, 1, 6, 100, kSeed);
  double worst = -1e300;
  for (std::uint64_t j = 1; j <= 6; ++j) {
    const double a = 1.1 + 0.05 * std::sin(0.7 * static_cast<double>(j));
    worst = std::max(worst, 2.0 * std::log(a));
  }
  EXPECT_NEAR(r.estimate, worst, 1e-12);
  EXPECT_EQ(r.extra["per_j"].size(), 6u);
  EXPECT_EQ(r.verdict, Verdict::Certified);
  EXPECT_THROW(check_decay_condition(spec, 1, 6, 50, kSeed), DomainError);
}

TEST(Sl2Moment, FixedDiagonalRefutedNearE2) {
  const double a = 3.0, eps = 0.2;
  EnsembleSpec spec = make_fixed_spec(SquareMatrix::diagonal({a, 1.0 / a}).values());
  spec.det_normalize = true;
  const CertificateReport r = check_sl2_moment(spec, 1, 1, eps, small_search(100), kSeed);
  expect_consistent(r);
  EXPECT_EQ(r.verdict, Verdict::Refuted);
  EXPECT_LE(r.estimate, std::pow(a, 2 * eps) + 1e-9);
  EXPECT_GT(r.estimate, std::pow(a, 2 * eps) * 0.99);
}

TEST(Sl2Moment, HaarRotatedFamilyMatchesQuadrature) {
  const double a = 4.0, eps = 0.1;
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, a, a});
  const CertificateReport r = check_sl2_moment(spec, 1, 1, eps, small_search(4000), kSeed);
  expect_consistent(r);
  EXPECT_EQ(r.verdict, Verdict::Certified);
  // Haar right factor makes E||gx||^{-2 eps} independent of x.
  auto f = [&](double th) {
    return std::pow(a * a * std::cos(th) * std::cos(th) + std::sin(th) * std::sin(th) / (a * a), -eps);
  };
  const double oracle = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi) / std::numbers::pi;
  EXPECT_NEAR(r.estimate, oracle, 0.02);
}

TEST(Sl2Moment, EpsilonSweepApproachesOne) {
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, 4.0, 4.0});
  double prev = 0.0;
  for (double eps : {0.2, 0.1, 0.05, 0.01}) {
    const double e = check_sl2_moment(spec, 1, 1, eps, small_search(1000), kSeed).estimate;
    EXPECT_LT(e, 1.0);
    EXPECT_GT(e, prev);
    prev = e;
  }
  EXPECT_NEAR(prev, 1.0, 0.02);
}

TEST(Sl2Moment, RejectsNonUnimodular) {
  EXPECT_THROW(check_sl2_moment(svd_family({NormLaw::Kind::Fixed, 4.0, 4.0}, {}, false), 1, 1, 0.1, small_search(100), kSeed),
               DomainError);
  EXPECT_THROW(check_sl2_moment(make_rotation_spec(2.0), 1, 1, 0.0, small_search(100), kSeed), DomainError);
}

TEST(Eps0, MatchesIndependentBisection) {
  auto holds = [](double e) {
    const double l2 = std::log(2.0);
    return 1 - 2 * e * std::log(1.5) + 4 * e * e * std::pow(2.0, 2 * e) * l2 * l2 < 1 - e / 2;
  };
  double lo = 1e-9, hi = 1.0;
  ASSERT_TRUE(holds(lo));
  ASSERT_FALSE(holds(hi));
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? lo : hi) = mid;
  }
  const double e = solve_eps0();
  EXPECT_NEAR(e, lo, 1e-8);
  EXPECT_TRUE(holds(e - 1e-6));
  EXPECT_FALSE(holds(hi + 1e-6));
  EXPECT_LT(eps0_gap(e - 1e-6), 0.0);
  EXPECT_NEAR(e, 0.1346, 1e-3);
  EXPECT_EQ(solve_eps0(), e);
  EXPECT_GT(eps0_gap(1.0) + 0.5, 7.0);
}

TEST(LemmaBounded, SmallConstantCertifies) {
  const double e = solve_eps0();
  const CertificateReport r = check_lemma_bounded(2.5, 3.0, 1e-6, 1.0, e);
  EXPECT_EQ(r.verdict, Verdict::Certified);
  EXPECT_NEAR(r.extra["claim_bound"].get<double>(), 1.0 - e / 4.0, 0.0);
  EXPECT_THROW(check_lemma_bounded(2.0, 3.0, 1.0, 1.0, e), DomainError);
  EXPECT_THROW(check_lemma_bounded(3.0, 2.5, 1.0, 1.0, e), DomainError);
  EXPECT_THROW(check_lemma_bounded(3.0, 4.0, 1.0, 1.0, 0.5), DomainError);
}

TEST(LemmaBounded, EqualBoundsRootOracle) {
  const double e = 0.1, c = 1.0, alpha = 1.0;
  // A^alpha = C 2^alpha A^{2e} / e  <=>  A = (C 2^alpha / e)^{1/(alpha - 2e)}.
  const double root = std::pow(c * std::pow(2.0, alpha) / e, 1.0 / (alpha - 2 * e));
  EXPECT_EQ(check_lemma_bounded(root * 1.001, root * 1.001, c, alpha, e).verdict, Verdict::Certified);
  EXPECT_EQ(check_lemma_bounded(root * 0.999, root * 0.999, c, alpha, e).verdict, Verdict::Refuted);
  const CertificateReport a = check_lemma_bounded(40.0, 50.0, c, alpha, e);
  const CertificateReport b = check_lemma_bounded(40.0, 50.0, c, alpha, e);
  EXPECT_EQ(a.estimate, b.estimate);
}

TEST(LemmaBounded, CertifiedFixtureHoldsEmpirically) {
  // Haar right factor: P(|<v1, x>| <= delta) <= delta, so C = alpha = 1.
  const double e = solve_eps0(), a = 64.0;
  ASSERT_EQ(check_lemma_bounded(a, a, 1.0, 1.0, e).verdict, Verdict::Certified);
  const CertificateReport mc = check_sl2_moment(svd_family({NormLaw::Kind::Fixed, a, a}), 1, 1, e, small_search(4000), kSeed);
  EXPECT_LT(mc.ci_high, 1.0 - e / 4.0);
}

TEST(LemmaUnbounded, Examples) {
  const double e = solve_eps0();
  EXPECT_EQ(check_lemma_unbounded(1e6, 2.0, 1.0, 1e30, 1.0, 2.0, e).verdict, Verdict::Refuted);
  EXPECT_THROW(check_lemma_unbounded(3.0, 2.0, 1.0, 0.0, 1.0, 1.0, e), DomainError);
  EXPECT_THROW(check_lemma_unbounded(3.0, 2.0, 1.0, -1.0, 1.0, 2.0, e), DomainError);
  // With D = 0 and q near 1, an unbounded certificate implies a bounded one.
  int certified = 0;
  for (double a : {3.0, 10.0, 50.0, 200.0, 1000.0}) {
    for (double b : {1.0, 2.0, 5.0, 20.0}) {
      for (double c : {0.01, 0.1, 1.0}) {
        if (check_lemma_unbounded(a, a * b, c, 0.0, 1.0, 1.0001, e).verdict != Verdict::Certified) continue;
        ++certified;
        EXPECT_EQ(check_lemma_bounded(a, a * b, c, 1.0, e).verdict, Verdict::Certified) << a << " " << b << " " << c;
      }
    }
  }
  EXPECT_GT(certified, 5);
}

TEST(LemmaUnbounded, LogNormalFixtureHoldsEmpirically) {
  const double e = solve_eps0();
  // sigma_1 >= 2000 gives D = 0; truncation at 1e5 bounds every L^p norm by 1e5.
  ASSERT_EQ(check_lemma_unbounded(2000.0, 1e5, 1.0, 0.0, 1.0, 1.01, e).verdict, Verdict::Certified);
  const EnsembleSpec spec = svd_family({NormLaw::Kind::LogNormal, 2000.0, 1e5, std::log(5000.0), 1.0});
  const CertificateReport mc = check_sl2_moment(spec, 1, 1, e, small_search(4000), kSeed);
  EXPECT_LT(mc.ci_high, 1.0 - e / 4.0);
}

TEST(RBound, Examples) {
  EXPECT_EQ(r_bound(2.0, 1.0), 3.0);
  EXPECT_NEAR(r_bound(1e-12, 0.5), 1.0, 1e-11);
  EXPECT_THROW(r_bound(0.0, 1.0), DomainError);
}

TEST(RBound, UniformTailFixture) {
  // max eps ln^2 eps on (0,1) is 4 e^{-2} < 0.55.
  for (double k = 1; k < 400; ++k) {
    const double eps = std::exp(-k / 20.0);
    ASSERT_LE(eps, 0.55 * std::pow(std::log(eps), -2.0));
  }
  EXPECT_LT(4.0 * std::exp(-2.0), 0.55);
  stats::RunningMoments m;
  Stream s(kSeed, 0);
  for (int i = 0; i < 100000; ++i) m.add(std::abs(std::log(s.uniform_open())));
  EXPECT_NEAR(m.mean, 1.0, 3 * m.std_error());
  EXPECT_LE(1.0, r_bound(0.55, 1.0));
}

TEST(SvdCondition, HaarDirectionIsRotationInvariant) {
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, 3.0, 3.0});
  const Sampler sampler(spec);
  const int mc = 20000;
  std::vector<Vector> v1;
  for (int t = 0; t < mc; ++t) {
    Matrix g;
    sampler.fill(1, kSeed.with_trajectory(t), g);
    v1.push_back(svd(SquareMatrix(g)).V.row(0).transpose());
  }
  auto estimate = [&](const Vector& x) {
    stats::RunningMoments m;
    for (const auto& v : v1) m.add(std::abs(std::log(std::abs(v.dot(x)))));
    return m;
  };
  const stats::RunningMoments ref = estimate(Vector::Unit(2, 0));
  for (const Vector& x : direction_net(2, 16)) {
    const stats::RunningMoments m = estimate(x);
    EXPECT_NEAR(m.mean, ref.mean, 3 * std::hypot(m.std_error(), ref.std_error()));
  }
  EXPECT_NEAR(ref.mean, std::log(2.0), 4 * ref.std_error());
}

TEST(SvdCondition, LargeGapCertified) {
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, 1.0, 1.0}, {}, false, std::exp(10.0));
  const CertificateReport r = check_svd_condition(spec, 1, 1.0, 8192, small_search(), kSeed);
  expect_consistent(r);
  EXPECT_EQ(r.verdict, Verdict::Certified);
  // E|ln|cos theta|| = ln 2 for uniform theta.
  EXPECT_NEAR(r.estimate, 2 * std::log(2.0) - 10.0 + 1.0, 0.15);
}

TEST(SvdCondition, EqualSingularValuesRefuted) {
  const CertificateReport r = check_svd_condition(make_fixed_spec(SquareMatrix::rotation(0.3).values()), 1, 0.5, 1024,
                                                  small_search(), kSeed);
  EXPECT_NE(r.verdict, Verdict::Certified);
}

TEST(SvdCondition, AtomPerpendicularDiverges) {
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, 3.0, 3.0}, {AngleLaw::Kind::Atom, 0.0});
  const CertificateReport r = check_svd_condition(spec, 1, 0.1, 2048, small_search(), kSeed);
  EXPECT_EQ(r.verdict, Verdict::Refuted);
  EXPECT_GT(r.estimate, 20.0);
}

TEST(U1Regularity, HaarCertifiedForLinearTail) {
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, 3.0, 3.0});
  const CertificateReport r = check_u1_regularity(spec, 1, 1.0, 1.0, TailLaw::PowerLaw, 20000, kSeed);
  EXPECT_EQ(r.verdict, Verdict::Certified);
  // Arcsine CDF (2/pi) asin(delta) stays below delta.
  for (double d = 1e-6; d < 0.5; d *= 2) EXPECT_LE(2 / std::numbers::pi * std::asin(d), d);
}

TEST(U1Regularity, AtomRefuted) {
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, 3.0, 3.0}, {AngleLaw::Kind::Atom, 0.0});
  EXPECT_EQ(check_u1_regularity(spec, 1, 10.0, 0.5, TailLaw::PowerLaw, 2000, kSeed).verdict, Verdict::Refuted);
  EXPECT_EQ(check_u1_regularity(spec, 1, 10.0, 0.5, TailLaw::LogLaw, 2000, kSeed).verdict, Verdict::Refuted);
}

TEST(U1Regularity, LogConcentratedSeparatesLaws) {
  const EnsembleSpec spec = svd_family({NormLaw::Kind::Fixed, 3.0, 3.0}, {AngleLaw::Kind::LogConcentrated, 0.0, 1.0, 1.0});
  // The offset density rises towards its support edge e^{-1}, so directions
  // away from the perpendicular see up to about twice the axis tail.
  EXPECT_EQ(check_u1_regularity(spec, 1, 3.0, 1.0, TailLaw::LogLaw, 20000, kSeed).verdict, Verdict::Certified);
  EXPECT_EQ(check_u1_regularity(spec, 1, 1.0, 1.0, TailLaw::PowerLaw, 20000, kSeed).verdict, Verdict::Refuted);
  EXPECT_EQ(check_u1_regularity(spec, 1, 1.0, 0.25, TailLaw::PowerLaw, 20000, kSeed).verdict, Verdict::Refuted);
}

TEST(PerturbationTheta, ZeroAndMonotone) {
  const EnsembleSpec base = make_rotation_spec(2.0);
  const CertificateReport zero = perturbation_theta(make_perturbed_spec(base, 0.0), 1, 3, 4, 200, kSeed);
  EXPECT_EQ(zero.estimate, 0.0);
  EXPECT_EQ(zero.verdict, Verdict::Certified);
  double prev = 0.0;
  for (double eps : {0.005, 0.01, 0.02, 0.05}) {
    const CertificateReport r = perturbation_theta(make_perturbed_spec(base, eps), 1, 3, 4, 200, kSeed);
    expect_consistent(r);
    EXPECT_TRUE(std::isfinite(r.estimate));
    EXPECT_GE(r.estimate, prev);
    prev = r.estimate;
  }
  EXPECT_THROW(perturbation_theta(base, 1, 3, 4, 200, kSeed), DomainError);
}

TEST(PerturbationTheta, PerturbedFamilyStaysCertified) {
  const EnsembleSpec base = make_rotation_spec(2.0);
  const EnsembleSpec pert = make_perturbed_spec(base, 0.02);
  EXPECT_EQ(estimate_log_contraction(base, 1, 8, small_search(), kSeed).verdict, Verdict::Certified);
  EXPECT_EQ(estimate_log_contraction(pert, 1, 8, small_search(), kSeed).verdict, Verdict::Certified);
}

TEST(MarkovContraction, StateIndependentKernelMatchesIidChecker) {
  EnsembleSpec chain;
  chain.family = Family::MarkovChain;
  MarkovParams p;
  p.modes = {{2.0, MarkovMode::Input::Uniform, 0.0}};
  p.transition = {{1.0}};
  p.initial = {1.0};
  chain.params = p;
  chain.validate();
  const CertificateReport m = check_markov_contraction(chain, 2, 4, small_search(), 8, 2000, kSeed);
  const CertificateReport i = estimate_log_contraction(make_rotation_spec(2.0), 2, 4, small_search(), kSeed);
  expect_consistent(m);
  EXPECT_EQ(m.verdict, Verdict::Certified);
  EXPECT_LE(m.ci_low, i.ci_high);
  EXPECT_LE(i.ci_low, m.ci_high);
  // Per-state estimates agree within their standard errors.
  const double chi2 = m.extra["spread_chi2"].get<double>();
  EXPECT_LT(chi2, 3.0 * m.extra["spread_dof"].get<double>() + 10.0);
}

TEST(MarkovContraction, TwoStateKernelRefutedWhileAverageContracts) {
  const EnsembleSpec chain = two_state_chain();
  const CertificateReport m = check_markov_contraction(chain, 2, 1, small_search(), 16, 2000, kSeed);
  expect_consistent(m);
  EXPECT_EQ(m.verdict, Verdict::Refuted);
  EXPECT_GT(m.estimate, 0.2);
  const CertificateReport u = estimate_log_contraction(chain, 2, 1, small_search(), kSeed);
  EXPECT_LT(u.ci_high, 0.0);
  EXPECT_THROW(check_markov_contraction(make_rotation_spec(2.0), 2, 1, small_search(), 4, 100, kSeed), DomainError);
}

TEST(MarkovContraction, DeterministicTransitionIsNotCertified) {
  EnsembleSpec chain;
  chain.family = Family::MarkovChain;
  MarkovParams p;
  p.modes = {{3.0, MarkovMode::Input::Uniform, 0.0}, {3.0, MarkovMode::Input::Repeat, 0.0}};
  p.transition = {{0.0, 1.0}, {1.0, 0.0}};
  p.initial = {0.0, 1.0};
  chain.params = p;
  chain.validate();
  const CertificateReport m = check_markov_contraction(chain, 2, 1, small_search(200), 8, 200, kSeed);
  expect_consistent(m);
  EXPECT_NE(m.verdict, Verdict::Certified);
  EXPECT_GT(m.estimate, 0.0);
  EXPECT_LE(m.estimate, 2.0 * std::log(3.0) + 1e-9);
  EXPECT_LT(m.ci_high - m.ci_low, 1e-6);
}

TEST(CertificateReport, JsonFieldNames) {
  const CertificateReport r = check_lemma_bounded(2.5, 3.0, 1e-6, 1.0, 0.1);
  const auto j = r.to_json();
  for (const char* key : {"condition", "estimate", "ci", "threshold", "margin", "verdict", "samples", "seed", "spec_digest"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["verdict"], "Certified");
}

TEST(DirectionNet, Shapes) {
  const auto n2 = direction_net(2, 8);
  ASSERT_EQ(n2.size(), 8u);
  EXPECT_NEAR(n2[4](0), 0.0, 1e-15);
  for (int d : {3, 5}) {
    for (const auto& v : direction_net(d, 20)) EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  }
  EXPECT_THROW(direction_net(1, 4), DomainError);
}
