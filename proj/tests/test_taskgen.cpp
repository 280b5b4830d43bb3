#include <doctest.h>

#include <cmath>
#include <set>

#include "lrft/errors.hpp"
#include "lrft/rng.hpp"
#include "lrft/taskgen.hpp"
#include "oracles.hpp"

using namespace lrft;

TEST_CASE("streams are reproducible and distinct") {
  const RngHandle h = stream_for(42, 3, StreamRole::kFeatures);
  CHECK(h == stream_for(42, 3, StreamRole::kFeatures));
  CHECK_FALSE(h == stream_for(42, 3, StreamRole::kNoise));
  CHECK_FALSE(h == stream_for(43, 3, StreamRole::kFeatures));
  CHECK_FALSE(h.child(1) == h.child(2));

  Generator a(h), b(h);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

  std::set<double> firsts;
  for (std::uint64_t s = 0; s < 50; ++s) firsts.insert(Generator(stream_for(1, {s})).uniform());
  CHECK(firsts.size() == 50);
}

TEST_CASE("gaussian draws extend column by column") {
  const RngHandle h = stream_for(5, {9});
  const Mat narrow = Generator(h).gaussian(4, 3);
  const Mat wide = Generator(h).gaussian(4, 10);
  CHECK(wide.leftCols(3) == narrow);
}

TEST_CASE("normal sampler moments") {
  Generator g(stream_for(11, {0}));
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = g.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double u = g.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}

TEST_CASE("haar factors are orthonormal") {
  Generator g(stream_for(2, {1}));
  const Mat q = haar_orthonormal(8, 5, g);
  CHECK((q.transpose() * q - Mat::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("make_delta_star spectra") {
  SUBCASE("zero") {
    CHECK(make_delta_star(4, 3, spectrum::Zero{}, stream_for(0, {0})).norm() == 0.0);
  }
  SUBCASE("explicit rank one") {
    std::vector<double> vals(6, 0.0);
    vals[0] = 5.0;
    const Mat d = make_delta_star(9, 6, spectrum::Explicit{vals}, stream_for(0, {1}));
    const auto s = oracle::singular_values(d);
    CHECK(s[0] == doctest::Approx(5.0));
    CHECK(s[1] < 1e-6);
    CHECK(implied_rank(spectrum::Explicit{vals}, 9, 6) == 1);
  }
  SUBCASE("exp decay singular values are exact") {
    const Mat d = make_delta_star(7, 5, spectrum::ExpDecay{0.7, 5.0}, stream_for(0, {2}));
    const auto s = svd(d).singular_values;
    for (Index i = 0; i < 5; ++i) CHECK(std::abs(s(i) - 5.0 * std::exp(-0.7 * (i + 1))) < 1e-8);
  }
  SUBCASE("low rank gaussian has exact rank over 100 draws") {
    for (std::uint64_t t = 0; t < 100; ++t) {
      const Mat d = make_delta_star(12, 10, spectrum::LowRankGaussian{4}, stream_for(3, {t}));
      const Vec s = svd(d).singular_values;
      CHECK(s(3) > 1e-8);
      CHECK(s(4) < 1e-8);
    }
  }
  SUBCASE("low rank gaussian entry variance is one") {
    double total = 0;
    const int draws = 500;
    for (int t = 0; t < draws; ++t) {
      total += make_delta_star(100, 100, spectrum::LowRankGaussian{4}, stream_for(4, {std::uint64_t(t)})).squaredNorm();
    }
    CHECK(std::abs(total / draws / 10000.0 - 1.0) < 0.1);
  }
  SUBCASE("invalid specs") {
    CHECK_THROWS_AS(make_delta_star(3, 3, spectrum::LowRankGaussian{4}, stream_for(0, {0})), InvalidRank);
    CHECK_THROWS_AS(make_delta_star(3, 3, spectrum::LowRankGaussian{0}, stream_for(0, {0})), InvalidRank);
    CHECK_THROWS_AS(make_delta_star(3, 3, spectrum::Explicit{{1, 2, 0}}, stream_for(0, {0})), ShapeError);
    CHECK_THROWS_AS(make_delta_star(3, 3, spectrum::Explicit{{1, 0}}, stream_for(0, {0})), ShapeError);
    CHECK_THROWS_AS(make_delta_star(3, 3, spectrum::ExpDecay{-1, 1}, stream_for(0, {0})), ShapeError);
  }
}

TEST_CASE("make_covariance") {
  CHECK(make_covariance(3, covariance::Isotropic{1.0}) == Mat::Identity(3, 3));
  CHECK(make_covariance(100, covariance::Isotropic{144.0}) == 144.0 * Mat::Identity(100, 100));
  Mat d(2, 2);
  d << 2, 0, 0, 1;
  CHECK(make_covariance(2, covariance::Explicit{d}, true) == d);
  CHECK(make_covariance(2, covariance::Isotropic{0.0}).norm() == 0.0);
  CHECK_THROWS_AS(make_covariance(2, covariance::Isotropic{0.0}, true), NotPsd);
  Mat bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS_AS(make_covariance(2, covariance::Explicit{bad}), NotPsd);
  Mat singular(2, 2);
  singular << 1, 0, 0, 0;
  CHECK_NOTHROW(make_covariance(2, covariance::Explicit{singular}));
  CHECK_THROWS_AS(make_covariance(2, covariance::Explicit{singular}, true), NotPsd);
  CHECK_THROWS_AS(make_covariance(3, covariance::Explicit{d}), ShapeError);
}

TEST_CASE("TaskSpec validates its inputs") {
  const Mat a0 = Mat::Ones(2, 3);
  CHECK_NOTHROW(TaskSpec(a0, Mat::Zero(2, 3), Mat::Identity(3, 3), Mat::Identity(2, 2)));
  CHECK_THROWS_AS(TaskSpec(a0, Mat::Zero(3, 2), Mat::Identity(3, 3), Mat::Identity(2, 2)), ShapeError);
  CHECK_THROWS_AS(TaskSpec(a0, Mat::Zero(2, 3), Mat::Identity(2, 2), Mat::Identity(2, 2)), ShapeError);
  CHECK_THROWS_AS(TaskSpec(a0, Mat::Zero(2, 3), Mat::Zero(3, 3), Mat::Identity(2, 2)), NotPsd);
  const TaskSpec t(a0, Mat::Ones(2, 3), 4.0 * Mat::Identity(3, 3), Mat::Zero(2, 2));
  CHECK(t.a_star() == 2.0 * Mat::Ones(2, 3));
  CHECK(t.sigma_xx_sqrt() == 2.0 * Mat::Identity(3, 3));
}

TEST_CASE("make_task with zero Delta* gives A* = A0") {
  TaskRecipe r;
  r.dx = 4;
  r.dy = 3;
  const TaskSpec t = make_task(r, stream_for(1, {0}));
  CHECK(t.a_star() == t.a0());
  CHECK(t.a0().norm() > 0.0);
  r.zero_pretrained = true;
  CHECK(make_task(r, stream_for(1, {0})).a0().norm() == 0.0);
}

TEST_CASE("sample_dataset") {
  TaskRecipe r;
  r.dx = 20;
  r.dy = 3;
  r.delta = spectrum::LowRankGaussian{2};
  const TaskSpec task = make_task(r, stream_for(2, {0}));

  SUBCASE("Y = A* X + E exactly") {
    const Dataset d = sample_dataset(task, 15, stream_for(2, {1}));
    CHECK((d.y - task.a_star() * d.x - d.noise).norm() < 1e-12);
    CHECK(d.x.cols() == 15);
  }
  SUBCASE("noiseless") {
    r.noise = covariance::Isotropic{0.0};
    const TaskSpec quiet = make_task(r, stream_for(2, {0}));
    const Dataset d = sample_dataset(quiet, 10, stream_for(2, {1}));
    CHECK(d.noise.norm() == 0.0);
    CHECK(d.y == quiet.a_star() * d.x);
  }
  SUBCASE("law of large numbers for the covariance") {
    const Dataset d = sample_dataset(task, 20000, stream_for(2, {2}));
    const Mat diff = empirical_covariance(d.x) - Mat::Identity(20, 20);
    CHECK(svd(diff).singular_values(0) < 0.1);  // about 2 sqrt(d / n)
  }
  SUBCASE("deterministic and extendable") {
    const Dataset a = sample_dataset(task, 12, stream_for(2, {3}));
    const Dataset b = sample_dataset(task, 12, stream_for(2, {3}));
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    const Dataset c = sample_dataset(task, 30, stream_for(2, {3}));
    CHECK(c.x.leftCols(12) == a.x);
    CHECK(c.noise.leftCols(12) == a.noise);
  }
  SUBCASE("underdetermined designs have full column rank") {
    for (std::uint64_t t = 0; t < 20; ++t) {
      const Dataset d = sample_dataset(task, 8, stream_for(3, {t}));
      CHECK(svd(d.x).singular_values(7) > 1e-10);
    }
  }
  CHECK_THROWS_AS(sample_dataset(task, 0, stream_for(2, {1})), ShapeError);
}

TEST_CASE("empirical_covariance") {
  Mat x(2, 1);
  x << 2, 0;
  Mat expect(2, 2);
  expect << 4, 0, 0, 0;
  CHECK(empirical_covariance(x) == expect);
  CHECK((empirical_covariance(std::sqrt(3.0) * Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm() < 1e-15);
  const Mat r = Generator(stream_for(4, {4})).gaussian(5, 3);
  const Mat c = empirical_covariance(r);
  CHECK((c - c.transpose()).norm() < 1e-12);
  CHECK(oracle::eigenvalues(c).front() >= -1e-12);
}
