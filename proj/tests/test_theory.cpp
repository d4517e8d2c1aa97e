#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mergemeter/error.hpp"
#include "mergemeter/numeric.hpp"
#include "mergemeter/theory.hpp"
#include "meb_oracle.hpp"

#include <cmath>

using namespace mergemeter;

namespace {

ReprEnsemble ensemble_of(const Eigen::MatrixXd & points) {
    ReprEnsemble ens;
    ens.points = points;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        ens.labels.push_back("m" + std::to_string(i));
    }
    return ens;
}

Eigen::MatrixXd random_points(SplitMix64 & rng, int n, int d, double scale = 1.0) {
    Eigen::MatrixXd pts(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            pts(i, j) = scale * rng.next_gaussian();
        }
    }
    return pts;
}

// standard basis vectors of R^{d+1}: a regular simplex with edge sqrt(2)
Eigen::MatrixXd regular_simplex(int d) { return Eigen::MatrixXd::Identity(d + 1, d + 1); }

} // namespace

TEST_CASE("diameter") {
    SUBCASE("two points at distance 3") {
        Eigen::MatrixXd pts(2, 2);
        pts << 0, 0, 3, 0;
        const DiameterResult r = diameter(ensemble_of(pts));
        CHECK(r.delta == doctest::Approx(3.0));
        CHECK(r.i == 0);
        CHECK(r.j == 1);
    }
    SUBCASE("identical points give zero") {
        const Eigen::MatrixXd pts = Eigen::MatrixXd::Ones(4, 3);
        CHECK(diameter(ensemble_of(pts)).delta == 0.0);
    }
    SUBCASE("ties resolve to the first pair in lexicographic order") {
        Eigen::MatrixXd pts(4, 1);
        pts << 0, 2, 0, 2; // pairs (0,1), (0,3), (1,2), (2,3) all at distance 2
        const DiameterResult r = diameter(ensemble_of(pts));
        CHECK(r.i == 0);
        CHECK(r.j == 1);
    }
    SUBCASE("matches the brute-force pairwise maximum") {
        SplitMix64 rng(1);
        const Eigen::MatrixXd pts = random_points(rng, 6, 3);
        double expect = 0.0;
        for (int i = 0; i < 6; ++i) {
            for (int j = i + 1; j < 6; ++j) {
                expect = std::max(expect, (pts.row(i) - pts.row(j)).norm());
            }
        }
        CHECK(diameter(ensemble_of(pts)).delta == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("minimum enclosing ball closed forms") {
    SUBCASE("two points: midpoint, half distance") {
        Eigen::MatrixXd pts(2, 3);
        pts << 0, 0, 0, 4, 0, 0;
        const BallResult ball = min_enclosing_ball(ensemble_of(pts));
        CHECK(ball.radius == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(ball.center(0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(ball.method == BallMethod::exact_welzl);
        CHECK(ball.support.size() == 2);
        CHECK(ball.alpha(0) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(ball.alpha(1) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("equilateral triangle: circumradius") {
        const double side = 2.0;
        Eigen::MatrixXd pts(3, 2);
        pts << 0, 0, side, 0, side / 2, side * std::sqrt(3.0) / 2;
        const BallResult ball = min_enclosing_ball(ensemble_of(pts));
        CHECK(ball.radius == doctest::Approx(side / std::sqrt(3.0)).epsilon(1e-12));
        for (Eigen::Index i = 0; i < 3; ++i) {
            CHECK(ball.alpha(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
        }
    }
    SUBCASE("single point: radius zero") {
        Eigen::MatrixXd pts(1, 2);
        pts << 5, -1;
        const BallResult ball = min_enclosing_ball(ensemble_of(pts));
        CHECK(ball.radius == 0.0);
        CHECK(ball.alpha(0) == doctest::Approx(1.0));
    }
    SUBCASE("interior points do not join the support") {
        Eigen::MatrixXd pts(3, 2);
        pts << 0, 0, 4, 0, 2, 0.1; // third point is inside the (0,4) diameter ball
        const BallResult ball = min_enclosing_ball(ensemble_of(pts));
        CHECK(ball.radius == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(ball.support == std::vector<size_t>{0, 1});
        CHECK(ball.alpha(2) == 0.0);
    }
}

TEST_CASE("welzl matches the exhaustive support-subset oracle") {
    SplitMix64 rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + static_cast<int>(rng.next() % 7);  // up to 8 points
        const int d = 1 + static_cast<int>(rng.next() % 3);  // up to 3 dims
        const Eigen::MatrixXd pts = random_points(rng, n, d);
        const BallResult ball = min_enclosing_ball(ensemble_of(pts));
        const double oracle = meb_oracle::brute_force_radius(pts);
        CHECK(ball.radius == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("welzl survives degenerate geometries") {
    SUBCASE("duplicated points") {
        Eigen::MatrixXd pts(5, 2);
        pts << 1, 1, 1, 1, 1, 1, 3, 1, 3, 1;
        const BallResult ball = min_enclosing_ball(ensemble_of(pts));
        CHECK(ball.radius == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ball.center(0) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("near-collinear jitter") {
        SplitMix64 rng(40);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::MatrixXd pts(6, 2);
            for (int i = 0; i < 6; ++i) {
                pts(i, 0) = static_cast<double>(i);
                pts(i, 1) = 1e-12 * rng.next_gaussian();
            }
            const BallResult ball = min_enclosing_ball(ensemble_of(pts));
            CHECK(ball.radius == doctest::Approx(2.5).epsilon(1e-9));
            const double oracle = meb_oracle::brute_force_radius(pts);
            CHECK(ball.radius == doctest::Approx(oracle).epsilon(1e-9));
        }
    }
    SUBCASE("cospherical points") {
        // eight points on the unit circle: the ball is the circle itself
        Eigen::MatrixXd pts(8, 2);
        for (int i = 0; i < 8; ++i) {
            const double angle = 2.0 * 3.14159265358979323846 * i / 8.0;
            pts(i, 0) = std::cos(angle);
            pts(i, 1) = std::sin(angle);
        }
        const ReprEnsemble ens = ensemble_of(pts);
        const BallResult ball = min_enclosing_ball(ens);
        CHECK(ball.radius == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ball.center.norm() <= 1e-9);
        CHECK(ball.support.size() <= ens.effective_dim() + 1);
    }
    SUBCASE("identical points everywhere") {
        const Eigen::MatrixXd pts = Eigen::MatrixXd::Constant(7, 3, 4.5);
        const BallResult ball = min_enclosing_ball(ensemble_of(pts));
        CHECK(ball.radius == doctest::Approx(0.0));
        CHECK(ball.center(0) == doctest::Approx(4.5));
    }
}

TEST_CASE("ball invariants hold on random ensembles") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.next() % 15);
        const int d = 1 + static_cast<int>(rng.next() % 24);
        const Eigen::MatrixXd pts = random_points(rng, n, d);
        const ReprEnsemble ens = ensemble_of(pts);
        const BallResult ball = min_enclosing_ball(ens);

        // every point enclosed
        for (int i = 0; i < n; ++i) {
            CHECK((pts.row(i).transpose() - ball.center).norm() <= ball.radius * (1 + 1e-9) + 1e-12);
        }
        // support on the sphere, bounded count
        CHECK(ball.support.size() <= ens.effective_dim() + 1);
        for (size_t s : ball.support) {
            CHECK((pts.row(static_cast<Eigen::Index>(s)).transpose() - ball.center).norm() ==
                  doctest::Approx(ball.radius).epsilon(1e-7));
        }
        // alpha is a simplex point reproducing the center
        double sum = 0.0;
        for (Eigen::Index i = 0; i < ball.alpha.size(); ++i) {
            CHECK(ball.alpha(i) >= 0.0);
            sum += ball.alpha(i);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        const Eigen::VectorXd rebuilt = pts.transpose() * ball.alpha;
        CHECK((rebuilt - ball.center).norm() <= 1e-6 * (1.0 + ball.center.norm()));

        // Jung bound with the effective dimension
        const double dp = static_cast<double>(ens.effective_dim());
        const double delta = diameter(ens).delta;
        CHECK(ball.radius <= std::sqrt(dp / (2.0 * (dp + 1.0))) * delta + 1e-9);
        CHECK(ball.radius >= delta / 2.0 - 1e-9);
    }
}

TEST_CASE("jung tightness witnesses") {
    SUBCASE("segment meets the lower bound exactly") {
        Eigen::MatrixXd pts(2, 1);
        pts << -1, 1;
        const ReprEnsemble ens = ensemble_of(pts);
        const BallResult ball = min_enclosing_ball(ens);
        const double delta_sq = 4.0;
        CHECK(ball.radius * ball.radius == doctest::Approx(delta_sq / 4.0).epsilon(1e-12));
    }
    SUBCASE("regular simplices meet the upper bound") {
        for (int d : {1, 2, 3, 5, 8}) {
            const ReprEnsemble ens = ensemble_of(regular_simplex(d));
            const BallResult ball = min_enclosing_ball(ens);
            const double delta = diameter(ens).delta;
            const double dp = static_cast<double>(ens.effective_dim());
            CHECK(ens.effective_dim() == static_cast<size_t>(d));
            CHECK(ball.radius * ball.radius ==
                  doctest::Approx(dp / (2.0 * (dp + 1.0)) * delta * delta).epsilon(1e-9));
        }
    }
}

TEST_CASE("achievability merge meets the dimension-dependent bound") {
    SUBCASE("two models: midpoint at delta^2/4") {
        Eigen::MatrixXd pts(2, 2);
        pts << 0, 0, 2, 0;
        const AchievabilityResult r = achievability_merge(ensemble_of(pts));
        CHECK(r.delta_max == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.alpha(0) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("equilateral triangle: delta^2/3") {
        Eigen::MatrixXd pts(3, 2);
        pts << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2;
        const AchievabilityResult r = achievability_merge(ensemble_of(pts));
        CHECK(r.delta_max == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    }
    SUBCASE("random models stay under the bound") {
        SplitMix64 rng(4);
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::MatrixXd pts = random_points(rng, 10, 4);
            const ReprEnsemble ens = ensemble_of(pts);
            const AchievabilityResult r = achievability_merge(ens);
            const double delta = diameter(ens).delta;
            CHECK(r.delta_max <= (4.0 / 10.0) * delta * delta + 1e-9);
        }
    }
}

TEST_CASE("converse bound") {
    Eigen::MatrixXd pts(2, 1);
    pts << 0, 2;
    const ReprEnsemble ens = ensemble_of(pts);

    SUBCASE("diameter endpoint is far from the other end") {
        const ConverseResult r = converse_check(ens, pts.row(0).transpose());
        CHECK(r.delta_max >= 4.0 - 1e-12);
        CHECK(r.passes);
    }
    SUBCASE("midpoint attains the bound exactly") {
        Eigen::VectorXd mid(1);
        mid << 1;
        const ConverseResult r = converse_check(ens, mid);
        CHECK(r.delta_max == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.passes);
    }
    SUBCASE("random candidates never beat the bound") {
        SplitMix64 rng(5);
        for (int trial = 0; trial < 500; ++trial) {
            const int n = 2 + static_cast<int>(rng.next() % 10);
            const int d = 1 + static_cast<int>(rng.next() % 8);
            const Eigen::MatrixXd cloud = random_points(rng, n, d);
            const ReprEnsemble e = ensemble_of(cloud);
            Eigen::VectorXd cand(d);
            for (int i = 0; i < d; ++i) {
                cand(i) = 3.0 * rng.next_gaussian();
            }
            CHECK(converse_check(e, cand).passes);
        }
    }
}

TEST_CASE("rate lower bound is a step at the zero-rate distortion") {
    SUBCASE("boundary is inclusive") {
        Eigen::MatrixXd pts(2, 1);
        pts << 0, 2;
        const ReprEnsemble ens = ensemble_of(pts);
        const BallResult ball = min_enclosing_ball(ens);
        const double d_star = ball.radius * ball.radius;
        CHECK(rate_lower_bound(d_star, ens) == 0.0);
        CHECK(rate_lower_bound(d_star * (1 + 1e-9), ens) == 0.0);
        CHECK(rate_lower_bound(d_star * (1 - 1e-6), ens) == doctest::Approx(1.0));
    }
    SUBCASE("below the step the floor is log2 N") {
        SplitMix64 rng(6);
        const Eigen::MatrixXd pts = random_points(rng, 8, 3);
        CHECK(rate_lower_bound(0.0, ensemble_of(pts)) == doctest::Approx(3.0));
    }
    SUBCASE("triangle: distortions between delta^2/4 and d_star still need full rate") {
        Eigen::MatrixXd pts(3, 2);
        pts << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2;
        const ReprEnsemble ens = ensemble_of(pts);
        // d_star = delta^2/3 > delta^2/4 here
        const double between = (1.0 / 4.0 + 1.0 / 3.0) / 2.0;
        CHECK(rate_lower_bound(between, ens) == doctest::Approx(std::log2(3.0)));
        CHECK(rate_lower_bound(1.0 / 3.0 + 1e-9, ens) == 0.0);
    }
}

TEST_CASE("mergeability verdicts") {
    SUBCASE("zero diameter is always mergeable") {
        const Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(3, 2);
        CHECK(mergeability_test(ensemble_of(pts), 0.0));
    }
    SUBCASE("two models at delta=2 against budget 1 sits exactly on the boundary") {
        Eigen::MatrixXd pts(2, 1);
        pts << 0, 2;
        CHECK(mergeability_test(ensemble_of(pts), 1.0));
        CHECK_FALSE(mergeability_test(ensemble_of(pts), 0.999));
    }
    SUBCASE("budget just under the bound fails") {
        SplitMix64 rng(7);
        const Eigen::MatrixXd pts = random_points(rng, 5, 4);
        const ReprEnsemble ens = ensemble_of(pts);
        const double dp = static_cast<double>(ens.effective_dim());
        const double delta = diameter(ens).delta;
        const double bound = dp / (2.0 * (dp + 1.0)) * delta * delta;
        CHECK_FALSE(mergeability_test(ens, 0.99 * bound));
        CHECK(mergeability_test(ens, 1.01 * bound));
    }
}

TEST_CASE("distortion report wires the pieces together") {
    SplitMix64 rng(8);
    const Eigen::MatrixXd pts = random_points(rng, 6, 3);
    const ReprEnsemble ens = ensemble_of(pts);
    const DistortionReport rep = distortion_report(ens, 10.0);
    CHECK(rep.lower_bound == doctest::Approx(rep.diameter_sq / 4.0));
    CHECK(rep.lower_bound <= rep.d_star + 1e-9);
    CHECK(rep.d_star <= rep.upper_bound + 1e-9);
    CHECK(rep.upper_bound <= rep.upper_bound_ambient + 1e-12);
    CHECK(rep.upper_bound_ambient <= rep.approx_half_bound + 1e-12);
    CHECK(rep.delta_max == doctest::Approx(rep.d_star).epsilon(1e-9));
    CHECK(rep.budget_verdict == (rep.upper_bound <= 10.0));
}

TEST_CASE("rigid motions change the center but not the geometry summary") {
    SplitMix64 rng(9);
    const Eigen::MatrixXd pts = random_points(rng, 7, 4);
    const ReprEnsemble ens = ensemble_of(pts);
    const DistortionReport before = distortion_report(ens);

    // random rotation from QR, plus a translation
    const Eigen::MatrixXd gauss = random_points(rng, 4, 4);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    const Eigen::MatrixXd rot = qr.householderQ();
    Eigen::RowVectorXd shift(4);
    shift << 10, -3, 0.5, 2;
    Eigen::MatrixXd moved = (pts * rot.transpose()).rowwise() + shift;
    const DistortionReport after = distortion_report(ensemble_of(moved));

    CHECK(after.diameter_sq == doctest::Approx(before.diameter_sq).epsilon(1e-9));
    CHECK(after.d_star == doctest::Approx(before.d_star).epsilon(1e-9));
    CHECK(after.upper_bound == doctest::Approx(before.upper_bound).epsilon(1e-9));
    CHECK(after.lower_bound == doctest::Approx(before.lower_bound).epsilon(1e-9));
}

TEST_CASE("core-set fallback certifies loose tolerances and reports tight ones") {
    SplitMix64 rng(10);
    const Eigen::MatrixXd pts = random_points(rng, 64, 6);

    MebOptions loose;
    loose.tol = 0.25;
    loose.force_method = BallMethod::core_set;
    const BallResult ball = min_enclosing_ball_points(pts, loose);
    CHECK(ball.method == BallMethod::core_set);
    const BallResult exact = min_enclosing_ball_points(pts, {});
    CHECK(ball.radius >= exact.radius - 1e-9);
    CHECK(ball.radius <= exact.radius * 1.25 + 1e-9);

    MebOptions tight;
    tight.tol = 1e-12;
    tight.force_method = BallMethod::core_set;
    tight.max_core_set_iters = 50;
    CHECK_THROWS_WITH_AS(min_enclosing_ball_points(pts, tight), doctest::Contains("ratio"), error);
}

TEST_CASE("synthetic linear-hidden ensembles") {
    SUBCASE("zero spread collapses everything") {
        auto [ens, acts] = synth_lmc_ensemble(11, 4, 6, 3, 2, 0.0);
        const ReprEnsemble re = make_ensemble(acts);
        CHECK(diameter(re).delta == doctest::Approx(0.0));
        const BallResult ball = min_enclosing_ball(re);
        CHECK(ball.radius == doctest::Approx(0.0));
    }
    SUBCASE("same seed reproduces bit-identical ensembles") {
        auto [ens_a, acts_a] = synth_lmc_ensemble(12, 5, 8, 4, 3, 0.7);
        auto [ens_b, acts_b] = synth_lmc_ensemble(12, 5, 8, 4, 3, 0.7);
        CHECK(acts_a.data == acts_b.data);
        CHECK(ens_a.base_params == ens_b.base_params);
        CHECK(ens_a.minima == ens_b.minima);
        auto [ens_c, acts_c] = synth_lmc_ensemble(13, 5, 8, 4, 3, 0.7);
        CHECK(acts_a.data != acts_c.data);
    }
    SUBCASE("stacked distances match the direct map evaluation") {
        auto [ens, acts] = synth_lmc_ensemble(14, 4, 5, 3, 2, 1.0);
        const ReprEnsemble re = make_ensemble(acts);
        for (size_t i = 0; i < 4; ++i) {
            for (size_t j = i + 1; j < 4; ++j) {
                double expect = 0.0;
                for (size_t x = 0; x < 2; ++x) {
                    const Eigen::VectorXd diff =
                        ens.maps[x] * (ens.minima.row(static_cast<Eigen::Index>(i)) -
                                       ens.minima.row(static_cast<Eigen::Index>(j)))
                                          .transpose();
                    expect += diff.squaredNorm();
                }
                expect /= 2.0;
                const double got = (re.points.row(static_cast<Eigen::Index>(i)) -
                                    re.points.row(static_cast<Eigen::Index>(j)))
                                       .squaredNorm();
                CHECK(got == doctest::Approx(expect).epsilon(1e-5));
            }
        }
    }
    SUBCASE("invalid sizes are rejected") {
        CHECK_THROWS_AS(synth_lmc_ensemble(0, 1, 4, 2, 1, 1.0), error);
        CHECK_THROWS_AS(synth_lmc_ensemble(0, 2, 2, 4, 1, 1.0), error); // p < d
    }
}

TEST_CASE("merged hidden states verify the linearity identity") {
    auto [ens, acts] = synth_lmc_ensemble(15, 4, 6, 3, 2, 1.0);

    SUBCASE("one-hot alpha reproduces a constituent") {
        const std::vector<double> alpha{0.0, 1.0, 0.0, 0.0};
        const ActivationSet merged = merged_hidden_states(ens, alpha);
        for (size_t k = 0; k < 2; ++k) {
            const Eigen::VectorXd expect = ens.hidden(k, ens.minima.row(1));
            const auto got = merged.vec(0, k);
            for (size_t t = 0; t < 3; ++t) {
                CHECK(got[t] == doctest::Approx(expect(static_cast<Eigen::Index>(t))).epsilon(1e-6));
            }
        }
    }
    SUBCASE("random simplex points pass the dual-path check") {
        SplitMix64 rng(16);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> alpha(4);
            double sum = 0.0;
            for (auto & a : alpha) {
                a = rng.next_unit();
                sum += a;
            }
            for (auto & a : alpha) {
                a /= sum;
            }
            CHECK_NOTHROW(merged_hidden_states(ens, alpha));
        }
    }
    SUBCASE("off-simplex alpha is rejected") {
        CHECK_THROWS_AS(merged_hidden_states(ens, std::vector<double>{0.5, 0.5, 0.5, -0.5}), error);
        CHECK_THROWS_AS(merged_hidden_states(ens, std::vector<double>{0.3, 0.3, 0.3, 0.3}), error);
    }
}

TEST_CASE("achievability distortion equals the merged model's own hidden distortion") {
    auto [lmc, acts] = synth_lmc_ensemble(18, 5, 8, 3, 4, 1.0);
    const size_t n = lmc.n_models();
    const size_t kpoints = lmc.n_datapoints();
    const size_t d = lmc.hidden_dim();

    // full-precision stacked ensemble straight from the linear maps
    ReprEnsemble ens;
    ens.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kpoints * d));
    for (size_t m = 0; m < n; ++m) {
        ens.labels.push_back("m" + std::to_string(m));
        for (size_t k = 0; k < kpoints; ++k) {
            const Eigen::VectorXd h = lmc.hidden(k, lmc.minima.row(static_cast<Eigen::Index>(m)));
            for (size_t t = 0; t < d; ++t) {
                ens.points(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k * d + t)) =
                    h(static_cast<Eigen::Index>(t)) / std::sqrt(static_cast<double>(kpoints));
            }
        }
    }

    const AchievabilityResult ach = achievability_merge(ens);

    // evaluate the same convex merge through parameter space and measure its
    // own worst-case hidden distortion
    Eigen::VectorXd merged_params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lmc.param_dim()));
    for (size_t m = 0; m < n; ++m) {
        merged_params += ach.alpha(static_cast<Eigen::Index>(m)) *
                         lmc.minima.row(static_cast<Eigen::Index>(m)).transpose();
    }
    double worst = 0.0;
    for (size_t m = 0; m < n; ++m) {
        double dist = 0.0;
        for (size_t k = 0; k < kpoints; ++k) {
            dist += (lmc.hidden(k, merged_params) -
                     lmc.hidden(k, lmc.minima.row(static_cast<Eigen::Index>(m))))
                        .squaredNorm();
        }
        worst = std::max(worst, dist / static_cast<double>(kpoints));
    }
    CHECK(worst == doctest::Approx(ach.delta_max).epsilon(1e-10));
}

TEST_CASE("make_ensemble preserves the datapoint-averaged squared distances") {
    SplitMix64 rng(17);
    ActivationSet acts;
    acts.model_ids = {"a", "b", "c"};
    acts.datapoint_ids = {"x0", "x1", "x2"};
    acts.hidden_dim = 4;
    acts.data.resize(3 * 3 * 4);
    for (auto & v : acts.data) {
        v = static_cast<float>(rng.next_gaussian());
    }
    const ReprEnsemble ens = make_ensemble(acts);
    for (size_t i = 0; i < 3; ++i) {
        for (size_t j = 0; j < 3; ++j) {
            double expect = 0.0;
            for (size_t k = 0; k < 3; ++k) {
                for (size_t t = 0; t < 4; ++t) {
                    const double diff = static_cast<double>(acts.vec(i, k)[t]) -
                                        static_cast<double>(acts.vec(j, k)[t]);
                    expect += diff * diff;
                }
            }
            expect /= 3.0;
            const double got = (ens.points.row(static_cast<Eigen::Index>(i)) -
                                ens.points.row(static_cast<Eigen::Index>(j)))
                                   .squaredNorm();
            CHECK(got == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}
