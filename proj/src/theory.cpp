#include "mergemeter/theory.hpp"

#include "mergemeter/error.hpp"
#include "mergemeter/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mergemeter {

namespace {

std::string pad_id(const char * prefix, size_t index, size_t count) {
    size_t width = 1;
    for (size_t v = count > 0 ? count - 1 : 0; v >= 10; v /= 10) {
        ++width;
    }
    std::string digits = std::to_string(index);
    return std::string(prefix) + std::string(width - digits.size(), '0') + digits;
}

} // namespace

ReprEnsemble make_ensemble(const ActivationSet & acts, Normalization normalization) {
    acts.validate();
    const size_t n = acts.n_models();
    const size_t kpoints = acts.n_datapoints();
    const size_t d = static_cast<size_t>(acts.hidden_dim);

    ReprEnsemble ens;
    ens.labels = acts.model_ids;
    ens.n_datapoints = kpoints;
    ens.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kpoints * d));
    const double scale = 1.0 / std::sqrt(static_cast<double>(kpoints));
    for (size_t m = 0; m < n; ++m) {
        for (size_t k = 0; k < kpoints; ++k) {
            const auto h = acts.vec(m, k);
            std::vector<double> v(h.begin(), h.end());
            if (normalization == Normalization::per_dim) {
                const double s = 1.0 / std::sqrt(static_cast<double>(d));
                for (double & x : v) {
                    x *= s;
                }
            } else if (normalization == Normalization::unit_vector) {
                const double n2 = pairwise_sum(v.size(), [&](size_t i) { return v[i] * v[i]; });
                if (n2 == 0.0) {
                    fail_validation("unit_vector normalization hit a zero-norm hidden state");
                }
                const double s = 1.0 / std::sqrt(n2);
                for (double & x : v) {
                    x *= s;
                }
            }
            for (size_t t = 0; t < d; ++t) {
                ens.points(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k * d + t)) =
                    v[t] * scale;
            }
        }
    }
    return ens;
}

DiameterResult diameter(const ReprEnsemble & ens) {
    const size_t n = ens.n_models();
    if (n < 2) {
        fail_validation("diameter needs at least 2 models");
    }
    DiameterResult best{-1.0, 0, 0};
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double d = (ens.points.row(static_cast<Eigen::Index>(i)) -
                              ens.points.row(static_cast<Eigen::Index>(j)))
                                 .norm();
            if (d > best.delta) {
                best = {d, i, j};
            }
        }
    }
    best.delta = std::max(best.delta, 0.0);
    return best;
}

// ---------------------------------------------------------------------------
// Minimum enclosing ball
// ---------------------------------------------------------------------------

namespace {

struct ReducedBall {
    Eigen::VectorXd center;
    double r2 = -1.0;
    std::vector<int> support;
};

// Smallest sphere with all of `boundary` on its surface. The center lies in
// the boundary points' affine hull; solved through the Gram system
// 2 (V V^T) x = diag(V V^T) with V the edge matrix from boundary[0].
ReducedBall ball_from_boundary(const Eigen::MatrixXd & pts, const std::vector<int> & boundary) {
    const Eigen::Index m = pts.cols();
    ReducedBall ball;
    ball.support = boundary;
    if (boundary.empty()) {
        ball.center = Eigen::VectorXd::Zero(m);
        ball.r2 = -1.0;
        return ball;
    }
    if (boundary.size() == 1) {
        ball.center = pts.row(boundary[0]);
        ball.r2 = 0.0;
        return ball;
    }
    const Eigen::Index k = static_cast<Eigen::Index>(boundary.size()) - 1;
    const Eigen::VectorXd p0 = pts.row(boundary[0]);
    Eigen::MatrixXd edges(k, m);
    for (Eigen::Index i = 0; i < k; ++i) {
        edges.row(i) = pts.row(boundary[static_cast<size_t>(i) + 1]) - p0.transpose();
    }
    const Eigen::MatrixXd gram = edges * edges.transpose();
    const Eigen::VectorXd rhs = 0.5 * gram.diagonal();
    Eigen::VectorXd x;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        x = ldlt.solve(rhs);
    }
    if (x.size() == 0 || !x.allFinite()) {
        // nearly affinely dependent boundary: least-norm solution
        x = gram.completeOrthogonalDecomposition().solve(rhs);
    }
    ball.center = p0 + edges.transpose() * x;
    ball.r2 = (ball.center - p0).squaredNorm();
    return ball;
}

bool inside(const ReducedBall & ball, const Eigen::MatrixXd & pts, int p) {
    if (ball.r2 < 0.0) {
        return false;
    }
    const double d2 = (pts.row(p).transpose() - ball.center).squaredNorm();
    return d2 <= ball.r2 * (1.0 + 1e-12) + 1e-300;
}

ReducedBall welzl_recurse(const Eigen::MatrixXd & pts, std::vector<int> & order, size_t end,
                          std::vector<int> & boundary) {
    if (end == 0 || boundary.size() == static_cast<size_t>(pts.cols()) + 1) {
        return ball_from_boundary(pts, boundary);
    }
    const int p = order[end - 1];
    ReducedBall ball = welzl_recurse(pts, order, end - 1, boundary);
    if (inside(ball, pts, p)) {
        return ball;
    }
    boundary.push_back(p);
    ball = welzl_recurse(pts, order, end - 1, boundary);
    boundary.pop_back();
    return ball;
}

// Projects all points onto an orthonormal basis of their affine hull so the
// recursion runs in at most min(N-1, D) dimensions. Distances are preserved
// exactly, and the MEB center always lies in the hull, so nothing is lost.
struct Reduction {
    Eigen::MatrixXd reduced;  // N x m
    Eigen::MatrixXd basis;    // D x m
    Eigen::VectorXd origin;   // D
};

Reduction reduce_to_affine_hull(const Eigen::MatrixXd & points) {
    const Eigen::Index n = points.rows();
    const Eigen::Index dim = points.cols();
    Reduction red;
    red.origin = points.colwise().mean();
    const Eigen::MatrixXd centered = points.rowwise() - red.origin.transpose();
    const Eigen::Index m = std::min<Eigen::Index>(n - 1, dim);
    if (m <= 0) {
        red.reduced = Eigen::MatrixXd::Zero(n, 1);
        red.basis = Eigen::MatrixXd::Zero(dim, 1);
        if (dim > 0) {
            red.basis(0, 0) = 1.0;
        }
        return red;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    red.reduced = svd.matrixU().leftCols(m) * svd.singularValues().head(m).asDiagonal();
    red.basis = svd.matrixV().leftCols(m);
    return red;
}

Eigen::VectorXd simplex_projection(const Eigen::VectorXd & v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cumulative += u[static_cast<size_t>(i)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<size_t>(i)] - candidate > 0.0) {
            theta = candidate;
        }
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i) = std::max(v(i) - theta, 0.0);
    }
    return out;
}

// Least-squares barycentric coefficients of `center` over the support
// points, projected onto the probability simplex.
Eigen::VectorXd barycentric_alpha(const Eigen::MatrixXd & points, const std::vector<size_t> & support,
                                  const Eigen::VectorXd & center, size_t n_total) {
    const Eigen::Index k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd a(points.cols() + 1, k);
    Eigen::VectorXd b(points.cols() + 1);
    for (Eigen::Index c = 0; c < k; ++c) {
        a.col(c).head(points.cols()) = points.row(static_cast<Eigen::Index>(support[static_cast<size_t>(c)]));
        a(points.cols(), c) = 1.0;
    }
    b.head(points.cols()) = center;
    b(points.cols()) = 1.0;
    const Eigen::VectorXd alpha_support = simplex_projection(a.colPivHouseholderQr().solve(b));
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_total));
    for (Eigen::Index c = 0; c < k; ++c) {
        alpha(static_cast<Eigen::Index>(support[static_cast<size_t>(c)])) = alpha_support(c);
    }
    return alpha;
}

BallResult welzl_ball(const Eigen::MatrixXd & points, double tol) {
    const size_t n = static_cast<size_t>(points.rows());
    const Reduction red = reduce_to_affine_hull(points);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    // deterministic shuffle; the result does not depend on the order, only
    // the running time does
    SplitMix64 rng(0x6d65726765725f31ULL ^ n);
    for (size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.next() % i]);
    }

    std::vector<int> boundary;
    const ReducedBall ball = welzl_recurse(red.reduced, order, n, boundary);

    BallResult out;
    out.method = BallMethod::exact_welzl;
    out.tolerance = tol;
    out.radius = ball.r2 > 0.0 ? std::sqrt(ball.r2) : 0.0;
    out.center = red.origin + red.basis * ball.center;
    out.support.assign(ball.support.begin(), ball.support.end());
    std::sort(out.support.begin(), out.support.end());
    if (out.support.empty()) {
        out.support.push_back(0); // single-point input
    }
    out.alpha = barycentric_alpha(points, out.support, out.center, n);
    return out;
}

BallResult core_set_ball(const Eigen::MatrixXd & points, const MebOptions & opts) {
    const size_t n = static_cast<size_t>(points.rows());

    const auto farthest_from = [&](const Eigen::VectorXd & c) {
        size_t arg = 0;
        double best = -1.0;
        for (size_t i = 0; i < n; ++i) {
            const double d2 = (points.row(static_cast<Eigen::Index>(i)).transpose() - c).squaredNorm();
            if (d2 > best) {
                best = d2;
                arg = i;
            }
        }
        return std::make_pair(arg, std::sqrt(std::max(best, 0.0)));
    };

    // pairwise witnesses: two farthest-point sweeps plus random samples
    double lower = 0.0;
    {
        const auto [a, ra] = farthest_from(points.row(0));
        const auto [b, rb] = farthest_from(points.row(static_cast<Eigen::Index>(a)));
        lower = std::max(lower, rb / 2.0);
        SplitMix64 rng(0x636f7265736574ULL);
        for (int s = 0; s < 64; ++s) {
            const size_t i = rng.next() % n;
            const size_t j = rng.next() % n;
            const double d = (points.row(static_cast<Eigen::Index>(i)) -
                              points.row(static_cast<Eigen::Index>(j)))
                                 .norm();
            lower = std::max(lower, d / 2.0);
        }
    }

    Eigen::VectorXd center = points.colwise().mean();
    double radius = 0.0;
    bool converged = false;
    for (size_t t = 1; t <= opts.max_core_set_iters; ++t) {
        const auto [far, r] = farthest_from(center);
        radius = r;
        // r <= r* (1 + 1/sqrt(t)) after t farthest-point steps, which
        // certifies r* >= r / (1 + 1/sqrt(t))
        lower = std::max(lower, r / (1.0 + 1.0 / std::sqrt(static_cast<double>(t))));
        if (radius <= (1.0 + opts.tol) * lower) {
            converged = true;
            break;
        }
        center += (points.row(static_cast<Eigen::Index>(far)).transpose() - center) /
                  static_cast<double>(t + 1);
    }
    if (!converged) {
        fail_numeric("core-set minimum enclosing ball did not certify (1+tol) within " +
                     std::to_string(opts.max_core_set_iters) + " iterations; achieved ratio " +
                     std::to_string(lower > 0.0 ? radius / lower : 0.0) + " against tolerance " +
                     std::to_string(1.0 + opts.tol));
    }

    BallResult out;
    out.method = BallMethod::core_set;
    out.tolerance = opts.tol;
    out.center = center;
    out.radius = radius;
    const size_t effective = std::min(static_cast<size_t>(points.cols()), n - 1);
    std::vector<std::pair<double, size_t>> by_dist;
    for (size_t i = 0; i < n; ++i) {
        const double d = (points.row(static_cast<Eigen::Index>(i)).transpose() - center).norm();
        if (d >= radius * (1.0 - 16.0 * opts.tol)) {
            by_dist.emplace_back(d, i);
        }
    }
    std::sort(by_dist.begin(), by_dist.end(), std::greater<>());
    if (by_dist.size() > effective + 1) {
        by_dist.resize(effective + 1);
    }
    for (const auto & [d, i] : by_dist) {
        out.support.push_back(i);
    }
    std::sort(out.support.begin(), out.support.end());
    if (out.support.empty()) {
        out.support.push_back(0);
    }
    out.alpha = barycentric_alpha(points, out.support, out.center, n);
    return out;
}

} // namespace

BallResult min_enclosing_ball_points(const Eigen::MatrixXd & points, const MebOptions & opts) {
    const size_t n = static_cast<size_t>(points.rows());
    if (n < 1) {
        fail_validation("min_enclosing_ball needs at least one point");
    }
    if (!(opts.tol > 0.0)) {
        fail_validation("min_enclosing_ball tolerance must be positive");
    }
    const size_t effective = std::min(static_cast<size_t>(points.cols()), n - 1);
    BallMethod method = effective <= 16 && n <= 2048 ? BallMethod::exact_welzl : BallMethod::core_set;
    if (opts.force_method) {
        method = *opts.force_method;
    }
    return method == BallMethod::exact_welzl ? welzl_ball(points, opts.tol) : core_set_ball(points, opts);
}

BallResult min_enclosing_ball(const ReprEnsemble & ens, const MebOptions & opts) {
    return min_enclosing_ball_points(ens.points, opts);
}

AchievabilityResult achievability_merge(const ReprEnsemble & ens) {
    const BallResult ball = min_enclosing_ball(ens);
    double delta_max = 0.0;
    for (size_t i = 0; i < ens.n_models(); ++i) {
        delta_max = std::max(
            delta_max, (ens.points.row(static_cast<Eigen::Index>(i)).transpose() - ball.center).squaredNorm());
    }
    const double dprime = static_cast<double>(ens.effective_dim());
    const double delta = diameter(ens).delta;
    const double bound = dprime / (2.0 * (dprime + 1.0)) * delta * delta;
    if (delta_max > bound + std::max(1e-9, 1e-9 * bound)) {
        fail_numeric("achievability merge exceeded the Jung bound (" + std::to_string(delta_max) +
                     " > " + std::to_string(bound) + "); this indicates a solver fault");
    }
    return AchievabilityResult{ball.alpha, delta_max};
}

ConverseResult converse_check(const ReprEnsemble & ens, const Eigen::VectorXd & candidate, double tol) {
    if (candidate.size() != ens.points.cols()) {
        fail_validation("converse_check: candidate dimension does not match the ensemble");
    }
    if (!candidate.allFinite()) {
        fail_validation("converse_check: candidate must be finite");
    }
    double delta_max = 0.0;
    for (size_t i = 0; i < ens.n_models(); ++i) {
        delta_max = std::max(
            delta_max, (ens.points.row(static_cast<Eigen::Index>(i)).transpose() - candidate).squaredNorm());
    }
    const double delta = diameter(ens).delta;
    return ConverseResult{delta_max, delta_max >= delta * delta / 4.0 - tol};
}

double rate_lower_bound(double distortion, const ReprEnsemble & ens) {
    if (distortion < 0.0) {
        fail_validation("rate_lower_bound needs a non-negative distortion");
    }
    const BallResult ball = min_enclosing_ball(ens);
    const double d_star = ball.radius * ball.radius;
    return distortion >= d_star ? 0.0 : std::log2(static_cast<double>(ens.n_models()));
}

DistortionReport distortion_report(const ReprEnsemble & ens, std::optional<double> budget,
                                   const MebOptions & opts) {
    DistortionReport rep;
    const DiameterResult diam = diameter(ens);
    rep.diameter_sq = diam.delta * diam.delta;
    rep.lower_bound = rep.diameter_sq / 4.0;
    const double dprime = static_cast<double>(ens.effective_dim());
    const double dambient = static_cast<double>(ens.ambient_dim());
    rep.upper_bound = dprime / (2.0 * (dprime + 1.0)) * rep.diameter_sq;
    rep.upper_bound_ambient = dambient / (2.0 * (dambient + 1.0)) * rep.diameter_sq;
    rep.approx_half_bound = rep.diameter_sq / 2.0;
    rep.effective_dim = ens.effective_dim();
    rep.ambient_dim = ens.ambient_dim();

    const BallResult ball = min_enclosing_ball(ens, opts);
    rep.d_star = ball.radius * ball.radius;
    double delta_max = 0.0;
    for (size_t i = 0; i < ens.n_models(); ++i) {
        delta_max = std::max(
            delta_max, (ens.points.row(static_cast<Eigen::Index>(i)).transpose() - ball.center).squaredNorm());
    }
    rep.delta_max = delta_max;
    rep.budget = budget;
    rep.budget_verdict = budget.has_value() && rep.upper_bound <= *budget;
    return rep;
}

bool mergeability_test(const ReprEnsemble & ens, double budget) {
    if (budget < 0.0) {
        fail_validation("mergeability_test needs a non-negative budget");
    }
    const double dprime = static_cast<double>(ens.effective_dim());
    const double delta = diameter(ens).delta;
    return dprime / (2.0 * (dprime + 1.0)) * delta * delta <= budget;
}

// ---------------------------------------------------------------------------
// Synthetic LMC-linear ensembles
// ---------------------------------------------------------------------------

Eigen::VectorXd LmcLinearEnsemble::hidden(size_t datapoint, const Eigen::VectorXd & params) const {
    return maps[datapoint] * params + offsets[datapoint];
}

std::pair<LmcLinearEnsemble, ActivationSet> synth_lmc_ensemble(uint64_t seed, size_t n_models,
                                                               size_t param_dim, size_t hidden_dim,
                                                               size_t n_datapoints, double spread) {
    if (n_models < 2) {
        fail_validation("synth_lmc_ensemble needs at least 2 models");
    }
    if (hidden_dim < 1 || n_datapoints < 1 || param_dim < hidden_dim) {
        fail_validation("synth_lmc_ensemble needs hidden_dim >= 1, datapoints >= 1 and "
                        "param_dim >= hidden_dim");
    }
    SplitMix64 rng(seed);
    LmcLinearEnsemble ens;
    ens.base_params.resize(static_cast<Eigen::Index>(param_dim));
    for (Eigen::Index i = 0; i < ens.base_params.size(); ++i) {
        ens.base_params(i) = rng.next_gaussian();
    }
    ens.minima.resize(static_cast<Eigen::Index>(n_models), static_cast<Eigen::Index>(param_dim));
    for (size_t m = 0; m < n_models; ++m) {
        for (size_t p = 0; p < param_dim; ++p) {
            ens.minima(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p)) =
                ens.base_params(static_cast<Eigen::Index>(p)) + spread * rng.next_gaussian();
        }
    }
    ens.maps.resize(n_datapoints);
    ens.offsets.resize(n_datapoints);
    for (size_t k = 0; k < n_datapoints; ++k) {
        ens.maps[k].resize(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(param_dim));
        for (Eigen::Index r = 0; r < ens.maps[k].rows(); ++r) {
            for (Eigen::Index c = 0; c < ens.maps[k].cols(); ++c) {
                ens.maps[k](r, c) = rng.next_gaussian() / std::sqrt(static_cast<double>(param_dim));
            }
        }
        ens.offsets[k].resize(static_cast<Eigen::Index>(hidden_dim));
        for (Eigen::Index r = 0; r < ens.offsets[k].size(); ++r) {
            ens.offsets[k](r) = rng.next_gaussian();
        }
    }

    ActivationSet acts;
    acts.hidden_dim = static_cast<int64_t>(hidden_dim);
    for (size_t m = 0; m < n_models; ++m) {
        acts.model_ids.push_back(pad_id("m", m, n_models));
    }
    for (size_t k = 0; k < n_datapoints; ++k) {
        acts.datapoint_ids.push_back(pad_id("x", k, n_datapoints));
    }
    acts.data.resize(n_models * n_datapoints * hidden_dim);
    for (size_t m = 0; m < n_models; ++m) {
        for (size_t k = 0; k < n_datapoints; ++k) {
            const Eigen::VectorXd h = ens.hidden(k, ens.minima.row(static_cast<Eigen::Index>(m)));
            auto dst = acts.vec(m, k);
            for (size_t t = 0; t < hidden_dim; ++t) {
                dst[t] = static_cast<float>(h(static_cast<Eigen::Index>(t)));
            }
        }
    }
    return {std::move(ens), std::move(acts)};
}

ActivationSet merged_hidden_states(const LmcLinearEnsemble & ens, std::span<const double> alpha) {
    if (alpha.size() != ens.n_models()) {
        fail_validation("merged_hidden_states: alpha length must equal the model count");
    }
    double sum = 0.0;
    for (double a : alpha) {
        if (a < -1e-12) {
            fail_validation("merged_hidden_states: alpha must be non-negative");
        }
        sum += a;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        fail_validation("merged_hidden_states: alpha must sum to 1");
    }

    Eigen::VectorXd merged_params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ens.param_dim()));
    for (size_t m = 0; m < ens.n_models(); ++m) {
        merged_params += alpha[m] * ens.minima.row(static_cast<Eigen::Index>(m)).transpose();
    }

    ActivationSet acts;
    acts.hidden_dim = static_cast<int64_t>(ens.hidden_dim());
    acts.model_ids = {"merged", "merged_check"};
    for (size_t k = 0; k < ens.n_datapoints(); ++k) {
        acts.datapoint_ids.push_back(pad_id("x", k, ens.n_datapoints()));
    }
    acts.data.resize(2 * ens.n_datapoints() * ens.hidden_dim());
    for (size_t k = 0; k < ens.n_datapoints(); ++k) {
        // parameter path
        const Eigen::VectorXd via_params = ens.hidden(k, merged_params);
        // representation path
        Eigen::VectorXd via_hidden = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ens.hidden_dim()));
        for (size_t m = 0; m < ens.n_models(); ++m) {
            via_hidden += alpha[m] * ens.hidden(k, ens.minima.row(static_cast<Eigen::Index>(m)));
        }
        const double scale = std::max({via_params.norm(), via_hidden.norm(), 1.0});
        if ((via_params - via_hidden).norm() > 1e-10 * scale) {
            fail_numeric("hidden-state linearity violated: parameter-space merge and convex hidden "
                         "combination disagree beyond 1e-10 relative");
        }
        auto dst0 = acts.vec(0, k);
        auto dst1 = acts.vec(1, k);
        for (size_t t = 0; t < ens.hidden_dim(); ++t) {
            dst0[t] = static_cast<float>(via_params(static_cast<Eigen::Index>(t)));
            dst1[t] = static_cast<float>(via_hidden(static_cast<Eigen::Index>(t)));
        }
    }
    return acts;
}

} // namespace mergemeter
