#pragma once

#include "mergemeter/repr_diag.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace mergemeter {

// N model representations stacked into R^{K*d}: each model's K hidden
// vectors are concatenated and scaled by 1/sqrt(K), so squared Euclidean
// distance between rows equals the datapoint-averaged squared hidden-state
// distance (1/K) sum_k ||h_i^k - h_j^k||^2.
struct ReprEnsemble {
    Eigen::MatrixXd points; // N x (K*d)
    std::vector<std::string> labels;
    size_t n_datapoints = 1;

    size_t n_models() const { return static_cast<size_t>(points.rows()); }
    size_t ambient_dim() const { return static_cast<size_t>(points.cols()); }
    size_t effective_dim() const { return std::min(ambient_dim(), n_models() - 1); }
};

ReprEnsemble make_ensemble(const ActivationSet & acts, Normalization normalization = Normalization::none);

struct DiameterResult {
    double delta = 0.0; // max pairwise distance
    size_t i = 0;
    size_t j = 0;
};

// Exact O(N^2) maximum; ties resolve to the lexicographically smallest pair.
DiameterResult diameter(const ReprEnsemble & ens);

enum class BallMethod { exact_welzl, core_set };

struct BallResult {
    Eigen::VectorXd center;
    double radius = 0.0;
    std::vector<size_t> support;  // on-sphere points defining the ball
    Eigen::VectorXd alpha;        // barycentric coefficients over all N points
    BallMethod method = BallMethod::exact_welzl;
    double tolerance = 0.0;
};

struct MebOptions {
    double tol = 1e-9;               // relative
    size_t max_core_set_iters = 200000;
    std::optional<BallMethod> force_method;
};

// Exact Welzl when effective_dim <= 16 and N <= 2048 (all geometry is done
// in an orthonormal basis of the points' affine hull); otherwise the
// Badoiu-Clarkson farthest-point iteration with a certified lower bound.
BallResult min_enclosing_ball(const ReprEnsemble & ens, const MebOptions & opts = {});
BallResult min_enclosing_ball_points(const Eigen::MatrixXd & points, const MebOptions & opts = {});

struct AchievabilityResult {
    Eigen::VectorXd alpha;
    double delta_max = 0.0; // squared radius of the minimum enclosing ball
};

// The ball center as a convex merge; checks the Jung bound
// delta_max <= d'/(2(d'+1)) * Delta^2 before returning.
AchievabilityResult achievability_merge(const ReprEnsemble & ens);

struct ConverseResult {
    double delta_max = 0.0;
    bool passes = false; // delta_max >= Delta^2/4 - tol; false signals a numerical fault
};

ConverseResult converse_check(const ReprEnsemble & ens, const Eigen::VectorXd & candidate,
                              double tol = 1e-9);

// Zero-rate point of the rate-distortion curve: 0 at D >= D*, log2(N) below.
double rate_lower_bound(double distortion, const ReprEnsemble & ens);

struct DistortionReport {
    double diameter_sq = 0.0;          // Delta^2
    double lower_bound = 0.0;          // Delta^2 / 4
    double upper_bound = 0.0;          // d'/(2(d'+1)) * Delta^2
    double upper_bound_ambient = 0.0;  // same with the ambient dimension
    double approx_half_bound = 0.0;    // Delta^2 / 2 (large-d approximation)
    double d_star = 0.0;               // exact MEB radius^2
    double delta_max = 0.0;            // distortion achieved by the MEB merge
    size_t effective_dim = 0;
    size_t ambient_dim = 0;
    std::optional<double> budget;
    bool budget_verdict = false;       // upper_bound <= budget
};

DistortionReport distortion_report(const ReprEnsemble & ens, std::optional<double> budget = std::nullopt,
                                   const MebOptions & opts = {});

// Sufficient test from the Jung bound: d'/(2(d'+1)) * Delta^2 <= budget.
bool mergeability_test(const ReprEnsemble & ens, double budget);

// Synthetic ensemble whose hidden states are exactly affine in the
// parameters, so convex parameter merges commute with convex hidden-state
// merges (epsilon = 0 by construction).
struct LmcLinearEnsemble {
    // convex combinations of the minima keep the (synthetic) training loss
    // exactly flat, so the connectivity tolerance is zero by construction
    static constexpr double lmc_loss_tolerance = 0.0;

    Eigen::VectorXd base_params;          // theta_0 in R^p
    Eigen::MatrixXd minima;               // N x p, row i = theta_i
    std::vector<Eigen::MatrixXd> maps;    // per datapoint, d x p
    std::vector<Eigen::VectorXd> offsets; // per datapoint, d

    size_t n_models() const { return static_cast<size_t>(minima.rows()); }
    size_t param_dim() const { return static_cast<size_t>(minima.cols()); }
    size_t hidden_dim() const { return maps.empty() ? 0 : static_cast<size_t>(maps[0].rows()); }
    size_t n_datapoints() const { return maps.size(); }

    Eigen::VectorXd hidden(size_t datapoint, const Eigen::VectorXd & params) const;
};

std::pair<LmcLinearEnsemble, ActivationSet> synth_lmc_ensemble(uint64_t seed, size_t n_models,
                                                               size_t param_dim, size_t hidden_dim,
                                                               size_t n_datapoints, double spread);

// Evaluates h(x; sum alpha_i theta_i) through the parameter-space merge and
// verifies it equals sum alpha_i h(x; theta_i) to 1e-10 relative.
ActivationSet merged_hidden_states(const LmcLinearEnsemble & ens, std::span<const double> alpha);

} // namespace mergemeter
