#include "mergemeter/merge_engine.hpp"

#include "mergemeter/error.hpp"
#include "mergemeter/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mergemeter {

namespace {

void require_inputs(std::span<const TaskVector> taus, size_t min_count, std::string_view what) {
    if (taus.size() < min_count) {
        fail_validation(std::string(what) + " needs at least " + std::to_string(min_count) +
                        " task vectors, got " + std::to_string(taus.size()));
    }
    for (size_t i = 1; i < taus.size(); ++i) {
        require_same_layout(taus[0].entries, taus[i].entries, what);
        if (taus[i].base_digest != taus[0].base_digest) {
            fail_validation(std::string(what) + ": task vectors come from different base checkpoints");
        }
    }
}

TaskVector zero_like(const TaskVector & ref) {
    TaskVector out;
    out.base_digest = ref.base_digest;
    out.entries.reserve(ref.entries.size());
    for (const auto & e : ref.entries) {
        out.entries.push_back(TensorEntry{e.name, Dtype::f32, e.shape,
                                          std::vector<float>(e.values.size(), 0.0f)});
    }
    return out;
}

size_t total_numel(const TaskVector & tau) {
    size_t n = 0;
    for (const auto & e : tau.entries) {
        n += e.values.size();
    }
    return n;
}

// Flat view of one task vector across tensors, in entry order.
struct FlatView {
    const TaskVector * tau;
    float at(size_t entry, size_t offset) const { return tau->entries[entry].values[offset]; }
};

template <class F>
void for_each_position(const TaskVector & ref, F && f) {
    size_t flat = 0;
    for (size_t e = 0; e < ref.entries.size(); ++e) {
        const size_t n = ref.entries[e].values.size();
        for (size_t k = 0; k < n; ++k, ++flat) {
            f(e, k, flat);
        }
    }
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

} // namespace

std::string_view merge_method_name(MergeMethod m) {
    switch (m) {
        case MergeMethod::LA:    return "LA";
        case MergeMethod::TA:    return "TA";
        case MergeMethod::TIES:  return "TIES";
        case MergeMethod::DARE:  return "DARE";
        case MergeMethod::SLERP: return "SLERP";
    }
    fail_validation("unknown merge method");
}

MergeMethod merge_method_from_name(std::string_view s) {
    if (s == "LA")    return MergeMethod::LA;
    if (s == "TA")    return MergeMethod::TA;
    if (s == "TIES")  return MergeMethod::TIES;
    if (s == "DARE")  return MergeMethod::DARE;
    if (s == "SLERP") return MergeMethod::SLERP;
    fail_validation("unknown merge method '" + std::string(s) +
                    "' (expected LA, TA, TIES, DARE or SLERP)");
}

void MergeRecipe::validate(size_t n_inputs) const {
    if (trim_keep_fraction <= 0.0 || trim_keep_fraction > 1.0) {
        fail_validation("trim_keep_fraction must be in (0, 1]");
    }
    if (drop_probability < 0.0 || drop_probability >= 1.0) {
        fail_validation("drop_probability must be in [0, 1)");
    }
    if (slerp_t < 0.0 || slerp_t > 1.0) {
        fail_validation("slerp_t must be in [0, 1]");
    }
    if (scale_lambda && !std::isfinite(*scale_lambda)) {
        fail_validation("scale_lambda must be finite");
    }
    if (dare_combiner != MergeMethod::TA && dare_combiner != MergeMethod::TIES) {
        fail_validation("DARE combiner must be TA or TIES");
    }
    if (weights) {
        if (weights->size() != n_inputs) {
            fail_validation("weights must have one entry per input model");
        }
        double sum = 0.0;
        for (double w : *weights) {
            if (w < 0.0) {
                fail_validation("weights must be non-negative");
            }
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-9) {
            fail_validation("weights must sum to 1 (got " + std::to_string(sum) + ")");
        }
    }
}

TaskVector merge_linear_average(std::span<const TaskVector> taus,
                                std::optional<std::span<const double>> weights) {
    require_inputs(taus, 2, "merge_linear_average");
    const size_t n = taus.size();
    if (weights) {
        if (weights->size() != n) {
            fail_validation("merge_linear_average: weights count does not match inputs");
        }
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if ((*weights)[i] < 0.0) {
                fail_validation("merge_linear_average: weights must be non-negative");
            }
            sum += (*weights)[i];
        }
        if (std::fabs(sum - 1.0) > 1e-9) {
            fail_validation("merge_linear_average: weights must sum to 1");
        }
    }
    TaskVector out = zero_like(taus[0]);
    // the uniform path sums first and scales once, so it agrees bit-for-bit
    // with task arithmetic at lambda = 1/n
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t e = 0; e < out.entries.size(); ++e) {
        auto & dst = out.entries[e].values;
        for (size_t k = 0; k < dst.size(); ++k) {
            double acc = 0.0;
            if (weights) {
                for (size_t t = 0; t < n; ++t) {
                    acc += (*weights)[t] * static_cast<double>(taus[t].entries[e].values[k]);
                }
            } else {
                for (size_t t = 0; t < n; ++t) {
                    acc += static_cast<double>(taus[t].entries[e].values[k]);
                }
                acc *= inv_n;
            }
            dst[k] = static_cast<float>(acc);
        }
    }
    return out;
}

TaskVector merge_task_arithmetic(std::span<const TaskVector> taus, double scale_lambda) {
    require_inputs(taus, 2, "merge_task_arithmetic");
    TaskVector out = zero_like(taus[0]);
    for (size_t e = 0; e < out.entries.size(); ++e) {
        auto & dst = out.entries[e].values;
        for (size_t k = 0; k < dst.size(); ++k) {
            double acc = 0.0;
            for (const auto & tau : taus) {
                acc += static_cast<double>(tau.entries[e].values[k]);
            }
            dst[k] = static_cast<float>(scale_lambda * acc);
        }
    }
    return out;
}

namespace {

// Zeroes everything outside the top keep_fraction of |value| across the
// whole flattened vector. Threshold ties keep the lower flat index.
std::vector<float> trim_task_vector(const TaskVector & tau, double keep_fraction) {
    const size_t n = total_numel(tau);
    std::vector<float> flat(n);
    for_each_position(tau, [&](size_t e, size_t k, size_t idx) { flat[idx] = tau.entries[e].values[k]; });

    size_t keep = static_cast<size_t>(std::llround(keep_fraction * static_cast<double>(n)));
    keep = std::clamp<size_t>(keep, 1, n);
    if (keep == n) {
        return flat;
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto by_abs_then_index = [&](size_t a, size_t b) {
        const float fa = std::fabs(flat[a]);
        const float fb = std::fabs(flat[b]);
        return fa != fb ? fa > fb : a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<ptrdiff_t>(keep - 1), order.end(),
                     by_abs_then_index);

    std::vector<float> trimmed(n, 0.0f);
    for (size_t i = 0; i < keep; ++i) {
        trimmed[order[i]] = flat[order[i]];
    }
    return trimmed;
}

TaskVector from_flat(const TaskVector & ref, const std::vector<float> & flat) {
    TaskVector out = zero_like(ref);
    for_each_position(ref, [&](size_t e, size_t k, size_t idx) { out.entries[e].values[k] = flat[idx]; });
    return out;
}

TaskVector ties_on_trimmed(const TaskVector & ref, const std::vector<std::vector<float>> & trimmed,
                           double scale_lambda) {
    const size_t n = trimmed[0].size();
    std::vector<float> merged(n, 0.0f);
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto & t : trimmed) {
            sum += static_cast<double>(t[i]);
        }
        const int elected = sum < 0.0 ? -1 : 1; // zero sum elects positive
        double acc = 0.0;
        size_t count = 0;
        for (const auto & t : trimmed) {
            if (sign_of(t[i]) == elected) {
                acc += static_cast<double>(t[i]);
                ++count;
            }
        }
        // mean as sum * (1/count), matching linear averaging's rounding
        merged[i] =
            count > 0 ? static_cast<float>(scale_lambda * (acc * (1.0 / static_cast<double>(count)))) : 0.0f;
    }
    return from_flat(ref, merged);
}

} // namespace

TaskVector merge_ties(std::span<const TaskVector> taus, double trim_keep_fraction, double scale_lambda) {
    require_inputs(taus, 1, "merge_ties");
    if (trim_keep_fraction <= 0.0 || trim_keep_fraction > 1.0) {
        fail_validation("merge_ties: trim_keep_fraction must be in (0, 1]");
    }
    std::vector<std::vector<float>> trimmed;
    trimmed.reserve(taus.size());
    for (const auto & tau : taus) {
        trimmed.push_back(trim_task_vector(tau, trim_keep_fraction));
    }
    return ties_on_trimmed(taus[0], trimmed, scale_lambda);
}

TaskVector merge_dare(std::span<const TaskVector> taus, double drop_probability, uint64_t seed,
                      MergeMethod combiner, double scale_lambda, double trim_keep_fraction) {
    require_inputs(taus, 1, "merge_dare");
    if (drop_probability < 0.0 || drop_probability >= 1.0) {
        fail_validation("merge_dare: drop_probability must be in [0, 1)");
    }
    if (combiner != MergeMethod::TA && combiner != MergeMethod::TIES) {
        fail_validation("merge_dare: combiner must be TA or TIES");
    }
    const double keep = 1.0 - drop_probability;
    std::vector<TaskVector> masked(taus.begin(), taus.end());
    if (drop_probability > 0.0) {
        for (size_t t = 0; t < masked.size(); ++t) {
            for_each_position(masked[t], [&](size_t e, size_t k, size_t idx) {
                auto & v = masked[t].entries[e].values[k];
                if (keyed_unit(seed, t, idx) < keep) {
                    v = static_cast<float>(static_cast<double>(v) / keep);
                } else {
                    v = 0.0f;
                }
            });
        }
    }
    if (combiner == MergeMethod::TIES) {
        return merge_ties(masked, trim_keep_fraction, scale_lambda);
    }
    // TA over a single masked vector degenerates to plain scaling
    if (masked.size() == 1) {
        TaskVector out = zero_like(masked[0]);
        for_each_position(out, [&](size_t e, size_t k, size_t) {
            out.entries[e].values[k] =
                static_cast<float>(scale_lambda * static_cast<double>(masked[0].entries[e].values[k]));
        });
        return out;
    }
    return merge_task_arithmetic(masked, scale_lambda);
}

namespace {

// Two-operand spherical interpolation applied tensor-by-tensor.
TaskVector slerp_pair(const TaskVector & u, const TaskVector & v, double t) {
    TaskVector out = zero_like(u);
    for (size_t e = 0; e < u.entries.size(); ++e) {
        const auto & a = u.entries[e].values;
        const auto & b = v.entries[e].values;
        const double na2 = pairwise_sum(a.size(), [&](size_t i) {
            return static_cast<double>(a[i]) * static_cast<double>(a[i]);
        });
        const double nb2 = pairwise_sum(b.size(), [&](size_t i) {
            return static_cast<double>(b[i]) * static_cast<double>(b[i]);
        });
        if (na2 == 0.0 || nb2 == 0.0) {
            fail_validation("merge_slerp: zero tensor '" + u.entries[e].name +
                            "' makes the interpolation angle undefined");
        }
        const double dot = pairwise_sum(a.size(), [&](size_t i) {
            return static_cast<double>(a[i]) * static_cast<double>(b[i]);
        });
        const double cosv = std::clamp(dot / std::sqrt(na2 * nb2), -1.0, 1.0);
        const double omega = std::acos(cosv);
        if (omega > 3.14159265358979323846 - 1e-7) {
            fail_numeric("merge_slerp: tensor '" + u.entries[e].name +
                         "' is antipodal between the inputs; the interpolation arc is undefined");
        }
        double wa;
        double wb;
        if (omega < 1e-7) {
            wa = 1.0 - t;
            wb = t;
        } else {
            const double s = std::sin(omega);
            wa = std::sin((1.0 - t) * omega) / s;
            wb = std::sin(t * omega) / s;
        }
        auto & dst = out.entries[e].values;
        for (size_t i = 0; i < dst.size(); ++i) {
            dst[i] = static_cast<float>(wa * static_cast<double>(a[i]) + wb * static_cast<double>(b[i]));
        }
    }
    return out;
}

} // namespace

TaskVector merge_slerp(std::span<const TaskVector> taus, double slerp_t) {
    require_inputs(taus, 2, "merge_slerp");
    if (slerp_t < 0.0 || slerp_t > 1.0) {
        fail_validation("merge_slerp: slerp_t must be in [0, 1]");
    }
    if (taus.size() == 2) {
        return slerp_pair(taus[0], taus[1], slerp_t);
    }
    // left fold with t = 1/k matches uniform averaging in the collinear limit
    TaskVector acc = taus[0];
    for (size_t k = 2; k <= taus.size(); ++k) {
        acc = slerp_pair(acc, taus[k - 1], 1.0 / static_cast<double>(k));
    }
    return acc;
}

TaskVector run_merge(std::span<const TaskVector> taus, const MergeRecipe & recipe) {
    recipe.validate(taus.size());
    const double lambda =
        recipe.scale_lambda ? *recipe.scale_lambda : 1.0 / static_cast<double>(std::max<size_t>(taus.size(), 1));
    switch (recipe.method) {
        case MergeMethod::LA: {
            std::optional<std::span<const double>> w;
            if (recipe.weights) {
                w = std::span<const double>(*recipe.weights);
            }
            return merge_linear_average(taus, w);
        }
        case MergeMethod::TA:
            return merge_task_arithmetic(taus, lambda);
        case MergeMethod::TIES:
            return merge_ties(taus, recipe.trim_keep_fraction, lambda);
        case MergeMethod::DARE:
            return merge_dare(taus, recipe.drop_probability, recipe.seed, recipe.dare_combiner, lambda,
                              recipe.trim_keep_fraction);
        case MergeMethod::SLERP:
            return merge_slerp(taus, recipe.slerp_t);
    }
    fail_validation("unknown merge method");
}

} // namespace mergemeter
