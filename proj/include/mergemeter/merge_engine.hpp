#pragma once

#include "mergemeter/tensor_store.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mergemeter {

enum class MergeMethod { LA, TA, TIES, DARE, SLERP };

std::string_view merge_method_name(MergeMethod m);
MergeMethod merge_method_from_name(std::string_view s);

// User-facing knobs for all five techniques. Parameters irrelevant to the
// chosen method are ignored but still range-checked.
struct MergeRecipe {
    MergeMethod method = MergeMethod::LA;
    std::optional<double> scale_lambda;          // TA/TIES/DARE final scale; default 1/n
    double trim_keep_fraction = 0.2;             // TIES, in (0, 1]
    double drop_probability = 0.5;               // DARE, in [0, 1)
    double slerp_t = 0.5;                        // SLERP, in [0, 1]
    uint64_t seed = 0;                           // DARE mask stream
    MergeMethod dare_combiner = MergeMethod::TA; // TA or TIES
    std::optional<std::vector<double>> weights;  // LA, non-negative, sums to 1

    void validate(size_t n_inputs) const;
};

// Element-wise weighted mean; default weights are uniform 1/n.
TaskVector merge_linear_average(std::span<const TaskVector> taus,
                                std::optional<std::span<const double>> weights = std::nullopt);

// lambda * sum of task vectors; lambda = 1/n reproduces linear averaging.
TaskVector merge_task_arithmetic(std::span<const TaskVector> taus, double scale_lambda);

// Trim / elect sign / disjoint mean over the flattened global parameter
// vector, then scale by lambda. Trim keeps the top keep_fraction entries of
// each task vector by |value| (ties at the threshold keep the lower flat
// index); the elected sign is the sign of the per-position sum of trimmed
// values (zero elects positive); the merge averages trimmed values whose
// sign matches the election.
TaskVector merge_ties(std::span<const TaskVector> taus, double trim_keep_fraction, double scale_lambda);

// Per-element Bernoulli(keep = 1-p) drop with 1/(1-p) rescale, keyed by
// (seed, task index, flat element index), then the selected combiner.
TaskVector merge_dare(std::span<const TaskVector> taus, double drop_probability, uint64_t seed,
                      MergeMethod combiner, double scale_lambda, double trim_keep_fraction = 0.2);

// Per-tensor spherical interpolation. More than two inputs left-fold with
// t = 1/k, which reduces to uniform averaging for collinear inputs.
TaskVector merge_slerp(std::span<const TaskVector> taus, double slerp_t);

// Validates the recipe and dispatches to one of the five techniques.
TaskVector run_merge(std::span<const TaskVector> taus, const MergeRecipe & recipe);

} // namespace mergemeter
