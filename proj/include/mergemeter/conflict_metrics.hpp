#pragma once

#include "mergemeter/tensor_store.hpp"

#include <cstddef>

namespace mergemeter {

enum class CosineGranularity { global, per_tensor };

// sum |a_k - b_k| / sum (|a_k| + |b_k|)
double magnitude_change_ratio(const TaskVector & tau_a, const TaskVector & tau_b);

// fraction of positions with sign(a_k) * sign(b_k) < 0; zeros never conflict
double sign_change_ratio(const TaskVector & tau_a, const TaskVector & tau_b);

// same numerator as magnitude_change_ratio but restricted to sign conflicts
double conflicting_magnitude_ratio(const TaskVector & tau_a, const TaskVector & tau_b);

// global: cosine of the flattened vectors; per_tensor: unweighted mean of
// per-tensor cosines (the default)
double avg_cosine_similarity(const TaskVector & tau_a, const TaskVector & tau_b,
                             CosineGranularity granularity = CosineGranularity::per_tensor);

struct ConflictReport {
    double magnitude_change_ratio = 0.0;
    double sign_change_ratio = 0.0;
    double conflicting_magnitude_ratio = 0.0;
    double avg_cosine_similarity = 0.0;
    size_t n_positions = 0;
};

ConflictReport conflict_report(const TaskVector & tau_a, const TaskVector & tau_b,
                               CosineGranularity granularity = CosineGranularity::per_tensor);

} // namespace mergemeter
