#include "mergemeter/conflict_metrics.hpp"

#include "mergemeter/error.hpp"
#include "mergemeter/numeric.hpp"

#include <cmath>

namespace mergemeter {

namespace {

size_t total_positions(const TaskVector & tau) {
    size_t n = 0;
    for (const auto & e : tau.entries) {
        n += e.values.size();
    }
    return n;
}

int sign_of(float v) { return (v > 0.0f) - (v < 0.0f); }

// sum_k (|a_k| + |b_k|) over all tensors, pairwise-accumulated
double magnitude_denominator(const TaskVector & a, const TaskVector & b) {
    double total = 0.0;
    for (size_t e = 0; e < a.entries.size(); ++e) {
        const auto & va = a.entries[e].values;
        const auto & vb = b.entries[e].values;
        total += pairwise_sum(va.size(), [&](size_t i) {
            return std::fabs(static_cast<double>(va[i])) + std::fabs(static_cast<double>(vb[i]));
        });
    }
    return total;
}

} // namespace

double magnitude_change_ratio(const TaskVector & tau_a, const TaskVector & tau_b) {
    require_same_layout(tau_a.entries, tau_b.entries, "magnitude_change_ratio");
    const double denom = magnitude_denominator(tau_a, tau_b);
    if (denom == 0.0) {
        fail_validation("magnitude_change_ratio is undefined for two all-zero task vectors");
    }
    double num = 0.0;
    for (size_t e = 0; e < tau_a.entries.size(); ++e) {
        const auto & va = tau_a.entries[e].values;
        const auto & vb = tau_b.entries[e].values;
        num += pairwise_sum(va.size(), [&](size_t i) {
            return std::fabs(static_cast<double>(va[i]) - static_cast<double>(vb[i]));
        });
    }
    return num / denom;
}

double sign_change_ratio(const TaskVector & tau_a, const TaskVector & tau_b) {
    require_same_layout(tau_a.entries, tau_b.entries, "sign_change_ratio");
    const size_t n = total_positions(tau_a);
    if (n == 0) {
        fail_validation("sign_change_ratio needs at least one position");
    }
    size_t conflicts = 0;
    for (size_t e = 0; e < tau_a.entries.size(); ++e) {
        const auto & va = tau_a.entries[e].values;
        const auto & vb = tau_b.entries[e].values;
        for (size_t i = 0; i < va.size(); ++i) {
            conflicts += sign_of(va[i]) * sign_of(vb[i]) < 0;
        }
    }
    return static_cast<double>(conflicts) / static_cast<double>(n);
}

double conflicting_magnitude_ratio(const TaskVector & tau_a, const TaskVector & tau_b) {
    require_same_layout(tau_a.entries, tau_b.entries, "conflicting_magnitude_ratio");
    const double denom = magnitude_denominator(tau_a, tau_b);
    if (denom == 0.0) {
        fail_validation("conflicting_magnitude_ratio is undefined for two all-zero task vectors");
    }
    double num = 0.0;
    for (size_t e = 0; e < tau_a.entries.size(); ++e) {
        const auto & va = tau_a.entries[e].values;
        const auto & vb = tau_b.entries[e].values;
        num += pairwise_sum(va.size(), [&](size_t i) {
            if (sign_of(va[i]) * sign_of(vb[i]) < 0) {
                return std::fabs(static_cast<double>(va[i]) - static_cast<double>(vb[i]));
            }
            return 0.0;
        });
    }
    return num / denom;
}

namespace {

double cosine(std::span<const float> a, std::span<const float> b, const std::string & label) {
    const double na2 = pairwise_sum(a.size(), [&](size_t i) {
        return static_cast<double>(a[i]) * static_cast<double>(a[i]);
    });
    const double nb2 = pairwise_sum(b.size(), [&](size_t i) {
        return static_cast<double>(b[i]) * static_cast<double>(b[i]);
    });
    if (na2 == 0.0 || nb2 == 0.0) {
        fail_validation("avg_cosine_similarity: zero-norm operand in " + label);
    }
    const double dot = pairwise_sum(a.size(), [&](size_t i) {
        return static_cast<double>(a[i]) * static_cast<double>(b[i]);
    });
    return dot / std::sqrt(na2 * nb2);
}

} // namespace

double avg_cosine_similarity(const TaskVector & tau_a, const TaskVector & tau_b,
                             CosineGranularity granularity) {
    require_same_layout(tau_a.entries, tau_b.entries, "avg_cosine_similarity");
    if (granularity == CosineGranularity::per_tensor) {
        if (tau_a.entries.empty()) {
            fail_validation("avg_cosine_similarity needs at least one tensor");
        }
        double acc = 0.0;
        for (size_t e = 0; e < tau_a.entries.size(); ++e) {
            acc += cosine(tau_a.entries[e].values, tau_b.entries[e].values,
                          "tensor '" + tau_a.entries[e].name + "'");
        }
        return acc / static_cast<double>(tau_a.entries.size());
    }
    std::vector<float> fa;
    std::vector<float> fb;
    for (size_t e = 0; e < tau_a.entries.size(); ++e) {
        fa.insert(fa.end(), tau_a.entries[e].values.begin(), tau_a.entries[e].values.end());
        fb.insert(fb.end(), tau_b.entries[e].values.begin(), tau_b.entries[e].values.end());
    }
    return cosine(fa, fb, "the flattened vectors");
}

ConflictReport conflict_report(const TaskVector & tau_a, const TaskVector & tau_b,
                               CosineGranularity granularity) {
    ConflictReport r;
    r.magnitude_change_ratio = magnitude_change_ratio(tau_a, tau_b);
    r.sign_change_ratio = sign_change_ratio(tau_a, tau_b);
    r.conflicting_magnitude_ratio = conflicting_magnitude_ratio(tau_a, tau_b);
    r.avg_cosine_similarity = avg_cosine_similarity(tau_a, tau_b, granularity);
    r.n_positions = total_positions(tau_a);
    return r;
}

} // namespace mergemeter
