#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mergemeter {

enum class Normalization { per_dim, unit_vector, none };

Normalization normalization_from_name(std::string_view s);
std::string_view normalization_name(Normalization n);

// Last-layer hidden vectors for N models on a shared K-point validation
// set. Rectangular by construction: every model has a vector of length
// hidden_dim for every datapoint.
struct ActivationSet {
    std::vector<std::string> model_ids;
    std::vector<std::string> datapoint_ids;
    int64_t hidden_dim = 0;
    std::vector<float> data; // [model][datapoint][dim], row-major

    size_t n_models() const { return model_ids.size(); }
    size_t n_datapoints() const { return datapoint_ids.size(); }
    std::span<const float> vec(size_t model, size_t datapoint) const;
    std::span<float> vec(size_t model, size_t datapoint);

    void validate() const;
};

// Container round-trip with tensor names "act/<model_id>/<datapoint_id>".
ActivationSet load_activation_set(const std::filesystem::path & path);
void save_activation_set(const ActivationSet & acts, const std::filesystem::path & path);

enum class SimKind { distance, hiddensim };

struct SimilarityMatrix {
    SimKind kind = SimKind::distance;
    std::vector<std::string> labels;
    std::vector<double> values; // n x n row-major, symmetric

    size_t size() const { return labels.size(); }
    double at(size_t i, size_t j) const { return values[i * labels.size() + j]; }
    double & at(size_t i, size_t j) { return values[i * labels.size() + j]; }
};

// d_ij = mean over datapoints of || norm(h_i) - norm(h_j) ||_2, where
// per_dim divides by sqrt(hidden_dim), unit_vector by each vector's own
// norm, and none leaves vectors as they are.
SimilarityMatrix pairwise_hidden_distance(const ActivationSet & acts,
                                          Normalization normalization = Normalization::per_dim);

// Affine min-max renormalization over the off-diagonal multiset: the
// closest pair maps to 1, the farthest to 0, the diagonal is 1.
SimilarityMatrix hiddensim(const SimilarityMatrix & distances);

// MDS_i = 1 / mean_{j != i} HiddenSim(i, j)
std::vector<double> mds(const SimilarityMatrix & sim);

// (merged / finetuned - 1) * 100
double merging_loss(double merged_perf, double finetuned_perf);

double average_merging_loss(std::span<const double> losses);

// Per task, the maximum (least negative) loss across techniques.
std::vector<double> best_merging_loss(const std::map<std::string, std::vector<double>> & per_technique);

// Rows of a (task, technique, finetuned, merged) CSV.
struct PerformanceTable {
    std::vector<std::string> task_ids;
    std::vector<double> finetuned;                        // per task
    std::map<std::string, std::vector<double>> merged;    // technique -> per task
    std::string metric_name;

    std::map<std::string, std::vector<double>> losses() const; // technique -> per-task merging loss
};

PerformanceTable load_performance_csv(const std::filesystem::path & path);

} // namespace mergemeter
