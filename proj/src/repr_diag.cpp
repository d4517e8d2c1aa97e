#include "mergemeter/repr_diag.hpp"

#include "mergemeter/error.hpp"
#include "mergemeter/numeric.hpp"
#include "mergemeter/table_io.hpp"
#include "mergemeter/tensor_store.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace mergemeter {

Normalization normalization_from_name(std::string_view s) {
    if (s == "per_dim") {
        return Normalization::per_dim;
    }
    if (s == "unit_vector") {
        return Normalization::unit_vector;
    }
    if (s == "none") {
        return Normalization::none;
    }
    fail_validation("unknown normalization '" + std::string(s) +
                    "' (expected per_dim, unit_vector or none)");
}

std::string_view normalization_name(Normalization n) {
    switch (n) {
        case Normalization::per_dim:     return "per_dim";
        case Normalization::unit_vector: return "unit_vector";
        case Normalization::none:        return "none";
    }
    return "?";
}

std::span<const float> ActivationSet::vec(size_t model, size_t datapoint) const {
    const size_t d = static_cast<size_t>(hidden_dim);
    return {data.data() + (model * n_datapoints() + datapoint) * d, d};
}

std::span<float> ActivationSet::vec(size_t model, size_t datapoint) {
    const size_t d = static_cast<size_t>(hidden_dim);
    return {data.data() + (model * n_datapoints() + datapoint) * d, d};
}

void ActivationSet::validate() const {
    if (n_models() < 2) {
        fail_validation("ActivationSet needs at least 2 models");
    }
    if (n_datapoints() < 1 || hidden_dim < 1) {
        fail_validation("ActivationSet needs at least one datapoint and hidden_dim >= 1");
    }
    if (data.size() != n_models() * n_datapoints() * static_cast<size_t>(hidden_dim)) {
        fail_validation("ActivationSet is not rectangular");
    }
    for (float v : data) {
        if (!std::isfinite(v)) {
            fail_validation("ActivationSet contains non-finite values");
        }
    }
}

ActivationSet load_activation_set(const std::filesystem::path & path) {
    const Checkpoint ckpt = read_container(path);
    std::set<std::string> models;
    std::set<std::string> datapoints;
    int64_t dim = -1;
    for (const auto & e : ckpt.entries) {
        if (e.name.rfind("act/", 0) != 0) {
            fail_validation("'" + path.string() + "': tensor '" + e.name +
                            "' does not follow the act/<model>/<datapoint> convention");
        }
        const auto rest = e.name.substr(4);
        const auto slash = rest.find('/');
        if (slash == std::string::npos || slash == 0 || slash + 1 == rest.size()) {
            fail_validation("'" + path.string() + "': tensor '" + e.name +
                            "' does not follow the act/<model>/<datapoint> convention");
        }
        models.insert(rest.substr(0, slash));
        datapoints.insert(rest.substr(slash + 1));
        if (e.shape.size() != 1) {
            fail_validation("activation tensor '" + e.name + "' must have shape [d]");
        }
        if (dim < 0) {
            dim = e.shape[0];
        } else if (dim != e.shape[0]) {
            fail_validation("activation tensors have inconsistent hidden dimensions");
        }
    }
    ActivationSet acts;
    acts.model_ids.assign(models.begin(), models.end());
    acts.datapoint_ids.assign(datapoints.begin(), datapoints.end());
    acts.hidden_dim = dim;
    acts.data.resize(acts.n_models() * acts.n_datapoints() * static_cast<size_t>(std::max<int64_t>(dim, 0)));
    for (size_t m = 0; m < acts.n_models(); ++m) {
        for (size_t k = 0; k < acts.n_datapoints(); ++k) {
            const std::string name = "act/" + acts.model_ids[m] + "/" + acts.datapoint_ids[k];
            const TensorEntry * e = ckpt.find(name);
            if (e == nullptr) {
                fail_validation("'" + path.string() + "': missing activation '" + name +
                                "' (set is not rectangular)");
            }
            std::copy(e->values.begin(), e->values.end(), acts.vec(m, k).begin());
        }
    }
    acts.validate();
    return acts;
}

void save_activation_set(const ActivationSet & acts, const std::filesystem::path & path) {
    acts.validate();
    std::vector<TensorEntry> entries;
    entries.reserve(acts.n_models() * acts.n_datapoints());
    for (size_t m = 0; m < acts.n_models(); ++m) {
        if (acts.model_ids[m].find('/') != std::string::npos) {
            fail_validation("model id '" + acts.model_ids[m] + "' must not contain '/'");
        }
        for (size_t k = 0; k < acts.n_datapoints(); ++k) {
            const auto v = acts.vec(m, k);
            entries.push_back(TensorEntry{"act/" + acts.model_ids[m] + "/" + acts.datapoint_ids[k],
                                          Dtype::f32,
                                          {acts.hidden_dim},
                                          std::vector<float>(v.begin(), v.end())});
        }
    }
    write_container(make_checkpoint(std::move(entries)), path);
}

namespace {

std::vector<double> normalized_vector(std::span<const float> h, Normalization norm, const std::string & label) {
    std::vector<double> v(h.begin(), h.end());
    switch (norm) {
        case Normalization::none:
            break;
        case Normalization::per_dim: {
            const double s = 1.0 / std::sqrt(static_cast<double>(h.size()));
            for (double & x : v) {
                x *= s;
            }
            break;
        }
        case Normalization::unit_vector: {
            const double n2 = pairwise_sum(v.size(), [&](size_t i) { return v[i] * v[i]; });
            if (n2 == 0.0) {
                fail_validation("unit_vector normalization hit a zero-norm hidden state (" + label + ")");
            }
            const double s = 1.0 / std::sqrt(n2);
            for (double & x : v) {
                x *= s;
            }
            break;
        }
    }
    return v;
}

} // namespace

SimilarityMatrix pairwise_hidden_distance(const ActivationSet & acts, Normalization normalization) {
    acts.validate();
    const size_t n = acts.n_models();
    const size_t kpoints = acts.n_datapoints();

    // normalize once up front
    std::vector<std::vector<double>> normed(n * kpoints);
    for (size_t m = 0; m < n; ++m) {
        for (size_t k = 0; k < kpoints; ++k) {
            normed[m * kpoints + k] =
                normalized_vector(acts.vec(m, k), normalization,
                                  "model '" + acts.model_ids[m] + "', datapoint '" +
                                      acts.datapoint_ids[k] + "'");
        }
    }

    SimilarityMatrix out;
    out.kind = SimKind::distance;
    out.labels = acts.model_ids;
    out.values.assign(n * n, 0.0);

    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    parallel_for(pairs.size(), [&](size_t p) {
        const auto [i, j] = pairs[p];
        const double d = pairwise_sum(kpoints, [&](size_t k) {
            const auto & a = normed[i * kpoints + k];
            const auto & b = normed[j * kpoints + k];
            const double sq = pairwise_sum(a.size(), [&](size_t t) {
                const double diff = a[t] - b[t];
                return diff * diff;
            });
            return std::sqrt(sq);
        }) / static_cast<double>(kpoints);
        out.at(i, j) = d;
        out.at(j, i) = d;
    });
    return out;
}

SimilarityMatrix hiddensim(const SimilarityMatrix & distances) {
    if (distances.kind != SimKind::distance) {
        fail_validation("hiddensim expects a distance matrix");
    }
    const size_t n = distances.size();
    if (n < 2) {
        fail_validation("hiddensim needs at least 2 models");
    }
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            dmin = std::min(dmin, distances.at(i, j));
            dmax = std::max(dmax, distances.at(i, j));
        }
    }
    if (dmax == dmin) {
        fail_numeric("hiddensim is undefined: all pairs are equidistant (max(D) == min(D)); "
                     "the min-max renormalization has no spread to map onto [0, 1]");
    }
    SimilarityMatrix out;
    out.kind = SimKind::hiddensim;
    out.labels = distances.labels;
    out.values.assign(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        out.at(i, i) = 1.0;
        for (size_t j = i + 1; j < n; ++j) {
            const double s = (dmax - distances.at(i, j)) / (dmax - dmin);
            out.at(i, j) = s;
            out.at(j, i) = s;
        }
    }
    return out;
}

std::vector<double> mds(const SimilarityMatrix & sim) {
    if (sim.kind != SimKind::hiddensim) {
        fail_validation("mds expects a hiddensim matrix");
    }
    const size_t n = sim.size();
    if (n < 3) {
        fail_validation("mds needs at least 3 models (with 2, one pair's similarity is always 0 or 1)");
    }
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        const double mean = pairwise_sum(n, [&](size_t j) { return j == i ? 0.0 : sim.at(i, j); }) /
                            static_cast<double>(n - 1);
        if (mean <= 0.0) {
            fail_numeric("MDS is infinite for model '" + sim.labels[i] +
                         "': its mean similarity with the rest of the group is 0");
        }
        out[i] = 1.0 / mean;
    }
    return out;
}

double merging_loss(double merged_perf, double finetuned_perf) {
    if (!(finetuned_perf > 0.0)) {
        fail_validation("merging_loss needs a positive fine-tuned performance");
    }
    if (merged_perf < 0.0) {
        fail_validation("merging_loss needs a non-negative merged performance");
    }
    return (merged_perf / finetuned_perf - 1.0) * 100.0;
}

double average_merging_loss(std::span<const double> losses) {
    if (losses.empty()) {
        fail_validation("average_merging_loss needs at least one loss");
    }
    return pairwise_sum(losses) / static_cast<double>(losses.size());
}

std::vector<double> best_merging_loss(const std::map<std::string, std::vector<double>> & per_technique) {
    if (per_technique.empty()) {
        fail_validation("best_merging_loss needs at least one technique");
    }
    const size_t n_tasks = per_technique.begin()->second.size();
    std::vector<double> best(n_tasks, -std::numeric_limits<double>::infinity());
    for (const auto & [technique, losses] : per_technique) {
        if (losses.size() != n_tasks) {
            fail_validation("best_merging_loss: technique '" + technique +
                            "' covers a different task list");
        }
        for (size_t i = 0; i < n_tasks; ++i) {
            best[i] = std::max(best[i], losses[i]);
        }
    }
    return best;
}

std::map<std::string, std::vector<double>> PerformanceTable::losses() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto & [technique, perf] : merged) {
        std::vector<double> row(task_ids.size());
        for (size_t i = 0; i < row.size(); ++i) {
            row[i] = merging_loss(perf[i], finetuned[i]);
        }
        out[technique] = std::move(row);
    }
    return out;
}

PerformanceTable load_performance_csv(const std::filesystem::path & path) {
    const auto rows = read_csv(path);
    if (rows.empty()) {
        fail_validation("'" + path.string() + "' is empty");
    }
    size_t first = 0;
    if (!rows[0].empty() && rows[0][0] == "task_id") {
        first = 1; // header row
    }
    PerformanceTable table;
    std::map<std::string, size_t> task_index;
    std::map<std::pair<std::string, std::string>, double> cells;
    for (size_t r = first; r < rows.size(); ++r) {
        const auto & row = rows[r];
        if (row.size() != 4) {
            fail_validation("'" + path.string() + "' row " + std::to_string(r + 1) +
                            ": expected task_id,technique,finetuned,merged");
        }
        const std::string & task = row[0];
        const std::string & technique = row[1];
        const double ft = parse_double(row[2], "finetuned performance");
        const double m = parse_double(row[3], "merged performance");
        auto [it, inserted] = task_index.try_emplace(task, table.task_ids.size());
        if (inserted) {
            table.task_ids.push_back(task);
            table.finetuned.push_back(ft);
        } else if (table.finetuned[it->second] != ft) {
            fail_validation("'" + path.string() + "': task '" + task +
                            "' has inconsistent fine-tuned performance values");
        }
        if (!cells.emplace(std::make_pair(technique, task), m).second) {
            fail_validation("'" + path.string() + "': duplicate (task, technique) row for '" + task +
                            "', '" + technique + "'");
        }
    }
    std::set<std::string> techniques;
    for (const auto & [key, value] : cells) {
        techniques.insert(key.first);
    }
    for (const auto & technique : techniques) {
        std::vector<double> perf(table.task_ids.size());
        for (size_t i = 0; i < table.task_ids.size(); ++i) {
            const auto it = cells.find(std::make_pair(technique, table.task_ids[i]));
            if (it == cells.end()) {
                fail_validation("'" + path.string() + "': technique '" + technique +
                                "' is missing task '" + table.task_ids[i] + "'");
            }
            perf[i] = it->second;
        }
        table.merged[technique] = std::move(perf);
    }
    return table;
}

} // namespace mergemeter
