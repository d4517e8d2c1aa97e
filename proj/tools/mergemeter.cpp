// mergemeter: merge fine-tuned checkpoints, diagnose task mergeability from
// parameter conflicts and hidden-state geometry, and verify the
// rate-distortion bounds on activation dumps or synthetic ensembles.

#include "mergemeter/conflict_metrics.hpp"
#include "mergemeter/error.hpp"
#include "mergemeter/merge_engine.hpp"
#include "mergemeter/numeric.hpp"
#include "mergemeter/repr_diag.hpp"
#include "mergemeter/stats.hpp"
#include "mergemeter/table_io.hpp"
#include "mergemeter/tensor_store.hpp"
#include "mergemeter/theory.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mergemeter;

namespace {

std::string hex_digest(uint64_t digest) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

void ensure_out_dir(const fs::path & dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        fail_io("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
}

// Writes to <out>/<name> when an output directory is set, stdout otherwise.
void emit(const std::optional<fs::path> & out_dir, const std::string & name, const std::string & content) {
    if (out_dir) {
        write_text_file(*out_dir / name, content);
    } else {
        std::fputs(content.c_str(), stdout);
    }
}

std::string matrix_csv(const SimilarityMatrix & m) {
    std::ostringstream ss;
    ss << "model";
    for (const auto & label : m.labels) {
        ss << ',' << csv_escape(label);
    }
    ss << '\n';
    for (size_t i = 0; i < m.size(); ++i) {
        ss << csv_escape(m.labels[i]);
        for (size_t j = 0; j < m.size(); ++j) {
            ss << ',' << format_double(m.at(i, j));
        }
        ss << '\n';
    }
    return ss.str();
}

std::string report_text(const DistortionReport & rep) {
    std::ostringstream ss;
    ss << "diameter_sq = " << format_double(rep.diameter_sq) << '\n'
       << "lower_bound = " << format_double(rep.lower_bound) << '\n'
       << "upper_bound = " << format_double(rep.upper_bound) << '\n'
       << "upper_bound_ambient = " << format_double(rep.upper_bound_ambient) << '\n'
       << "approx_half_bound = " << format_double(rep.approx_half_bound) << '\n'
       << "d_star = " << format_double(rep.d_star) << '\n'
       << "delta_max = " << format_double(rep.delta_max) << '\n'
       << "effective_dim = " << rep.effective_dim << '\n'
       << "ambient_dim = " << rep.ambient_dim << '\n';
    if (rep.budget) {
        ss << "budget = " << format_double(*rep.budget) << '\n'
           << "mergeable = " << (rep.budget_verdict ? "true" : "false") << '\n';
    }
    return ss.str();
}

std::string report_csv(const DistortionReport & rep) {
    std::ostringstream ss;
    ss << "diameter_sq,lower_bound,upper_bound,upper_bound_ambient,approx_half_bound,d_star,"
          "delta_max,effective_dim,ambient_dim,budget,mergeable\n";
    ss << format_double(rep.diameter_sq) << ',' << format_double(rep.lower_bound) << ','
       << format_double(rep.upper_bound) << ',' << format_double(rep.upper_bound_ambient) << ','
       << format_double(rep.approx_half_bound) << ',' << format_double(rep.d_star) << ','
       << format_double(rep.delta_max) << ',' << rep.effective_dim << ',' << rep.ambient_dim << ',';
    if (rep.budget) {
        ss << format_double(*rep.budget) << ',' << (rep.budget_verdict ? "true" : "false");
    } else {
        ss << ',';
    }
    ss << '\n';
    return ss.str();
}

std::vector<double> parse_weight_list(const std::string & csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_double(item, "weight"));
    }
    return out;
}

// Recipe and run options assembled from config-file values overridden by
// explicitly passed CLI flags.
struct RecipeArgs {
    std::string method = "LA";
    double lambda = 0.0;
    bool lambda_set = false;
    double keep = 0.2;
    double drop_p = 0.5;
    double slerp_t = 0.5;
    uint64_t seed = 0;
    std::string combiner = "TA";
    std::string weights_csv;

    void apply_config_entry(const std::string & key, const std::string & value) {
        if (key == "method") {
            method = value;
        } else if (key == "lambda") {
            lambda = parse_double(value, "lambda");
            lambda_set = true;
        } else if (key == "keep") {
            keep = parse_double(value, "keep");
        } else if (key == "drop_p") {
            drop_p = parse_double(value, "drop_p");
        } else if (key == "slerp_t") {
            slerp_t = parse_double(value, "slerp_t");
        } else if (key == "seed") {
            seed = static_cast<uint64_t>(std::stoull(value));
        } else if (key == "combiner") {
            combiner = value;
        } else if (key == "weights") {
            weights_csv = value;
        } else {
            fail_validation("unknown config key '" + key + "'");
        }
    }

    MergeRecipe build() const {
        MergeRecipe recipe;
        recipe.method = merge_method_from_name(method);
        if (lambda_set) {
            recipe.scale_lambda = lambda;
        }
        recipe.trim_keep_fraction = keep;
        recipe.drop_probability = drop_p;
        recipe.slerp_t = slerp_t;
        recipe.seed = seed;
        recipe.dare_combiner = merge_method_from_name(combiner);
        if (!weights_csv.empty()) {
            recipe.weights = parse_weight_list(weights_csv);
        }
        return recipe;
    }
};

std::string recipe_manifest(const MergeRecipe & recipe, size_t n_inputs) {
    std::ostringstream ss;
    ss << "method = " << merge_method_name(recipe.method) << '\n';
    const double lambda = recipe.scale_lambda ? *recipe.scale_lambda
                                              : 1.0 / static_cast<double>(std::max<size_t>(n_inputs, 1));
    ss << "lambda = " << format_double(lambda) << '\n';
    if (recipe.method == MergeMethod::TIES ||
        (recipe.method == MergeMethod::DARE && recipe.dare_combiner == MergeMethod::TIES)) {
        ss << "keep = " << format_double(recipe.trim_keep_fraction) << '\n';
    }
    if (recipe.method == MergeMethod::DARE) {
        ss << "drop_p = " << format_double(recipe.drop_probability) << '\n'
           << "seed = " << recipe.seed << '\n'
           << "combiner = " << merge_method_name(recipe.dare_combiner) << '\n';
    }
    if (recipe.method == MergeMethod::SLERP) {
        ss << "slerp_t = " << format_double(recipe.slerp_t) << '\n';
    }
    if (recipe.weights) {
        ss << "weights =";
        for (double w : *recipe.weights) {
            ss << ' ' << format_double(w);
        }
        ss << '\n';
    }
    return ss.str();
}

ActivationSet drop_model(const ActivationSet & acts, size_t drop) {
    ActivationSet out;
    out.datapoint_ids = acts.datapoint_ids;
    out.hidden_dim = acts.hidden_dim;
    for (size_t m = 0; m < acts.n_models(); ++m) {
        if (m == drop) {
            continue;
        }
        out.model_ids.push_back(acts.model_ids[m]);
    }
    out.data.resize(out.model_ids.size() * out.n_datapoints() * static_cast<size_t>(out.hidden_dim));
    size_t dst = 0;
    for (size_t m = 0; m < acts.n_models(); ++m) {
        if (m == drop) {
            continue;
        }
        for (size_t k = 0; k < acts.n_datapoints(); ++k) {
            const auto src = acts.vec(m, k);
            std::copy(src.begin(), src.end(), out.vec(dst, k).begin());
        }
        ++dst;
    }
    return out;
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

int cmd_merge(const fs::path & base_path, const std::vector<fs::path> & input_paths,
              const RecipeArgs & args, bool override_digest, const fs::path & out_dir) {
    if (input_paths.size() < 2) {
        fail_validation("merge needs at least 2 input checkpoints");
    }
    const Checkpoint base = read_container(base_path);
    std::vector<Checkpoint> inputs;
    inputs.reserve(input_paths.size());
    for (const auto & p : input_paths) {
        inputs.push_back(read_container(p));
    }
    std::vector<TaskVector> taus;
    taus.reserve(inputs.size());
    for (const auto & ckpt : inputs) {
        taus.push_back(task_vector(ckpt, base));
    }
    const MergeRecipe recipe = args.build();
    const TaskVector merged_tau = run_merge(taus, recipe);
    const Checkpoint merged = apply_task_vector(base, merged_tau, 1.0, override_digest);

    ensure_out_dir(out_dir);
    write_container(merged, out_dir / "merged.mmk");

    std::ostringstream manifest;
    manifest << recipe_manifest(recipe, taus.size());
    manifest << "base = " << base_path.string() << '\n';
    manifest << "base_digest = " << hex_digest(checkpoint_digest(base)) << '\n';
    for (size_t i = 0; i < input_paths.size(); ++i) {
        manifest << "input_" << i << " = " << input_paths[i].string() << '\n';
        manifest << "input_" << i << "_digest = " << hex_digest(checkpoint_digest(inputs[i])) << '\n';
    }
    manifest << "merged_digest = " << hex_digest(checkpoint_digest(merged)) << '\n';
    write_text_file(out_dir / "manifest.txt", manifest.str());
    return 0;
}

int cmd_taskvec(const fs::path & base_path, const std::vector<fs::path> & input_paths,
                const fs::path & out_dir) {
    if (input_paths.empty()) {
        fail_validation("taskvec needs at least one fine-tuned checkpoint");
    }
    const Checkpoint base = read_container(base_path);
    ensure_out_dir(out_dir);
    for (const auto & p : input_paths) {
        const TaskVector tau = task_vector(read_container(p), base);
        write_task_vector(tau, out_dir / (p.stem().string() + ".tau.mmk"));
    }
    return 0;
}

int cmd_conflicts(const fs::path & base_path, const std::vector<fs::path> & input_paths,
                  const std::string & granularity, const std::optional<fs::path> & out_dir) {
    if (input_paths.size() < 2) {
        fail_validation("conflicts needs at least 2 checkpoints");
    }
    const CosineGranularity gran =
        granularity == "global" ? CosineGranularity::global : CosineGranularity::per_tensor;
    if (granularity != "global" && granularity != "per_tensor") {
        fail_validation("--cosine must be global or per_tensor");
    }
    const Checkpoint base = read_container(base_path);
    std::vector<TaskVector> taus;
    std::vector<std::string> names;
    for (const auto & p : input_paths) {
        taus.push_back(task_vector(read_container(p), base));
        names.push_back(p.stem().string());
    }

    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < taus.size(); ++i) {
        for (size_t j = i + 1; j < taus.size(); ++j) {
            pairs.emplace_back(i, j);
        }
    }
    std::vector<ConflictReport> reports(pairs.size());
    parallel_for(pairs.size(), [&](size_t p) {
        reports[p] = conflict_report(taus[pairs[p].first], taus[pairs[p].second], gran);
    });

    std::ostringstream ss;
    ss << "model_a,model_b,magnitude_change_ratio,sign_change_ratio,conflicting_magnitude_ratio,"
          "avg_cosine_similarity,n_positions\n";
    for (size_t p = 0; p < pairs.size(); ++p) {
        const auto & r = reports[p];
        ss << csv_escape(names[pairs[p].first]) << ',' << csv_escape(names[pairs[p].second]) << ','
           << format_double(r.magnitude_change_ratio) << ',' << format_double(r.sign_change_ratio)
           << ',' << format_double(r.conflicting_magnitude_ratio) << ','
           << format_double(r.avg_cosine_similarity) << ',' << r.n_positions << '\n';
    }
    if (out_dir) {
        ensure_out_dir(*out_dir);
    }
    emit(out_dir, "conflicts.csv", ss.str());
    return 0;
}

int cmd_hiddensim(const fs::path & acts_path, Normalization norm, const std::optional<fs::path> & out_dir) {
    const ActivationSet acts = load_activation_set(acts_path);
    const SimilarityMatrix dist = pairwise_hidden_distance(acts, norm);
    const SimilarityMatrix sim = hiddensim(dist);
    if (out_dir) {
        ensure_out_dir(*out_dir);
    }
    emit(out_dir, "distance.csv", matrix_csv(dist));
    emit(out_dir, "hiddensim.csv", matrix_csv(sim));
    return 0;
}

std::string mds_csv(const std::vector<std::string> & labels, const std::vector<double> & scores) {
    std::ostringstream ss;
    ss << "model,mds\n";
    for (size_t i = 0; i < labels.size(); ++i) {
        ss << csv_escape(labels[i]) << ',' << format_double(scores[i]) << '\n';
    }
    return ss.str();
}

int cmd_mds(const fs::path & acts_path, Normalization norm, const std::optional<fs::path> & out_dir) {
    const ActivationSet acts = load_activation_set(acts_path);
    const SimilarityMatrix sim = hiddensim(pairwise_hidden_distance(acts, norm));
    const std::vector<double> scores = mds(sim);
    if (out_dir) {
        ensure_out_dir(*out_dir);
    }
    emit(out_dir, "mds.csv", mds_csv(sim.labels, scores));
    return 0;
}

int cmd_bound(const fs::path & acts_path, Normalization norm, std::optional<double> budget, double tol,
              const std::optional<fs::path> & out_dir, const std::string & format) {
    const ActivationSet acts = load_activation_set(acts_path);
    const ReprEnsemble ens = make_ensemble(acts, norm);
    MebOptions opts;
    opts.tol = tol;
    const DistortionReport rep = distortion_report(ens, budget, opts);
    if (out_dir) {
        ensure_out_dir(*out_dir);
        emit(out_dir, "bound.txt", report_text(rep));
        emit(out_dir, "bound.csv", report_csv(rep));
    } else {
        std::fputs((format == "csv" ? report_csv(rep) : report_text(rep)).c_str(), stdout);
    }
    return 0;
}

int cmd_meb(const fs::path & acts_path, Normalization norm, double tol,
            const std::optional<fs::path> & out_dir) {
    const ActivationSet acts = load_activation_set(acts_path);
    const ReprEnsemble ens = make_ensemble(acts, norm);
    MebOptions opts;
    opts.tol = tol;
    const BallResult ball = min_enclosing_ball(ens, opts);

    std::ostringstream ss;
    ss << "radius = " << format_double(ball.radius) << '\n'
       << "radius_sq = " << format_double(ball.radius * ball.radius) << '\n'
       << "method = " << (ball.method == BallMethod::exact_welzl ? "exact_welzl" : "core_set") << '\n'
       << "tolerance = " << format_double(ball.tolerance) << '\n';
    ss << "support =";
    for (size_t idx : ball.support) {
        ss << ' ' << ens.labels[idx];
    }
    ss << '\n';
    ss << "alpha =";
    for (Eigen::Index i = 0; i < ball.alpha.size(); ++i) {
        ss << ' ' << format_double(ball.alpha(i));
    }
    ss << '\n';

    std::ostringstream center;
    center << "component,value\n";
    for (Eigen::Index i = 0; i < ball.center.size(); ++i) {
        center << i << ',' << format_double(ball.center(i)) << '\n';
    }
    if (out_dir) {
        ensure_out_dir(*out_dir);
        emit(out_dir, "meb.txt", ss.str());
        emit(out_dir, "meb_center.csv", center.str());
    } else {
        std::fputs(ss.str().c_str(), stdout);
    }
    return 0;
}

std::vector<double> load_series_csv(const fs::path & path) {
    std::vector<double> out;
    for (const auto & row : read_csv(path)) {
        for (const auto & field : row) {
            if (!field.empty()) {
                out.push_back(parse_double(field, "value in '" + path.string() + "'"));
            }
        }
    }
    return out;
}

int cmd_stats_pearson(const fs::path & x_path, const fs::path & y_path,
                      const std::optional<fs::path> & out_dir, const std::string & format) {
    const std::vector<double> x = load_series_csv(x_path);
    const std::vector<double> y = load_series_csv(y_path);
    const CorrelationResult res = pearson(x, y);
    std::ostringstream text;
    text << "r = " << format_double(res.r) << '\n'
         << "n = " << res.n << '\n'
         << "t_stat = " << format_double(res.t_stat) << '\n'
         << "p_two_sided = " << format_double(res.p_two_sided) << '\n';
    std::ostringstream csv;
    csv << "r,n,t_stat,p_two_sided\n"
        << format_double(res.r) << ',' << res.n << ',' << format_double(res.t_stat) << ','
        << format_double(res.p_two_sided) << '\n';
    if (out_dir) {
        ensure_out_dir(*out_dir);
        emit(out_dir, "pearson.txt", text.str());
        emit(out_dir, "pearson.csv", csv.str());
    } else {
        std::fputs((format == "csv" ? csv.str() : text.str()).c_str(), stdout);
    }
    return 0;
}

int cmd_stats_anova(const fs::path & groups_path, const std::optional<fs::path> & out_dir,
                    const std::string & format) {
    // one CSV line per group
    std::vector<std::vector<double>> groups;
    for (const auto & row : read_csv(groups_path)) {
        std::vector<double> g;
        for (const auto & field : row) {
            if (!field.empty()) {
                g.push_back(parse_double(field, "value in '" + groups_path.string() + "'"));
            }
        }
        if (!g.empty()) {
            groups.push_back(std::move(g));
        }
    }
    const AnovaResult res = anova_oneway(groups);
    std::ostringstream text;
    text << "f_stat = " << format_double(res.f_stat) << '\n'
         << "df_between = " << res.df_between << '\n'
         << "df_within = " << res.df_within << '\n'
         << "p = " << format_double(res.p) << '\n'
         << "degenerate = " << (res.degenerate ? "true" : "false") << '\n';
    std::ostringstream csv;
    csv << "f_stat,df_between,df_within,p,degenerate\n"
        << format_double(res.f_stat) << ',' << res.df_between << ',' << res.df_within << ','
        << format_double(res.p) << ',' << (res.degenerate ? "true" : "false") << '\n';
    if (out_dir) {
        ensure_out_dir(*out_dir);
        emit(out_dir, "anova.txt", text.str());
        emit(out_dir, "anova.csv", csv.str());
    } else {
        std::fputs((format == "csv" ? csv.str() : text.str()).c_str(), stdout);
    }
    return 0;
}

std::string losses_csv(const PerformanceTable & table) {
    const auto losses = table.losses();
    std::ostringstream ss;
    ss << "technique";
    for (const auto & task : table.task_ids) {
        ss << ',' << csv_escape(task);
    }
    ss << ",average\n";
    for (const auto & [technique, row] : losses) {
        ss << csv_escape(technique);
        for (double v : row) {
            ss << ',' << format_double(v);
        }
        ss << ',' << format_double(average_merging_loss(row)) << '\n';
    }
    return ss.str();
}

std::string best_csv(const PerformanceTable & table) {
    const std::vector<double> best = best_merging_loss(table.losses());
    std::ostringstream ss;
    ss << "task,best_loss\n";
    for (size_t i = 0; i < table.task_ids.size(); ++i) {
        ss << csv_escape(table.task_ids[i]) << ',' << format_double(best[i]) << '\n';
    }
    return ss.str();
}

int cmd_losscalc(const fs::path & perf_path, const std::optional<fs::path> & out_dir) {
    const PerformanceTable table = load_performance_csv(perf_path);
    if (out_dir) {
        ensure_out_dir(*out_dir);
    }
    emit(out_dir, "losses.csv", losses_csv(table));
    emit(out_dir, "best.csv", best_csv(table));
    return 0;
}

int cmd_synth(uint64_t seed, size_t n, size_t p, size_t d, size_t k, double spread,
              const fs::path & out_dir) {
    auto [ens, acts] = synth_lmc_ensemble(seed, n, p, d, k, spread);
    ensure_out_dir(out_dir);
    save_activation_set(acts, out_dir / "acts.mmk");

    // parameters as a checkpoint for pipeline reuse
    std::vector<TensorEntry> entries;
    entries.push_back(TensorEntry{"base_params", Dtype::f32,
                                  {static_cast<int64_t>(ens.param_dim())},
                                  std::vector<float>(ens.base_params.data(),
                                                     ens.base_params.data() + ens.base_params.size())});
    for (size_t m = 0; m < ens.n_models(); ++m) {
        const Eigen::VectorXd row = ens.minima.row(static_cast<Eigen::Index>(m));
        entries.push_back(TensorEntry{"minima/" + acts.model_ids[m], Dtype::f32,
                                      {static_cast<int64_t>(ens.param_dim())},
                                      std::vector<float>(row.data(), row.data() + row.size())});
    }
    for (size_t x = 0; x < ens.n_datapoints(); ++x) {
        const Eigen::MatrixXd & a = ens.maps[x];
        std::vector<float> flat;
        flat.reserve(static_cast<size_t>(a.size()));
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            for (Eigen::Index c = 0; c < a.cols(); ++c) {
                flat.push_back(static_cast<float>(a(r, c)));
            }
        }
        entries.push_back(TensorEntry{"map/" + acts.datapoint_ids[x], Dtype::f32,
                                      {a.rows(), a.cols()}, std::move(flat)});
        const Eigen::VectorXd & b = ens.offsets[x];
        entries.push_back(TensorEntry{"offset/" + acts.datapoint_ids[x], Dtype::f32,
                                      {b.size()},
                                      std::vector<float>(b.data(), b.data() + b.size())});
    }
    write_container(make_checkpoint(std::move(entries)), out_dir / "params.mmk");
    return 0;
}

int cmd_report(const fs::path & acts_path, const std::optional<fs::path> & perf_path, Normalization norm,
               std::optional<double> budget, double tol, const fs::path & out_dir) {
    const ActivationSet acts = load_activation_set(acts_path);
    ensure_out_dir(out_dir);

    const SimilarityMatrix dist = pairwise_hidden_distance(acts, norm);
    const SimilarityMatrix sim = hiddensim(dist);
    const std::vector<double> scores = mds(sim);
    write_text_file(out_dir / "distance.csv", matrix_csv(dist));
    write_text_file(out_dir / "hiddensim.csv", matrix_csv(sim));
    write_text_file(out_dir / "mds.csv", mds_csv(sim.labels, scores));

    const ReprEnsemble ens = make_ensemble(acts, norm);
    MebOptions opts;
    opts.tol = tol;
    const DistortionReport rep = distortion_report(ens, budget, opts);
    write_text_file(out_dir / "bound.txt", report_text(rep));
    write_text_file(out_dir / "bound.csv", report_csv(rep));

    // Drop-one ranking: which model, once removed, leaves the easiest group
    // (smallest worst-case MDS). Needs N >= 4 so the remainder supports MDS.
    if (acts.n_models() >= 4) {
        struct Candidate {
            std::string dropped;
            double worst_mds;
        };
        std::vector<Candidate> ranking;
        for (size_t m = 0; m < acts.n_models(); ++m) {
            const ActivationSet subset = drop_model(acts, m);
            const std::vector<double> sub_mds = mds(hiddensim(pairwise_hidden_distance(subset, norm)));
            ranking.push_back({acts.model_ids[m], *std::max_element(sub_mds.begin(), sub_mds.end())});
        }
        std::stable_sort(ranking.begin(), ranking.end(),
                         [](const Candidate & a, const Candidate & b) { return a.worst_mds < b.worst_mds; });
        std::ostringstream ss;
        ss << "dropped_model,remaining_worst_mds\n";
        for (const auto & c : ranking) {
            ss << csv_escape(c.dropped) << ',' << format_double(c.worst_mds) << '\n';
        }
        write_text_file(out_dir / "dropone.csv", ss.str());
    }

    if (perf_path) {
        const PerformanceTable table = load_performance_csv(*perf_path);
        write_text_file(out_dir / "losses.csv", losses_csv(table));
        write_text_file(out_dir / "best.csv", best_csv(table));
        if (table.task_ids.size() == scores.size() && scores.size() >= 3) {
            const std::vector<double> best = best_merging_loss(table.losses());
            std::vector<double> neg_best(best.size());
            for (size_t i = 0; i < best.size(); ++i) {
                neg_best[i] = -best[i];
            }
            const CorrelationResult res = pearson(scores, neg_best);
            std::ostringstream ss;
            ss << "pearson of MDS against negated best merging loss\n"
               << "r = " << format_double(res.r) << '\n'
               << "p_two_sided = " << format_double(res.p_two_sided) << '\n';
            write_text_file(out_dir / "pearson.txt", ss.str());
        }
    }
    return 0;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"checkpoint merging and mergeability diagnostics"};
    app.require_subcommand(1);

    // shared options
    std::string base;
    std::vector<std::string> inputs;
    std::string out;
    std::string config_path;
    std::string format = "text";
    std::string norm_name = "per_dim";
    std::optional<double> budget;
    double tol = 1e-9;
    bool override_digest = false;

    RecipeArgs recipe;

    auto * merge = app.add_subcommand("merge", "merge checkpoints with one of the five techniques");
    merge->add_option("--base", base, "base checkpoint (MMK1)")->required();
    merge->add_option("--inputs", inputs, "fine-tuned checkpoints")->required()->expected(-2);
    auto * opt_method = merge->add_option("--method", recipe.method, "LA, TA, TIES, DARE or SLERP");
    auto * opt_lambda = merge->add_option("--lambda", recipe.lambda, "final scale (default 1/n)");
    auto * opt_keep = merge->add_option("--keep", recipe.keep, "TIES trim keep fraction");
    auto * opt_dropp = merge->add_option("--drop-p", recipe.drop_p, "DARE drop probability");
    auto * opt_slerpt = merge->add_option("--slerp-t", recipe.slerp_t, "SLERP interpolation parameter");
    auto * opt_seed = merge->add_option("--seed", recipe.seed, "DARE mask seed");
    auto * opt_combiner = merge->add_option("--combiner", recipe.combiner, "DARE combiner (TA or TIES)");
    auto * opt_weights = merge->add_option("--weights", recipe.weights_csv, "LA weights, comma separated");
    merge->add_option("--config", config_path, "recipe config file (key = value)");
    merge->add_flag("--override-digest", override_digest, "apply even if base digests mismatch");
    merge->add_option("--out", out, "output directory")->required();

    auto * taskvec = app.add_subcommand("taskvec", "compute task vectors against a base checkpoint");
    taskvec->add_option("--base", base, "base checkpoint")->required();
    taskvec->add_option("--inputs", inputs, "fine-tuned checkpoints")->required()->expected(-1);
    taskvec->add_option("--out", out, "output directory")->required();

    std::string cosine_granularity = "per_tensor";
    auto * conflicts = app.add_subcommand("conflicts", "pairwise parameter-conflict metrics");
    conflicts->add_option("--base", base, "base checkpoint")->required();
    conflicts->add_option("--inputs", inputs, "fine-tuned checkpoints")->required()->expected(-2);
    conflicts->add_option("--cosine", cosine_granularity, "cosine granularity: per_tensor or global");
    conflicts->add_option("--out", out, "output directory (default: stdout)");

    std::string acts_path;
    auto * hidden = app.add_subcommand("hiddensim", "hidden-state distance and similarity matrices");
    hidden->add_option("--acts", acts_path, "activation set (MMK1)")->required();
    hidden->add_option("--norm", norm_name, "per_dim, unit_vector or none");
    hidden->add_option("--out", out, "output directory (default: stdout)");

    auto * mds_cmd = app.add_subcommand("mds", "merging difficulty scores");
    mds_cmd->add_option("--acts", acts_path, "activation set (MMK1)")->required();
    mds_cmd->add_option("--norm", norm_name, "per_dim, unit_vector or none");
    mds_cmd->add_option("--out", out, "output directory (default: stdout)");

    auto * bound = app.add_subcommand("bound", "distortion bounds and mergeability verdict");
    bound->add_option("--acts", acts_path, "activation set (MMK1)")->required();
    bound->add_option("--norm", norm_name, "per_dim, unit_vector or none")->default_val("none");
    bound->add_option("--budget", budget, "distortion budget");
    bound->add_option("--tol", tol, "ball solver tolerance");
    bound->add_option("--out", out, "output directory (default: stdout)");
    bound->add_option("--format", format, "text or csv");

    auto * meb = app.add_subcommand("meb", "minimum enclosing ball of the representations");
    meb->add_option("--acts", acts_path, "activation set (MMK1)")->required();
    meb->add_option("--norm", norm_name, "per_dim, unit_vector or none")->default_val("none");
    meb->add_option("--tol", tol, "ball solver tolerance");
    meb->add_option("--out", out, "output directory (default: stdout)");

    auto * stats_cmd = app.add_subcommand("stats", "significance tests");
    std::string x_path;
    std::string y_path;
    std::string groups_path;
    auto * pearson_cmd = stats_cmd->add_subcommand("pearson", "two-sided Pearson correlation test");
    pearson_cmd->add_option("--x", x_path, "CSV of x values")->required();
    pearson_cmd->add_option("--y", y_path, "CSV of y values")->required();
    pearson_cmd->add_option("--out", out, "output directory (default: stdout)");
    pearson_cmd->add_option("--format", format, "text or csv");
    auto * anova_cmd = stats_cmd->add_subcommand("anova", "one-way ANOVA F-test");
    anova_cmd->add_option("--groups", groups_path, "CSV with one group per line")->required();
    anova_cmd->add_option("--out", out, "output directory (default: stdout)");
    anova_cmd->add_option("--format", format, "text or csv");
    stats_cmd->require_subcommand(1);

    std::string perf_path;
    auto * losscalc = app.add_subcommand("losscalc", "merging losses from a performance table");
    losscalc->add_option("--perf", perf_path, "CSV: task_id,technique,finetuned,merged")->required();
    losscalc->add_option("--out", out, "output directory (default: stdout)");

    uint64_t synth_seed = 0;
    size_t synth_n = 8;
    size_t synth_p = 16;
    size_t synth_d = 4;
    size_t synth_k = 5;
    double synth_spread = 1.0;
    auto * synth = app.add_subcommand("synth", "generate a synthetic linear-hidden ensemble");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--n", synth_n, "number of models");
    synth->add_option("--p", synth_p, "parameter dimension");
    synth->add_option("--d", synth_d, "hidden dimension");
    synth->add_option("--k", synth_k, "number of datapoints");
    synth->add_option("--spread", synth_spread, "parameter spread around the base");
    synth->add_option("--out", out, "output directory")->required();

    auto * report = app.add_subcommand("report", "full diagnostic pipeline");
    report->add_option("--acts", acts_path, "activation set (MMK1)")->required();
    report->add_option("--perf", perf_path, "optional performance table CSV");
    report->add_option("--norm", norm_name, "per_dim, unit_vector or none");
    report->add_option("--budget", budget, "distortion budget");
    report->add_option("--tol", tol, "ball solver tolerance");
    report->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        std::fprintf(stderr, "ERR: %s\n", e.what());
        return 2;
    }

    try {
        // config file values apply only where the CLI flag was not given
        if (!config_path.empty()) {
            RecipeArgs from_file = recipe;
            for (const auto & [key, value] : read_key_values(config_path)) {
                from_file.apply_config_entry(key, value);
            }
            if (opt_method->count() == 0) recipe.method = from_file.method;
            if (opt_lambda->count() == 0 && from_file.lambda_set) {
                recipe.lambda = from_file.lambda;
                recipe.lambda_set = true;
            }
            if (opt_keep->count() == 0) recipe.keep = from_file.keep;
            if (opt_dropp->count() == 0) recipe.drop_p = from_file.drop_p;
            if (opt_slerpt->count() == 0) recipe.slerp_t = from_file.slerp_t;
            if (opt_seed->count() == 0) recipe.seed = from_file.seed;
            if (opt_combiner->count() == 0) recipe.combiner = from_file.combiner;
            if (opt_weights->count() == 0) recipe.weights_csv = from_file.weights_csv;
        }
        recipe.lambda_set = recipe.lambda_set || opt_lambda->count() > 0;

        const Normalization norm = normalization_from_name(norm_name);
        const std::optional<fs::path> out_opt =
            out.empty() ? std::nullopt : std::optional<fs::path>(out);
        std::vector<fs::path> input_paths(inputs.begin(), inputs.end());

        if (merge->parsed()) {
            return cmd_merge(base, input_paths, recipe, override_digest, out);
        }
        if (taskvec->parsed()) {
            return cmd_taskvec(base, input_paths, out);
        }
        if (conflicts->parsed()) {
            return cmd_conflicts(base, input_paths, cosine_granularity, out_opt);
        }
        if (hidden->parsed()) {
            return cmd_hiddensim(acts_path, norm, out_opt);
        }
        if (mds_cmd->parsed()) {
            return cmd_mds(acts_path, norm, out_opt);
        }
        if (bound->parsed()) {
            return cmd_bound(acts_path, norm, budget, tol, out_opt, format);
        }
        if (meb->parsed()) {
            return cmd_meb(acts_path, norm, tol, out_opt);
        }
        if (stats_cmd->parsed()) {
            if (pearson_cmd->parsed()) {
                return cmd_stats_pearson(x_path, y_path, out_opt, format);
            }
            return cmd_stats_anova(groups_path, out_opt, format);
        }
        if (losscalc->parsed()) {
            return cmd_losscalc(perf_path, out_opt);
        }
        if (synth->parsed()) {
            return cmd_synth(synth_seed, synth_n, synth_p, synth_d, synth_k, synth_spread, out);
        }
        if (report->parsed()) {
            const std::optional<fs::path> perf =
                perf_path.empty() ? std::nullopt : std::optional<fs::path>(perf_path);
            return cmd_report(acts_path, perf, norm, budget, tol, out);
        }
        std::fprintf(stderr, "ERR: no subcommand selected\n");
        return 2;
    } catch (const error & e) {
        std::fprintf(stderr, "ERR: %s\n", e.what());
        return static_cast<int>(e.kind());
    } catch (const std::exception & e) {
        std::fprintf(stderr, "ERR: %s\n", e.what());
        return 3;
    }
}
