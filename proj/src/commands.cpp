#include "netreg/commands.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "json_util.hpp"

namespace netreg {

using detail::json;
using detail::num;

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

std::string csv_num(double v) { return std::isnan(v) ? "" : format_value(v); }

json load_json(const fs::path& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const IngestionError&) {
        throw ConfigError("cannot read config " + path.string());
    }
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Hyperparams hyper_from(const FitOptions& o) {
    Hyperparams h;
    h.rank = o.rank;
    h.step_delta = o.step_delta;
    h.step_tau = o.step_tau;
    h.tol = o.tol;
    h.max_iter = o.max_iter;
    h.seed = o.seed;
    return h;
}

void check_fraction(double frac) {
    if (!(frac >= 0.0 && frac <= 1.0)) throw ConfigError("sparsity fraction must lie in [0, 1]");
}

struct Prepared {
    LoadedDataset loaded;
    std::vector<double> means, sds;
    std::optional<SimTruth> truth;
};

Prepared prepare(const FitOptions& o) {
    if (o.out.empty()) throw ConfigError("--out is required");
    Prepared p;
    p.loaded = load_dataset(o.manifest);
    auto& data = p.loaded.data;
    if (o.standardize && data.covariate_count() > 0) {
        const auto [means, sds] = standardize_columns(data.covariates);
        p.means.assign(means.begin(), means.end());
        p.sds.assign(sds.begin(), sds.end());
    }
    if (!p.loaded.manifest.truth_path.empty()) {
        p.truth = load_truth(p.loaded.root / p.loaded.manifest.truth_path, data.n, data.covariate_count(),
                             data.subjects());
    }
    if (o.communities > data.n) throw ConfigError("--communities exceeds the node count");
    return p;
}

FitReport build_report(const Prepared& p, const FitResult& fitted, const FitOptions& o, std::optional<double> frac) {
    const auto& data = p.loaded.data;
    FitReport r;
    r.family = to_string(data.family);
    r.symmetric = data.symmetric;
    r.n = data.n;
    r.subjects = data.subjects();
    r.p = data.covariate_count();
    r.covariate_names = p.loaded.manifest.covariate_names;
    r.standardized = o.standardize;
    r.covariate_means = p.means;
    r.covariate_sds = p.sds;
    r.hyper = fitted.hyper;
    r.sparsity_frac = frac;
    r.factors = fitted.factors;
    r.theta = fitted.theta();
    r.b = fitted.b;
    r.objective_trace = fitted.objective_trace;
    r.iterations = fitted.iterations;
    r.converged = fitted.converged;
    r.warmup_iterations = fitted.warmup_iterations;
    r.sigma1_hat = fitted.sigma1_hat;
    r.step_history = fitted.step_history;
    r.loss = neg_loglik(data, r.theta, r.b);
    r.ebic = ebic(fitted, data);
    if (o.communities > 0) {
        const auto found = detect_communities(fitted.factors.u, o.communities, o.restarts, o.seed);
        r.communities = found.labels;
        r.community_inertia = found.inertia;
    }
    if (p.truth) {
        r.errors = estimation_errors(fitted, *p.truth, data);
        if (r.p > 0) {
            r.f1 = f1_support(select_edges(fitted.b, data.symmetric), select_edges(p.truth->b_star, data.symmetric));
        }
        if (r.communities && !p.truth->communities.empty()) r.nmi = nmi(*r.communities, p.truth->communities);
    }
    return r;
}

void write_fit_outputs(const fs::path& out, const FitReport& r) {
    write_fit_report(out / "fit_report.json", r);
    write_matrix_csv(out / "theta_hat.csv", r.theta);
    write_tensor_triplets(out / "b_hat.csv", r.b);
    std::string trace = "iteration,objective\n";
    for (std::size_t t = 0; t < r.objective_trace.size(); ++t) {
        trace += std::to_string(t) + "," + csv_num(r.objective_trace[t]) + "\n";
    }
    write_text(out / "objective_trace.csv", trace);
    if (r.communities) write_labels_csv(out / "communities.csv", *r.communities);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string safe_name(const std::string& name) {
    std::string out;
    for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
    return out;
}

}  // namespace

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const IngestionError&) {
        return kExitIngestion;
    } catch (const FamilyMismatch&) {
        return kExitIngestion;
    } catch (const DivergedFit&) {
        return kExitDivergence;
    } catch (const ConfigError&) {
        return kExitConfig;
    } catch (const std::invalid_argument&) {
        return kExitConfig;
    } catch (...) {
        return 1;
    }
}

std::vector<std::size_t> default_rank_grid(std::size_t n) {
    std::vector<std::size_t> ranks;
    for (std::size_t r = 1; r <= std::min<std::size_t>(20, n); ++r) ranks.push_back(r);
    return ranks;
}

std::vector<double> default_sparsity_grid() {
    std::vector<double> fracs;
    for (int e = -30; e <= 0; ++e) fracs.push_back(std::pow(10.0, e / 10.0));
    return fracs;
}

FitReport cmd_fit(const FitOptions& o) {
    check_fraction(o.sparsity_frac);
    const auto t0 = std::chrono::steady_clock::now();
    const Prepared p = prepare(o);
    const auto& data = p.loaded.data;
    if (o.rank < 1 || o.rank > data.n) throw ConfigError("--rank must lie in [1, n]");

    Hyperparams h = hyper_from(o);
    h.sparsity = sparsity_budget(o.sparsity_frac, data.n, data.covariate_count(), data.symmetric);
    const FitResult fitted = fit(data, h);
    FitReport r = build_report(p, fitted, o, o.sparsity_frac);
    if (o.record_runtime) r.runtime_seconds = seconds_since(t0);
    write_fit_outputs(o.out, r);
    return r;
}

FitReport cmd_tune(const TuneOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prepared p = prepare(o);
    const auto& data = p.loaded.data;

    auto ranks = o.ranks.empty() ? default_rank_grid(data.n) : o.ranks;
    for (auto r : ranks) {
        if (r < 1 || r > data.n) throw ConfigError("grid rank " + std::to_string(r) + " outside [1, n]");
    }
    auto fracs = o.sparsity_fracs.empty() ? default_sparsity_grid() : o.sparsity_fracs;
    for (double f : fracs) check_fraction(f);
    if (data.covariate_count() == 0) fracs = {0.0};  // B is empty; every fraction gives the same fit

    const TuneResult tuned = tune(data, ranks, fracs, hyper_from(o));
    FitReport r = build_report(p, tuned.best, o, tuned.grid[tuned.best_index].sparsity_frac);
    r.grid = tuned.grid;
    if (o.record_runtime) r.runtime_seconds = seconds_since(t0);
    write_fit_outputs(o.out, r);

    std::string grid = "rank,sparsity_frac,sparsity,loss,ebic,iterations,status,selected,error\n";
    for (std::size_t c = 0; c < tuned.grid.size(); ++c) {
        const auto& cell = tuned.grid[c];
        grid += std::to_string(cell.rank) + "," + format_value(cell.sparsity_frac) + "," + std::to_string(cell.sparsity) +
                "," + csv_num(cell.loss) + "," + csv_num(cell.ebic) + "," + std::to_string(cell.iterations) + "," +
                (cell.failed ? "failed" : "ok") + "," + (c == tuned.best_index ? "1" : "0") + "," +
                csv_field(cell.error) + "\n";
    }
    write_text(o.out / "grid.csv", grid);
    return r;
}

SimulatedData cmd_simulate(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed) {
    if (out.empty()) throw ConfigError("--out is required");
    SimConfig cfg;
    try {
        cfg = detail::sim_config_from_json(load_json(config));
    } catch (const json::exception& e) {
        throw ConfigError(config.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(config.string() + ": " + e.what());
    }
    if (seed) cfg.seed = *seed;
    SimulatedData sim = simulate(cfg);
    save_dataset(out, sim.data, {}, "truth/truth.json");
    save_truth(out / "truth" / "truth.json", sim.truth, cfg);
    return sim;
}

std::vector<std::size_t> read_node_order(const fs::path& path, std::size_t n) {
    if (!fs::exists(path)) throw IngestionError(path, 0, "grouping file not found");
    std::ifstream in(path);
    std::vector<std::pair<std::size_t, std::string>> rows;  // node, group
    std::string text;
    std::size_t line = 0, columns = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = text.find(',', start);
            auto f = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            f.erase(0, f.find_first_not_of(" \t\r"));
            f.erase(f.find_last_not_of(" \t\r") + 1);
            fields.push_back(f);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (columns == 0) columns = fields.size();
        if (fields.size() != columns || columns > 2) {
            throw IngestionError(path, line, "expected one column (node) or two (node,group)");
        }
        char* end = nullptr;
        const long node = std::strtol(fields[0].c_str(), &end, 10);
        if (end != fields[0].c_str() + fields[0].size() || fields[0].empty()) {
            if (rows.empty()) continue;  // header
            throw IngestionError(path, line, "node '" + fields[0] + "' is not an integer");
        }
        if (node < 0 || std::size_t(node) >= n) {
            throw IngestionError(path, line, "node " + fields[0] + " outside [0, " + std::to_string(n) + ")");
        }
        rows.emplace_back(std::size_t(node), columns == 2 ? fields[1] : std::string());
    }
    if (rows.size() != n) {
        throw IngestionError(path, 0, "lists " + std::to_string(rows.size()) + " nodes, expected " + std::to_string(n));
    }
    std::vector<bool> seen(n, false);
    for (const auto& [node, group] : rows) {
        if (seen[node]) throw IngestionError(path, 0, "node " + std::to_string(node) + " listed twice");
        seen[node] = true;
    }
    std::vector<std::size_t> order;
    if (columns == 1) {
        for (const auto& row : rows) order.push_back(row.first);
        return order;
    }
    std::map<std::string, std::size_t> rank;
    for (const auto& row : rows) rank.emplace(row.second, rank.size());
    std::vector<std::pair<std::size_t, std::size_t>> keyed(n);  // (group rank, node)
    for (const auto& row : rows) keyed[row.first] = {rank.at(row.second), row.first};
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& k : keyed) order.push_back(k.second);
    return order;
}

void cmd_report(const ReportOptions& o) {
    if (o.out.empty()) throw ConfigError("--out is required");
    const FitReport r = read_fit_report(o.report);
    const EdgeFamily family = parse_family(r.family);
    const std::size_t n = r.n;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!o.order.empty()) order = read_node_order(o.order, n);

    auto permuted = [&](auto&& value) {
        Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) m(Eigen::Index(a), Eigen::Index(b)) = value(order[a], order[b]);
        return m;
    };

    write_matrix_csv(o.out / "heatmap.csv", permuted([&](std::size_t i, std::size_t j) {
                         return inverse_link(family, r.theta(Eigen::Index(i), Eigen::Index(j)));
                     }));

    std::optional<Labels> labels = r.communities;
    if (o.communities > 0) {
        if (o.communities > n) throw ConfigError("--communities exceeds the node count");
        labels = detect_communities(r.factors.u, o.communities, o.restarts, o.seed).labels;
    }

    std::string order_csv = "position,node";
    order_csv += labels ? ",community\n" : "\n";
    for (std::size_t a = 0; a < n; ++a) {
        order_csv += std::to_string(a) + "," + std::to_string(order[a]);
        if (labels) order_csv += "," + std::to_string((*labels)[order[a]]);
        order_csv += "\n";
    }
    write_text(o.out / "node_order.csv", order_csv);

    for (std::size_t k = 0; k < r.p; ++k) {
        const std::string name = k < r.covariate_names.size() ? r.covariate_names[k] : "x" + std::to_string(k + 1);
        char file[32];
        std::snprintf(file, sizeof file, "b_%03zu_", k);
        write_matrix_csv(o.out / "b_slices" / (file + safe_name(name) + ".csv"),
                         permuted([&](std::size_t i, std::size_t j) { return r.b(i, j, k); }));
    }

    if (labels) write_labels_csv(o.out / "communities.csv", *labels);

    const auto curve = inertia_curve(r.factors.u, std::min(o.max_k, n), o.restarts, o.seed);
    std::string elbow = "k,inertia\n";
    for (std::size_t k = 0; k < curve.size(); ++k) elbow += std::to_string(k + 1) + "," + csv_num(curve[k]) + "\n";
    write_text(o.out / "inertia_vs_k.csv", elbow);
}

namespace {

struct Study {
    json echo;
    SimConfig base;
    ReplicationPlan plan;
    std::string sweep_parameter;
    std::vector<double> sweep_values;
    bool sparsity_from_truth = false;
};

void apply_sweep(SimConfig& cfg, const std::string& name, double v) {
    auto count = [&](std::size_t& field) {
        if (v < 0 || v != std::floor(v)) throw ConfigError("sweep value for '" + name + "' must be an integer");
        field = std::size_t(v);
    };
    if (name == "w") cfg.w = v;
    else if (name == "N") count(cfg.subjects);
    else if (name == "n") count(cfg.n);
    else if (name == "p") count(cfg.p);
    else if (name == "rank" || name == "r") count(cfg.rank);
    else if (name == "K") count(cfg.k);
    else if (name == "s0") cfg.s0 = v;
    else if (name == "signal") cfg.signal = v;
    else if (name == "between") cfg.between = v;
    else throw ConfigError("cannot sweep over '" + name + "'");
}

Study parse_study(const json& j) {
    if (!j.is_object()) throw ConfigError("study config must be a JSON object");
    Study s;
    s.echo = j;
    for (const auto& [key, value] : j.items()) {
        (void)value;
        static const std::set<std::string> known{"simulation", "reps", "fit", "tune", "communities", "restarts", "sweep"};
        if (!known.count(key)) throw ConfigError("unknown study key '" + key + "'");
    }
    s.base = detail::sim_config_from_json(j.at("simulation"));
    auto& plan = s.plan;
    plan.reps = j.value("reps", std::size_t{1});
    plan.communities = j.value("communities", std::size_t{0});
    plan.restarts = j.value("restarts", kDefaultKmeansRestarts);
    if (j.contains("fit")) {
        const auto& f = j.at("fit");
        for (const auto& [key, value] : f.items()) {
            if (key == "rank") {
                if (value.is_string()) {
                    if (value.get<std::string>() != "truth") throw ConfigError("fit.rank must be a count or \"truth\"");
                    plan.rank_from_truth = true;
                } else {
                    plan.hyper.rank = value.get<std::size_t>();
                }
            } else if (key == "sparsity_frac") {
                if (value.is_string()) {
                    if (value.get<std::string>() != "truth") throw ConfigError("fit.sparsity_frac must be a number or \"truth\"");
                    s.sparsity_from_truth = true;
                } else {
                    plan.sparsity_frac = value.get<double>();
                }
            } else if (key == "step_delta") plan.hyper.step_delta = value.get<double>();
            else if (key == "step_tau") plan.hyper.step_tau = value.get<double>();
            else if (key == "tol") plan.hyper.tol = value.get<double>();
            else if (key == "max_iter") plan.hyper.max_iter = value.get<std::size_t>();
            else throw ConfigError("unknown fit key '" + key + "'");
        }
    }
    if (j.contains("tune")) {
        const auto& t = j.at("tune");
        plan.tune = true;
        plan.rank_grid = t.value("ranks", default_rank_grid(s.base.n));
        plan.sparsity_grid = t.value("sparsity_fracs", default_sparsity_grid());
    }
    if (j.contains("sweep")) {
        const auto& sw = j.at("sweep");
        s.sweep_parameter = sw.at("parameter").get<std::string>();
        s.sweep_values = sw.at("values").get<std::vector<double>>();
        if (s.sweep_values.empty()) throw ConfigError("sweep needs at least one value");
    }
    return s;
}

const char* const kMetrics[] = {"mu_error", "mu_error_normalized", "theta_error", "b_error", "f1", "nmi", "iterations"};

}  // namespace

std::vector<ReplicationReport> cmd_replicate(const fs::path& config, const fs::path& out,
                                             std::optional<std::uint64_t> seed) {
    if (out.empty()) throw ConfigError("--out is required");
    Study study;
    try {
        study = parse_study(load_json(config));
    } catch (const json::exception& e) {
        throw ConfigError(config.string() + ": " + e.what());
    }
    if (seed) study.base.seed = *seed;

    std::vector<std::optional<double>> points;
    if (study.sweep_values.empty()) points.emplace_back();
    for (double v : study.sweep_values) points.emplace_back(v);

    std::vector<ReplicationReport> reports;
    for (const auto& point : points) {
        ReplicationPlan plan = study.plan;
        plan.config = study.base;
        if (point) apply_sweep(plan.config, study.sweep_parameter, *point);
        if (study.sparsity_from_truth) {
            plan.sparsity_frac = plan.config.protocol == Protocol::glsnet ? plan.config.s0 : 0.0;
        }
        try {
            plan.config.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        reports.push_back(run_replications(plan));
    }

    const bool sweep = !study.sweep_parameter.empty();
    const bool with_se = study.plan.reps > 1;
    const std::string lead = sweep ? csv_field(study.sweep_parameter) + "," : "";

    std::string rows = lead + "replication,seed,status,mu_error,mu_error_normalized,theta_error,b_error,f1,nmi,rank,"
                              "sparsity,iterations,converged,error\n";
    std::string summary = lead + "reps,failures";
    for (const char* m : kMetrics) summary += std::string(",") + m + "_mean" + (with_se ? std::string(",") + m + "_se" : "");
    summary += "\n";

    json points_json = json::array();
    for (std::size_t q = 0; q < reports.size(); ++q) {
        const auto& rep = reports[q];
        const std::string value = sweep ? format_value(*points[q]) + "," : "";
        for (const auto& row : rep.rows) {
            rows += value + std::to_string(row.replication) + "," + std::to_string(row.seed) + "," +
                    (row.failed ? "failed" : "ok") + ",";
            if (row.failed) {
                rows += ",,,,,,,,,," + csv_field(row.error) + "\n";
                continue;
            }
            rows += csv_num(row.errors.mu_error) + "," + csv_num(row.errors.mu_error_normalized) + "," +
                    csv_num(row.errors.theta_error) + "," + csv_num(row.errors.b_error) + "," + csv_num(row.f1) + "," +
                    csv_num(row.nmi) + "," + std::to_string(row.rank) + "," + std::to_string(row.sparsity) + "," +
                    std::to_string(row.iterations) + "," + (row.converged ? "true" : "false") + ",\n";
        }

        summary += value + std::to_string(rep.rows.size()) + "," + std::to_string(rep.failures);
        json metrics = json::object();
        for (const char* m : kMetrics) {
            const auto& s = rep.metric(m);
            summary += "," + csv_num(s.mean);
            if (with_se) summary += "," + csv_num(s.se);
            json entry{{"mean", num(s.mean)}, {"count", s.count}};
            if (with_se) entry["se"] = num(s.se);
            metrics[m] = std::move(entry);
        }
        summary += "\n";

        json pj{{"config", detail::sim_config_to_json(rep.config)}, {"failures", rep.failures}, {"metrics", metrics}};
        if (sweep) pj["value"] = *points[q];
        points_json.push_back(std::move(pj));
    }

    json echo = study.echo;
    echo["simulation"] = detail::sim_config_to_json(study.base);
    json summary_json{{"study", echo}, {"reps", study.plan.reps}, {"points", points_json}};
    if (sweep) summary_json["sweep_parameter"] = study.sweep_parameter;

    write_text(out / "replications.csv", rows);
    write_text(out / "summary.csv", summary);
    write_text(out / "summary.json", summary_json.dump(2) + "\n");
    return reports;
}

}  // namespace netreg
