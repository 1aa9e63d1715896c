#include "netreg/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace netreg {

using detail::get_num;
using detail::json;
using detail::num;

namespace {

std::string describe(const fs::path& file, std::size_t line, const std::string& what) {
    std::string out = file.string();
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + what;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

std::vector<CsvRow> read_csv_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError(path, 0, "cannot open file");
    std::vector<CsvRow> rows;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (trim(text).empty()) continue;
        CsvRow row{line, {}};
        std::size_t start = 0;
        while (true) {
            const auto comma = text.find(',', start);
            row.fields.push_back(trim(std::string_view(text).substr(start, comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

bool try_parse(const std::string& field, double& out) {
    if (field.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(field.c_str(), &end);
    return end == field.c_str() + field.size() && errno != ERANGE;
}

double parse_field(const fs::path& path, const CsvRow& row, std::size_t col) {
    double v = 0.0;
    if (!try_parse(row.fields[col], v)) {
        throw IngestionError(path, row.line, "column " + std::to_string(col + 1) + ": '" + row.fields[col] +
                                                 "' is not a number");
    }
    return v;
}

bool row_is_numeric(const CsvRow& row) {
    double v = 0.0;
    return std::all_of(row.fields.begin(), row.fields.end(), [&](const std::string& f) { return try_parse(f, v); });
}

std::size_t parse_index(const fs::path& path, const CsvRow& row, std::size_t col, std::size_t bound) {
    const double v = parse_field(path, row, col);
    if (v < 0 || v != std::floor(v) || v >= double(bound)) {
        throw IngestionError(path, row.line, "index '" + row.fields[col] + "' outside [0, " +
                                                 std::to_string(bound) + ")");
    }
    return static_cast<std::size_t>(v);
}

void check_edge_value(EdgeFamily family, double v, const fs::path& path, std::size_t line) {
    if (!std::isfinite(v)) throw IngestionError(path, line, "non-finite edge value");
    switch (family) {
        case EdgeFamily::bernoulli_logit:
            if (v != 0.0 && v != 1.0) {
                throw IngestionError(path, line, "edge value " + format_value(v) + " is not binary (family bernoulli)");
            }
            break;
        case EdgeFamily::poisson_log:
            if (v < 0.0 || v != std::floor(v)) {
                throw IngestionError(path, line,
                                     "edge value " + format_value(v) + " is not a non-negative count (family poisson)");
            }
            break;
        case EdgeFamily::gaussian_identity:
            break;
    }
}

std::size_t parse_count(const fs::path& path, std::size_t line, const std::string& key, const std::string& value) {
    double v = 0.0;
    if (!try_parse(value, v) || v < 0 || v != std::floor(v)) {
        throw IngestionError(path, line, "'" + key + "' must be a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(v);
}

bool parse_flag(const fs::path& path, std::size_t line, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw IngestionError(path, line, "expected true/false, got '" + value + "'");
}

std::string join_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    std::string out;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (j) out += ',';
        out += format_value(row(j));
    }
    return out;
}

Matrix read_covariates(const fs::path& path, std::size_t subjects, std::size_t p, std::vector<std::string>& names) {
    const auto rows = read_csv_rows(path);
    if (rows.empty()) throw IngestionError(path, 0, "empty covariate file");
    names = rows.front().fields;
    if (names.size() != p) {
        throw IngestionError(path, rows.front().line, "header names " + std::to_string(names.size()) +
                                                          " covariates, manifest declares p = " + std::to_string(p));
    }
    if (rows.size() - 1 != subjects) {
        throw IngestionError(path, 0, "found " + std::to_string(rows.size() - 1) + " covariate rows, manifest declares N = " +
                                          std::to_string(subjects));
    }
    Matrix x(static_cast<Eigen::Index>(subjects), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < subjects; ++i) {
        const auto& row = rows[i + 1];
        if (row.fields.size() != p) {
            throw IngestionError(path, row.line, "expected " + std::to_string(p) + " values, found " +
                                                     std::to_string(row.fields.size()));
        }
        for (std::size_t k = 0; k < p; ++k) x(Eigen::Index(i), Eigen::Index(k)) = parse_field(path, row, k);
    }
    return x;
}

json step_to_json(const StepAttempt& a) {
    return json{{"step_delta", num(a.step_delta)}, {"step_tau", num(a.step_tau)}, {"failure", a.failure}};
}

json grid_cell_to_json(const GridCell& c) {
    return json{{"rank", c.rank},         {"sparsity_frac", num(c.sparsity_frac)},
                {"sparsity", c.sparsity}, {"loss", num(c.loss)},
                {"ebic", num(c.ebic)},    {"iterations", c.iterations},
                {"failed", c.failed},     {"error", c.error}};
}

GridCell grid_cell_from_json(const json& j) {
    GridCell c;
    c.rank = j.at("rank").get<std::size_t>();
    c.sparsity_frac = get_num(j.at("sparsity_frac"));
    c.sparsity = j.at("sparsity").get<std::size_t>();
    c.loss = get_num(j.at("loss"));
    c.ebic = get_num(j.at("ebic"));
    c.iterations = j.at("iterations").get<std::size_t>();
    c.failed = j.at("failed").get<bool>();
    c.error = j.at("error").get<std::string>();
    return c;
}

std::vector<double> vec_from_json(const json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(get_num(v));
    return out;
}

json vec_to_json(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(num(x));
    return out;
}

}  // namespace

IngestionError::IngestionError(const fs::path& f, std::size_t l, const std::string& what)
    : std::runtime_error(describe(f, l, what)), file(f), line(l) {}

namespace detail {

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
        out.push_back(std::move(row));
    }
    return out;
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.size();
    const auto cols = rows ? j.at(0).size() : 0;
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (j.at(i).size() != cols) throw std::invalid_argument("ragged matrix in JSON");
        for (std::size_t c = 0; c < cols; ++c) m(Eigen::Index(i), Eigen::Index(c)) = get_num(j.at(i).at(c));
    }
    return m;
}

json sim_config_to_json(const SimConfig& cfg) {
    return json{{"protocol", to_string(cfg.protocol)},
                {"n", cfg.n},
                {"p", cfg.p},
                {"N", cfg.subjects},
                {"rank", cfg.rank},
                {"s0", cfg.s0},
                {"signal", cfg.signal},
                {"w", cfg.w},
                {"between", cfg.between},
                {"K", cfg.k},
                {"community_sizes", cfg.community_sizes},
                {"seed", cfg.seed}};
}

SimConfig sim_config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("simulation config must be a JSON object");
    SimConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "protocol") cfg.protocol = parse_protocol(value.get<std::string>());
        else if (key == "n") cfg.n = value.get<std::size_t>();
        else if (key == "p") cfg.p = value.get<std::size_t>();
        else if (key == "N") cfg.subjects = value.get<std::size_t>();
        else if (key == "rank" || key == "r") cfg.rank = value.get<std::size_t>();
        else if (key == "s0") cfg.s0 = value.get<double>();
        else if (key == "signal") cfg.signal = value.get<double>();
        else if (key == "w") cfg.w = value.get<double>();
        else if (key == "between") cfg.between = value.get<double>();
        else if (key == "K") cfg.k = value.get<std::size_t>();
        else if (key == "community_sizes") cfg.community_sizes = value.get<std::vector<std::size_t>>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else throw std::invalid_argument("unknown simulation key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

}  // namespace detail

std::string format_value(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError(path, 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Matrix read_matrix_csv(const fs::path& path) {
    const auto rows = read_csv_rows(path);
    if (rows.empty()) return Matrix(0, 0);
    const auto cols = rows.front().fields.size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].fields.size() != cols) {
            throw IngestionError(path, rows[i].line, "expected " + std::to_string(cols) + " columns, found " +
                                                         std::to_string(rows[i].fields.size()));
        }
        for (std::size_t j = 0; j < cols; ++j) m(Eigen::Index(i), Eigen::Index(j)) = parse_field(path, rows[i], j);
    }
    return m;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) out += join_row(m.row(i)) + "\n";
    write_text(path, out);
}

Matrix read_network_csv(const fs::path& path, std::size_t n, bool symmetric) {
    const auto rows = read_csv_rows(path);
    // A non-numeric first row is an edge-list header, even when n = 3.
    const bool dense = rows.size() == n && !rows.empty() && row_is_numeric(rows.front()) && std::all_of(rows.begin(), rows.end(), [&](const CsvRow& r) {
                           return r.fields.size() == n;
                       });
    if (dense) {
        Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) a(Eigen::Index(i), Eigen::Index(j)) = parse_field(path, rows[i], j);
        }
        return a;
    }
    if (rows.empty() || rows.front().fields.size() != 3) {
        throw IngestionError(path, rows.empty() ? 0 : rows.front().line,
                             "expected " + std::to_string(n) + " rows of " + std::to_string(n) +
                                 " values (dense) or i,j,value rows (edge list)");
    }
    Matrix a = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
    std::size_t first = row_is_numeric(rows.front()) ? 0 : 1;  // optional header
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != 3) {
            throw IngestionError(path, row.line, "edge list rows need exactly 3 columns, found " +
                                                     std::to_string(row.fields.size()));
        }
        const auto i = parse_index(path, row, 0, n);
        const auto j = parse_index(path, row, 1, n);
        const double v = parse_field(path, row, 2);
        a(Eigen::Index(i), Eigen::Index(j)) = v;
        if (symmetric) a(Eigen::Index(j), Eigen::Index(i)) = v;
    }
    return a;
}

DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError(path, 0, "cannot open manifest");
    DatasetManifest m;
    bool seen_n = false, seen_subjects = false, seen_family = false;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        const auto hash = text.find('#');
        const auto body = trim(std::string_view(text).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw IngestionError(path, line, "expected 'key = value'");
        const auto key = trim(std::string_view(body).substr(0, eq));
        const auto value = trim(std::string_view(body).substr(eq + 1));
        if (key == "n") {
            m.n = parse_count(path, line, key, value);
            seen_n = true;
        } else if (key == "N") {
            m.subjects = parse_count(path, line, key, value);
            seen_subjects = true;
        } else if (key == "p") {
            m.p = parse_count(path, line, key, value);
        } else if (key == "family") {
            try {
                m.family = parse_family(value);
            } catch (const std::invalid_argument& e) {
                throw IngestionError(path, line, e.what());
            }
            seen_family = true;
        } else if (key == "symmetric") {
            m.symmetric = parse_flag(path, line, value);
        } else if (key == "covariates") {
            m.covariate_path = value;
        } else if (key == "network") {
            if (value.empty()) throw IngestionError(path, line, "empty network path");
            m.network_paths.push_back(value);
        } else if (key == "truth") {
            m.truth_path = value;
        } else {
            throw IngestionError(path, line, "unknown key '" + key + "'");
        }
    }
    if (!seen_n) throw IngestionError(path, 0, "missing key 'n'");
    if (!seen_subjects) throw IngestionError(path, 0, "missing key 'N'");
    if (!seen_family) throw IngestionError(path, 0, "missing key 'family'");
    if (m.network_paths.size() != m.subjects) {
        throw IngestionError(path, 0, "lists " + std::to_string(m.network_paths.size()) +
                                          " network files, N = " + std::to_string(m.subjects));
    }
    if (m.p > 0 && m.covariate_path.empty()) throw IngestionError(path, 0, "p > 0 but no covariate file");
    return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
    std::string out;
    out += "n = " + std::to_string(m.n) + "\n";
    out += "N = " + std::to_string(m.subjects) + "\n";
    out += "p = " + std::to_string(m.p) + "\n";
    out += "family = " + to_string(m.family) + "\n";
    out += std::string("symmetric = ") + (m.symmetric ? "true" : "false") + "\n";
    if (!m.covariate_path.empty()) out += "covariates = " + m.covariate_path + "\n";
    if (!m.truth_path.empty()) out += "truth = " + m.truth_path + "\n";
    for (const auto& p : m.network_paths) out += "network = " + p + "\n";
    write_text(path, out);
}

LoadedDataset load_dataset(const fs::path& manifest_path) {
    LoadedDataset out;
    out.manifest = read_manifest(manifest_path);
    out.root = manifest_path.parent_path();
    const auto& m = out.manifest;
    if (m.n < 2) throw IngestionError(manifest_path, 0, "n must be at least 2");
    if (m.subjects < 1) throw IngestionError(manifest_path, 0, "N must be at least 1");

    std::vector<Matrix> networks;
    networks.reserve(m.subjects);
    for (const auto& rel : m.network_paths) {
        const auto path = out.root / rel;
        Matrix a = read_network_csv(path, m.n, m.symmetric);
        for (std::size_t i = 0; i < m.n; ++i) {
            for (std::size_t j = 0; j < m.n; ++j) {
                if (i == j) continue;
                const double v = a(Eigen::Index(i), Eigen::Index(j));
                check_edge_value(m.family, v, path, i + 1);
                if (m.symmetric && v != a(Eigen::Index(j), Eigen::Index(i))) {
                    throw IngestionError(path, i + 1, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                                          ") differs from its mirror in a symmetric dataset");
                }
            }
        }
        networks.push_back(std::move(a));
    }

    Matrix x(static_cast<Eigen::Index>(m.subjects), 0);
    if (m.p > 0) {
        x = read_covariates(out.root / m.covariate_path, m.subjects, m.p, out.manifest.covariate_names);
    }
    try {
        out.data = NetworkDataset::from_networks(networks, std::move(x), m.family, m.symmetric);
        out.data.validate();
    } catch (const std::invalid_argument& e) {
        throw IngestionError(manifest_path, 0, e.what());
    }
    return out;
}

void save_dataset(const fs::path& dir, const NetworkDataset& data, const std::vector<std::string>& covariate_names,
                  const std::string& truth_path) {
    DatasetManifest m;
    m.n = data.n;
    m.subjects = data.subjects();
    m.p = data.covariate_count();
    m.family = data.family;
    m.symmetric = data.symmetric;
    m.truth_path = truth_path;

    const int width = std::max<int>(4, int(std::to_string(m.subjects).size()));
    for (std::size_t i = 0; i < m.subjects; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "networks/net_%0*zu.csv", width, i);
        m.network_paths.emplace_back(name);
        write_matrix_csv(dir / name, data.adjacency(i));
    }

    if (m.p > 0) {
        m.covariate_path = "covariates.csv";
        auto names = covariate_names;
        if (names.empty()) {
            for (std::size_t k = 0; k < m.p; ++k) names.push_back("x" + std::to_string(k + 1));
        }
        if (names.size() != m.p) throw ConfigError("need one covariate name per column");
        std::string out;
        for (std::size_t k = 0; k < m.p; ++k) out += (k ? "," : "") + names[k];
        out += "\n";
        for (Eigen::Index i = 0; i < data.covariates.rows(); ++i) out += join_row(data.covariates.row(i)) + "\n";
        write_text(dir / m.covariate_path, out);
    }
    write_manifest(dir / "manifest.txt", m);
}

void write_tensor_triplets(const fs::path& path, const Tensor3& b) {
    std::string out = "row,col,slice,value\n";
    for (std::size_t k = 0; k < b.d3(); ++k) {
        for (std::size_t i = 0; i < b.d1(); ++i) {
            for (std::size_t j = 0; j < b.d2(); ++j) {
                const double v = b(i, j, k);
                if (v == 0.0) continue;
                out += std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k) + "," + format_value(v) + "\n";
            }
        }
    }
    write_text(path, out);
}

Tensor3 read_tensor_triplets(const fs::path& path, std::size_t d1, std::size_t d2, std::size_t d3) {
    const auto rows = read_csv_rows(path);
    Tensor3 b(d1, d2, d3);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != 4) throw IngestionError(path, row.line, "expected row,col,slice,value");
        if (r == 0 && !row_is_numeric(row)) continue;
        const auto i = parse_index(path, row, 0, d1);
        const auto j = parse_index(path, row, 1, d2);
        const auto k = parse_index(path, row, 2, d3);
        b(i, j, k) = parse_field(path, row, 3);
    }
    return b;
}

void write_labels_csv(const fs::path& path, const Labels& labels) {
    std::string out = "node,community\n";
    for (std::size_t j = 0; j < labels.size(); ++j) out += std::to_string(j) + "," + std::to_string(labels[j]) + "\n";
    write_text(path, out);
}

Labels read_labels_csv(const fs::path& path) {
    const auto rows = read_csv_rows(path);
    Labels labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != 2) throw IngestionError(path, row.line, "expected node,label");
        if (r == 0 && !row_is_numeric(row)) continue;
        const auto node = parse_index(path, row, 0, std::size_t(-1) >> 1);
        if (node != labels.size()) throw IngestionError(path, row.line, "nodes must be listed in order 0, 1, ...");
        const double v = parse_field(path, row, 1);
        if (v != std::floor(v)) throw IngestionError(path, row.line, "label must be an integer");
        labels.push_back(int(v));
    }
    return labels;
}

void save_truth(const fs::path& json_path, const SimTruth& truth, const SimConfig& config) {
    const auto dir = json_path.parent_path();
    json files = json::object();
    files["theta_star"] = "theta_star.csv";
    write_matrix_csv(dir / "theta_star.csv", truth.theta_star);
    if (truth.b_star.d3() > 0) {
        files["b_star"] = "b_star.csv";
        write_tensor_triplets(dir / "b_star.csv", truth.b_star);
    }
    if (!truth.communities.empty()) {
        files["communities"] = "communities.csv";
        write_labels_csv(dir / "communities.csv", truth.communities);
    }
    if (!truth.offset_factors.empty()) {
        files["offsets"] = "offsets.csv";
        Matrix d(static_cast<Eigen::Index>(truth.offset_factors.size()), truth.offset_factors.front().size());
        for (std::size_t i = 0; i < truth.offset_factors.size(); ++i) d.row(Eigen::Index(i)) = truth.offset_factors[i];
        write_matrix_csv(dir / "offsets.csv", d);
    }
    json j{{"config", detail::sim_config_to_json(config)},
           {"rank", truth.rank},
           {"sigma1", num(truth.sigma1)},
           {"support_size", truth.support.size()},
           {"files", files}};
    write_text(json_path, j.dump(2) + "\n");
}

SimTruth load_truth(const fs::path& json_path, std::size_t n, std::size_t p, std::size_t subjects) {
    json j;
    try {
        j = json::parse(read_text(json_path));
    } catch (const json::exception& e) {
        throw IngestionError(json_path, 0, e.what());
    }
    const auto dir = json_path.parent_path();
    SimTruth t;
    try {
        t.rank = j.at("rank").get<std::size_t>();
        t.sigma1 = get_num(j.at("sigma1"));
        const auto& files = j.at("files");
        t.theta_star = read_matrix_csv(dir / files.at("theta_star").get<std::string>());
        if (std::size_t(t.theta_star.rows()) != n || std::size_t(t.theta_star.cols()) != n) {
            throw IngestionError(dir / "theta_star.csv", 0, "expected an n x n matrix");
        }
        t.b_star = files.contains("b_star") ? read_tensor_triplets(dir / files.at("b_star").get<std::string>(), n, n, p)
                                            : Tensor3(n, n, p);
        if (t.b_star.d3() != p) throw IngestionError(json_path, 0, "truth covariate count differs from dataset");
        t.support = select_edges(t.b_star, true);
        if (files.contains("communities")) {
            t.communities = read_labels_csv(dir / files.at("communities").get<std::string>());
            if (t.communities.size() != n) throw IngestionError(json_path, 0, "community table length differs from n");
        }
        if (files.contains("offsets")) {
            const Matrix d = read_matrix_csv(dir / files.at("offsets").get<std::string>());
            if (std::size_t(d.rows()) != subjects || std::size_t(d.cols()) != n) {
                throw IngestionError(json_path, 0, "offset table must be N x n");
            }
            for (Eigen::Index i = 0; i < d.rows(); ++i) t.offset_factors.push_back(d.row(i).transpose());
        }
    } catch (const json::exception& e) {
        throw IngestionError(json_path, 0, e.what());
    }
    return t;
}

std::string fit_report_json(const FitReport& r) {
    json j;
    j["family"] = r.family;
    j["symmetric"] = r.symmetric;
    j["n"] = r.n;
    j["N"] = r.subjects;
    j["p"] = r.p;
    j["covariate_names"] = r.covariate_names;
    j["standardized"] = r.standardized;
    j["covariate_means"] = vec_to_json(r.covariate_means);
    j["covariate_sds"] = vec_to_json(r.covariate_sds);
    j["intercept_scale"] = r.standardized ? "theta is the linear predictor at the covariate means"
                                          : "theta is the linear predictor at x = 0";
    j["hyper"] = json{{"rank", r.hyper.rank},
                      {"sparsity", r.hyper.sparsity},
                      {"sparsity_frac", r.sparsity_frac ? num(*r.sparsity_frac) : json(nullptr)},
                      {"step_delta", num(r.hyper.step_delta)},
                      {"step_tau", num(r.hyper.step_tau)},
                      {"max_iter", r.hyper.max_iter},
                      {"tol", num(r.hyper.tol)},
                      {"seed", r.hyper.seed}};
    json factors{{"mode", r.factors.mode == FactorMode::symmetric ? "symmetric" : "asymmetric"},
                 {"u", detail::matrix_to_json(r.factors.u)}};
    if (r.factors.mode == FactorMode::symmetric) {
        factors["lambda"] = vec_to_json(std::vector<double>(r.factors.lambda.begin(), r.factors.lambda.end()));
    } else {
        factors["v"] = detail::matrix_to_json(r.factors.v);
    }
    j["factors"] = std::move(factors);
    j["theta"] = detail::matrix_to_json(r.theta);
    json triplets = json::array();
    for (std::size_t k = 0; k < r.b.d3(); ++k) {
        for (std::size_t a = 0; a < r.b.d1(); ++a) {
            for (std::size_t c = 0; c < r.b.d2(); ++c) {
                if (r.b(a, c, k) != 0.0) triplets.push_back(json::array({a, c, k, r.b(a, c, k)}));
            }
        }
    }
    j["b"] = std::move(triplets);
    j["objective_trace"] = vec_to_json(r.objective_trace);
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["warmup_iterations"] = r.warmup_iterations;
    j["sigma1_hat"] = num(r.sigma1_hat);
    json steps = json::array();
    for (const auto& a : r.step_history) steps.push_back(step_to_json(a));
    j["step_history"] = std::move(steps);
    j["loss"] = num(r.loss);
    j["ebic"] = num(r.ebic);
    json grid = json::array();
    for (const auto& c : r.grid) grid.push_back(grid_cell_to_json(c));
    j["grid"] = std::move(grid);
    if (r.communities) {
        j["communities"] = *r.communities;
        j["community_inertia"] = r.community_inertia ? num(*r.community_inertia) : json(nullptr);
    }
    if (r.errors) {
        j["estimation_errors"] = json{{"mu_error", num(r.errors->mu_error)},
                                      {"mu_error_normalized", num(r.errors->mu_error_normalized)},
                                      {"theta_error", num(r.errors->theta_error)},
                                      {"b_error", num(r.errors->b_error)}};
    }
    if (r.f1) j["f1"] = num(*r.f1);
    if (r.nmi) j["nmi"] = num(*r.nmi);
    if (r.runtime_seconds) j["runtime_seconds"] = num(*r.runtime_seconds);
    return j.dump(2) + "\n";
}

FitReport parse_fit_report(const std::string& text) {
    const json j = json::parse(text);
    FitReport r;
    r.family = j.at("family").get<std::string>();
    r.symmetric = j.at("symmetric").get<bool>();
    r.n = j.at("n").get<std::size_t>();
    r.subjects = j.at("N").get<std::size_t>();
    r.p = j.at("p").get<std::size_t>();
    r.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
    r.standardized = j.at("standardized").get<bool>();
    r.covariate_means = vec_from_json(j.at("covariate_means"));
    r.covariate_sds = vec_from_json(j.at("covariate_sds"));

    const auto& h = j.at("hyper");
    r.hyper.rank = h.at("rank").get<std::size_t>();
    r.hyper.sparsity = h.at("sparsity").get<std::size_t>();
    if (!h.at("sparsity_frac").is_null()) r.sparsity_frac = h.at("sparsity_frac").get<double>();
    r.hyper.step_delta = get_num(h.at("step_delta"));
    r.hyper.step_tau = get_num(h.at("step_tau"));
    r.hyper.max_iter = h.at("max_iter").get<std::size_t>();
    r.hyper.tol = get_num(h.at("tol"));
    r.hyper.seed = h.at("seed").get<std::uint64_t>();

    const auto& f = j.at("factors");
    r.factors.mode = f.at("mode").get<std::string>() == "symmetric" ? FactorMode::symmetric : FactorMode::asymmetric;
    r.factors.u = detail::matrix_from_json(f.at("u"));
    if (r.factors.mode == FactorMode::symmetric) {
        const auto lam = vec_from_json(f.at("lambda"));
        r.factors.lambda = Eigen::Map<const Vector>(lam.data(), Eigen::Index(lam.size()));
    } else {
        r.factors.v = detail::matrix_from_json(f.at("v"));
    }
    r.theta = detail::matrix_from_json(j.at("theta"));
    r.b = Tensor3(r.n, r.n, r.p);
    for (const auto& t : j.at("b")) {
        const auto a = t.at(0).get<std::size_t>(), c = t.at(1).get<std::size_t>(), k = t.at(2).get<std::size_t>();
        if (a >= r.n || c >= r.n || k >= r.p) throw std::invalid_argument("B triplet index out of range");
        r.b(a, c, k) = t.at(3).get<double>();
    }
    r.objective_trace = vec_from_json(j.at("objective_trace"));
    r.iterations = j.at("iterations").get<std::size_t>();
    r.converged = j.at("converged").get<bool>();
    r.warmup_iterations = j.at("warmup_iterations").get<std::size_t>();
    r.sigma1_hat = get_num(j.at("sigma1_hat"));
    for (const auto& a : j.at("step_history")) {
        r.step_history.push_back({get_num(a.at("step_delta")), get_num(a.at("step_tau")), a.at("failure").get<std::string>()});
    }
    r.loss = get_num(j.at("loss"));
    r.ebic = get_num(j.at("ebic"));
    for (const auto& c : j.at("grid")) r.grid.push_back(grid_cell_from_json(c));
    if (j.contains("communities")) {
        r.communities = j.at("communities").get<Labels>();
        if (!j.at("community_inertia").is_null()) r.community_inertia = j.at("community_inertia").get<double>();
    }
    if (j.contains("estimation_errors")) {
        const auto& e = j.at("estimation_errors");
        r.errors = EstimationErrors{get_num(e.at("mu_error")), get_num(e.at("mu_error_normalized")),
                                    get_num(e.at("theta_error")), get_num(e.at("b_error"))};
    }
    if (j.contains("f1")) r.f1 = get_num(j.at("f1"));
    if (j.contains("nmi")) r.nmi = get_num(j.at("nmi"));
    if (j.contains("runtime_seconds")) r.runtime_seconds = get_num(j.at("runtime_seconds"));
    return r;
}

void write_fit_report(const fs::path& path, const FitReport& report) { write_text(path, fit_report_json(report)); }

FitReport read_fit_report(const fs::path& path) {
    try {
        return parse_fit_report(read_text(path));
    } catch (const json::exception& e) {
        throw IngestionError(path, 0, e.what());
    } catch (const std::invalid_argument& e) {
        throw IngestionError(path, 0, e.what());
    }
}

}  // namespace netreg
