#include "sparserl/serialization.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sparserl {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Index expect_rows, Index expect_cols, const char* what) {
    if (!rows.is_array() || static_cast<Index>(rows.size()) != expect_rows) {
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(expect_rows) + " rows");
    }
    Eigen::MatrixXd m(expect_rows, expect_cols);
    for (Index i = 0; i < expect_rows; ++i) {
        const json& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != expect_cols) {
            throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) + " has the wrong length");
        }
        for (Index j = 0; j < expect_cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("expected an array of numbers");
    Eigen::VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string(what) + ": malformed JSON: " + e.what());
    }
}

json report_to_json(const SolverReport& r) {
    return json{{"iterations", r.iterations},
                {"kkt_violation", r.kkt_violation},
                {"converged", r.converged},
                {"rank_deficient", r.rank_deficient}};
}

json bracket_to_json(const RestrictedEigenvalue& re) {
    return json{{"lower", re.lower}, {"upper", re.upper}, {"exact", re.exact}, {"argmin_support", re.argmin_support}};
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string mdp_to_json(const SparseLinearMDP& mdp) {
    json j;
    j["n_states"] = mdp.n_states();
    j["n_actions"] = mdp.n_actions();
    j["gamma"] = mdp.gamma();
    j["d"] = mdp.dim();
    j["support"] = mdp.support();
    j["features"] = matrix_to_json(mdp.features());
    j["psi"] = matrix_to_json(mdp.psi());
    j["reward"] = matrix_to_json(mdp.reward());
    return j.dump(1);
}

SparseLinearMDP mdp_from_json(const std::string& text) {
    json j = parse(text, "mdp");
    try {
        Index n_states = j.at("n_states").get<Index>();
        Index n_actions = j.at("n_actions").get<Index>();
        Index d = j.at("d").get<Index>();
        auto support = j.at("support").get<std::vector<Index>>();
        if (n_states < 1 || n_actions < 1 || d < 1) throw std::invalid_argument("mdp: sizes must be positive");
        return SparseLinearMDP(n_states, n_actions, j.at("gamma").get<double>(),
                               matrix_from_json(j.at("features"), n_states * n_actions, d, "features"), support,
                               matrix_from_json(j.at("psi"), static_cast<Index>(support.size()), n_states, "psi"),
                               matrix_from_json(j.at("reward"), n_states, n_actions, "reward"));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("mdp: ") + e.what());
    }
}

std::string policy_to_json(const Policy& pi) {
    return json{{"n_states", pi.n_states()}, {"n_actions", pi.n_actions()}, {"probs", matrix_to_json(pi.probs())}}
        .dump(1);
}

Policy policy_from_json(const std::string& text) {
    json j = parse(text, "policy");
    try {
        Index n = j.at("n_states").get<Index>();
        Index a = j.at("n_actions").get<Index>();
        return Policy(matrix_from_json(j.at("probs"), n, a, "policy"));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("policy: ") + e.what());
    }
}

std::string initial_to_json(const InitialDistribution& xi) { return json{{"xi0", vector_to_json(xi.probs())}}.dump(1); }

InitialDistribution initial_from_json(const std::string& text) {
    json j = parse(text, "initial distribution");
    try {
        return InitialDistribution(vector_from_json(j.at("xi0")));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("initial distribution: ") + e.what());
    }
}

std::string generator_spec_to_json(const GeneratorSpec& spec) {
    return json{{"n_states", spec.n_states},
                {"n_actions", spec.n_actions},
                {"d", spec.d},
                {"s", spec.s},
                {"gamma", spec.gamma},
                {"seed", spec.seed},
                {"anchor_concentration", spec.anchor_concentration},
                {"weight_concentration", spec.weight_concentration},
                {"noise", spec.noise},
                {"contiguous_support", spec.contiguous_support}}
        .dump();
}

std::string dataset_to_csv(const BatchDataset& data) {
    std::ostringstream out;
    out << "episode,step,x,a,x_next\n";
    for (std::size_t k = 0; k < data.episodes.size(); ++k) {
        const auto& ep = data.episodes[k];
        for (std::size_t h = 0; h < ep.size(); ++h) {
            out << k << ',' << h << ',' << ep[h].x << ',' << ep[h].a << ',' << ep[h].x_next << '\n';
        }
    }
    return out.str();
}

std::string dataset_meta_to_json(const DatasetMeta& meta) {
    return json{{"seed", meta.seed}, {"K", meta.episodes}, {"L", meta.length}, {"behavior", meta.behavior}}.dump(1);
}

BatchDataset dataset_from_csv(const std::string& csv, const std::string& meta_json) {
    json meta = parse(meta_json, "dataset meta");
    BatchDataset data;
    try {
        data.meta.seed = meta.at("seed").get<std::uint64_t>();
        data.meta.episodes = meta.at("K").get<Index>();
        data.meta.length = meta.at("L").get<Index>();
        data.meta.behavior = meta.value("behavior", std::string{});
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("dataset meta: ") + e.what());
    }
    if (data.meta.episodes < 1 || data.meta.length < 1) throw std::invalid_argument("dataset meta: K and L must be >= 1");
    data.episodes.assign(static_cast<std::size_t>(data.meta.episodes), {});

    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind("episode,step,x,a,x_next", 0) != 0) {
        throw std::invalid_argument("dataset csv: missing header episode,step,x,a,x_next");
    }
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        long long v[5];
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int f = 0; f < 5; ++f) {
            auto res = std::from_chars(p, end, v[f]);
            if (res.ec != std::errc()) throw std::invalid_argument("dataset csv: bad number on line " + std::to_string(line_no));
            p = res.ptr;
            if (f < 4) {
                if (p == end || *p != ',') throw std::invalid_argument("dataset csv: expected 5 fields on line " + std::to_string(line_no));
                ++p;
            }
        }
        if (v[0] < 0 || v[0] >= data.meta.episodes) throw std::invalid_argument("dataset csv: episode index out of range on line " + std::to_string(line_no));
        auto& ep = data.episodes[static_cast<std::size_t>(v[0])];
        if (v[1] != static_cast<long long>(ep.size())) throw std::invalid_argument("dataset csv: steps out of order on line " + std::to_string(line_no));
        ep.push_back(Transition{v[2], v[3], v[4]});
    }
    data.validate();
    return data;
}

std::string ope_result_to_json(const OpeResult& r) {
    json j;
    j["value"] = r.value;
    j["std_error"] = r.std_error;
    j["iterations"] = r.iterations;
    j["mc_samples"] = r.mc_samples;
    j["lambda1"] = r.lambda1;
    j["lambda2"] = r.lambda2;
    j["lambda3"] = r.lambda3;
    j["selected"] = r.selected;
    j["degenerate"] = r.degenerate;
    j["final_weights"] = r.weights.empty() ? json::array() : vector_to_json(r.weights.back());
    json reports = json::array();
    for (const auto& rep : r.reports) reports.push_back(report_to_json(rep));
    j["reports"] = std::move(reports);
    j["screening"] = report_to_json(r.screening);
    j["warnings"] = r.warnings;
    return j.dump(1);
}

std::string fqi_result_to_json(const FqiResult& r) {
    json j;
    j["iterations"] = r.iterations;
    j["lambda1"] = r.lambda1;
    j["actions"] = r.actions;
    j["final_weights"] = r.weights.empty() ? json::array() : vector_to_json(r.weights.back());
    json reports = json::array();
    for (const auto& rep : r.reports) reports.push_back(report_to_json(rep));
    j["reports"] = std::move(reports);
    j["warnings"] = r.warnings;
    return j.dump(1);
}

std::string mismatch_report_to_json(const MismatchReport& r) {
    json j;
    j["chi_square"] = r.chi_square;
    j["series_value"] = r.series_value;
    j["series_terms"] = r.series_terms;
    j["c_min"] = bracket_to_json(r.c_min);
    j["signal"] = json{{"pass", r.signal.pass}, {"ratio", r.signal.ratio}, {"signal", r.signal.signal}, {"threshold", r.signal.threshold}};
    j["feature_set"] = r.feature_set;
    return j.dump(1);
}

MismatchReport mismatch_report_from_json(const std::string& text) {
    json j = parse(text, "mismatch report");
    MismatchReport r;
    try {
        r.chi_square = j.at("chi_square").get<double>();
        r.series_value = j.at("series_value").get<double>();
        r.series_terms = j.at("series_terms").get<int>();
        const json& c = j.at("c_min");
        r.c_min.lower = c.at("lower").get<double>();
        r.c_min.upper = c.at("upper").get<double>();
        r.c_min.exact = c.at("exact").get<bool>();
        r.c_min.argmin_support = c.at("argmin_support").get<std::vector<Index>>();
        const json& sig = j.at("signal");
        r.signal.pass = sig.at("pass").get<bool>();
        r.signal.ratio = sig.at("ratio").get<double>();
        r.signal.signal = sig.at("signal").get<double>();
        // Infinite thresholds (C_min = 0) are written as null.
        r.signal.threshold = sig.at("threshold").is_null() ? std::numeric_limits<double>::infinity()
                                                            : sig.at("threshold").get<double>();
        r.feature_set = j.at("feature_set").get<std::vector<Index>>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("mismatch report: ") + e.what());
    }
    return r;
}

std::string hard_params_to_json(const HardInstanceParams& p) {
    return json{{"s", p.s},
                {"d", p.d},
                {"gamma", p.gamma},
                {"model", p.model},
                {"varsigma1", p.varsigma1},
                {"varsigma2", p.varsigma2},
                {"delta1", p.delta1},
                {"delta2", p.delta2}}
        .dump(1);
}

HardInstanceParams hard_params_from_json(const std::string& text) {
    json j = parse(text, "hard instance params");
    HardInstanceParams p;
    try {
        p.s = j.at("s").get<Index>();
        p.d = j.at("d").get<Index>();
        p.gamma = j.at("gamma").get<double>();
        p.model = j.value("model", Index{1});
        p.varsigma1 = j.at("varsigma1").get<double>();
        p.varsigma2 = j.at("varsigma2").get<double>();
        p.delta1 = j.at("delta1").get<double>();
        p.delta2 = j.at("delta2").get<double>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("hard instance params: ") + e.what());
    }
    p.validate();
    return p;
}

std::string anatomy_report_to_json(const AnatomyReport& r) {
    json j;
    j["dct_orthogonality"] = r.dct_orthogonality;
    j["row_sum_error"] = r.row_sum_error;
    j["block_error"] = r.block_error;
    j["c_min"] = bracket_to_json(r.c_min);
    j["lambda_min_circ"] = r.lambda_min_circ;
    j["chi_square"] = r.chi_square;
    j["chi_square_closed"] = r.chi_square_closed;
    j["violations"] = r.violations;
    j["ok"] = r.ok();
    return j.dump(1);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
    std::filesystem::path p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

void save_dataset(const BatchDataset& data, const std::filesystem::path& csv_path) {
    write_file(csv_path, dataset_to_csv(data));
    write_file(meta_path_for(csv_path), dataset_meta_to_json(data.meta));
}

BatchDataset load_dataset(const std::filesystem::path& csv_path) {
    return dataset_from_csv(read_file(csv_path), read_file(meta_path_for(csv_path)));
}

}  // namespace sparserl
