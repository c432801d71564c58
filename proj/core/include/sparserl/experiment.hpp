#pragma once

#include "sparserl/generator.hpp"
#include "sparserl/mdp.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sparserl {

/// "uniform" | "optimal" | "epsilon-greedy:<eps>" (around the optimal policy) | "file:<path>".
Policy make_policy(const std::string& spec, const SparseLinearMDP& mdp);

/// "uniform" | "state:<i>" | "file:<path>".
InitialDistribution make_initial(const std::string& spec, Index n_states);

/// A hyperparameter that is either a fixed number or a multiple of the formula default.
struct Hyper {
    enum class Kind { paper_default, value, scale };
    Kind kind = Kind::paper_default;
    double x = 1.0;

    static Hyper parse(const std::string& text);  // "paper-default", "0.3", "scale:0.05"
    std::optional<double> resolve(double formula) const;
    std::string to_string() const;
};

enum class Algo { lasso_fqe, post_select, ridge_baseline, fqi };

Algo parse_algo(const std::string& name);
std::string algo_name(Algo algo);

struct ExperimentConfig {
    std::optional<std::string> instance_file;
    GeneratorSpec generator;

    std::string target = "optimal";
    std::string behavior = "uniform";
    std::vector<double> epsilons;  // non-empty: behavior is epsilon-greedy around the optimum, one level per entry
    std::string initial = "uniform";
    std::string data_init = "uniform";

    std::vector<Algo> algorithms{Algo::lasso_fqe};
    std::vector<Index> n_values;
    std::vector<Index> d_values;  // ignored for file instances
    std::vector<Index> s_values;
    std::vector<std::uint64_t> seeds;

    Index length = 1;                // L
    std::optional<int> iterations;   // T; unset means the formula
    std::optional<Index> mc_samples;  // unset means N
    Hyper lambda1;
    Hyper lambda2;
    Hyper lambda3;
    double delta = 0.1;

    std::uint64_t seed = 0;  // master seed, mixed with each cell seed
    int jobs = 1;
    std::filesystem::path out;

    /// Optional summary thresholds; a failed one makes the sweep exit with 1.
    std::optional<std::pair<double, double>> check_slope;
    std::optional<double> check_d_ratio;
    std::optional<double> check_screening_rate;
    std::optional<double> check_spearman;
    std::optional<double> check_fqi_gap;

    void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

struct Cell {
    Algo algo = Algo::lasso_fqe;
    Index n = 0;
    Index d = 0;
    Index s = 0;
    std::uint64_t seed = 0;
    std::optional<double> epsilon;
};

std::vector<Cell> expand_cells(const ExperimentConfig& config);

struct OpeRow {
    Algo algo = Algo::lasso_fqe;
    Index n = 0, k = 0, l = 0;
    int t = 0;
    Index d = 0, s = 0;
    double gamma = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
    std::uint64_t seed = 0;
    double v_hat = 0.0, v_true = 0.0, abs_err = 0.0;
    Index k_hat_size = 0;
    bool screening_success = false;
    std::optional<double> epsilon;
    std::optional<double> chi_square;
    std::uint64_t config_hash = 0;
    double wall_ms = 0.0;
};

struct FqiRow {
    Index n = 0, d = 0, s = 0;
    double gamma = 0.0;
    double lambda1 = 0.0;
    int t = 0;
    std::uint64_t seed = 0;
    double sup_gap = 0.0, xi0_gap = 0.0;
    std::optional<double> epsilon;
    std::uint64_t config_hash = 0;
    double wall_ms = 0.0;
};

std::string ope_csv_header();
std::string ope_csv_row(const OpeRow& row);
std::string fqi_csv_header();
std::string fqi_csv_row(const FqiRow& row);

struct CellFailure {
    Cell cell;
    std::string message;
};

struct SummaryCheck {
    std::string name;
    double value = 0.0;
    bool pass = false;
};

struct SweepResult {
    std::vector<OpeRow> ope;
    std::vector<FqiRow> fqi;
    std::vector<CellFailure> failures;
    std::string summary_json;
    std::vector<SummaryCheck> checks;

    bool checks_pass() const;
};

/// Instance for a (d, s) cell; generator instances share P and r across d.
SparseLinearMDP sweep_instance(const ExperimentConfig& config, Index d, Index s);

/// Runs every cell on `config.jobs` workers; rows come back in cell order.
SweepResult run_sweep(const ExperimentConfig& config);

/// Appends rows to <out>/ope.csv and <out>/fqi.csv (header on creation) and writes summary.json.
void write_sweep(const SweepResult& result, const std::filesystem::path& out);

double median(std::vector<double> values);
/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

std::uint64_t fnv1a(const std::string& text);

}  // namespace sparserl
