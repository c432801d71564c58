#include "sparserl/experiment.hpp"

#include "sparserl/access.hpp"
#include "sparserl/batch_data.hpp"
#include "sparserl/diagnostics.hpp"
#include "sparserl/fqi.hpp"
#include "sparserl/ope.hpp"
#include "sparserl/serialization.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace sparserl {

using nlohmann::json;

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

double parse_number(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) throw std::invalid_argument(what + ": not a number: '" + text + "'");
    return v;
}

Hyper hyper_from_json(const json& j) {
    if (j.is_number()) return Hyper{Hyper::Kind::value, j.get<double>()};
    if (j.is_string()) return Hyper::parse(j.get<std::string>());
    throw std::invalid_argument("hyperparameter must be a number or a string");
}

template <class T>
std::vector<T> list_from_json(const json& j, const char* what) {
    if (!j.is_array()) return {j.get<T>()};
    std::vector<T> out;
    for (const auto& v : j) out.push_back(v.get<T>());
    if (out.empty()) throw std::invalid_argument(std::string(what) + ": empty list");
    return out;
}

// Everything a cell needs besides its own data and seeds.
struct CellContext {
    const SparseLinearMDP* mdp = nullptr;
    Policy target;
    Policy behavior;
    InitialDistribution xi0;
    InitialDistribution data_init;
    double v_true = 0.0;
    std::string behavior_spec;
    std::optional<double> chi_square;
};

json cell_json(const ExperimentConfig& c, const Cell& cell) {
    json j;
    if (c.instance_file) {
        j["instance"] = *c.instance_file;
    } else {
        GeneratorSpec g = c.generator;
        g.d = cell.d;
        g.s = cell.s;
        j["instance"] = json::parse(generator_spec_to_json(g));
    }
    j["algo"] = algo_name(cell.algo);
    j["N"] = cell.n;
    j["L"] = c.length;
    j["T"] = c.iterations ? json(*c.iterations) : json("paper-default");
    j["mc_samples"] = c.mc_samples ? json(*c.mc_samples) : json("paper-default");
    j["lambda1"] = c.lambda1.to_string();
    j["lambda2"] = c.lambda2.to_string();
    j["lambda3"] = c.lambda3.to_string();
    j["delta"] = c.delta;
    j["target"] = c.target;
    j["behavior"] = cell.epsilon ? "epsilon-greedy:" + format_double(*cell.epsilon) : c.behavior;
    j["initial"] = c.initial;
    j["data_init"] = c.data_init;
    j["master_seed"] = c.seed;
    j["seed"] = cell.seed;
    return j;
}

bool covers_support(const std::vector<Index>& selected, const std::vector<Index>& support) {
    std::set<Index> sel(selected.begin(), selected.end());
    return std::all_of(support.begin(), support.end(), [&](Index k) { return sel.count(k) > 0; });
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

Policy make_policy(const std::string& spec, const SparseLinearMDP& mdp) {
    if (spec == "uniform") return Policy::uniform(mdp.n_states(), mdp.n_actions());
    if (spec == "optimal") return exact_optimal_value(mdp).greedy;
    if (starts_with(spec, "epsilon-greedy:")) {
        double eps = parse_number(spec.substr(15), "epsilon");
        return epsilon_greedy(exact_optimal_value(mdp).actions, mdp.n_actions(), eps);
    }
    if (starts_with(spec, "file:")) {
        Policy pi = policy_from_json(read_file(spec.substr(5)));
        if (!mdp.same_shape(pi)) throw std::invalid_argument("policy file " + spec.substr(5) + " does not match the MDP");
        return pi;
    }
    throw std::invalid_argument("unknown policy spec '" + spec + "'");
}

InitialDistribution make_initial(const std::string& spec, Index n_states) {
    if (spec == "uniform") return InitialDistribution::uniform(n_states);
    if (starts_with(spec, "state:")) {
        double x = parse_number(spec.substr(6), "state");
        if (x < 0 || x >= static_cast<double>(n_states) || x != std::floor(x)) {
            throw std::invalid_argument("initial state out of range: " + spec);
        }
        return InitialDistribution::point_mass(n_states, static_cast<Index>(x));
    }
    if (starts_with(spec, "file:")) {
        InitialDistribution xi = initial_from_json(read_file(spec.substr(5)));
        if (xi.size() != n_states) throw std::invalid_argument("initial distribution file has the wrong size");
        return xi;
    }
    throw std::invalid_argument("unknown initial distribution spec '" + spec + "'");
}

Hyper Hyper::parse(const std::string& text) {
    if (text == "paper-default") return {};
    if (starts_with(text, "scale:")) return Hyper{Kind::scale, parse_number(text.substr(6), "scale")};
    return Hyper{Kind::value, parse_number(text, "hyperparameter")};
}

std::optional<double> Hyper::resolve(double formula) const {
    switch (kind) {
        case Kind::paper_default: return std::nullopt;
        case Kind::value: return x;
        case Kind::scale: return x * formula;
    }
    return std::nullopt;
}

std::string Hyper::to_string() const {
    switch (kind) {
        case Kind::paper_default: return "paper-default";
        case Kind::value: return format_double(x);
        case Kind::scale: return "scale:" + format_double(x);
    }
    return {};
}

Algo parse_algo(const std::string& name) {
    if (name == "lasso-fqe") return Algo::lasso_fqe;
    if (name == "post-select") return Algo::post_select;
    if (name == "ridge-fqe-baseline") return Algo::ridge_baseline;
    if (name == "fqi") return Algo::fqi;
    throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string algo_name(Algo algo) {
    switch (algo) {
        case Algo::lasso_fqe: return "lasso-fqe";
        case Algo::post_select: return "post-select";
        case Algo::ridge_baseline: return "ridge-fqe-baseline";
        case Algo::fqi: return "fqi";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (algorithms.empty()) throw std::invalid_argument("config: no algorithms");
    if (n_values.empty() || seeds.empty()) throw std::invalid_argument("config: N and seeds must be non-empty");
    if (!instance_file && (d_values.empty() || s_values.empty())) {
        throw std::invalid_argument("config: d and s must be non-empty for generated instances");
    }
    std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
    if (distinct.size() != seeds.size()) throw std::invalid_argument("config: seeds must be distinct");
    if (length < 1) throw std::invalid_argument("config: L must be >= 1");
    for (Index n : n_values) {
        if (n < length || n % length != 0) {
            throw std::invalid_argument("config: N = " + std::to_string(n) + " is not a positive multiple of L");
        }
    }
    for (double e : epsilons) {
        if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("config: epsilon must be in [0, 1]");
    }
    if (iterations && *iterations < 1) throw std::invalid_argument("config: T must be >= 1");
    if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("config: delta must be in (0, 1)");
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    try {
        if (j.contains("instance")) {
            const json& inst = j["instance"];
            if (inst.contains("file")) {
                c.instance_file = inst["file"].get<std::string>();
            } else {
                const json& g = inst.contains("generator") ? inst["generator"] : inst;
                c.generator.n_states = g.value("n_states", c.generator.n_states);
                c.generator.n_actions = g.value("n_actions", c.generator.n_actions);
                c.generator.d = g.value("d", c.generator.d);
                c.generator.s = g.value("s", c.generator.s);
                c.generator.gamma = g.value("gamma", c.generator.gamma);
                c.generator.seed = g.value("seed", c.generator.seed);
                c.generator.anchor_concentration = g.value("anchor_concentration", c.generator.anchor_concentration);
                c.generator.weight_concentration = g.value("weight_concentration", c.generator.weight_concentration);
                c.generator.noise = g.value("noise", c.generator.noise);
                c.generator.contiguous_support = g.value("contiguous_support", c.generator.contiguous_support);
            }
        }
        c.target = j.value("target", c.target);
        c.behavior = j.value("behavior", c.behavior);
        if (j.contains("epsilons")) c.epsilons = list_from_json<double>(j["epsilons"], "epsilons");
        c.initial = j.value("initial", c.initial);
        c.data_init = j.value("data_init", c.data_init);
        if (j.contains("algorithms")) {
            c.algorithms.clear();
            for (const auto& a : list_from_json<std::string>(j["algorithms"], "algorithms")) {
                c.algorithms.push_back(parse_algo(a));
            }
        }
        if (j.contains("N")) c.n_values = list_from_json<Index>(j["N"], "N");
        if (j.contains("d")) c.d_values = list_from_json<Index>(j["d"], "d");
        if (j.contains("s")) c.s_values = list_from_json<Index>(j["s"], "s");
        if (j.contains("seeds")) c.seeds = list_from_json<std::uint64_t>(j["seeds"], "seeds");
        if (!c.instance_file) {
            if (c.d_values.empty()) c.d_values = {c.generator.d};
            if (c.s_values.empty()) c.s_values = {c.generator.s};
        }
        c.length = j.value("L", c.length);
        if (j.contains("T") && !(j["T"].is_string() && j["T"] == "paper-default")) c.iterations = j["T"].get<int>();
        if (j.contains("mc_samples") && !(j["mc_samples"].is_string() && j["mc_samples"] == "paper-default")) {
            c.mc_samples = j["mc_samples"].get<Index>();
        }
        if (j.contains("lambda1")) c.lambda1 = hyper_from_json(j["lambda1"]);
        if (j.contains("lambda2")) c.lambda2 = hyper_from_json(j["lambda2"]);
        if (j.contains("lambda3")) c.lambda3 = hyper_from_json(j["lambda3"]);
        c.delta = j.value("delta", c.delta);
        c.seed = j.value("seed", c.seed);
        c.jobs = j.value("jobs", c.jobs);
        if (j.contains("out")) c.out = j["out"].get<std::string>();
        if (j.contains("checks")) {
            const json& k = j["checks"];
            if (k.contains("slope")) c.check_slope = std::make_pair(k["slope"].at(0).get<double>(), k["slope"].at(1).get<double>());
            if (k.contains("d_ratio")) c.check_d_ratio = k["d_ratio"].get<double>();
            if (k.contains("screening_rate")) c.check_screening_rate = k["screening_rate"].get<double>();
            if (k.contains("spearman")) c.check_spearman = k["spearman"].get<double>();
            if (k.contains("fqi_gap")) c.check_fqi_gap = k["fqi_gap"].get<double>();
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return c;
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    if (c.instance_file) {
        j["instance"] = {{"file", *c.instance_file}};
    } else {
        j["instance"] = {{"generator", json::parse(generator_spec_to_json(c.generator))}};
    }
    j["target"] = c.target;
    j["behavior"] = c.behavior;
    if (!c.epsilons.empty()) j["epsilons"] = c.epsilons;
    j["initial"] = c.initial;
    j["data_init"] = c.data_init;
    json algos = json::array();
    for (Algo a : c.algorithms) algos.push_back(algo_name(a));
    j["algorithms"] = algos;
    j["N"] = c.n_values;
    if (!c.instance_file) {
        j["d"] = c.d_values;
        j["s"] = c.s_values;
    }
    j["seeds"] = c.seeds;
    j["L"] = c.length;
    j["T"] = c.iterations ? json(*c.iterations) : json("paper-default");
    j["mc_samples"] = c.mc_samples ? json(*c.mc_samples) : json("paper-default");
    j["lambda1"] = c.lambda1.to_string();
    j["lambda2"] = c.lambda2.to_string();
    j["lambda3"] = c.lambda3.to_string();
    j["delta"] = c.delta;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["out"] = c.out.string();
    json checks = json::object();
    if (c.check_slope) checks["slope"] = {c.check_slope->first, c.check_slope->second};
    if (c.check_d_ratio) checks["d_ratio"] = *c.check_d_ratio;
    if (c.check_screening_rate) checks["screening_rate"] = *c.check_screening_rate;
    if (c.check_spearman) checks["spearman"] = *c.check_spearman;
    if (c.check_fqi_gap) checks["fqi_gap"] = *c.check_fqi_gap;
    if (!checks.empty()) j["checks"] = checks;
    return j.dump(1);
}

std::vector<Cell> expand_cells(const ExperimentConfig& config) {
    std::vector<Index> ds = config.d_values;
    std::vector<Index> ss = config.s_values;
    if (config.instance_file) {
        ds = {0};
        ss = {0};
    }
    std::vector<std::optional<double>> eps;
    if (config.epsilons.empty()) {
        eps.push_back(std::nullopt);
    } else {
        for (double e : config.epsilons) eps.push_back(e);
    }
    std::vector<Cell> cells;
    for (Algo a : config.algorithms) {
        for (Index d : ds) {
            for (Index s : ss) {
                for (const auto& e : eps) {
                    for (Index n : config.n_values) {
                        for (std::uint64_t seed : config.seeds) cells.push_back(Cell{a, n, d, s, seed, e});
                    }
                }
            }
        }
    }
    return cells;
}

SparseLinearMDP sweep_instance(const ExperimentConfig& config, Index d, Index s) {
    if (config.instance_file) return mdp_from_json(read_file(*config.instance_file));
    GeneratorSpec g = config.generator;
    g.d = d;
    g.s = s;
    return generate_mdp(g);
}

std::string ope_csv_header() {
    return "algo,N,K,L,T,d,s,gamma,lambda1,lambda2,lambda3,seed,v_hat,v_true,abs_err,k_hat_size,"
           "screening_success,epsilon,chi_square,config_hash,wall_ms";
}

std::string ope_csv_row(const OpeRow& r) {
    std::string out = algo_name(r.algo);
    auto add = [&](const std::string& v) {
        out += ',';
        out += v;
    };
    add(std::to_string(r.n));
    add(std::to_string(r.k));
    add(std::to_string(r.l));
    add(std::to_string(r.t));
    add(std::to_string(r.d));
    add(std::to_string(r.s));
    add(format_double(r.gamma));
    add(format_double(r.lambda1));
    add(format_double(r.lambda2));
    add(format_double(r.lambda3));
    add(std::to_string(r.seed));
    add(format_double(r.v_hat));
    add(format_double(r.v_true));
    add(format_double(r.abs_err));
    add(std::to_string(r.k_hat_size));
    add(r.screening_success ? "1" : "0");
    add(opt_double(r.epsilon));
    add(opt_double(r.chi_square));
    add(std::to_string(r.config_hash));
    add(format_double(r.wall_ms));
    return out;
}

std::string fqi_csv_header() { return "N,d,s,gamma,lambda1,T,seed,sup_gap,xi0_gap,epsilon,config_hash,wall_ms"; }

std::string fqi_csv_row(const FqiRow& r) {
    return std::to_string(r.n) + ',' + std::to_string(r.d) + ',' + std::to_string(r.s) + ',' + format_double(r.gamma) +
           ',' + format_double(r.lambda1) + ',' + std::to_string(r.t) + ',' + std::to_string(r.seed) + ',' +
           format_double(r.sup_gap) + ',' + format_double(r.xi0_gap) + ',' + opt_double(r.epsilon) + ',' +
           std::to_string(r.config_hash) + ',' + format_double(r.wall_ms);
}

bool SweepResult::checks_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const SummaryCheck& c) { return c.pass; });
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("loglog_slope: x values are all equal");
    return sxy / sxx;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two or more pairs");
    std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

struct CellOutcome {
    std::optional<OpeRow> ope;
    std::optional<FqiRow> fqi;
    std::optional<std::string> error;
};

CellOutcome run_cell(const ExperimentConfig& config, const Cell& cell, const CellContext& ctx) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const SparseLinearMDP& mdp = *ctx.mdp;
    const MdpAccess access(mdp);
    const std::uint64_t data_seed = mix_seed(config.seed, cell.seed);
    const Index k = cell.n / config.length;
    const double n = static_cast<double>(cell.n);
    const std::uint64_t hash = fnv1a(cell_json(config, cell).dump());
    BatchDataset data = collect(mdp, ctx.behavior, ctx.data_init, k, config.length, data_seed, ctx.behavior_spec);
    Rng mc_rng(data_seed, std::uint64_t{1} << 62);
    const int t_formula = default_iterations(n, mdp.gamma()).t;
    const int t = config.iterations.value_or(t_formula);

    CellOutcome out;
    if (cell.algo == Algo::fqi) {
        FoldSplit folds = split_folds(data, t);
        FqiConfig fc;
        fc.delta = config.delta;
        fc.lambda1 = config.lambda1.resolve(
            default_lambda1(n, t, static_cast<double>(mdp.dim()), mdp.gamma(), config.delta));
        FqiResult res = lasso_fqi(data, folds, access, fc);
        Suboptimality gap = policy_suboptimality(mdp, res.policy, ctx.xi0);
        FqiRow row;
        row.n = cell.n;
        row.d = mdp.dim();
        row.s = mdp.sparsity();
        row.gamma = mdp.gamma();
        row.lambda1 = res.lambda1;
        row.t = res.iterations;
        row.seed = cell.seed;
        row.sup_gap = gap.sup_gap;
        row.xi0_gap = gap.xi0_gap;
        row.epsilon = cell.epsilon;
        row.config_hash = hash;
        row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
        out.fqi = row;
        return out;
    }

    OpeConfig oc;
    oc.delta = config.delta;
    oc.iterations = t;
    oc.mc_samples = config.mc_samples;
    const double d = static_cast<double>(mdp.dim());
    oc.lambda1 = config.lambda1.resolve(default_lambda1(n, t, d, mdp.gamma(), config.delta));
    oc.lambda2 = config.lambda2.resolve(default_lambda2(n, d, config.delta));
    OpeResult res;
    OpeRow row;
    switch (cell.algo) {
        case Algo::lasso_fqe: {
            FoldSplit folds = split_folds(data, t);
            res = lasso_fqe(data, folds, access, ctx.target, ctx.xi0, oc, mc_rng);
            std::vector<Index> nz;
            const Eigen::VectorXd& w = res.final_weights();
            for (Index j = 0; j < w.size(); ++j) {
                if (w(j) != 0.0) nz.push_back(j);
            }
            row.k_hat_size = static_cast<Index>(nz.size());
            row.screening_success = covers_support(nz, mdp.support());
            break;
        }
        case Algo::post_select:
        case Algo::ridge_baseline: {
            // lambda3 scales against the formula with the full feature set.
            if (config.lambda3.kind != Hyper::Kind::paper_default) {
                CovarianceMatrix cov = empirical_covariance(access, data);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.sigma, Eigen::EigenvaluesOnly);
                oc.lambda3 = config.lambda3.resolve(
                    default_lambda3(eig.eigenvalues()(0), d, config.delta, static_cast<double>(config.length)));
            }
            if (cell.algo == Algo::post_select) {
                res = post_selection_fqe(data, access, ctx.target, ctx.xi0, oc, mc_rng);
            } else {
                res = ridge_fqe(data, access, ctx.target, ctx.xi0, {}, oc, mc_rng);
            }
            row.k_hat_size = static_cast<Index>(res.selected.size());
            row.screening_success = covers_support(res.selected, mdp.support());
            break;
        }
        case Algo::fqi: break;
    }
    row.algo = cell.algo;
    row.n = cell.n;
    row.k = k;
    row.l = config.length;
    row.t = res.iterations;
    row.d = mdp.dim();
    row.s = mdp.sparsity();
    row.gamma = mdp.gamma();
    row.lambda1 = res.lambda1;
    row.lambda2 = res.lambda2;
    row.lambda3 = res.lambda3;
    row.seed = cell.seed;
    row.v_hat = res.value;
    row.v_true = ctx.v_true;
    row.abs_err = std::abs(res.value - ctx.v_true);
    row.epsilon = cell.epsilon;
    row.chi_square = ctx.chi_square;
    row.config_hash = hash;
    row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    out.ope = row;
    return out;
}

using GroupKey = std::tuple<std::string, Index, Index, double>;  // algo, d, s, epsilon (-1 if none)

json summarize(const ExperimentConfig& config, const SweepResult& result, std::vector<SummaryCheck>& checks) {
    json summary;
    // errors[(algo,d,s,eps)][N] -> list of abs errors
    std::map<GroupKey, std::map<Index, std::vector<double>>> errors;
    std::map<std::tuple<Index, Index, double>, double> chi;  // (d,s,eps) -> chi^2
    for (const auto& r : result.ope) {
        double e = r.epsilon.value_or(-1.0);
        errors[{algo_name(r.algo), r.d, r.s, e}][r.n].push_back(r.abs_err);
        if (r.chi_square) chi[{r.d, r.s, e}] = *r.chi_square;
    }

    json groups = json::array();
    double worst_slope_lo = std::numeric_limits<double>::infinity();
    double worst_slope_hi = -std::numeric_limits<double>::infinity();
    for (const auto& [key, by_n] : errors) {
        json g;
        g["algo"] = std::get<0>(key);
        g["d"] = std::get<1>(key);
        g["s"] = std::get<2>(key);
        if (std::get<3>(key) >= 0.0) g["epsilon"] = std::get<3>(key);
        std::vector<double> ns, meds;
        json med = json::object();
        for (const auto& [n, errs] : by_n) {
            double m = median(errs);
            med[std::to_string(n)] = m;
            ns.push_back(static_cast<double>(n));
            meds.push_back(m);
        }
        g["median_abs_err"] = med;
        if (ns.size() >= 2 && std::all_of(meds.begin(), meds.end(), [](double v) { return v > 0.0; })) {
            double slope = loglog_slope(ns, meds);
            g["slope"] = slope;
            if (std::get<0>(key) == "lasso-fqe") {
                worst_slope_lo = std::min(worst_slope_lo, slope);
                worst_slope_hi = std::max(worst_slope_hi, slope);
            }
        }
        groups.push_back(g);
    }
    summary["groups"] = groups;
    if (config.check_slope && std::isfinite(worst_slope_lo)) {
        bool pass = worst_slope_lo >= config.check_slope->first && worst_slope_hi <= config.check_slope->second;
        checks.push_back({"slope", pass ? worst_slope_lo : (worst_slope_lo < config.check_slope->first ? worst_slope_lo
                                                                                                          : worst_slope_hi),
                          pass});
    }

    // Error growth from the smallest to the largest d at fixed (algo, s, eps, N).
    std::map<std::tuple<std::string, Index, double, Index>, std::map<Index, double>> by_d;
    for (const auto& [key, by_n] : errors) {
        for (const auto& [n, errs] : by_n) {
            by_d[{std::get<0>(key), std::get<2>(key), std::get<3>(key), n}][std::get<1>(key)] = median(errs);
        }
    }
    json ratios = json::array();
    std::map<std::tuple<Index, double, Index>, std::map<std::string, double>> ratio_by_algo;
    for (const auto& [key, meds] : by_d) {
        if (meds.size() < 2) continue;
        double lo = meds.begin()->second;
        double hi = meds.rbegin()->second;
        double ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
        json r{{"algo", std::get<0>(key)},
               {"s", std::get<1>(key)},
               {"N", std::get<3>(key)},
               {"d_min", meds.begin()->first},
               {"d_max", meds.rbegin()->first},
               {"ratio", ratio}};
        if (std::get<2>(key) >= 0.0) r["epsilon"] = std::get<2>(key);
        ratios.push_back(r);
        ratio_by_algo[{std::get<1>(key), std::get<2>(key), std::get<3>(key)}][std::get<0>(key)] = ratio;
    }
    summary["d_ratios"] = ratios;
    if (config.check_d_ratio) {
        double worst = 0.0;
        bool any = false;
        for (const auto& [key, per] : ratio_by_algo) {
            auto it = per.find("lasso-fqe");
            if (it == per.end()) continue;
            any = true;
            worst = std::max(worst, it->second);
        }
        if (any) checks.push_back({"d_ratio", worst, worst <= *config.check_d_ratio});
    }

    // Screening.
    json screening = json::object();
    std::map<std::string, std::pair<int, int>> success;  // hits, total
    std::map<std::string, int> small;
    for (const auto& r : result.ope) {
        auto& s = success[algo_name(r.algo)];
        s.second += 1;
        s.first += r.screening_success ? 1 : 0;
        small[algo_name(r.algo)] += r.k_hat_size <= 8 * r.s ? 1 : 0;
    }
    for (const auto& [name, s] : success) {
        screening[name] = {{"superset_rate", static_cast<double>(s.first) / s.second},
                           {"size_le_8s_rate", static_cast<double>(small[name]) / s.second},
                           {"cells", s.second}};
    }
    summary["screening"] = screening;
    if (config.check_screening_rate && success.count("post-select")) {
        const auto& s = success["post-select"];
        double rate = std::min(static_cast<double>(s.first), static_cast<double>(small["post-select"])) / s.second;
        checks.push_back({"screening_rate", rate, rate >= *config.check_screening_rate});
    }

    // Paired comparison against lasso-fqe on identical data.
    std::map<std::tuple<Index, Index, Index, std::uint64_t, double>, std::map<std::string, double>> paired;
    for (const auto& r : result.ope) paired[{r.n, r.d, r.s, r.seed, r.epsilon.value_or(-1.0)}][algo_name(r.algo)] = r.abs_err;
    json comparison = json::object();
    for (Algo other : {Algo::post_select, Algo::ridge_baseline}) {
        int wins = 0, total = 0;
        std::vector<double> log_ratios;
        for (const auto& [key, per] : paired) {
            auto a = per.find("lasso-fqe");
            auto b = per.find(algo_name(other));
            if (a == per.end() || b == per.end()) continue;
            ++total;
            wins += a->second <= b->second ? 1 : 0;
            if (a->second > 0.0 && b->second > 0.0) log_ratios.push_back(std::log(b->second / a->second));
        }
        if (total == 0) continue;
        json c{{"cells", total}, {"lasso_fqe_not_worse_rate", static_cast<double>(wins) / total}};
        if (!log_ratios.empty()) c["median_error_ratio"] = std::exp(median(log_ratios));
        comparison[algo_name(other)] = c;
    }
    summary["paired_vs_lasso_fqe"] = comparison;

    // Mismatch: median error against chi^2 across behavior levels.
    json mismatch = json::array();
    double worst_rho = std::numeric_limits<double>::infinity();
    std::map<std::tuple<std::string, Index, Index, Index>, std::vector<std::pair<double, double>>> curves;
    for (const auto& [key, by_n] : errors) {
        double e = std::get<3>(key);
        if (e < 0.0) continue;
        auto c = chi.find({std::get<1>(key), std::get<2>(key), e});
        if (c == chi.end()) continue;
        for (const auto& [n, errs] : by_n) {
            curves[{std::get<0>(key), std::get<1>(key), std::get<2>(key), n}].emplace_back(c->second, median(errs));
        }
    }
    for (const auto& [key, pts] : curves) {
        if (pts.size() < 2) continue;
        std::vector<double> xs, ys;
        for (const auto& [x, y] : pts) {
            xs.push_back(x);
            ys.push_back(y);
        }
        double rho = spearman(xs, ys);
        mismatch.push_back({{"algo", std::get<0>(key)},
                            {"d", std::get<1>(key)},
                            {"s", std::get<2>(key)},
                            {"N", std::get<3>(key)},
                            {"chi_square", xs},
                            {"median_abs_err", ys},
                            {"spearman", rho}});
        if (std::get<0>(key) == "lasso-fqe") worst_rho = std::min(worst_rho, rho);
    }
    summary["mismatch"] = mismatch;
    if (config.check_spearman && std::isfinite(worst_rho)) {
        checks.push_back({"spearman", worst_rho, worst_rho >= *config.check_spearman});
    }

    // FQI gaps by N.
    std::map<std::tuple<Index, Index, double>, std::map<Index, std::vector<double>>> gaps;
    for (const auto& r : result.fqi) gaps[{r.d, r.s, r.epsilon.value_or(-1.0)}][r.n].push_back(r.sup_gap);
    json fqi = json::array();
    double worst_gap = 0.0;
    bool any_gap = false;
    for (const auto& [key, by_n] : gaps) {
        json med = json::object();
        std::vector<double> meds;
        for (const auto& [n, gs] : by_n) {
            meds.push_back(median(gs));
            med[std::to_string(n)] = meds.back();
        }
        int inversions = 0;
        for (std::size_t i = 1; i < meds.size(); ++i) inversions += meds[i] > meds[i - 1] ? 1 : 0;
        fqi.push_back({{"d", std::get<0>(key)}, {"s", std::get<1>(key)}, {"median_sup_gap", med}, {"inversions", inversions}});
        worst_gap = std::max(worst_gap, meds.back());
        any_gap = true;
    }
    summary["fqi"] = fqi;
    if (config.check_fqi_gap && any_gap) checks.push_back({"fqi_gap", worst_gap, worst_gap <= *config.check_fqi_gap});

    json failures = json::array();
    for (const auto& f : result.failures) {
        json c = cell_json(config, f.cell);
        c["error"] = f.message;
        failures.push_back(c);
    }
    summary["failed_cells"] = failures;
    json jc = json::array();
    for (const auto& c : checks) jc.push_back({{"name", c.name}, {"value", c.value}, {"pass", c.pass}});
    summary["checks"] = jc;
    return summary;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    const std::vector<Cell> cells = expand_cells(config);

    // Instances and policies are shared read-only across workers.
    std::map<std::pair<Index, Index>, std::unique_ptr<SparseLinearMDP>> instances;
    std::map<std::tuple<Index, Index, double>, CellContext> contexts;
    for (const Cell& cell : cells) {
        auto ikey = std::make_pair(cell.d, cell.s);
        if (!instances.count(ikey)) {
            instances[ikey] = std::make_unique<SparseLinearMDP>(sweep_instance(config, cell.d, cell.s));
        }
        auto ckey = std::make_tuple(cell.d, cell.s, cell.epsilon.value_or(-1.0));
        if (contexts.count(ckey)) continue;
        const SparseLinearMDP& mdp = *instances[ikey];
        CellContext ctx;
        ctx.mdp = &mdp;
        ctx.target = make_policy(config.target, mdp);
        ctx.behavior_spec = cell.epsilon ? "epsilon-greedy:" + format_double(*cell.epsilon) : config.behavior;
        ctx.behavior = make_policy(ctx.behavior_spec, mdp);
        ctx.xi0 = make_initial(config.initial, mdp.n_states());
        ctx.data_init = make_initial(config.data_init, mdp.n_states());
        ctx.v_true = exact_policy_value(mdp, ctx.target, ctx.xi0).value;
        if (cell.epsilon) {
            try {
                ctx.chi_square = restricted_chi_square(mdp, ctx.target, ctx.xi0, ctx.behavior, ctx.data_init,
                                                       config.length, mdp.support());
            } catch (const std::domain_error&) {
                ctx.chi_square = std::nullopt;
            }
        }
        contexts.emplace(ckey, std::move(ctx));
    }

    std::vector<CellOutcome> outcomes(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const Cell& cell = cells[i];
            const CellContext& ctx = contexts.at({cell.d, cell.s, cell.epsilon.value_or(-1.0)});
            try {
                outcomes[i] = run_cell(config, cell, ctx);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(config.jobs), cells.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SweepResult result;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (outcomes[i].ope) result.ope.push_back(*outcomes[i].ope);
        if (outcomes[i].fqi) result.fqi.push_back(*outcomes[i].fqi);
        if (outcomes[i].error) result.failures.push_back({cells[i], *outcomes[i].error});
    }
    result.summary_json = summarize(config, result, result.checks).dump(1);
    return result;
}

void write_sweep(const SweepResult& result, const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out.string() + ": " + ec.message());
    auto append = [&](const std::filesystem::path& path, const std::string& header, const auto& rows, auto format) {
        if (rows.empty()) return;
        const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
        std::ofstream f(path, std::ios::app);
        if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
        if (fresh) f << header << '\n';
        for (const auto& r : rows) f << format(r) << '\n';
        if (!f) throw std::runtime_error("write failed: " + path.string());
    };
    append(out / "ope.csv", ope_csv_header(), result.ope, ope_csv_row);
    append(out / "fqi.csv", fqi_csv_header(), result.fqi, fqi_csv_row);
    write_file(out / "summary.json", result.summary_json + "\n");
}

}  // namespace sparserl
