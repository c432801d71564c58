#include <sparserl/diagnostics.hpp>
#include <sparserl/experiment.hpp>
#include <sparserl/fqi.hpp>
#include <sparserl/generator.hpp>
#include <sparserl/hard_instance.hpp>
#include <sparserl/ope.hpp>
#include <sparserl/serialization.hpp>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace sparserl;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kThreshold = 1;
constexpr int kUsage = 2;
constexpr int kCellFailure = 3;

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text << '\n';
    } else {
        write_file(out, text + "\n");
    }
}

std::vector<Index> parse_columns(const std::string& text) {
    std::vector<Index> cols;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!item.empty()) cols.push_back(std::stol(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return cols;
}

struct GenerateArgs {
    GeneratorSpec spec;
    std::string out;
};

struct CollectArgs {
    std::string mdp, behavior = "uniform", init = "uniform", out;
    Index episodes = 1000, length = 1;
    std::uint64_t seed = 0;
};

struct OpeArgs {
    std::string mdp, data, algo = "lasso-fqe", target = "optimal", xi0 = "uniform", out;
    std::optional<int> t;
    std::optional<Index> mc_samples;
    std::string lambda1 = "paper-default", lambda2 = "paper-default", lambda3 = "paper-default";
    double delta = 0.1;
    std::uint64_t seed = 0;
};

struct FqiArgs {
    std::string mdp, data, xi0 = "uniform", lambda1 = "paper-default", out;
    std::optional<int> t;
    double delta = 0.1;
};

struct DiagnoseArgs {
    std::string mdp, behavior = "uniform", target = "optimal", xi0 = "uniform", data_init = "uniform", features, data,
        out;
    Index length = 1;
    double n = 1e4, delta = 0.1;
};

struct HardArgs {
    std::string params, out;
    Index s = 2, d = 4, length = 1, model = 1;
    double gamma = 0.9, n = 1e5;
};

struct SweepArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::string> instance, target, behavior, initial, data_init, lambda1, lambda2, lambda3;
    std::vector<std::string> algos;
    std::vector<Index> n_values, d_values, s_values;
    std::vector<std::uint64_t> seeds;
    std::vector<double> epsilons;
    std::optional<Index> length, mc_samples;
    std::optional<int> t, jobs;
    std::optional<double> delta;
};

int run_generate(const GenerateArgs& a) {
    emit(mdp_to_json(generate_mdp(a.spec)), a.out);
    return kOk;
}

int run_collect(const CollectArgs& a) {
    SparseLinearMDP mdp = mdp_from_json(read_file(a.mdp));
    BatchDataset data = collect(mdp, make_policy(a.behavior, mdp), make_initial(a.init, mdp.n_states()), a.episodes,
                                a.length, a.seed, a.behavior);
    save_dataset(data, a.out);
    std::cerr << "wrote " << data.size() << " transitions to " << a.out << '\n';
    return kOk;
}

int run_ope(const OpeArgs& a) {
    SparseLinearMDP mdp = mdp_from_json(read_file(a.mdp));
    BatchDataset data = load_dataset(a.data);
    MdpAccess access(mdp);
    Policy pi = make_policy(a.target, mdp);
    InitialDistribution xi0 = make_initial(a.xi0, mdp.n_states());
    const double n = static_cast<double>(data.size());
    const double d = static_cast<double>(mdp.dim());
    const int t = a.t.value_or(default_iterations(n, mdp.gamma()).t);
    Algo algo = parse_algo(a.algo);

    OpeConfig cfg;
    cfg.iterations = t;
    cfg.mc_samples = a.mc_samples;
    cfg.delta = a.delta;
    cfg.lambda1 = Hyper::parse(a.lambda1).resolve(default_lambda1(n, t, d, mdp.gamma(), a.delta));
    cfg.lambda2 = Hyper::parse(a.lambda2).resolve(default_lambda2(n, d, a.delta));
    Hyper h3 = Hyper::parse(a.lambda3);
    if (h3.kind != Hyper::Kind::paper_default) {
        CovarianceMatrix cov = empirical_covariance(access, data);
        double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov.sigma, Eigen::EigenvaluesOnly).eigenvalues()(0);
        cfg.lambda3 = h3.resolve(default_lambda3(lo, d, a.delta, static_cast<double>(data.episode_length())));
    }
    Rng rng(a.seed, std::uint64_t{1} << 62);
    OpeResult res;
    switch (algo) {
        case Algo::lasso_fqe: res = lasso_fqe(data, split_folds(data, t), access, pi, xi0, cfg, rng); break;
        case Algo::post_select: res = post_selection_fqe(data, access, pi, xi0, cfg, rng); break;
        case Algo::ridge_baseline: res = ridge_fqe(data, access, pi, xi0, {}, cfg, rng); break;
        case Algo::fqi: throw std::invalid_argument("use the fqi subcommand for policy optimization");
    }
    json j = json::parse(ope_result_to_json(res));
    j["algo"] = a.algo;
    j["v_true"] = exact_policy_value(mdp, pi, xi0).value;
    j["abs_err"] = std::abs(res.value - j["v_true"].get<double>());
    emit(j.dump(1), a.out);
    return kOk;
}

int run_fqi(const FqiArgs& a) {
    SparseLinearMDP mdp = mdp_from_json(read_file(a.mdp));
    BatchDataset data = load_dataset(a.data);
    MdpAccess access(mdp);
    const double n = static_cast<double>(data.size());
    const int t = a.t.value_or(default_iterations(n, mdp.gamma()).t);
    FqiConfig cfg;
    cfg.delta = a.delta;
    cfg.lambda1 = Hyper::parse(a.lambda1).resolve(
        default_lambda1(n, t, static_cast<double>(mdp.dim()), mdp.gamma(), a.delta));
    FqiResult res = lasso_fqi(data, split_folds(data, t), access, cfg);
    Suboptimality gap = policy_suboptimality(mdp, res.policy, make_initial(a.xi0, mdp.n_states()));
    json j = json::parse(fqi_result_to_json(res));
    j["sup_gap"] = gap.sup_gap;
    j["xi0_gap"] = gap.xi0_gap;
    emit(j.dump(1), a.out);
    return kOk;
}

int run_diagnose(const DiagnoseArgs& a) {
    SparseLinearMDP mdp = mdp_from_json(read_file(a.mdp));
    Policy target = make_policy(a.target, mdp);
    Policy behavior = make_policy(a.behavior, mdp);
    InitialDistribution xi0 = make_initial(a.xi0, mdp.n_states());
    InitialDistribution init = make_initial(a.data_init, mdp.n_states());
    AuditOptions opts;
    opts.feature_set = parse_columns(a.features);
    MismatchReport rep = audit(mdp, behavior, target, xi0, init, a.length, a.n, a.delta, opts);
    json j = json::parse(mismatch_report_to_json(rep));
    if (!a.data.empty()) {
        j["chi_square_empirical"] = restricted_chi_square_empirical(mdp, target, xi0, load_dataset(a.data), rep.feature_set);
    }
    emit(j.dump(1), a.out);
    return kOk;
}

int run_hard(const HardArgs& a) {
    HardInstanceParams params;
    json j;
    if (!a.params.empty()) {
        params = hard_params_from_json(read_file(a.params));
    } else {
        DefaultHardParams dp = default_hard_params(a.s, a.d, a.n, a.length, a.gamma, a.model);
        params = dp.params;
        j["sample_size_ok"] = dp.sample_size_ok;
        j["fixed_point_iterations"] = dp.fixed_point_iterations;
        if (!dp.note.empty()) j["note"] = dp.note;
    }
    HardInstanceBundle bundle = build_hard_instance(params, a.length);
    AnatomyReport anatomy = verify_lower_bound_anatomy(bundle);
    ValueGapReport gap = verify_value_gap(bundle);
    j["params"] = json::parse(hard_params_to_json(params));
    j["anatomy"] = json::parse(anatomy_report_to_json(anatomy));
    j["value_gap"] = {{"bound", gap.bound}, {"min_gap", gap.min_gap}, {"policies", gap.policies},
                      {"preconditions", gap.preconditions}};
    j["p_min"] = bundle.p_min;
    emit(j.dump(1), a.out);
    bool gap_ok = !gap.preconditions || gap.min_gap >= gap.bound - 1e-9;
    return anatomy.ok() && gap_ok ? kOk : kThreshold;
}

int run_sweep_cmd(const SweepArgs& a) {
    ExperimentConfig c = a.config.empty() ? ExperimentConfig{} : config_from_json(read_file(a.config));
    if (a.instance) c.instance_file = *a.instance;
    if (a.target) c.target = *a.target;
    if (a.behavior) c.behavior = *a.behavior;
    if (a.initial) c.initial = *a.initial;
    if (a.data_init) c.data_init = *a.data_init;
    if (!a.algos.empty()) {
        c.algorithms.clear();
        for (const auto& s : a.algos) c.algorithms.push_back(parse_algo(s));
    }
    if (!a.n_values.empty()) c.n_values = a.n_values;
    if (!a.d_values.empty()) c.d_values = a.d_values;
    if (!a.s_values.empty()) c.s_values = a.s_values;
    if (!a.seeds.empty()) c.seeds = a.seeds;
    if (!a.epsilons.empty()) c.epsilons = a.epsilons;
    if (c.d_values.empty()) c.d_values = {c.generator.d};
    if (c.s_values.empty()) c.s_values = {c.generator.s};
    if (a.length) c.length = *a.length;
    if (a.mc_samples) c.mc_samples = *a.mc_samples;
    if (a.t) c.iterations = *a.t;
    if (a.jobs) c.jobs = *a.jobs;
    if (a.delta) c.delta = *a.delta;
    if (a.lambda1) c.lambda1 = Hyper::parse(*a.lambda1);
    if (a.lambda2) c.lambda2 = Hyper::parse(*a.lambda2);
    if (a.lambda3) c.lambda3 = Hyper::parse(*a.lambda3);
    c.seed = *a.seed;
    c.out = a.out;
    c.validate();

    SweepResult res = run_sweep(c);
    write_sweep(res, c.out);
    write_file(c.out / "config.json", config_to_json(c) + "\n");
    for (const auto& f : res.failures) {
        std::cerr << "cell failed: algo=" << algo_name(f.cell.algo) << " N=" << f.cell.n << " d=" << f.cell.d
                  << " s=" << f.cell.s << " seed=" << f.cell.seed << ": " << f.message << '\n';
    }
    for (const auto& chk : res.checks) {
        std::cout << (chk.pass ? "PASS " : "FAIL ") << chk.name << " = " << chk.value << '\n';
    }
    std::cout << "rows: " << res.ope.size() << " ope, " << res.fqi.size() << " fqi; failed cells: "
              << res.failures.size() << "; output in " << c.out.string() << '\n';
    if (!res.failures.empty()) return kCellFailure;
    return res.checks_pass() ? kOk : kThreshold;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse batch RL on sparse linear MDPs"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Random sparse linear MDP as JSON");
    g->add_option("--states", gen.spec.n_states);
    g->add_option("--actions", gen.spec.n_actions);
    g->add_option("--d", gen.spec.d);
    g->add_option("--s", gen.spec.s);
    g->add_option("--gamma", gen.spec.gamma);
    g->add_option("--seed", gen.spec.seed);
    g->add_option("--noise", gen.spec.noise);
    g->add_option("--anchor-concentration", gen.spec.anchor_concentration);
    g->add_option("--weight-concentration", gen.spec.weight_concentration);
    g->add_flag("--contiguous-support", gen.spec.contiguous_support);
    g->add_option("--out,-o", gen.out, "output file (stdout if omitted)");

    CollectArgs col;
    auto* c = app.add_subcommand("collect", "Collect K episodes of length L under a behavior policy");
    c->add_option("--mdp", col.mdp)->required();
    c->add_option("--behavior", col.behavior);
    c->add_option("--init", col.init);
    c->add_option("--episodes,-K", col.episodes);
    c->add_option("--length,-L", col.length);
    c->add_option("--seed", col.seed);
    c->add_option("--out,-o", col.out)->required();

    OpeArgs ope;
    auto* o = app.add_subcommand("ope", "Off-policy evaluation on a dataset");
    o->add_option("--mdp", ope.mdp)->required();
    o->add_option("--data", ope.data)->required();
    o->add_option("--algo", ope.algo)->check(CLI::IsMember({"lasso-fqe", "post-select", "ridge-fqe-baseline"}));
    o->add_option("--target", ope.target);
    o->add_option("--xi0", ope.xi0);
    o->add_option("--T", ope.t);
    o->add_option("--mc-samples", ope.mc_samples);
    o->add_option("--lambda1", ope.lambda1);
    o->add_option("--lambda2", ope.lambda2);
    o->add_option("--lambda3", ope.lambda3);
    o->add_option("--delta", ope.delta);
    o->add_option("--seed", ope.seed, "seed of the Monte Carlo stream");
    o->add_option("--out,-o", ope.out);

    FqiArgs fqi;
    auto* f = app.add_subcommand("fqi", "Lasso fitted Q-iteration");
    f->add_option("--mdp", fqi.mdp)->required();
    f->add_option("--data", fqi.data)->required();
    f->add_option("--xi0", fqi.xi0);
    f->add_option("--T", fqi.t);
    f->add_option("--lambda1", fqi.lambda1);
    f->add_option("--delta", fqi.delta);
    f->add_option("--out,-o", fqi.out);

    DiagnoseArgs diag;
    auto* dg = app.add_subcommand("diagnose", "Distribution-shift and restricted-eigenvalue report");
    dg->add_option("--mdp", diag.mdp)->required();
    dg->add_option("--behavior", diag.behavior);
    dg->add_option("--target", diag.target);
    dg->add_option("--xi0", diag.xi0);
    dg->add_option("--data-init", diag.data_init);
    dg->add_option("--length,-L", diag.length);
    dg->add_option("--N", diag.n);
    dg->add_option("--delta", diag.delta);
    dg->add_option("--features", diag.features, "comma-separated feature set (default: true support)");
    dg->add_option("--data", diag.data, "dataset for the empirical chi-square");
    dg->add_option("--out,-o", diag.out);

    HardArgs hard;
    auto* h = app.add_subcommand("hard", "Build and check a lower-bound instance");
    h->add_option("--params", hard.params, "JSON parameter file (defaults derived from N otherwise)");
    h->add_option("--s", hard.s);
    h->add_option("--d", hard.d);
    h->add_option("--gamma", hard.gamma);
    h->add_option("--N", hard.n);
    h->add_option("--length,-L", hard.length);
    h->add_option("--model", hard.model);
    h->add_option("--out,-o", hard.out);

    SweepArgs sw;
    auto* s = app.add_subcommand("sweep", "Run a grid of cells and write CSV reports");
    s->add_option("--config", sw.config);
    s->add_option("--seed", sw.seed)->required();
    s->add_option("--out,-o", sw.out)->required();
    s->add_option("--instance", sw.instance);
    s->add_option("--target", sw.target);
    s->add_option("--behavior", sw.behavior);
    s->add_option("--initial", sw.initial);
    s->add_option("--data-init", sw.data_init);
    s->add_option("--algo", sw.algos)->delimiter(',');
    s->add_option("--N", sw.n_values)->delimiter(',');
    s->add_option("--d", sw.d_values)->delimiter(',');
    s->add_option("--s", sw.s_values)->delimiter(',');
    s->add_option("--seeds", sw.seeds)->delimiter(',');
    s->add_option("--epsilons", sw.epsilons)->delimiter(',');
    s->add_option("--length,-L", sw.length);
    s->add_option("--T", sw.t);
    s->add_option("--mc-samples", sw.mc_samples);
    s->add_option("--lambda1", sw.lambda1);
    s->add_option("--lambda2", sw.lambda2);
    s->add_option("--lambda3", sw.lambda3);
    s->add_option("--delta", sw.delta);
    s->add_option("--jobs,-j", sw.jobs);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*g) return run_generate(gen);
        if (*c) return run_collect(col);
        if (*o) return run_ope(ope);
        if (*f) return run_fqi(fqi);
        if (*dg) return run_diagnose(diag);
        if (*h) return run_hard(hard);
        if (*s) return run_sweep_cmd(sw);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
