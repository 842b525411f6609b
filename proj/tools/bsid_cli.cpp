// Command-line front end: simulation, estimation, realization, excitation
// checks and the experiment harness.

#include "bsid/config.hpp"
#include "bsid/excitation.hpp"
#include "bsid/experiments.hpp"
#include "bsid/hokalman.hpp"
#include "bsid/io.hpp"
#include "bsid/markov_estimator.hpp"
#include "bsid/simulate.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace bsid;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kValidation = 4 };

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 1;
    std::string format = "csv";
};

ExperimentConfig resolve_config(const CommonOptions& o, ExperimentConfig fallback = {}) {
    ExperimentConfig cfg = o.config.empty() ? std::move(fallback) : load_config(o.config);
    if (o.seed) cfg.base_seed = *o.seed;
    if (!o.out.empty()) cfg.output_path = o.out;
    cfg.validate();
    return cfg;
}

void emit_json(const nlohmann::json& j, const std::string& path) {
    if (path.empty() || path == "-")
        std::cout << j.dump(2) << '\n';
    else
        save_json(path, j);
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_format) {
    cmd->add_option("--config", o.config, "JSON experiment configuration");
    cmd->add_option("--seed", o.seed, "Base seed override");
    cmd->add_option("--out", o.out, "Output path");
    cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    if (with_format) cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

int run_simulate(const CommonOptions& o, Index T, bool diagnostics) {
    const ExperimentConfig cfg = resolve_config(o);
    const fs::path dir = o.out.empty() ? fs::path("simulation") : fs::path(o.out);
    const Model model = make_model(cfg, cfg.rho_values.front(), derive_seed(cfg.base_seed, 1));
    const Trajectory traj = simulate(model, cfg.noise.spec(cfg.n), cfg.input.design(cfg.p), T,
                                     derive_seed(cfg.base_seed, 2), diagnostics);
    save_model(dir, model);
    save_trajectory(dir / "trajectory.csv", traj);
    std::cout << "wrote " << (dir / "trajectory.csv").string() << " (T=" << T << ")\n";
    return kOk;
}

struct EstimateOptions {
    std::string trajectory;
    std::string model_dir;
    std::optional<Index> L;
    double delta = 0.1;
    std::optional<double> beta;
    std::optional<double> rho;
};

int run_estimate(const CommonOptions& o, const EstimateOptions& e) {
    const Trajectory traj = load_trajectory(e.trajectory);
    std::optional<Model> model;
    if (!e.model_dir.empty()) model = load_model(e.model_dir);
    const ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    const double beta = e.beta ? *e.beta : input_norm_bound(traj.u);

    Index L = 0;
    nlohmann::json choice;
    if (e.L) {
        L = *e.L;
    } else {
        if (!model) throw ParameterError("estimate: --L is required without --model");
        const NoiseSpec noise = cfg.noise.spec(model->n());
        const ChooseLResult c = choose_L(*model, noise, traj.T(), e.delta, beta, e.rho);
        choice = {{"feasible", c.feasible}, {"L", c.L}, {"bias", c.bias}, {"noise_level", c.noise_level},
                  {"binding_term", c.binding_term}};
        if (!c.feasible) {
            std::cerr << "choose_L: no admissible L (" << c.binding_term << ")\n";
            emit_json({{"choose_L", choice}}, o.out);
            return kNumerical;
        }
        L = c.L;
    }

    const DesignSystem design = build_design(traj, L);
    const EstimateReport rep = estimate_markov(design);
    std::optional<EstimateTruth> truth;
    if (model) {
        const NoiseSpec noise = cfg.noise.spec(model->n());
        const MatrixXd G = markov_params(*model, L).G;
        EstimateTruth t;
        t.terms = bound_terms(*model, noise, L, beta, e.delta, e.rho);
        t.err_fro = (rep.G_hat - G).norm();
        t.err_ellipsoidal = ellipsoidal_error(rep.G_hat, G, design);
        t.bound_value = bound_data_dependent(t.terms, traj.p(), traj.T(), rep.lambda_min).frobenius;
        truth = t;
    }

    if (o.format == "csv") {
        if (o.out.empty())
            write_matrix_csv(std::cout, rep.G_hat);
        else
            save_matrix(o.out, rep.G_hat);
        return kOk;
    }
    nlohmann::json j = estimate_record(rep, truth);
    if (!choice.is_null()) j["choose_L"] = choice;
    emit_json(j, o.out);
    return kOk;
}

int run_hokalman(const CommonOptions& o, const std::string& g_path, Index n, const std::string& model_dir) {
    const MatrixXd G_hat = load_matrix(g_path);
    const Realization<double> r = ho_kalman(G_hat, n);
    nlohmann::json j;
    if (!model_dir.empty()) {
        const Model model = load_model(model_dir);
        const Realization<double> ref = ho_kalman(markov_params(model, r.hankel.L).G, n);
        const double g_err = (G_hat - markov_params(model, r.hankel.L).G).norm();
        const auto bounds =
            realization_error_bounds(ref.hankel.H, r.hankel.H, ref.hankel.sigma_min_L, g_err, r.hankel.L);
        const Alignment<double> a = align_realizations(ref, r);
        j = realization_record(r, ref.hankel.sigma_min_L, bounds.robustness_ok);
        j["alignment"] = {{"err_A", a.dA}, {"err_B", a.dB}, {"err_C", a.dC},
                          {"bound_A", bounds.bound_A}, {"bound_BC", bounds.bound_BC}};
    } else {
        j = realization_record(r);
    }
    if (!o.out.empty()) {
        const fs::path dir = fs::path(o.out);
        save_model(dir, Model{r.A_hat, r.B_hat, r.C_hat});
        save_json(dir / "realization.json", j);
    } else {
        std::cout << j.dump(2) << '\n';
    }
    return kOk;
}

int run_pe_check(const CommonOptions& o, const std::string& trajectory, Index L, double delta,
                 const std::string& regime, std::optional<double> scale) {
    const Trajectory traj = load_trajectory(trajectory);
    const PERegime r = parse_pe_regime(regime);
    const double s = scale ? *scale : (r == PERegime::bounded_a ? input_norm_bound(traj.u) : 9.0);
    const PECertificate cert = pe_certificate(build_design(traj, L), delta, r, s);
    emit_json(to_json(cert), o.out);
    return cert.passed ? kOk : kValidation;
}

// CSV output writes the per-trial table to output_path and the aggregated
// table next to it as <stem>_agg.csv.
void write_table(const ExperimentTable& table, const ExperimentConfig& cfg, const std::string& format) {
    const fs::path out(cfg.output_path);
    if (format == "json") {
        save_json(out, to_json(table));
        std::cout << "wrote " << out.string() << '\n';
        return;
    }
    fs::path agg = out;
    agg.replace_filename(out.stem().string() + "_agg" + out.extension().string());
    for (const auto& [path, aggregated] : {std::pair{out, false}, std::pair{agg, true}}) {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path.string());
        write_table_csv(os, table, aggregated);
    }
    std::cout << "wrote " << out.string() << " and " << agg.string() << " (" << table.rows.size() << " rows)\n";
}

ExperimentConfig double_descent_default() {
    ExperimentConfig cfg;
    cfg.rho_values = {0.5};
    cfg.L_values = {50};
    cfg.T_values = {350, 400, 450, 500, 550, 600, 650, 700};
    cfg.trials = 20;
    cfg.output_path = "double_descent.csv";
    return cfg;
}

ExperimentConfig pe_campaign_default() {
    ExperimentConfig cfg;
    cfg.n = 2;
    cfg.p = 2;
    cfg.rho_values = {0.5};
    cfg.L_values = {4};
    cfg.T_values = {200};
    cfg.trials = 200;
    cfg.output_path = "pe_campaign.json";
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identification of linear systems with bilinear observations"};
    app.require_subcommand(1);

    CommonOptions common;

    auto* sim = app.add_subcommand("simulate", "Draw a random model and simulate one trajectory");
    add_common(sim, common, false);
    Index sim_T = 1000;
    bool sim_diag = false;
    sim->add_option("--T", sim_T, "Trajectory length")->check(CLI::PositiveNumber);
    sim->add_flag("--diagnostics", sim_diag, "Also write states and noise");

    auto* est = app.add_subcommand("estimate", "Least-squares Markov-parameter estimate from a trajectory");
    add_common(est, common, true);
    EstimateOptions eopt;
    est->add_option("--trajectory", eopt.trajectory, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    est->add_option("--model", eopt.model_dir, "Directory with A.csv, B.csv, C.csv for errors and bounds");
    est->add_option("--L", eopt.L, "Window length; chosen automatically when omitted and --model is given");
    est->add_option("--delta", eopt.delta, "Failure probability");
    est->add_option("--beta", eopt.beta, "Input norm bound (default: max observed)");
    est->add_option("--rho", eopt.rho, "Decay rate for the bounds");

    auto* hk = app.add_subcommand("hokalman", "Balanced realization from Markov parameters");
    add_common(hk, common, false);
    std::string hk_G, hk_model;
    Index hk_n = 0;
    hk->add_option("--G", hk_G, "Markov parameter matrix CSV (p x pL)")->required()->check(CLI::ExistingFile);
    hk->add_option("--n", hk_n, "State dimension")->required()->check(CLI::PositiveNumber);
    hk->add_option("--model", hk_model, "Reference model directory for alignment errors");

    auto* pe = app.add_subcommand("pe-check", "Persistence-of-excitation certificate for a trajectory");
    add_common(pe, common, false);
    std::string pe_traj, pe_regime = "b";
    Index pe_L = 1;
    double pe_delta = 0.1;
    std::optional<double> pe_scale;
    pe->add_option("--trajectory", pe_traj, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    pe->add_option("--L", pe_L, "Window length")->required()->check(CLI::PositiveNumber);
    pe->add_option("--delta", pe_delta, "Failure probability");
    pe->add_option("--regime", pe_regime, "a (bounded inputs) or b (fourth moment)");
    pe->add_option("--scale", pe_scale, "beta for regime a, m4 for regime b");

    auto* exp = app.add_subcommand("exp", "Experiment sweeps");
    exp->require_subcommand(1);
    bool record_runtime = false;
    auto* fig = exp->add_subcommand("figure1", "Error versus T for each rho and L");
    add_common(fig, common, true);
    fig->add_flag("--record-runtime", record_runtime, "Fill runtime_ms (makes output non-reproducible)");
    auto* dd = exp->add_subcommand("double-descent", "Error around the interpolation threshold T - L = p^2 L");
    add_common(dd, common, true);
    dd->add_flag("--record-runtime", record_runtime, "Fill runtime_ms (makes output non-reproducible)");
    auto* pc = exp->add_subcommand("pe-campaign", "Empirical frequency of the excitation event");
    add_common(pc, common, false);
    std::optional<Index> pc_T;
    pc->add_option("--T", pc_T, "Trajectory length (default: the fourth-moment requirement)");

    auto* val = app.add_subcommand("validate", "Monte Carlo checks of the closed-form quantities");
    add_common(val, common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        const RunOptions run{common.threads, record_runtime};
        if (sim->parsed()) return run_simulate(common, sim_T, sim_diag);
        if (est->parsed()) return run_estimate(common, eopt);
        if (hk->parsed()) return run_hokalman(common, hk_G, hk_n, hk_model);
        if (pe->parsed()) return run_pe_check(common, pe_traj, pe_L, pe_delta, pe_regime, pe_scale);
        if (fig->parsed()) {
            const ExperimentConfig cfg = resolve_config(common);
            write_table(run_figure1(cfg, run), cfg, common.format);
            return kOk;
        }
        if (dd->parsed()) {
            const ExperimentConfig cfg = resolve_config(common, double_descent_default());
            write_table(run_double_descent(cfg, run), cfg, common.format);
            return kOk;
        }
        if (pc->parsed()) {
            const ExperimentConfig cfg = resolve_config(common, pe_campaign_default());
            const PECampaignSummary s = run_pe_campaign(cfg, run, pc_T);
            save_json(cfg.output_path, to_json(s));
            std::cout << "frequency " << s.frequency << " at T=" << s.T << " (" << s.trials << " trials)\n";
            return kOk;
        }
        if (val->parsed()) {
            const ExperimentConfig cfg = resolve_config(common, ExperimentConfig::validation_default());
            const ValidationSummary s = run_validation(cfg, run);
            save_json(cfg.output_path, to_json(s));
            for (const ValidationCheck& c : s.checks)
                std::cout << (c.skipped ? "SKIP " : c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail
                          << '\n';
            return s.all_passed() ? kOk : kValidation;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const ParameterError& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kConfig;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition violated: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
