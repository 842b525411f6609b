#include "bsid/experiments.hpp"

#include "bsid/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace bsid {

namespace {

// Seed domains; keep distinct so experiments never share streams.
constexpr std::uint64_t kModelDomain = 1;
constexpr std::uint64_t kTrajectoryDomain = 2;
constexpr std::uint64_t kPEDomain = 3;
constexpr std::uint64_t kValidationDomain = 4;

void fill_cell_stats(std::vector<TrialRow>& rows) {
    std::size_t begin = 0;
    while (begin < rows.size()) {
        std::size_t end = begin;
        const auto same = [&](const TrialRow& a, const TrialRow& b) {
            return a.rho == b.rho && a.L == b.L && a.T == b.T;
        };
        while (end < rows.size() && same(rows[begin], rows[end])) ++end;
        const double count = double(end - begin);
        double mean = 0.0;
        for (std::size_t i = begin; i < end; ++i) mean += rows[i].err_G_fro2;
        mean /= count;
        double ss = 0.0;
        for (std::size_t i = begin; i < end; ++i) ss += std::pow(rows[i].err_G_fro2 - mean, 2);
        const double sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            rows[i].mean_err = mean;
            rows[i].std_err = sd;
        }
        begin = end;
    }
}

ExperimentTable run_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    const NoiseSpec noise = cfg.noise.spec(cfg.n);
    const InputDesign inputs = cfg.input.design(cfg.p);
    const Index n_rho = Index(cfg.rho_values.size());
    const Index n_L = Index(cfg.L_values.size());
    const Index n_T = Index(cfg.T_values.size());
    const Index trials = cfg.trials;

    // results[task][l * n_T + t]
    std::vector<std::vector<TrialRow>> results(std::size_t(n_rho * trials));
    parallel_for(n_rho * trials, opts.threads, [&](Index task) {
        const Index ri = task / trials, trial = task % trials;
        const double rho = cfg.rho_values[std::size_t(ri)];
        const Model model =
            make_model(cfg, rho, derive_seed(cfg.base_seed, kModelDomain, std::uint64_t(ri), std::uint64_t(trial)));

        std::vector<BoundTerms> terms;
        std::vector<MatrixXd> truth;
        for (const Index L : cfg.L_values) {
            terms.push_back(bound_terms(model, noise, L, 1.0, cfg.delta, cfg.bound_rho));
            truth.push_back(markov_params(model, L).G);
        }

        auto& out = results[std::size_t(task)];
        out.resize(std::size_t(n_L * n_T));
        for (Index ti = 0; ti < n_T; ++ti) {
            const Index T = cfg.T_values[std::size_t(ti)];
            const Trajectory traj =
                simulate(model, noise, inputs, T,
                         derive_seed(cfg.base_seed, kTrajectoryDomain, std::uint64_t(ri), std::uint64_t(trial),
                                     std::uint64_t(T)));
            const double beta = cfg.input.beta ? *cfg.input.beta : input_norm_bound(traj.u);
            for (Index li = 0; li < n_L; ++li) {
                const Index L = cfg.L_values[std::size_t(li)];
                const auto start = std::chrono::steady_clock::now();
                const DesignSystem design = build_design(traj, L);
                const EstimateReport rep = estimate_markov(design);
                const auto stop = std::chrono::steady_clock::now();

                TrialRow& row = out[std::size_t(li * n_T + ti)];
                row.rho = rho;
                row.L = L;
                row.T = T;
                row.trial = trial;
                row.err_G_fro2 = (rep.G_hat - truth[std::size_t(li)]).squaredNorm();
                row.lambda_min = rep.lambda_min;
                row.solver_mode = rep.solver_mode;
                row.residual_norm = rep.residual_norm;
                if (rep.solver_mode == SolverMode::full_rank) {
                    const double b = bound_data_dependent(with_beta(terms[std::size_t(li)], beta), cfg.p, T,
                                                          rep.lambda_min)
                                         .frobenius;
                    row.bound_value = b * b;
                } else {
                    row.bound_value = std::numeric_limits<double>::infinity();
                }
                if (opts.record_runtime)
                    row.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
            }
        }
    });

    ExperimentTable table;
    table.p = cfg.p;
    for (Index ri = 0; ri < n_rho; ++ri)
        for (Index li = 0; li < n_L; ++li)
            for (Index ti = 0; ti < n_T; ++ti)
                for (Index trial = 0; trial < trials; ++trial)
                    table.rows.push_back(results[std::size_t(ri * trials + trial)][std::size_t(li * n_T + ti)]);
    fill_cell_stats(table.rows);
    return table;
}

bool at_threshold(const TrialRow& r, Index p) { return r.T - r.L == p * p * r.L; }

}  // namespace

void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& body) {
    if (count <= 0) return;
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, unsigned(count)));
    if (workers == 1) {
        for (Index i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (Index i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        const std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next = count;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

Model make_model(const ExperimentConfig& cfg, double rho, std::uint64_t seed) {
    if (cfg.model == "nilpotent") return random_nilpotent_model(cfg.n, cfg.p, seed);
    return random_model(cfg.n, cfg.p, rho, seed);
}

ExperimentTable run_figure1(const ExperimentConfig& cfg, const RunOptions& opts) { return run_sweep(cfg, opts); }

ExperimentTable run_double_descent(const ExperimentConfig& cfg, const RunOptions& opts) {
    ExperimentTable table = run_sweep(cfg, opts);
    table.mark_threshold = true;
    return table;
}

void write_table_csv(std::ostream& os, const ExperimentTable& table, bool aggregated) {
    const bool threshold = aggregated && table.mark_threshold;
    os << "rho,L,T,trial,err_G_fro2,lambda_min,solver_mode,bound_value,runtime_ms";
    if (aggregated) os << ",mean_err,std_err";
    if (threshold) os << ",at_threshold";
    os << '\n';
    for (const TrialRow& r : table.rows) {
        os << format_number(r.rho) << ',' << r.L << ',' << r.T << ',' << r.trial << ','
           << format_number(r.err_G_fro2) << ',' << format_number(r.lambda_min) << ',' << to_string(r.solver_mode)
           << ',' << format_number(r.bound_value) << ',' << format_number(r.runtime_ms);
        if (aggregated) os << ',' << format_number(r.mean_err) << ',' << format_number(r.std_err);
        if (threshold) os << ',' << (at_threshold(r, table.p) ? 1 : 0);
        os << '\n';
    }
}

nlohmann::json to_json(const ExperimentTable& table) {
    // One entry per (rho, L, T) cell.
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t i = 0; i < table.rows.size();) {
        const TrialRow& first = table.rows[i];
        Index count = 0, full_rank = 0, covered = 0;
        std::size_t j = i;
        for (; j < table.rows.size(); ++j) {
            const TrialRow& r = table.rows[j];
            if (r.rho != first.rho || r.L != first.L || r.T != first.T) break;
            ++count;
            if (r.solver_mode == SolverMode::full_rank) ++full_rank;
            if (r.err_G_fro2 <= r.bound_value) ++covered;
        }
        nlohmann::json cell{{"rho", first.rho},           {"L", first.L},
                            {"T", first.T},               {"trials", count},
                            {"mean_err", first.mean_err}, {"std_err", first.std_err},
                            {"full_rank", full_rank},     {"bound_covered", covered}};
        if (table.mark_threshold) cell["at_threshold"] = at_threshold(first, table.p);
        cells.push_back(std::move(cell));
        i = j;
    }
    return {{"p", table.p}, {"cells", std::move(cells)}};
}

PECampaignSummary run_pe_campaign(const InputDesign& inputs, Index L, double delta, double m4, Index trials,
                                  std::uint64_t base_seed, std::optional<Index> T, const RunOptions& opts) {
    inputs.validate();
    require(L >= 1, "pe campaign: L must be >= 1");
    require(trials >= 1, "pe campaign: trials must be >= 1");
    const Index p = inputs.p;
    PECampaignSummary s;
    s.p = p;
    s.L = L;
    s.delta = delta;
    s.m4 = m4;
    s.trials = trials;
    s.required_samples = pe_required_samples(p, L, delta, PERegime::fourth_moment_b, m4);
    s.required_T = L + s.required_samples;
    s.T = T ? *T : s.required_T;
    require(s.T > L, "pe campaign: T must exceed L");

    std::vector<double> ratios(static_cast<std::size_t>(trials));
    parallel_for(trials, opts.threads, [&](Index trial) {
        Rng rng(derive_seed(base_seed, kPEDomain, std::uint64_t(trial)));
        const MatrixXd u = inputs.draw(s.T + 1, rng);
        const DesignSystem design = build_design(u, VectorXd::Zero(s.T + 1), L);
        ratios[std::size_t(trial)] = min_eig_design(design) / double(s.T - L);
    });
    s.passes = Index(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r >= 0.25; }));
    s.frequency = double(s.passes) / double(trials);
    s.min_ratio = *std::min_element(ratios.begin(), ratios.end());
    return s;
}

PECampaignSummary run_pe_campaign(const ExperimentConfig& cfg, const RunOptions& opts, std::optional<Index> T) {
    cfg.validate();
    return run_pe_campaign(cfg.input.design(cfg.p), cfg.L_values.front(), cfg.delta, cfg.m4, cfg.trials,
                           cfg.base_seed, T, opts);
}

nlohmann::json to_json(const PECampaignSummary& s) {
    return {{"frequency", s.frequency},
            {"passes", s.passes},
            {"trials", s.trials},
            {"p", s.p},
            {"L", s.L},
            {"T", s.T},
            {"required_samples", s.required_samples},
            {"required_T", s.required_T},
            {"delta", s.delta},
            {"m4", s.m4},
            {"min_ratio", s.min_ratio}};
}

bool ValidationSummary::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed || c.skipped; });
}

namespace {

// Noise-free output part and noise weights of y_{T+1} given u_0..u_{T+1}:
// y = mean + sum_k h_k' w_k + z with h_k = (u' C A^{T-k})'.
struct OutputLinearForm {
    double mean = 0.0;
    MatrixXd h;  // n x (T+1)
};

OutputLinearForm output_linear_form(const Model& m, const MatrixXd& inputs, const VectorXd& u_next) {
    const Index T = inputs.cols() - 1;
    OutputLinearForm f{0.0, MatrixXd(m.n(), T + 1)};
    Eigen::RowVectorXd row = u_next.transpose() * m.C;  // u' C A^{T-k}, k descending
    for (Index k = T; k >= 0; --k) {
        f.h.col(k) = row.transpose();
        f.mean += row.dot(m.B * inputs.col(k));
        row = row * m.A;
    }
    return f;
}

ValidationCheck check_autocov(const ExperimentConfig& cfg, const Model& model, const NoiseSpec& noise,
                              const InputDesign& inputs, const RunOptions& opts) {
    const Index L = cfg.L_values.front();
    const Index T = L + 5;
    const Index lags = 5;  // tau = L .. L+4
    Rng rng(derive_seed(cfg.base_seed, kValidationDomain, 1));
    const MatrixXd u = inputs.draw(T + 1, rng);
    const MatrixXd G = markov_params(model, L).G;

    // zeta draws: mc_draws x lags
    const Index draws = cfg.mc_draws;
    MatrixXd zeta(draws, lags);
    parallel_for(draws, opts.threads, [&](Index d) {
        const Trajectory traj = simulate(model, noise, u, derive_seed(cfg.base_seed, kValidationDomain, 2, d));
        for (Index a = 0; a < lags; ++a) {
            const Index tau = L + a;
            zeta(d, a) = traj.y(tau + 1) - predict_output(G, stacked_inputs(u, tau, L), u.col(tau + 1));
        }
    });
    const Eigen::RowVectorXd mean = zeta.colwise().mean();
    const MatrixXd centered = zeta.rowwise() - mean;

    double worst = std::numeric_limits<double>::infinity();
    std::string detail;
    for (Index a = 0; a < lags; ++a) {
        for (Index b = a; b < lags; ++b) {
            const VectorXd prod = centered.col(a).cwiseProduct(centered.col(b));
            const double mc = prod.sum() / double(draws - 1);
            const double var = (prod.array() - prod.mean()).square().sum() / double(draws - 1);
            const double se = std::sqrt(var / double(draws));
            const double exact = effective_noise_autocov(model, noise, u, L + a, L + b, L);
            const double margin = (3.0 * se + 1e-12 - std::abs(mc - exact)) / std::max(se, 1e-300);
            if (margin < worst) {
                worst = margin;
                detail = "tau=" + std::to_string(L + a) + " tau'=" + std::to_string(L + b) +
                         " closed_form=" + format_number(exact) + " monte_carlo=" + format_number(mc) +
                         " se=" + format_number(se);
            }
        }
    }
    return {"autocovariance_monte_carlo", worst >= 0.0, false, worst, detail};
}

ValidationCheck check_m4(const ExperimentConfig& cfg, const InputDesign& inputs) {
    if (inputs.kind != InputKind::gaussian_isotropic)
        return {"gaussian_fourth_moment", false, true, 0.0, "skipped: inputs are not Gaussian"};
    const M4Estimate est = estimate_m4(inputs, cfg.L_values.front(), cfg.m4_directions, cfg.m4_samples,
                                       derive_seed(cfg.base_seed, kValidationDomain, 3));
    double worst = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < est.estimates.size(); ++i) {
        const double z = (est.estimates(i) - 9.0) / est.std_errors(i);
        worst = std::min(worst, 3.0 - z);
    }
    return {"gaussian_fourth_moment", worst >= 0.0, false, worst,
            "max_estimate=" + format_number(est.max_estimate) + " (Gaussian value 9)"};
}

ValidationCheck check_coverage_and_prediction(const ExperimentConfig& cfg, const Model& model, const NoiseSpec& noise,
                                              const InputDesign& inputs, const RunOptions& opts,
                                              ValidationCheck& prediction) {
    const Index L = cfg.L_values.front();
    const Index T = cfg.T_values.front();
    const Index trials = cfg.trials;
    const BoundTerms base = bound_terms(model, noise, L, 1.0, cfg.delta, cfg.bound_rho);
    const MatrixXd G = markov_params(model, L).G;
    const NoiseSampler sampler(noise, model.n());

    std::vector<int> covered(std::size_t(trials), 0);
    std::vector<double> pred_margin(std::size_t(std::min(trials, cfg.prediction_trials)),
                                    std::numeric_limits<double>::infinity());
    std::vector<std::string> pred_note(pred_margin.size());
    parallel_for(trials, opts.threads, [&](Index trial) {
        const std::uint64_t seed = derive_seed(cfg.base_seed, kValidationDomain, 5, trial);
        const Trajectory traj = simulate(model, noise, inputs, T, seed);
        const DesignSystem design = build_design(traj, L);
        const EstimateReport rep = estimate_markov(design);
        const double beta = cfg.input.beta ? *cfg.input.beta : input_norm_bound(traj.u);
        if (rep.solver_mode == SolverMode::full_rank) {
            const double bound =
                bound_data_dependent(with_beta(base, beta), cfg.p, T, rep.lambda_min).ellipsoidal;
            covered[std::size_t(trial)] = ellipsoidal_error(rep.G_hat, G, design) <= bound ? 1 : 0;
        }
        if (trial >= Index(pred_margin.size())) return;

        Rng rng(derive_seed(seed, 7));
        const VectorXd u_next = inputs.draw(1, rng).col(0);
        const double beta_all = cfg.input.beta ? *cfg.input.beta : std::max(beta, u_next.norm());
        const Prediction pred = predict(rep.G_hat, traj.u, u_next, model, noise, design, beta_all);
        if (!pred.mse_bound) {
            pred_note[std::size_t(trial)] = pred.note;
            return;
        }
        const OutputLinearForm form = output_linear_form(model, traj.u, u_next);
        double se = 0.0;
        for (Index d = 0; d < cfg.prediction_draws; ++d) {
            double r = form.mean + sampler.measurement(rng);
            for (Index k = 0; k < form.h.cols(); ++k) r += form.h.col(k).dot(sampler.process(rng));
            se += std::pow(pred.y_hat - r, 2);
        }
        const double mse = se / double(cfg.prediction_draws);
        pred_margin[std::size_t(trial)] = (*pred.mse_bound - mse) / *pred.mse_bound;
    });

    const double coverage = double(std::accumulate(covered.begin(), covered.end(), 0)) / double(trials);
    const double target = 1.0 - cfg.delta - 0.05;
    const double worst_pred = *std::min_element(pred_margin.begin(), pred_margin.end());
    std::string note;
    for (const auto& s : pred_note)
        if (!s.empty()) note = s;
    prediction = {"prediction_mse_bound", worst_pred >= 0.0, false, worst_pred,
                  "smallest relative slack of the bound over the Monte Carlo MSE" +
                      (note.empty() ? std::string() : "; " + note)};
    return {"bound_coverage", coverage >= target, false, coverage - target,
            "coverage=" + format_number(coverage) + " target=" + format_number(target)};
}

}  // namespace

ValidationSummary run_validation(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    const double rho = cfg.rho_values.front();
    const Model model = make_model(cfg, rho, derive_seed(cfg.base_seed, kValidationDomain, 0));
    const NoiseSpec noise = cfg.noise.spec(cfg.n);
    const InputDesign inputs = cfg.input.design(cfg.p);

    ValidationSummary s;
    s.checks.push_back(check_autocov(cfg, model, noise, inputs, opts));
    s.checks.push_back(check_m4(cfg, inputs));
    ValidationCheck prediction;
    s.checks.push_back(check_coverage_and_prediction(cfg, model, noise, inputs, opts, prediction));
    s.checks.push_back(prediction);
    return s;
}

nlohmann::json to_json(const ValidationSummary& s) {
    nlohmann::json checks = nlohmann::json::array();
    for (const ValidationCheck& c : s.checks)
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"skipped", c.skipped},
                          {"margin", c.margin},
                          {"detail", c.detail}});
    return {{"all_passed", s.all_passed()}, {"checks", std::move(checks)}};
}

}  // namespace bsid
