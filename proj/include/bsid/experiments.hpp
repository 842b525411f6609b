#pragma once

#include "bsid/config.hpp"
#include "bsid/excitation.hpp"
#include "bsid/markov_estimator.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bsid {

struct RunOptions {
    unsigned threads = 1;
    bool record_runtime = false;  // otherwise runtime_ms is written as 0 to keep outputs reproducible
};

// Runs body(0..count-1) on up to `threads` workers. Each index is handled exactly once.
void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& body);

// Model for one (rho, trial) cell according to the configured model family.
Model make_model(const ExperimentConfig& cfg, double rho, std::uint64_t seed);

struct TrialRow {
    double rho = 0.0;
    Index L = 0, T = 0, trial = 0;
    double err_G_fro2 = 0.0;
    double lambda_min = 0.0;
    SolverMode solver_mode = SolverMode::full_rank;
    double bound_value = 0.0;  // squared Frobenius-norm bound; +inf without persistence of excitation
    double runtime_ms = 0.0;
    double residual_norm = 0.0;
    double mean_err = 0.0;  // cell statistics over trials
    double std_err = 0.0;
};

struct ExperimentTable {
    std::vector<TrialRow> rows;  // ordered by rho, L, T, trial
    Index p = 0;
    bool mark_threshold = false;  // aggregated output gains an at_threshold column (T - L == p^2 L)
};

// Sweep over rho x L x T x trial. One model per (rho, trial); one trajectory
// per (rho, trial, T), shared across L.
ExperimentTable run_figure1(const ExperimentConfig& cfg, const RunOptions& opts = {});
ExperimentTable run_double_descent(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Per-trial rows. The aggregated variant appends mean_err,std_err (and
// at_threshold for double-descent tables).
void write_table_csv(std::ostream& os, const ExperimentTable& table, bool aggregated = false);
nlohmann::json to_json(const ExperimentTable& table);

struct PECampaignSummary {
    double frequency = 0.0;
    Index passes = 0;
    Index trials = 0;
    Index p = 0, L = 0, T = 0;
    Index required_samples = 0;
    Index required_T = 0;
    double delta = 0.0;
    double m4 = 0.0;
    double min_ratio = 0.0;  // smallest lambda_min / (T - L) across trials
};

// Frequency of lambda_min(U'U) >= (T - L)/4 over seeded input draws. T defaults
// to the fourth-moment requirement.
PECampaignSummary run_pe_campaign(const InputDesign& inputs, Index L, double delta, double m4, Index trials,
                                  std::uint64_t base_seed, std::optional<Index> T = std::nullopt,
                                  const RunOptions& opts = {});
PECampaignSummary run_pe_campaign(const ExperimentConfig& cfg, const RunOptions& opts = {},
                                  std::optional<Index> T = std::nullopt);
nlohmann::json to_json(const PECampaignSummary& s);

struct ValidationCheck {
    std::string name;
    bool passed = false;
    bool skipped = false;
    double margin = 0.0;  // positive when passing
    std::string detail;
};

struct ValidationSummary {
    std::vector<ValidationCheck> checks;
    bool all_passed() const;
};

// Autocovariance vs Monte Carlo, Gaussian fourth moment vs 9, bound coverage
// and prediction-MSE bound, on the first rho/L/T of the config.
ValidationSummary run_validation(const ExperimentConfig& cfg, const RunOptions& opts = {});
nlohmann::json to_json(const ValidationSummary& s);

}  // namespace bsid
