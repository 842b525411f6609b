#pragma once

#include "bsid/simulate.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace bsid {

// Least-squares system y_t = (ubar_{t-1} (x) u_t)' vec(G) + noise, t = L+1..T.
struct DesignSystem {
    MatrixXd U_tilde;  // (T-L) x p^2 L
    VectorXd y;        // T-L
    Index L = 0;
    Index T = 0;
    Index p = 0;
};

// [u_t; u_{t-1}; ...; u_{t-L+1}] from inputs stored as columns.
VectorXd stacked_inputs(const MatrixXd& u, Index t, Index L);

// a (x) b for column vectors.
VectorXd kron(const VectorXd& a, const VectorXd& b);

DesignSystem build_design(const MatrixXd& u, const VectorXd& y, Index L);
DesignSystem build_design(const Trajectory& traj, Index L);

enum class SolverMode { full_rank, min_norm };
std::string_view to_string(SolverMode m);

struct EstimateReport {
    MatrixXd G_hat;  // p x pL
    MatrixXd gram;   // U_tilde' U_tilde
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double residual_norm = 0.0;
    SolverMode solver_mode = SolverMode::full_rank;
};

// Full-rank normal equations when lambda_min > rank_tol * lambda_max,
// otherwise the minimum-norm least-squares solution.
EstimateReport estimate_markov(const DesignSystem& design, double rank_tol = 1e-10);

// ||U_tilde (vec(G_hat) - vec(G_true))||_2.
double ellipsoidal_error(const MatrixXd& G_hat, const MatrixXd& G_true, const DesignSystem& design);

// Constants entering the error bounds for a given model, noise and window.
struct BoundTerms {
    double sigma_w_sq = 0.0;
    double sigma_e_sq = 0.0;
    double K = 0.0;       // max(||B||, ||C||)
    double Xi = 0.0;      // variance proxy of the effective noise
    double beta = 0.0;    // input norm bound
    double rho = 0.0;     // decay rate
    double phi = 0.0;     // transient factor at rho
    double delta = 0.0;   // failure probability
    double sigma_z = 0.0;
    double sigma_w_norm = 0.0;    // ||Sigma_w||
    double F_fro_sq = 0.0;        // ||F||_F^2
    double CAL_norm_sq = 0.0;     // ||C A^L||^2
    double gramian_norm = 0.0;    // ||Gamma_w^inf||
    double B_norm = 0.0;
    double C_norm = 0.0;
    Index L = 0;
};

// rho defaults to (1 + spectral_radius(A)) / 2.
BoundTerms bound_terms(const Model& model, const NoiseSpec& noise, Index L, double beta, double delta,
                       std::optional<double> rho = std::nullopt);

// Same terms re-evaluated at another input norm bound.
BoundTerms with_beta(BoundTerms terms, double beta);

struct DataDependentBound {
    double variance_term = 0.0;  // sqrt(p^2 L Xi / delta)
    double bias_term = 0.0;      // beta^2 K^2 phi rho^L / (1 - rho) sqrt(T - L)
    double ellipsoidal = 0.0;    // variance_term + bias_term
    double frobenius = 0.0;      // ellipsoidal / sqrt(lambda_min); +inf when lambda_min <= 0
};

DataDependentBound bound_data_dependent(const BoundTerms& terms, Index p, Index T, double lambda_min);

enum class BetaRule { empirical_max, log_surrogate };

// max_t ||u_t|| or sqrt(p log(T / delta)).
double input_norm_bound(const MatrixXd& u, BetaRule rule = BetaRule::empirical_max,
                        double delta = 0.1);

struct ChooseLResult {
    bool feasible = false;
    Index L = 0;
    double bias = 0.0;        // left side at the returned (or last scanned) L
    double noise_level = 0.0; // right side at the same L
    std::string binding_term;
};

// Smallest even L >= 2n with
//   2 beta^2 ||B|| ||C|| phi rho^L / (1 - rho) <= sqrt(p^2 L Xi(L) / (delta (T - L))).
ChooseLResult choose_L(const Model& model, const NoiseSpec& noise, Index T, double delta, double beta,
                       std::optional<double> rho = std::nullopt, Index L_max = 200);

// True when the inequality above holds at a single L.
bool choose_L_condition(const BoundTerms& terms, Index p, Index T, double* bias = nullptr,
                        double* noise_level = nullptr);

struct Prediction {
    double y_hat = 0.0;
    std::optional<double> mse_bound;
    std::string note;
};

// u_next' G_hat ubar with ubar stacked most recent first.
double predict_output(const MatrixXd& G_hat, const VectorXd& ubar, const VectorXd& u_next);

// Predicts y_{T+1} from inputs u_0..u_T (columns) and u_{T+1}.
Prediction predict(const MatrixXd& G_hat, const MatrixXd& inputs, const VectorXd& u_next);

// Same, with the conditional MSE bound evaluated against the true model.
// beta must bound every input norm including u_next.
Prediction predict(const MatrixXd& G_hat, const MatrixXd& inputs, const VectorXd& u_next,
                   const Model& model, const NoiseSpec& noise, const DesignSystem& design,
                   double beta);

// Conditional auto-covariance of zeta_{tau+1} and zeta_{tau'+1} given the
// inputs u_0..u_T, where zeta_{t} = y_t - u_t' G ubar_{t-1}.
double effective_noise_autocov(const Model& model, const NoiseSpec& noise, const MatrixXd& inputs,
                               Index tau, Index tau_prime, Index L);

}  // namespace bsid
