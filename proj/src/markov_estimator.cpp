#include "bsid/markov_estimator.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace bsid {

VectorXd stacked_inputs(const MatrixXd& u, Index t, Index L) {
    require(L >= 1, "stacked_inputs: L must be >= 1");
    require(t - L + 1 >= 0 && t < u.cols(), "stacked_inputs: window out of range");
    const Index p = u.rows();
    VectorXd out(p * L);
    for (Index k = 0; k < L; ++k) out.segment(k * p, p) = u.col(t - k);
    return out;
}

VectorXd kron(const VectorXd& a, const VectorXd& b) {
    VectorXd out(a.size() * b.size());
    for (Index k = 0; k < a.size(); ++k) out.segment(k * b.size(), b.size()) = a(k) * b;
    return out;
}

DesignSystem build_design(const MatrixXd& u, const VectorXd& y, Index L) {
    require(L >= 1, "build_design: L must be >= 1");
    require(u.cols() == y.size(), "build_design: inputs and outputs differ in length");
    const Index T = y.size() - 1, p = u.rows();
    require(T >= L + 1, "build_design: need T >= L + 1");
    DesignSystem d{MatrixXd(T - L, p * p * L), VectorXd(T - L), L, T, p};
    for (Index t = L + 1; t <= T; ++t) {
        const Index r = t - L - 1;
        d.U_tilde.row(r) = kron(stacked_inputs(u, t - 1, L), u.col(t)).transpose();
        d.y(r) = y(t);
    }
    return d;
}

DesignSystem build_design(const Trajectory& traj, Index L) { return build_design(traj.u, traj.y, L); }

std::string_view to_string(SolverMode m) { return m == SolverMode::full_rank ? "full_rank" : "min_norm"; }

EstimateReport estimate_markov(const DesignSystem& design, double rank_tol) {
    const MatrixXd& U = design.U_tilde;
    require(U.rows() == design.y.size(), "estimate_markov: design rows and targets differ");
    const Index p = design.p, L = design.L;
    require(U.cols() == p * p * L, "estimate_markov: design width must be p^2 L");

    EstimateReport rep;
    rep.gram = U.transpose() * U;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(rep.gram, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    rep.lambda_max = es.eigenvalues()(es.eigenvalues().size() - 1);
    rep.lambda_min = std::max(lmin, 0.0);

    VectorXd theta;
    if (rep.lambda_max > 0.0 && lmin > rank_tol * rep.lambda_max) {
        // Same minimizer as the normal equations, via QR for accuracy.
        theta = U.colPivHouseholderQr().solve(design.y);
        rep.solver_mode = SolverMode::full_rank;
    } else {
        theta = U.completeOrthogonalDecomposition().solve(design.y);
        rep.solver_mode = SolverMode::min_norm;
    }
    rep.residual_norm = (design.y - U * theta).norm();
    rep.G_hat = unvec(theta, p, p * L);
    return rep;
}

double ellipsoidal_error(const MatrixXd& G_hat, const MatrixXd& G_true, const DesignSystem& design) {
    require(G_hat.rows() == G_true.rows() && G_hat.cols() == G_true.cols(),
            "ellipsoidal_error: shape mismatch");
    require(G_hat.size() == design.U_tilde.cols(), "ellipsoidal_error: design width mismatch");
    return (design.U_tilde * vec(G_hat - G_true)).norm();
}

BoundTerms bound_terms(const Model& model, const NoiseSpec& noise, Index L, double beta, double delta,
                       std::optional<double> rho) {
    model.validate();
    noise.validate(model.n());
    require(L >= 1, "bound_terms: L must be >= 1");
    require(beta > 0.0 && std::isfinite(beta), "bound_terms: beta must be positive");
    require(delta > 0.0 && delta < 1.0, "bound_terms: delta must lie in (0, 1)");
    const double radius = spectral_radius(model.A);
    if (!(radius < 1.0)) throw PreconditionError("bound_terms: requires spectral_radius(A) < 1");

    BoundTerms t;
    t.L = L;
    t.delta = delta;
    t.rho = rho.value_or(default_decay_rate(model.A));
    t.phi = transient_factor(model.A, t.rho);
    t.sigma_z = noise.sigma_z;
    t.sigma_w_norm = op_norm(noise.sigma_w);
    t.F_fro_sq = markov_params(model, L).F.squaredNorm();
    const double cal = op_norm(observe_power(model, L));
    t.CAL_norm_sq = cal * cal;
    t.gramian_norm = op_norm(gramian_infinite(model.A, noise.sigma_w));
    t.B_norm = op_norm(model.B);
    t.C_norm = op_norm(model.C);
    t.K = std::max(t.B_norm, t.C_norm);

    return with_beta(t, beta);
}

BoundTerms with_beta(BoundTerms t, double beta) {
    require(beta > 0.0 && std::isfinite(beta), "with_beta: beta must be positive");
    t.beta = beta;
    const double decay = 1.0 + t.phi * std::pow(t.rho, double(t.L)) / (1.0 - t.rho);
    const double b2 = beta * beta;
    t.sigma_w_sq = t.sigma_w_norm * t.F_fro_sq * decay;
    t.sigma_e_sq = t.gramian_norm * t.CAL_norm_sq * t.phi / (1.0 - t.rho);
    t.Xi = t.sigma_z * t.sigma_z + 3.0 * t.sigma_w_norm * t.F_fro_sq * b2 * double(t.L) * decay +
           2.0 * t.gramian_norm * t.CAL_norm_sq * b2 * t.phi / (1.0 - t.rho);
    return t;
}

DataDependentBound bound_data_dependent(const BoundTerms& terms, Index p, Index T, double lambda_min) {
    require(terms.L >= 1 && T > terms.L, "bound_data_dependent: need T > L");
    require(terms.beta > 0.0, "bound_data_dependent: beta must be positive");
    require(terms.delta > 0.0 && terms.delta < 1.0, "bound_data_dependent: delta must lie in (0, 1)");
    require(terms.rho > 0.0 && terms.rho < 1.0, "bound_data_dependent: rho must lie in (0, 1)");
    const double L = double(terms.L);
    DataDependentBound b;
    b.variance_term = std::sqrt(double(p * p) * L * terms.Xi / terms.delta);
    b.bias_term = terms.beta * terms.beta * terms.K * terms.K * terms.phi *
                  std::pow(terms.rho, L) / (1.0 - terms.rho) * std::sqrt(double(T) - L);
    b.ellipsoidal = b.variance_term + b.bias_term;
    b.frobenius = lambda_min > 0.0 ? b.ellipsoidal / std::sqrt(lambda_min)
                                   : std::numeric_limits<double>::infinity();
    return b;
}

double input_norm_bound(const MatrixXd& u, BetaRule rule, double delta) {
    require(u.cols() >= 1, "input_norm_bound: empty input sequence");
    if (rule == BetaRule::empirical_max) return u.colwise().norm().maxCoeff();
    require(delta > 0.0 && delta < 1.0, "input_norm_bound: delta must lie in (0, 1)");
    const double T = double(std::max<Index>(u.cols() - 1, 1));
    return std::sqrt(double(u.rows()) * std::log(T / delta));
}

bool choose_L_condition(const BoundTerms& terms, Index p, Index T, double* bias, double* noise_level) {
    require(T > terms.L, "choose_L_condition: need T > L");
    const double L = double(terms.L);
    const double lhs = 2.0 * terms.beta * terms.beta * terms.B_norm * terms.C_norm * terms.phi *
                       std::pow(terms.rho, L) / (1.0 - terms.rho);
    const double rhs = std::sqrt(double(p * p) * L * terms.Xi / (terms.delta * (double(T) - L)));
    if (bias) *bias = lhs;
    if (noise_level) *noise_level = rhs;
    return lhs <= rhs;
}

ChooseLResult choose_L(const Model& model, const NoiseSpec& noise, Index T, double delta, double beta,
                       std::optional<double> rho, Index L_max) {
    model.validate();
    if (!(spectral_radius(model.A) < 1.0))
        throw PreconditionError("choose_L: requires spectral_radius(A) < 1");
    ChooseLResult res;
    const Index first = 2 * model.n();
    const Index last = std::min(L_max, T - 1);
    for (Index L = first; L <= last; L += 2) {
        const BoundTerms terms = bound_terms(model, noise, L, beta, delta, rho);
        res.L = L;
        if (choose_L_condition(terms, model.p(), T, &res.bias, &res.noise_level)) {
            res.feasible = true;
            return res;
        }
    }
    res.feasible = false;
    if (first > last)
        res.binding_term = "sample size: no even L in [2n, min(L_max, T-1)]";
    else
        res.binding_term = "truncation bias 2 beta^2 |B||C| phi rho^L/(1-rho) exceeds noise level "
                           "sqrt(p^2 L Xi/(delta (T-L))) up to L=" + std::to_string(res.L);
    return res;
}

double predict_output(const MatrixXd& G_hat, const VectorXd& ubar, const VectorXd& u_next) {
    require(G_hat.rows() == u_next.size() && G_hat.cols() == ubar.size(),
            "predict_output: shape mismatch");
    return u_next.dot(G_hat * ubar);
}

Prediction predict(const MatrixXd& G_hat, const MatrixXd& inputs, const VectorXd& u_next) {
    const Index p = G_hat.rows();
    require(p >= 1 && G_hat.cols() % p == 0, "predict: G_hat must be p x pL");
    const Index L = G_hat.cols() / p;
    require(inputs.rows() == p && inputs.cols() >= L, "predict: need at least L past inputs");
    Prediction out;
    out.y_hat = predict_output(G_hat, stacked_inputs(inputs, inputs.cols() - 1, L), u_next);
    return out;
}

Prediction predict(const MatrixXd& G_hat, const MatrixXd& inputs, const VectorXd& u_next,
                   const Model& model, const NoiseSpec& noise, const DesignSystem& design, double beta) {
    Prediction out = predict(G_hat, inputs, u_next);
    model.validate();
    noise.validate(model.n());
    const Index p = model.p(), L = design.L;
    require(G_hat.rows() == p && G_hat.cols() == p * L, "predict: G_hat does not match design");

    const MatrixXd gram = design.U_tilde.transpose() * design.U_tilde;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0.0 && es.eigenvalues()(0) > 1e-10 * lmax)) {
        out.note = "design Gram matrix is singular; bound omitted";
        return out;
    }
    const MarkovParams<double> truth = markov_params(model, L);
    const double ellip = ellipsoidal_error(G_hat, truth.G, design);
    const VectorXd x = kron(stacked_inputs(inputs, inputs.cols() - 1, L), u_next);
    const double leverage = x.dot(gram.llt().solve(x));

    const Index T = inputs.cols() - 1;
    const MatrixXd state_moment =
        input_gramian(model.A, model.B, inputs) + gramian_finite(model.A, noise.sigma_w, T);
    const double cal = op_norm(observe_power(model, L));
    const double b2 = beta * beta;
    out.mse_bound = 2.0 * ellip * ellip * leverage + 2.0 * b2 * cal * cal * op_norm(state_moment) +
                    b2 * op_norm(noise.sigma_w) * truth.F.squaredNorm() + noise.sigma_z * noise.sigma_z;
    return out;
}

namespace {

// delta_w(t, i) (x) S: n x nL, block k equals S when t - i == k.
MatrixXd delta_row_kron(Index t, Index i, Index L, const MatrixXd& S) {
    const Index n = S.rows();
    MatrixXd out = MatrixXd::Zero(n, n * L);
    const Index k = t - i;
    if (k >= 0 && k < L) out.middleCols(k * n, n) = S;
    return out;
}

// [(u_e' C A^L sum_{i=0}^{s_e-L} A^{s_e-L-i} (delta_w(s_w, i) (x) S)) (x) u_w'] vec(F)
double state_window_cross(const Model& m, const MatrixXd& F, const std::vector<MatrixXd>& powers,
                          const MatrixXd& S, const VectorXd& u_e, Index s_e, const VectorXd& u_w,
                          Index s_w, Index L) {
    const Index n = m.n();
    MatrixXd acc = MatrixXd::Zero(n, n * L);
    for (Index i = 0; i <= s_e - L; ++i)
        acc.noalias() += powers[s_e - L - i] * delta_row_kron(s_w, i, L, S);
    const VectorXd r = (u_e.transpose() * m.C * powers[L] * acc).transpose();
    return u_w.dot(F * r);
}

}  // namespace

double effective_noise_autocov(const Model& model, const NoiseSpec& noise, const MatrixXd& inputs,
                               Index tau, Index tau_prime, Index L) {
    model.validate();
    noise.validate(model.n());
    require(L >= 1, "effective_noise_autocov: L must be >= 1");
    require(inputs.rows() == model.p(), "effective_noise_autocov: inputs must have p rows");
    const Index T = inputs.cols() - 1;
    require(tau >= L && tau_prime >= L && tau <= T - 1 && tau_prime <= T - 1,
            "effective_noise_autocov: need L <= tau, tau' <= T-1");

    const Index n = model.n();
    const MatrixXd& S = noise.sigma_w;
    const MarkovParams<double> mp = markov_params(model, L);
    std::vector<MatrixXd> powers{MatrixXd::Identity(n, n)};
    const Index top = std::max({tau, tau_prime, L});
    for (Index k = 1; k <= top; ++k) powers.push_back(model.A * powers.back());

    const VectorXd ua = inputs.col(tau + 1), ub = inputs.col(tau_prime + 1);
    const auto F_block = [&](Index i) { return mp.F.middleCols(i * n, n); };

    // vec(F)' (Toeplitz delta (x) S (x) ua ub') vec(F)
    double window = 0.0;
    for (Index i = 0; i < L; ++i)
        for (Index j = 0; j < L; ++j)
            if (tau - tau_prime - i + j == 0)
                window += (ua.transpose() * F_block(i) * S * F_block(j).transpose() * ub).value();

    // Noise carried by the state L steps back.
    double carried = 0.0;
    for (Index i = 0; i <= std::min(tau, tau_prime) - L; ++i)
        carried += (ua.transpose() * model.C * powers[tau - i] * S * powers[tau_prime - i].transpose() *
                    model.C.transpose() * ub).value();

    const double cross = state_window_cross(model, mp.F, powers, S, ub, tau_prime, ua, tau, L) +
                         state_window_cross(model, mp.F, powers, S, ua, tau, ub, tau_prime, L);
    const double meas = tau == tau_prime ? noise.sigma_z * noise.sigma_z : 0.0;
    return window + carried + cross + meas;
}

}  // namespace bsid
