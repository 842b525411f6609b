#pragma once

#include "bsid/excitation.hpp"
#include "bsid/hokalman.hpp"
#include "bsid/markov_estimator.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace bsid {

// Shortest decimal form that round-trips a double.
std::string format_number(double x);

// "# rows=<r> cols=<c>" header followed by comma-separated rows.
void write_matrix_csv(std::ostream& os, const MatrixXd& m);
MatrixXd read_matrix_csv(std::istream& is);
void save_matrix(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd load_matrix(const std::filesystem::path& path);

// Columns t,u_1..u_p,y and, when diagnostics are present, x_1..x_n,w_1..w_n,z.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

void save_model(const std::filesystem::path& dir, const Model& m);
Model load_model(const std::filesystem::path& dir);

nlohmann::json to_json(const BoundTerms& t);
nlohmann::json to_json(const PECertificate& c);

struct EstimateTruth {
    double err_fro = 0.0;
    double err_ellipsoidal = 0.0;
    double bound_value = 0.0;
    BoundTerms terms;
};

nlohmann::json estimate_record(const EstimateReport& rep, const std::optional<EstimateTruth>& truth = {});

// {n, p, L, sigma_min_L, sigma_min_L_hat, robustness_ok}; sigma_min_L falls back
// to the estimate's value and robustness_ok to null when no reference is given.
nlohmann::json realization_record(const Realization<double>& r, std::optional<double> sigma_min_ref = {},
                                  std::optional<bool> robustness_ok = {});

void save_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace bsid
