#include "bsid/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace bsid {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParameterError("csv: cannot parse number '" + s + "'");
    return v;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

std::string format_number(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_matrix_csv(std::ostream& os, const MatrixXd& m) {
    os << "# rows=" << m.rows() << " cols=" << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_number(m(i, j));
        os << '\n';
    }
}

MatrixXd read_matrix_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw ParameterError("csv: missing header");
    long long rows = -1, cols = -1;
    if (std::sscanf(header.c_str(), "# rows=%lld cols=%lld", &rows, &cols) != 2 || rows < 0 || cols < 0)
        throw ParameterError("csv: malformed header '" + header + "'");
    MatrixXd m(rows, cols);
    std::string line;
    for (Index i = 0; i < rows; ++i) {
        if (!std::getline(is, line)) throw ParameterError("csv: too few rows");
        const auto cells = split(line);
        if (Index(cells.size()) != cols) throw ParameterError("csv: wrong number of columns");
        for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(cells[j]);
    }
    return m;
}

void save_matrix(const fs::path& path, const MatrixXd& m) {
    auto out = open_out(path);
    write_matrix_csv(out, m);
}

MatrixXd load_matrix(const fs::path& path) {
    auto in = open_in(path);
    return read_matrix_csv(in);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const Index p = traj.p();
    const bool diag = traj.diag.has_value();
    const Index n = diag ? traj.diag->x.rows() : 0;
    os << 't';
    for (Index i = 1; i <= p; ++i) os << ",u_" << i;
    os << ",y";
    if (diag) {
        for (Index i = 1; i <= n; ++i) os << ",x_" << i;
        for (Index i = 1; i <= n; ++i) os << ",w_" << i;
        os << ",z";
    }
    os << '\n';
    for (Index t = 0; t <= traj.T(); ++t) {
        os << t;
        for (Index i = 0; i < p; ++i) os << ',' << format_number(traj.u(i, t));
        os << ',' << format_number(traj.y(t));
        if (diag) {
            for (Index i = 0; i < n; ++i) os << ',' << format_number(traj.diag->x(i, t));
            for (Index i = 0; i < n; ++i) os << ',' << format_number(traj.diag->w(i, t));
            os << ',' << format_number(traj.diag->z(t));
        }
        os << '\n';
    }
}

Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParameterError("trajectory: missing header");
    const auto names = split(trim(line));
    Index p = 0, n = 0;
    for (const auto& name : names) {
        if (name.rfind("u_", 0) == 0) ++p;
        if (name.rfind("x_", 0) == 0) ++n;
    }
    require(p >= 1 && !names.empty() && names[0] == "t", "trajectory: header must start with t,u_1");
    const bool diag = n > 0;
    const Index width = 2 + p + (diag ? 2 * n + 1 : 0);
    require(Index(names.size()) == width, "trajectory: unexpected column set");

    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line));
        require(Index(cells.size()) == width, "trajectory: wrong number of columns");
        std::vector<double> row(width);
        for (Index j = 0; j < width; ++j) row[j] = parse_double(cells[j]);
        rows.push_back(std::move(row));
    }
    const Index steps = Index(rows.size());
    require(steps >= 2, "trajectory: need at least two time steps");
    Trajectory traj{MatrixXd(p, steps), VectorXd(steps), std::nullopt};
    Diagnostics d;
    if (diag) d = {MatrixXd(n, steps), MatrixXd(n, steps), VectorXd(steps)};
    for (Index t = 0; t < steps; ++t) {
        const auto& r = rows[t];
        require(Index(r[0]) == t, "trajectory: time index must run 0..T");
        for (Index i = 0; i < p; ++i) traj.u(i, t) = r[1 + i];
        traj.y(t) = r[1 + p];
        if (diag) {
            for (Index i = 0; i < n; ++i) d.x(i, t) = r[2 + p + i];
            for (Index i = 0; i < n; ++i) d.w(i, t) = r[2 + p + n + i];
            d.z(t) = r[2 + p + 2 * n];
        }
    }
    if (diag) traj.diag = std::move(d);
    return traj;
}

void save_trajectory(const fs::path& path, const Trajectory& traj) {
    auto out = open_out(path);
    write_trajectory_csv(out, traj);
}

Trajectory load_trajectory(const fs::path& path) {
    auto in = open_in(path);
    return read_trajectory_csv(in);
}

void save_model(const fs::path& dir, const Model& m) {
    save_matrix(dir / "A.csv", m.A);
    save_matrix(dir / "B.csv", m.B);
    save_matrix(dir / "C.csv", m.C);
}

Model load_model(const fs::path& dir) {
    Model m{load_matrix(dir / "A.csv"), load_matrix(dir / "B.csv"), load_matrix(dir / "C.csv")};
    m.validate();
    return m;
}

nlohmann::json to_json(const BoundTerms& t) {
    return {{"sigma_w_sq", t.sigma_w_sq}, {"sigma_e_sq", t.sigma_e_sq}, {"K", t.K},
            {"Xi", t.Xi},                 {"beta", t.beta},             {"rho", t.rho},
            {"phi", t.phi},               {"delta", t.delta},           {"L", t.L}};
}

nlohmann::json to_json(const PECertificate& c) {
    return {{"lambda_min", c.lambda_min},
            {"threshold", c.threshold},
            {"passed", c.passed},
            {"regime", std::string(to_string(c.regime))},
            {"required_T", c.required_T},
            {"required_samples", c.required_samples},
            {"meets_requirement", c.meets_requirement},
            {"gamma1", c.gamma1},
            {"gamma2", c.gamma2},
            {"delta", c.delta}};
}

nlohmann::json estimate_record(const EstimateReport& rep, const std::optional<EstimateTruth>& truth) {
    nlohmann::json j{{"lambda_min", rep.lambda_min},
                     {"residual_norm", rep.residual_norm},
                     {"solver_mode", std::string(to_string(rep.solver_mode))}};
    if (truth) {
        j["err_fro"] = truth->err_fro;
        j["err_ellipsoidal"] = truth->err_ellipsoidal;
        j["bound_value"] = truth->bound_value;
        j["bound_terms"] = to_json(truth->terms);
    } else {
        j["err_fro"] = nullptr;
        j["err_ellipsoidal"] = nullptr;
        j["bound_value"] = nullptr;
        j["bound_terms"] = nlohmann::json::object();
    }
    return j;
}

nlohmann::json realization_record(const Realization<double>& r, std::optional<double> sigma_min_ref,
                                  std::optional<bool> robustness_ok) {
    nlohmann::json j{{"n", r.n()},
                     {"p", r.p()},
                     {"L", r.hankel.L},
                     {"sigma_min_L", sigma_min_ref.value_or(r.hankel.sigma_min_L)},
                     {"sigma_min_L_hat", r.hankel.sigma_min_L}};
    j["robustness_ok"] = robustness_ok ? nlohmann::json(*robustness_ok) : nlohmann::json(nullptr);
    return j;
}

void save_json(const fs::path& path, const nlohmann::json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace bsid
