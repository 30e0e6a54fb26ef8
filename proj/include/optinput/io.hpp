#ifndef OPTINPUT_IO_HPP
#define OPTINPUT_IO_HPP

// JSON (nlohmann) encoding of the library types, plus the Monte Carlo writers.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "optinput/design_solver.hpp"
#include "optinput/errors.hpp"
#include "optinput/estimator.hpp"
#include "optinput/experiment.hpp"
#include "optinput/kernels.hpp"

namespace optinput {

using json = nlohmann::json;

namespace detail {

template <class F>
auto config_guard(F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    }
}

} // namespace detail

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j)
{
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline json matrix_to_json(const Matrix& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(vector_to_json(m.row(i).transpose()));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j)
{
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = nr ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Matrix m(nr, nc);
    for (Eigen::Index i = 0; i < nr; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != nc) {
            throw ConfigError("ragged matrix");
        }
        for (Eigen::Index k = 0; k < nc; ++k) {
            m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        }
    }
    return m;
}

// ---- KernelSpec ------------------------------------------------------------

inline json to_json(const KernelSpec& k)
{
    json params = json::object();
    switch (k.family) {
    case KernelFamily::Ridge:
        params["c"] = k.c;
        break;
    case KernelFamily::DI:
    case KernelFamily::TC:
        params["c"] = k.c;
        params["lambda"] = k.lambda;
        break;
    case KernelFamily::DC:
        params["c"] = k.c;
        params["lambda"] = k.lambda;
        params["rho"] = k.rho;
        break;
    case KernelFamily::Diagonal:
        params["lambdas"] = k.diagonal;
        break;
    case KernelFamily::CustomInverse:
        params["p_inverse"] = matrix_to_json(k.custom_inverse->matrix());
        break;
    }
    return {{"family", std::string(to_string(k.family))}, {"n", k.n}, {"params", params}};
}

inline KernelSpec kernel_from_json(const json& j)
{
    return detail::config_guard([&] {
        const KernelFamily fam = kernel_family_from_string(j.at("family").get<std::string>());
        const json& p = j.at("params");
        const int n = j.value("n", 0);
        KernelSpec k;
        switch (fam) {
        case KernelFamily::Ridge:
            k = KernelSpec::ridge(n, p.at("c").get<double>());
            break;
        case KernelFamily::DI:
            k = KernelSpec::di(n, p.at("c").get<double>(), p.at("lambda").get<double>());
            break;
        case KernelFamily::TC:
            k = KernelSpec::tc(n, p.at("c").get<double>(), p.at("lambda").get<double>());
            break;
        case KernelFamily::DC:
            k = KernelSpec::dc(n, p.at("c").get<double>(), p.at("lambda").get<double>(), p.at("rho").get<double>());
            break;
        case KernelFamily::Diagonal:
            k = KernelSpec::diag(p.at("lambdas").get<std::vector<double>>());
            break;
        case KernelFamily::CustomInverse:
            k = KernelSpec::custom_inverse_of(SymMatrix(matrix_from_json(p.at("p_inverse"))));
            break;
        }
        if (j.contains("n") && k.n != n) {
            throw ConfigError("kernel 'n' disagrees with its parameters");
        }
        validate(k);
        return k;
    });
}

// ---- DataRecord ------------------------------------------------------------

inline json to_json(const DataRecord& r)
{
    json j{{"u", vector_to_json(r.input.values)}, {"y", vector_to_json(r.y)}, {"energy", r.input.energy}};
    j["sigma2"] = r.sigma2 ? json(*r.sigma2) : json(nullptr);
    return j;
}

inline DataRecord data_record_from_json(const json& j)
{
    return detail::config_guard([&] {
        DataRecord r;
        r.input.values = vector_from_json(j.at("u"));
        r.input.energy = j.contains("energy") ? j.at("energy").get<double>() : r.input.values.squaredNorm();
        r.input.power_constrained = j.contains("energy");
        r.y = vector_from_json(j.at("y"));
        if (j.contains("sigma2") && !j.at("sigma2").is_null()) {
            r.sigma2 = j.at("sigma2").get<double>();
        }
        r.validate();
        return r;
    });
}

// ---- DesignSolution --------------------------------------------------------

inline json to_json(const DesignSolution& s)
{
    return {{"r", vector_to_json(s.r)},
            {"a", vector_to_json(s.a)},
            {"u", vector_to_json(s.u.values)},
            {"value", s.value},
            {"criterion", std::string(to_string(s.criterion))},
            {"energy", s.energy},
            {"certificate",
             {{"gap", s.certificate.gap},
              {"iterations", s.certificate.iterations},
              {"converged", s.certificate.converged}}}};
}

inline DesignSolution design_solution_from_json(const json& j)
{
    return detail::config_guard([&] {
        DesignSolution s;
        s.r = vector_from_json(j.at("r"));
        s.a = vector_from_json(j.at("a"));
        s.energy = j.at("energy").get<double>();
        s.u = {vector_from_json(j.at("u")), s.energy, true};
        s.value = j.at("value").get<double>();
        s.criterion = criterion_from_string(j.at("criterion").get<std::string>());
        const json& c = j.at("certificate");
        s.certificate = {c.at("gap").get<double>(), c.at("iterations").get<int>(), c.at("converged").get<bool>()};
        return s;
    });
}

// ---- Monte Carlo -----------------------------------------------------------

inline MonteCarloConfig monte_carlo_config_from_json(const json& j)
{
    return detail::config_guard([&] {
        MonteCarloConfig c;
        c.systems = j.value("systems", c.systems);
        c.n = j.value("n", c.n);
        c.N = j.value("N", c.N);
        c.energy = j.value("energy", c.energy);
        if (j.contains("snr_range")) {
            const auto rng = j.at("snr_range").get<std::vector<double>>();
            if (rng.size() != 2) {
                throw ConfigError("snr_range must be [lo, hi]");
            }
            c.snr_min = rng[0];
            c.snr_max = rng[1];
        }
        if (j.contains("kernel_family")) {
            c.kernel_family = kernel_family_from_string(j.at("kernel_family").get<std::string>());
        }
        if (j.contains("criteria")) {
            c.criteria.clear();
            for (const auto& s : j.at("criteria")) {
                c.criteria.push_back(criterion_from_string(s.get<std::string>()));
            }
        }
        c.master_seed = j.value("master_seed", c.master_seed);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.order_true = j.value("order_true", c.order_true);
        c.threads = j.value("threads", c.threads);
        c.validate();
        return c;
    });
}

inline json to_json(const MonteCarloConfig& c)
{
    json crit = json::array();
    for (Criterion x : c.criteria) {
        crit.push_back(std::string(to_string(x)));
    }
    return {{"systems", c.systems},
            {"n", c.n},
            {"N", c.N},
            {"energy", c.energy},
            {"snr_range", {c.snr_min, c.snr_max}},
            {"kernel_family", std::string(to_string(c.kernel_family))},
            {"criteria", crit},
            {"master_seed", c.master_seed},
            {"output_dir", c.output_dir},
            {"order_true", c.order_true},
            {"threads", c.threads}};
}

inline std::string fits_csv(const std::vector<FitReport>& reports)
{
    std::ostringstream os;
    os << "system_id,policy,fit,snr,seed\n";
    os << std::setprecision(17);
    for (const auto& r : reports) {
        os << r.system_id << ',' << to_string(r.policy) << ',' << r.fit << ',' << r.snr << ',' << r.seed << '\n';
    }
    return os.str();
}

inline json summary_json(const MonteCarloResult& res)
{
    json pol = json::object();
    for (const auto& [k, s] : res.summary) {
        pol[k] = {{"mean", s.mean}, {"median", s.median}, {"q1", s.q1}, {"q3", s.q3}, {"count", s.count}};
    }
    return {{"policies", pol}, {"failures", res.failures}, {"failure_messages", res.failure_messages}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << text;
}

inline json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// fits.csv and summary.json under cfg.output_dir.
inline void write_monte_carlo_outputs(const MonteCarloConfig& cfg, const MonteCarloResult& res)
{
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    write_text(dir / "fits.csv", fits_csv(res.reports));
    write_text(dir / "summary.json", summary_json(res).dump(2) + "\n");
}

} // namespace optinput

#endif // OPTINPUT_IO_HPP
