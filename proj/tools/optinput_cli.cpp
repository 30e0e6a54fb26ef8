// optinput: command-line front end.
//
//   optinput design   --kernel k.json --sigma2 1 --n 4 --N 16 --energy 1 --criterion D --out sol.json
//   optinput estimate --data rec.json --n 20 [--family TC] --out est.json
//   optinput verify   [--claims ridge,impulse_optimal]
//   optinput mc       --config mc.json
//   optinput basis    --N 8 --n 3 [--energy 1] --out basis.json
//
// Exit codes: 0 ok, 1 input error, 2 solver budget exhausted, 3 verification failure.

#include <algorithm>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "optinput/optinput.hpp"

namespace {

using namespace optinput;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;
constexpr int kVerifyFailed = 3;

void emit(const json& j, const std::string& out)
{
    const std::string text = j.dump(2) + "\n";
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        write_text(out, text);
    }
}

struct DesignArgs {
    std::string kernel;
    double sigma2 = 0.0;
    int n = 0;
    int N = 0;
    double energy = 0.0;
    std::string criterion;
    std::string out;
    std::string signs = "default";
    std::uint64_t seed = 0;
    double tol = 1e-8;
    int max_iter = 5000;
};

int cmd_design(const DesignArgs& a)
{
    json kj = read_json_file(a.kernel);
    if (!kj.contains("n")) {
        kj["n"] = a.n;
    }
    DesignProblem p{kernel_from_json(kj), a.sigma2, a.n, a.N, a.energy, criterion_from_string(a.criterion)};
    SolverOptions opts;
    opts.tol = a.tol;
    opts.max_iter = a.max_iter;
    if (a.signs == "random") {
        opts.signs = SignPattern::random(a.seed);
    } else if (a.signs != "default") {
        throw ConfigError("--signs must be 'default' or 'random'");
    }
    const DesignSolution sol = solve(p, opts);
    emit(to_json(sol), a.out);
    if (!sol.certificate.converged) {
        std::cerr << "warning: iteration budget exhausted (gap " << sol.certificate.gap
                  << "); best iterate written\n";
        return kNotConverged;
    }
    return kOk;
}

struct EstimateArgs {
    std::string data;
    int n = 0;
    std::string family = "TC";
    std::string out;
};

int cmd_estimate(const EstimateArgs& a)
{
    const DataRecord rec = data_record_from_json(read_json_file(a.data));
    const Eigen::Index N = rec.input.size();
    if (a.n < 1 || a.n > N) {
        throw OrderTooLarge("--n must be in [1, N]");
    }
    // a record that carries its noise variance is taken at its word
    const double sigma2 = rec.sigma2 ? *rec.sigma2
                                     : estimate_noise_variance(rec.y, rec.input.values, default_noise_order(N, a.n));
    const KernelSpec k =
        fit_hyperparameters(rec.y, rec.input.values, a.n, sigma2, kernel_family_from_string(a.family));
    const FirEstimate est = rls_estimate(rec, build_kernel(k), sigma2);
    emit({{"sigma2_hat", sigma2}, {"kernel_spec", to_json(k)}, {"theta_rls", vector_to_json(est.theta)}}, a.out);
    return kOk;
}

std::vector<std::string> split_claims(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

int cmd_verify(const std::string& claims_arg)
{
    const auto& known = claim_names();
    std::vector<std::string> claims = claims_arg.empty() ? known : split_claims(claims_arg);
    for (const auto& c : claims) {
        if (std::find(known.begin(), known.end(), c) == known.end()) {
            throw ConfigError("unknown claim '" + c + "'");
        }
    }
    bool all = true;
    for (const auto& c : claims) {
        const AnalyticVerdict v = run_claim(c);
        all = all && v.holds;
        std::cout << json{{"claim_id", v.claim_id}, {"holds", v.holds}, {"witness", v.witness}, {"detail", v.detail}}
                         .dump()
                  << "\n";
    }
    std::cout << json{{"summary", all ? "all claims hold" : "some claims failed"}, {"count", claims.size()}}.dump()
              << "\n";
    return all ? kOk : kVerifyFailed;
}

int cmd_mc(const std::string& config)
{
    const MonteCarloConfig cfg = monte_carlo_config_from_json(read_json_file(config));
    const MonteCarloResult res = run_monte_carlo(cfg);
    write_monte_carlo_outputs(cfg, res);
    for (const auto& m : res.failure_messages) {
        std::cerr << "failed: " << m << "\n";
    }
    std::cout << summary_json(res).dump(2) << "\n";
    return kOk;
}

int cmd_basis(int N, int n, double energy, const std::string& out)
{
    if (N < 1 || n < 1 || N < n) {
        throw OrderTooLarge("basis needs N >= n >= 1");
    }
    const Matrix w = build_W(N);
    const Matrix v = vertices(N, n, energy);
    const double ortho = (w.transpose() * w - Matrix::Identity(N, N)).cwiseAbs().maxCoeff();
    emit({{"N", N},
          {"n", n},
          {"energy", energy},
          {"W", matrix_to_json(w)},
          {"S", matrix_to_json(build_S(N, n))},
          {"vertices", matrix_to_json(v.transpose())},
          {"orthogonality_error", ortho}},
         out);
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Power-constrained optimal input design for kernel-regularized FIR identification"};
    app.require_subcommand(1, 1);

    DesignArgs da;
    auto* design = app.add_subcommand("design", "compute an optimal input for a kernel and criterion");
    design->add_option("--kernel", da.kernel, "kernel JSON file")->required();
    design->add_option("--sigma2", da.sigma2, "noise variance")->required();
    design->add_option("--n", da.n, "FIR order")->required();
    design->add_option("--N", da.N, "input length")->required();
    design->add_option("--energy", da.energy, "input energy u'u")->required();
    design->add_option("--criterion", da.criterion, "D, A or E")->required();
    design->add_option("--out", da.out, "output file (default stdout)");
    design->add_option("--signs", da.signs, "sign pattern for input recovery: default|random");
    design->add_option("--seed", da.seed, "seed for --signs random");
    design->add_option("--tol", da.tol, "relative duality-gap tolerance");
    design->add_option("--max-iter", da.max_iter, "iteration budget");

    EstimateArgs ea;
    auto* estimate = app.add_subcommand("estimate", "noise variance, EB hyperparameters and RLS estimate");
    estimate->add_option("--data", ea.data, "data record JSON")->required();
    estimate->add_option("--n", ea.n, "FIR order")->required();
    estimate->add_option("--family", ea.family, "TC, DC, Ridge or DI");
    estimate->add_option("--out", ea.out, "output file (default stdout)");

    std::string claims;
    auto* verify = app.add_subcommand("verify", "run the analytic optimality checks");
    verify->add_option("--claims", claims, "comma-separated claim names (default: all)");

    std::string config;
    auto* mc = app.add_subcommand("mc", "Monte Carlo identification benchmark");
    mc->add_option("--config", config, "config JSON")->required();

    int bN = 0;
    int bn = 0;
    double benergy = 1.0;
    std::string bout;
    auto* basis = app.add_subcommand("basis", "dump the trigonometric basis W, S and the polytope vertices");
    basis->add_option("--N", bN, "input length")->required();
    basis->add_option("--n", bn, "FIR order")->required();
    basis->add_option("--energy", benergy, "vertex scale");
    basis->add_option("--out", bout, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return kInputError;
    }

    try {
        if (*design) {
            return cmd_design(da);
        }
        if (*estimate) {
            return cmd_estimate(ea);
        }
        if (*verify) {
            return cmd_verify(claims);
        }
        if (*mc) {
            return cmd_mc(config);
        }
        if (*basis) {
            return cmd_basis(bN, bn, benergy, bout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
