// sdae: validate index-1 SDAE models, simulate trajectories and run
// strong-convergence studies of the semi-implicit tamed scheme.
//
// Exit codes: 0 success, 1 validation failure, 2 usage/config error,
// 3 numerical divergence or breakdown.

#include "sdae/convergence.hpp"
#include "sdae/format.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kUsage = 2;
constexpr int kDiverged = 3;

struct ValidateArgs {
    std::string model;
    int samples = 1000;
    std::uint64_t seed = 1;
};

struct SimulateArgs {
    std::string model;
    std::string scheme = "direct-tamed";
    long steps = 256;
    std::uint64_t seed = 42;
    std::string out;
    std::string dump_noise;
};

struct ConvergeArgs {
    std::string model = "paper-example";
    std::string scheme = "direct-tamed";
    long nref = 1L << 14;
    std::vector<long> nlist = {64, 128, 256, 512, 1024, 2048};
    int paths = 128;
    double p = 2.0;
    std::uint64_t seed = 42;
    std::string out;
    std::string svg;
    int workers = 0;
};

std::string join(const std::vector<long>& values)
{
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + std::to_string(values[i]);
    return s;
}

std::string vector_text(const sdae::Vector& x)
{
    std::string s = "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? ", " : "") + sdae::format_double(x(i));
    return s + ")";
}

int run_validate(const ValidateArgs& args)
{
    std::cout << "# sdae validate --model " << args.model << " --samples " << args.samples << " --seed "
              << args.seed << '\n';
    const sdae::SdaeProblem problem = sdae::make_model(args.model);
    const sdae::ValidationReport r = sdae::validate_index1(problem, args.samples, args.seed);

    std::cout << "noise outside constraints (R g = 0): " << (r.index1_noise_ok ? "ok" : "VIOLATED") << '\n'
              << "constraint solvable (A + R B nonsingular): " << (r.constraint_solvable_ok ? "ok" : "VIOLATED")
              << '\n'
              << "probed one-sided Lipschitz constant: " << sdae::format_double(r.probed_one_sided_constant) << '\n'
              << "probed monotone-condition constant: " << sdae::format_double(r.probed_monotone_constant) << '\n'
              << "samples: " << r.samples_used << '\n';
    if (r.worst_violation > 0) {
        std::cout << "worst violation: " << sdae::format_double(r.worst_violation) << " [" << r.worst_kind
                  << "] at t=" << sdae::format_double(r.worst_t) << " x=" << vector_text(r.worst_x) << '\n';
    }
    std::cout << "probes falsify only: no violation found does not certify the assumptions\n";
    std::cout << (r.index1_ok() ? "index-1: PASS" : "index-1: FAIL") << '\n';
    return r.index1_ok() ? kOk : kValidationFailed;
}

int run_simulate(const SimulateArgs& args)
{
    std::cout << "# sdae simulate --model " << args.model << " --scheme " << args.scheme << " --steps "
              << args.steps << " --seed " << args.seed << " --out " << args.out
              << (args.dump_noise.empty() ? "" : " --dump-noise " + args.dump_noise) << '\n';
    const sdae::SdaeProblem problem = sdae::make_model(args.model);
    const sdae::SchemeKind kind = sdae::parse_scheme(args.scheme);
    if (!sdae::is_power_of_two(args.steps)) {
        std::cerr << "error: --steps must be a power of two\n";
        return kUsage;
    }

    std::ofstream out(args.out, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << args.out << '\n';
        return kUsage;
    }
    const sdae::WienerGrid w = sdae::generate(args.seed, 0, problem.m, args.steps, problem.T);
    if (!args.dump_noise.empty()) {
        std::ofstream noise(args.dump_noise, std::ios::binary);
        if (!noise) {
            std::cerr << "error: cannot write " << args.dump_noise << '\n';
            return kUsage;
        }
        sdae::write_csv(noise, w);
    }

    const sdae::Trajectory traj = sdae::simulate(problem, kind, w);
    sdae::write_csv(out, traj);
    if (traj.diverged) {
        std::cout << "diverged at step " << traj.diverged_step << "; wrote " << traj.states.rows() << " rows\n";
        return kDiverged;
    }
    std::cout << "X_N = " << vector_text(traj.state(traj.N)) << '\n';
    return kOk;
}

int run_converge(const ConvergeArgs& args, const char* command)
{
    sdae::ConvergenceConfig cfg;
    cfg.model = args.model;
    cfg.scheme = sdae::parse_scheme(args.scheme);
    cfg.N_ref = args.nref;
    cfg.N_list = args.nlist;
    cfg.M_paths = args.paths;
    cfg.p = args.p;
    cfg.seed = args.seed;
    cfg.workers = args.workers;

    std::cout << "# sdae " << command << " --model " << cfg.model << " --scheme " << args.scheme << " --nref "
              << cfg.N_ref << " --nlist " << join(cfg.N_list) << " --paths " << cfg.M_paths << " --p "
              << sdae::format_double(cfg.p) << " --seed " << cfg.seed
              << (args.out.empty() ? "" : " --out " + args.out) << (args.svg.empty() ? "" : " --svg " + args.svg)
              << '\n';
    sdae::validate(cfg);
    const sdae::SdaeProblem problem = sdae::make_model(cfg.model);

    std::ofstream csv;
    if (!args.out.empty()) {
        csv.open(args.out, std::ios::binary);
        if (!csv) {
            std::cerr << "error: cannot write " << args.out << '\n';
            return kUsage;
        }
    }
    std::ofstream svg;
    if (!args.svg.empty()) {
        svg.open(args.svg, std::ios::binary);
        if (!svg) {
            std::cerr << "error: cannot write " << args.svg << '\n';
            return kUsage;
        }
    }

    const sdae::ConvergenceReport report = sdae::strong_error(problem, cfg);
    if (csv.is_open())
        sdae::write_csv(csv, report);
    else
        sdae::write_csv(std::cout, report);
    if (svg.is_open()) sdae::write_svg(svg, report);
    std::cout << "slope = " << sdae::format_double(report.fit.slope) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Index-1 SDAE solver: semi-implicit tamed scheme and strong-convergence harness"};
    app.require_subcommand(1);

    const auto models = sdae::registered_models();
    std::string model_list;
    for (const auto& m : models) model_list += (model_list.empty() ? "" : ", ") + m;

    ValidateArgs validate;
    auto* validate_cmd = app.add_subcommand("validate", "Check the index-1 structure and probe the assumptions");
    validate_cmd->add_option("--model", validate.model, "Registered model: " + model_list)->required();
    validate_cmd->add_option("--samples", validate.samples, "Number of probe samples")->check(CLI::PositiveNumber);
    validate_cmd->add_option("--seed", validate.seed, "Probe seed");

    SimulateArgs simulate;
    auto* simulate_cmd = app.add_subcommand("simulate", "Run one trajectory and write it as CSV");
    simulate_cmd->add_option("--model", simulate.model, "Registered model: " + model_list)->required();
    simulate_cmd->add_option("--scheme", simulate.scheme, "direct-tamed | dual-tamed | direct-untamed");
    simulate_cmd->add_option("--steps", simulate.steps, "Number of steps (power of two)");
    simulate_cmd->add_option("--seed", simulate.seed, "Brownian path seed");
    simulate_cmd->add_option("--out", simulate.out, "Trajectory CSV")->required();
    simulate_cmd->add_option("--dump-noise", simulate.dump_noise, "Also write the Brownian increments as CSV");

    ConvergeArgs converge;
    auto* converge_cmd = app.add_subcommand("converge", "Monte Carlo strong-error study with slope fit");
    converge_cmd->add_option("--model", converge.model, "Registered model: " + model_list);
    converge_cmd->add_option("--scheme", converge.scheme, "direct-tamed | dual-tamed | direct-untamed");
    converge_cmd->add_option("--nref", converge.nref, "Reference steps (power of two)");
    converge_cmd->add_option("--nlist", converge.nlist, "Comma-separated coarse step counts")->delimiter(',');
    converge_cmd->add_option("--paths", converge.paths, "Monte Carlo paths");
    converge_cmd->add_option("--p", converge.p, "Error exponent p >= 1");
    converge_cmd->add_option("--seed", converge.seed, "Master seed; path k uses stream (seed, k)");
    converge_cmd->add_option("--out", converge.out, "Report CSV (stdout when omitted)");
    converge_cmd->add_option("--svg", converge.svg, "Log-log plot");
    converge_cmd->add_option("--workers", converge.workers, "Worker threads (0 = all cores)");

    ConvergeArgs demo;
    auto* demo_cmd = app.add_subcommand(
        "demo-paper", "Strong-order experiment on paper-example: nref 2^14, nlist 2^6..2^11, 128 paths, p = 2");
    demo_cmd->add_option("--seed", demo.seed, "Master seed");
    demo_cmd->add_option("--out", demo.out, "Report CSV (stdout when omitted)");
    demo_cmd->add_option("--svg", demo.svg, "Log-log plot");
    demo_cmd->add_option("--workers", demo.workers, "Worker threads (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*validate_cmd) return run_validate(validate);
        if (*simulate_cmd) return run_simulate(simulate);
        if (*converge_cmd) return run_converge(converge, "converge");
        if (*demo_cmd) return run_converge(demo, "demo-paper");
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const sdae::ConfigError& e) {
        std::cerr << "error: invalid configuration: " << e.what() << '\n';
        return kUsage;
    } catch (const sdae::SingularSystem& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kDiverged;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
