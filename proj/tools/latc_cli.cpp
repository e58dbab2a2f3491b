// Command-line front end: impute, sweep, eval and synth subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "latc/bench.hpp"

namespace fs = std::filesystem;
using namespace latc;

namespace {

enum ExitCode { ok = 0, usage_error = 1, data_error = 2, solver_failure = 3 };

int parse_int(const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw DomainError("not an integer: '" + s + "'");
    return v;
}

// "1..6" or "1,2,4".
std::vector<int> parse_lags(const std::string& text) {
    std::vector<int> out;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const int lo = parse_int(text.substr(0, dots)), hi = parse_int(text.substr(dots + 2));
        if (lo > hi) throw DomainError("empty lag range '" + text + "'");
        for (int h = lo; h <= hi; ++h) out.push_back(h);
        return out;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        out.push_back(parse_int(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct CommonOptions {
    std::string data;
    std::string pattern = "rm";
    double rate = 0.3;
    Index window = 1;
    std::string model = "latc";
    double rho = 1e-4;
    double rho_max = 0;
    std::string lags = "1..6";
    Index steps_per_day = 0;
    Index days = 0;
    std::uint64_t seed = 0;
    std::int64_t mask_seed = -1;
    int inner_iters = 3;
    int max_iters = 100;
    double tol = 1e-4;
    std::string out;
};

void add_common(CLI::App& cmd, CommonOptions& o) {
    cmd.add_option("--data", o.data, "Input matrix (.csv, or .bin/.latc binary); rows = sensors")->required();
    cmd.add_option("--pattern", o.pattern, "Held-out pattern: rm, nm or bm")->capture_default_str();
    cmd.add_option("--rate", o.rate, "Held-out fraction")->capture_default_str();
    cmd.add_option("--window", o.window, "Blackout window length in time steps")->capture_default_str();
    cmd.add_option("--model", o.model, "latc, lamc or lrtc-tnn")->capture_default_str();
    cmd.add_option("--rho", o.rho, "Initial ADMM rate")->capture_default_str();
    cmd.add_option("--rho-max", o.rho_max, "Cap on the ADMM rate (default 1e5 * rho)");
    cmd.add_option("--lags", o.lags, "Lag set, e.g. 1..6 or 1,2,4")->capture_default_str();
    cmd.add_option("--I", o.steps_per_day, "Time steps per day")->required();
    cmd.add_option("--J", o.days, "Number of days (default T / I)");
    cmd.add_option("--seed", o.seed, "Seed for the initial AR coefficients and the mask")->capture_default_str();
    cmd.add_option("--mask-seed", o.mask_seed, "Separate seed for the held-out mask");
    cmd.add_option("--inner-iters", o.inner_iters, "ADMM steps per outer iteration")->capture_default_str();
    cmd.add_option("--max-iters", o.max_iters, "Maximum outer iterations")->capture_default_str();
    cmd.add_option("--tol", o.tol, "Relative-change stopping tolerance")->capture_default_str();
    cmd.add_option("--out", o.out, "Output directory")->required();
}

bench::MaskSpec mask_spec(const CommonOptions& o) {
    bench::MaskSpec spec;
    spec.pattern = bench::parse_pattern(o.pattern);
    spec.rate = o.rate;
    spec.window = o.window;
    spec.seed = o.mask_seed >= 0 ? static_cast<std::uint64_t>(o.mask_seed) : o.seed;
    return spec;
}

SolverConfig<double> solver_config(const CommonOptions& o, const bench::LoadedMatrix& data) {
    SolverConfig<double> cfg;
    cfg.rho0 = o.rho;
    if (o.rho_max > 0) cfg.rho_max = o.rho_max;
    cfg.lags = parse_lags(o.lags);
    cfg.inner_iters = o.inner_iters;
    cfg.max_outer_iters = o.max_iters;
    cfg.tol = o.tol;
    cfg.seed = o.seed;
    const Index t = data.values.cols();
    if (o.steps_per_day <= 0) throw DomainError("--I must be positive");
    const Index days = o.days > 0 ? o.days : t / o.steps_per_day;
    if (o.steps_per_day * days != t)
        throw DomainError("--I " + std::to_string(o.steps_per_day) + " and --J " + std::to_string(days) +
                          " do not tile " + std::to_string(t) + " time steps");
    cfg.dims = Dims3{data.values.rows(), o.steps_per_day, days};
    return cfg;
}

void print_report(const bench::EvalReport& r) {
    std::cout << "mape=" << bench::format_number(r.mape) << "\nrmse=" << bench::format_number(r.rmse)
              << "\nn_eval=" << r.n_eval << "\nexcluded_zero=" << r.excluded_zero << '\n';
}

template <typename F>
int guarded(F&& body) {
    try {
        body();
        return ok;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage_error;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const NumericalError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return solver_failure;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return solver_failure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank autoregressive tensor completion for spatiotemporal series"};
    app.require_subcommand(1);

    CommonOptions impute_opts;
    double impute_c = 1.0;
    Index impute_r = 1;
    auto* impute_cmd = app.add_subcommand("impute", "Hold out entries, impute them and report MAPE/RMSE");
    add_common(*impute_cmd, impute_opts);
    impute_cmd->add_option("--c", impute_c, "Trade-off coefficient, lambda = c * rho")->capture_default_str();
    impute_cmd->add_option("--r", impute_r, "Truncation")->capture_default_str();

    CommonOptions sweep_opts;
    std::vector<double> sweep_c{0.1, 0.2, 1, 5, 10};
    std::vector<Index> sweep_r{5, 10, 15, 20, 25, 30};
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a (c, r) grid; one output directory per cell plus grid.txt");
    add_common(*sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--c", sweep_c, "Comma-separated c values")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--r", sweep_r, "Comma-separated truncations")->delimiter(',')->capture_default_str();

    std::string truth_path, imputed_path, mask_path;
    auto* eval_cmd = app.add_subcommand("eval", "Compare two matrices on the cells marked 1 in a mask file");
    eval_cmd->add_option("--truth", truth_path, "Ground-truth matrix")->required();
    eval_cmd->add_option("--imputed", imputed_path, "Imputed matrix")->required();
    eval_cmd->add_option("--mask", mask_path, "0/1 CSV; 1 marks evaluated cells")->required();

    Index synth_m = 30, synth_i = 24, synth_j = 14, synth_rank = 3;
    std::uint64_t synth_seed = 0;
    bool synth_smooth = false;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic low-rank M x (I J) matrix");
    synth_cmd->add_option("--M", synth_m, "Sensors")->capture_default_str();
    synth_cmd->add_option("--I", synth_i, "Time steps per day")->capture_default_str();
    synth_cmd->add_option("--J", synth_j, "Days")->capture_default_str();
    synth_cmd->add_option("--rank", synth_rank, "CP rank")->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
    synth_cmd->add_flag("--smooth", synth_smooth, "Random-walk time-of-day factors");
    synth_cmd->add_option("--out", synth_out, "Output file (.csv or .bin)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage_error;
    }

    if (*impute_cmd) {
        return guarded([&] {
            const auto data = bench::load_matrix(impute_opts.data);
            auto cfg = solver_config(impute_opts, data);
            cfg.c = impute_c;
            cfg.r = impute_r;
            const auto res = bench::run_experiment(data, mask_spec(impute_opts), cfg,
                                                   bench::parse_model(impute_opts.model), impute_opts.out);
            print_report(res.report);
            std::cout << "iterations=" << res.imputation.iterations
                      << "\nconverged=" << (res.imputation.converged ? "true" : "false") << '\n';
        });
    }
    if (*sweep_cmd) {
        return guarded([&] {
            const auto data = bench::load_matrix(sweep_opts.data);
            const auto cfg = solver_config(sweep_opts, data);
            const auto cells = bench::run_sweep(sweep_opts.data, mask_spec(sweep_opts), cfg,
                                                bench::parse_model(sweep_opts.model), sweep_c, sweep_r, sweep_opts.out);
            for (const auto& cell : cells)
                std::cout << "c=" << bench::format_number(cell.c) << " r=" << cell.r
                          << " mape=" << bench::format_number(cell.report.mape)
                          << " rmse=" << bench::format_number(cell.report.rmse) << '\n';
        });
    }
    if (*eval_cmd) {
        return guarded([&] {
            const auto truth = bench::load_matrix(truth_path);
            const auto imputed = bench::load_matrix(imputed_path);
            print_report(bench::evaluate(truth.values, imputed.values, bench::load_mask(mask_path)));
        });
    }
    if (*synth_cmd) {
        return guarded([&] {
            const Dims3 dims{synth_m, synth_i, synth_j};
            bench::save_matrix(synth_out, bench::synthetic_low_rank(dims, synth_rank, synth_seed, synth_smooth),
                               bench::format_for(synth_out));
        });
    }
    return usage_error;
}
