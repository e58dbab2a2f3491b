#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "latc/solver.hpp"
#include "latc/tensor_core.hpp"

namespace latc::bench {

enum class MissingPattern { random, nonrandom, blackout };

/// How held-out entries are drawn.
///  - random: each observed entry is dropped independently with probability `rate`.
///  - nonrandom: each (sensor, day) fiber is dropped whole with probability `rate`.
///  - blackout: disjoint, window-aligned runs of `window` time steps are dropped
///    across all sensors until round(rate * T / window) windows are gone.
struct MaskSpec {
    MissingPattern pattern = MissingPattern::random;
    double rate = 0.3;
    Index window = 1;
    std::uint64_t seed = 0;
};

struct EvalReport {
    double mape = 0;  ///< percent
    double rmse = 0;
    Index n_eval = 0;
    Index excluded_zero = 0;  ///< entries with |y| <= zero_threshold left out of MAPE
};

enum class DataFormat { csv, binary };
enum class Model { latc, lamc, lrtc_tnn };

/// |y| at or below this is excluded from MAPE.
inline constexpr double zero_threshold = 1e-6;

struct LoadedMatrix {
    MatrixXd values;
    ObservationMask mask;
};

MissingPattern parse_pattern(std::string_view name);
std::string_view to_string(MissingPattern p);
Model parse_model(std::string_view name);
std::string_view to_string(Model m);
DataFormat format_for(const std::filesystem::path& path);

/// Reads a sensors x time-steps matrix. Empty cells and NaN tokens (CSV) or
/// NaN values (binary) mark missing entries; they load as 0 with mask false.
LoadedMatrix load_matrix(const std::filesystem::path& path, DataFormat format);
LoadedMatrix load_matrix(const std::filesystem::path& path);

/// Writes `values`, with unobserved cells as empty CSV cells / NaN.
void save_matrix(const std::filesystem::path& path, const MatrixXd& values, const ObservationMask& mask,
                 DataFormat format);
void save_matrix(const std::filesystem::path& path, const MatrixXd& values, DataFormat format = DataFormat::csv);

/// 0/1 CSV, 1 = true.
ObservationMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const ObservationMask& mask);

void validate(const MaskSpec& spec, Index length);

/// Returns `base` with additional entries turned unobserved per `spec`.
/// Never unmasks; deterministic for a given seed.
ObservationMask generate_mask(const ObservationMask& base, const Dims3& dims, const MaskSpec& spec);

EvalReport evaluate(const MatrixXd& truth, const MatrixXd& imputed, const ObservationMask& eval_mask);

/// Fixed-precision rendering used in every emitted artifact (12 significant digits).
std::string format_number(double v);

ImputationResult<double> run_model(Model model, const MatrixXd& y, const ObservationMask& mask,
                                   const SolverConfig<double>& cfg);

struct ExperimentResult {
    EvalReport report;
    ImputationResult<double> imputation;
    std::vector<std::filesystem::path> artifacts;
};

/// Loads data, holds out entries per `spec`, imputes, evaluates, and writes
/// imputed.csv, eval_mask.csv, metrics.txt and history.txt to `out_dir`.
/// Files written before a failure are removed.
ExperimentResult run_experiment(const std::filesystem::path& data_path, const MaskSpec& spec,
                                const SolverConfig<double>& cfg, Model model, const std::filesystem::path& out_dir);

/// Same as above on in-memory data.
ExperimentResult run_experiment(const LoadedMatrix& data, const MaskSpec& spec, const SolverConfig<double>& cfg,
                                Model model, const std::filesystem::path& out_dir);

struct GridCell {
    double c = 0;
    Index r = 0;
    EvalReport report;
};

/// One experiment per (c, r) cell, each in out_dir/c<c>_r<r>/, plus a grid.txt
/// with one record per cell.
std::vector<GridCell> run_sweep(const std::filesystem::path& data_path, const MaskSpec& spec,
                                const SolverConfig<double>& base, Model model, const std::vector<double>& cs,
                                const std::vector<Index>& rs, const std::filesystem::path& out_dir);

/// Low-rank spatiotemporal test data: a CP tensor of the given rank with
/// Gaussian factors, detensorized to M x (I J). With `smooth_time` the
/// time-of-day factors are Gaussian random walks instead of white noise.
MatrixXd synthetic_low_rank(const Dims3& dims, Index rank, std::uint64_t seed, bool smooth_time = false);

}  // namespace latc::bench
