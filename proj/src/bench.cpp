#include "latc/bench.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace latc::bench {

namespace fs = std::filesystem;

namespace {

constexpr char binary_magic[8] = {'L', 'A', 'T', 'C', 'M', 'A', 'T', '1'};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string where(const fs::path& path, std::size_t line, std::size_t col) {
    return path.string() + ":" + std::to_string(line) + ":" + std::to_string(col);
}

// Reads all non-blank lines as comma-separated cells; rows must agree in length.
std::vector<std::vector<std::string>> read_csv_cells(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        for (auto cell : split_commas(line)) cells.emplace_back(cell);
        if (!rows.empty() && cells.size() != rows.front().size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": ragged row with " +
                            std::to_string(cells.size()) + " cells, expected " + std::to_string(rows.front().size()));
        rows.push_back(std::move(cells));
    }
    if (in.bad()) throw DataError("read error on " + path.string());
    if (rows.empty()) throw DataError(path.string() + ": no data rows");
    return rows;
}

bool is_missing_token(std::string_view cell) {
    if (cell.empty()) return true;
    const std::string l = lower(cell);
    return l == "nan" || l == "+nan" || l == "-nan";
}

LoadedMatrix load_csv(const fs::path& path) {
    const auto rows = read_csv_cells(path);
    const Index m = static_cast<Index>(rows.size());
    const Index t = static_cast<Index>(rows.front().size());
    MatrixXd values = MatrixXd::Zero(m, t);
    BoolArray observed = BoolArray::Constant(m, t, false);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < t; ++j) {
            const std::string& cell = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (is_missing_token(cell)) continue;
            double v = 0;
            const char* first = cell.data();
            const char* last = first + cell.size();
            if (*first == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last)
                throw DataError(where(path, static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1)) +
                                ": not a number: '" + cell + "'");
            if (!std::isfinite(v))
                throw DataError(where(path, static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1)) +
                                ": non-finite value");
            values(i, j) = v;
            observed(i, j) = true;
        }
    }
    return {std::move(values), ObservationMask(std::move(observed))};
}

void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little)
        throw DataError("binary matrix format requires a little-endian host");
}

LoadedMatrix load_binary(const fs::path& path) {
    require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[8];
    std::uint64_t rows = 0, cols = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    if (!in || std::memcmp(magic, binary_magic, sizeof magic) != 0)
        throw DataError(path.string() + ": not a LATCMAT1 binary matrix");
    if (rows == 0 || cols == 0 || rows > (1u << 30) || cols > (1u << 30))
        throw DataError(path.string() + ": implausible matrix extents");
    MatrixXd values(static_cast<Index>(rows), static_cast<Index>(cols));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) throw DataError(path.string() + ": truncated payload");
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after payload");
    BoolArray observed(values.rows(), values.cols());
    for (Index i = 0; i < values.rows(); ++i)
        for (Index j = 0; j < values.cols(); ++j) {
            double& v = values(i, j);
            observed(i, j) = !std::isnan(v);
            if (std::isinf(v)) throw DataError(path.string() + ": infinite value");
            if (!observed(i, j)) v = 0.0;
        }
    return {std::move(values), ObservationMask(std::move(observed))};
}

void check_writable(std::ostream& out, const fs::path& path) {
    if (!out) throw DataError("cannot write " + path.string());
}

std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_lags(const std::vector<int>& lags) {
    std::string out;
    for (std::size_t i = 0; i < lags.size(); ++i) out += (i ? "," : "") + std::to_string(lags[i]);
    return out;
}

// Deletes the tracked files unless released; keeps failed runs from leaving partial output.
class ArtifactGuard {
public:
    void track(fs::path p) { files_.push_back(std::move(p)); }
    const std::vector<fs::path>& files() const { return files_; }
    void release() { released_ = true; }
    ~ArtifactGuard() {
        if (released_) return;
        std::error_code ec;
        for (const auto& f : files_) fs::remove(f, ec);
    }

private:
    std::vector<fs::path> files_;
    bool released_ = false;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    check_writable(out, path);
    out << text;
    out.flush();
    check_writable(out, path);
}

std::string metrics_text(const MaskSpec& spec, const SolverConfig<double>& cfg, Model model, const EvalReport& report,
                         const ImputationResult<double>& res) {
    std::ostringstream os;
    os << "model=" << to_string(model) << '\n'
       << "pattern=" << to_string(spec.pattern) << '\n'
       << "rate=" << format_number(spec.rate) << '\n'
       << "window=" << spec.window << '\n'
       << "mask_seed=" << spec.seed << '\n'
       << "rho0=" << format_number(cfg.rho0) << '\n'
       << "rho_max=" << format_number(cfg.effective_rho_max()) << '\n'
       << "c=" << format_number(cfg.c) << '\n'
       << "r=" << cfg.r << '\n'
       << "lags=" << join_lags(cfg.lags) << '\n'
       << "M=" << cfg.dims.n1 << '\n'
       << "I=" << cfg.dims.n2 << '\n'
       << "J=" << cfg.dims.n3 << '\n'
       << "seed=" << cfg.seed << '\n'
       << "inner_iters=" << cfg.inner_iters << '\n'
       << "max_outer_iters=" << cfg.max_outer_iters << '\n'
       << "tol=" << format_number(cfg.tol) << '\n'
       << "mape=" << format_number(report.mape) << '\n'
       << "rmse=" << format_number(report.rmse) << '\n'
       << "n_eval=" << report.n_eval << '\n'
       << "excluded_zero=" << report.excluded_zero << '\n'
       << "iterations=" << res.iterations << '\n'
       << "converged=" << (res.converged ? "true" : "false") << '\n';
    return os.str();
}

std::string history_text(const ImputationResult<double>& res) {
    std::ostringstream os;
    for (const auto& h : res.history)
        os << "iter=" << h.outer_iter << " rho=" << format_number(h.rho)
           << " primal_residual=" << format_number(h.primal_residual)
           << " relative_change=" << format_number(h.relative_change)
           << " low_rank_norm=" << format_number(h.low_rank_norm)
           << " temporal_variation=" << format_number(h.temporal_variation) << '\n';
    return os.str();
}

}  // namespace

MissingPattern parse_pattern(std::string_view name) {
    const std::string l = lower(name);
    if (l == "rm") return MissingPattern::random;
    if (l == "nm") return MissingPattern::nonrandom;
    if (l == "bm") return MissingPattern::blackout;
    throw DomainError("unknown missing pattern '" + std::string(name) + "' (expected rm, nm or bm)");
}

std::string_view to_string(MissingPattern p) {
    switch (p) {
        case MissingPattern::random: return "rm";
        case MissingPattern::nonrandom: return "nm";
        case MissingPattern::blackout: return "bm";
    }
    return "?";
}

Model parse_model(std::string_view name) {
    const std::string l = lower(name);
    if (l == "latc") return Model::latc;
    if (l == "lamc") return Model::lamc;
    if (l == "lrtc-tnn" || l == "lrtc_tnn") return Model::lrtc_tnn;
    throw DomainError("unknown model '" + std::string(name) + "' (expected latc, lamc or lrtc-tnn)");
}

std::string_view to_string(Model m) {
    switch (m) {
        case Model::latc: return "latc";
        case Model::lamc: return "lamc";
        case Model::lrtc_tnn: return "lrtc-tnn";
    }
    return "?";
}

DataFormat format_for(const fs::path& path) {
    const std::string ext = lower(path.extension().string());
    return (ext == ".bin" || ext == ".latc") ? DataFormat::binary : DataFormat::csv;
}

LoadedMatrix load_matrix(const fs::path& path, DataFormat format) {
    return format == DataFormat::csv ? load_csv(path) : load_binary(path);
}

LoadedMatrix load_matrix(const fs::path& path) { return load_matrix(path, format_for(path)); }

void save_matrix(const fs::path& path, const MatrixXd& values, const ObservationMask& mask, DataFormat format) {
    if (mask.rows() != values.rows() || mask.cols() != values.cols()) throw ShapeError("save_matrix: mask shape mismatch");
    if (format == DataFormat::csv) {
        std::ostringstream os;
        for (Index i = 0; i < values.rows(); ++i) {
            for (Index j = 0; j < values.cols(); ++j) {
                if (j) os << ',';
                if (mask.observed(i, j)) os << format_full(values(i, j));
            }
            os << '\n';
        }
        write_text(path, os.str());
        return;
    }
    require_little_endian();
    std::ofstream out(path, std::ios::binary);
    check_writable(out, path);
    const std::uint64_t rows = static_cast<std::uint64_t>(values.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(values.cols());
    out.write(binary_magic, sizeof binary_magic);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    const MatrixXd payload = mask.array().select(values, std::numeric_limits<double>::quiet_NaN());
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * static_cast<Index>(sizeof(double))));
    out.flush();
    check_writable(out, path);
}

void save_matrix(const fs::path& path, const MatrixXd& values, DataFormat format) {
    save_matrix(path, values, ObservationMask(values.rows(), values.cols(), true), format);
}

ObservationMask load_mask(const fs::path& path) {
    const auto rows = read_csv_cells(path);
    BoolArray out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            const std::string& cell = rows[i][j];
            if (cell != "0" && cell != "1") throw DataError(where(path, i + 1, j + 1) + ": mask cell must be 0 or 1");
            out(static_cast<Index>(i), static_cast<Index>(j)) = cell == "1";
        }
    return ObservationMask(std::move(out));
}

void save_mask(const fs::path& path, const ObservationMask& mask) {
    std::ostringstream os;
    for (Index i = 0; i < mask.rows(); ++i) {
        for (Index j = 0; j < mask.cols(); ++j) os << (j ? "," : "") << (mask.observed(i, j) ? '1' : '0');
        os << '\n';
    }
    write_text(path, os.str());
}

void validate(const MaskSpec& spec, Index length) {
    if (!(spec.rate >= 0.0 && spec.rate <= 1.0)) throw DomainError("missing rate must lie in [0, 1]");
    if (spec.pattern == MissingPattern::blackout && (spec.window < 1 || spec.window > length))
        throw DomainError("blackout window must be between 1 and the series length " + std::to_string(length));
}

ObservationMask generate_mask(const ObservationMask& base, const Dims3& dims, const MaskSpec& spec) {
    if (base.rows() != dims.n1 || base.cols() != dims.n2 * dims.n3)
        throw ShapeError("generate_mask: base mask is " + std::to_string(base.rows()) + "x" +
                         std::to_string(base.cols()) + ", dims " + latc::to_string(dims));
    validate(spec, base.cols());
    std::mt19937_64 gen(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    BoolArray out = base.array();
    const Index steps = dims.n2;

    switch (spec.pattern) {
        case MissingPattern::random:
            for (Index m = 0; m < out.rows(); ++m)
                for (Index t = 0; t < out.cols(); ++t)
                    if (out(m, t) && unif(gen) < spec.rate) out(m, t) = false;
            break;
        case MissingPattern::nonrandom:
            for (Index m = 0; m < dims.n1; ++m)
                for (Index day = 0; day < dims.n3; ++day)
                    if (unif(gen) < spec.rate) out.row(m).segment(day * steps, steps).setConstant(false);
            break;
        case MissingPattern::blackout: {
            const Index windows = out.cols() / spec.window;
            const auto wanted = static_cast<Index>(std::llround(spec.rate * static_cast<double>(out.cols()) /
                                                                static_cast<double>(spec.window)));
            std::vector<Index> order(static_cast<std::size_t>(windows));
            std::iota(order.begin(), order.end(), Index{0});
            std::shuffle(order.begin(), order.end(), gen);
            for (Index k = 0; k < std::min(wanted, windows); ++k)
                out.middleCols(order[static_cast<std::size_t>(k)] * spec.window, spec.window).setConstant(false);
            break;
        }
    }
    return ObservationMask(std::move(out));
}

EvalReport evaluate(const MatrixXd& truth, const MatrixXd& imputed, const ObservationMask& eval_mask) {
    if (truth.rows() != imputed.rows() || truth.cols() != imputed.cols() || truth.rows() != eval_mask.rows() ||
        truth.cols() != eval_mask.cols())
        throw ShapeError("evaluate: truth, imputed and mask shapes must agree");
    if (eval_mask.count() == 0) throw DomainError("evaluate: no entries to evaluate");
    EvalReport rep;
    double sq = 0, ape = 0;
    Index n_mape = 0;
    for (Index i = 0; i < truth.rows(); ++i)
        for (Index j = 0; j < truth.cols(); ++j) {
            if (!eval_mask.observed(i, j)) continue;
            const double y = truth(i, j), e = y - imputed(i, j);
            sq += e * e;
            ++rep.n_eval;
            if (std::abs(y) > zero_threshold) {
                ape += std::abs(e / y);
                ++n_mape;
            } else {
                ++rep.excluded_zero;
            }
        }
    rep.rmse = std::sqrt(sq / static_cast<double>(rep.n_eval));
    rep.mape = n_mape > 0 ? ape / static_cast<double>(n_mape) * 100.0 : 0.0;
    return rep;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

ImputationResult<double> run_model(Model model, const MatrixXd& y, const ObservationMask& mask,
                                   const SolverConfig<double>& cfg) {
    switch (model) {
        case Model::latc: return impute(y, mask, cfg);
        case Model::lamc: return impute_lamc(y, mask, cfg);
        case Model::lrtc_tnn: return lrtc_tnn_mode(y, mask, cfg);
    }
    throw DomainError("unknown model");
}

ExperimentResult run_experiment(const LoadedMatrix& data, const MaskSpec& spec, const SolverConfig<double>& cfg,
                                Model model, const fs::path& out_dir) {
    const Dims3& d = cfg.dims;
    if (data.values.rows() != d.n1 || data.values.cols() != d.n2 * d.n3)
        throw ShapeError("data is " + std::to_string(data.values.rows()) + "x" + std::to_string(data.values.cols()) +
                         ", which does not match M=" + std::to_string(d.n1) + ", I*J=" + std::to_string(d.n2 * d.n3));
    const ObservationMask observed = generate_mask(data.mask, d, spec);
    const ObservationMask held_out = data.mask.minus(observed);
    const MatrixXd input = project(data.values, observed);

    ExperimentResult out;
    out.imputation = run_model(model, input, observed, cfg);
    out.report = evaluate(data.values, out.imputation.recovered, held_out);

    fs::create_directories(out_dir);
    ArtifactGuard guard;
    const auto emit = [&](const char* name, auto&& writer) {
        const fs::path p = out_dir / name;
        guard.track(p);
        writer(p);
    };
    emit("imputed.csv", [&](const fs::path& p) { save_matrix(p, out.imputation.recovered, DataFormat::csv); });
    emit("eval_mask.csv", [&](const fs::path& p) { save_mask(p, held_out); });
    emit("metrics.txt", [&](const fs::path& p) { write_text(p, metrics_text(spec, cfg, model, out.report, out.imputation)); });
    emit("history.txt", [&](const fs::path& p) { write_text(p, history_text(out.imputation)); });
    out.artifacts = guard.files();
    guard.release();
    return out;
}

ExperimentResult run_experiment(const fs::path& data_path, const MaskSpec& spec, const SolverConfig<double>& cfg,
                                Model model, const fs::path& out_dir) {
    return run_experiment(load_matrix(data_path), spec, cfg, model, out_dir);
}

std::vector<GridCell> run_sweep(const fs::path& data_path, const MaskSpec& spec, const SolverConfig<double>& base,
                                Model model, const std::vector<double>& cs, const std::vector<Index>& rs,
                                const fs::path& out_dir) {
    if (cs.empty() || rs.empty()) throw DomainError("sweep needs at least one c and one r");
    const LoadedMatrix data = load_matrix(data_path);
    fs::create_directories(out_dir);
    std::vector<GridCell> cells;
    std::ostringstream grid;
    for (double c : cs) {
        for (Index r : rs) {
            SolverConfig<double> cfg = base;
            cfg.c = c;
            cfg.r = r;
            const fs::path cell_dir = out_dir / ("c" + format_number(c) + "_r" + std::to_string(r));
            const ExperimentResult res = run_experiment(data, spec, cfg, model, cell_dir);
            cells.push_back({c, r, res.report});
            grid << "c=" << format_number(c) << " r=" << r << " mape=" << format_number(res.report.mape)
                 << " rmse=" << format_number(res.report.rmse) << " n_eval=" << res.report.n_eval
                 << " iterations=" << res.imputation.iterations
                 << " converged=" << (res.imputation.converged ? "true" : "false") << '\n';
        }
    }
    write_text(out_dir / "grid.txt", grid.str());
    return cells;
}

MatrixXd synthetic_low_rank(const Dims3& dims, Index rank, std::uint64_t seed, bool smooth_time) {
    if (dims.n1 <= 0 || dims.n2 <= 0 || dims.n3 <= 0 || rank <= 0) throw DomainError("synthetic_low_rank: bad extents");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto draw = [&](Index rows) {
        MatrixXd f(rows, rank);
        for (Index i = 0; i < rows; ++i)
            for (Index k = 0; k < rank; ++k) f(i, k) = normal(gen);
        return f;
    };
    const MatrixXd sensors = draw(dims.n1);
    MatrixXd time_of_day = draw(dims.n2);
    const MatrixXd days = draw(dims.n3);
    if (smooth_time) {
        for (Index i = 1; i < dims.n2; ++i) time_of_day.row(i) += time_of_day.row(i - 1);
        time_of_day /= std::sqrt(static_cast<double>(dims.n2));
    }
    Tensor3<double> x(dims);
    for (Index m = 0; m < dims.n1; ++m)
        for (Index i = 0; i < dims.n2; ++i)
            for (Index j = 0; j < dims.n3; ++j)
                x(m, i, j) = (sensors.row(m).array() * time_of_day.row(i).array() * days.row(j).array()).sum();
    return detensorize(x);
}

}  // namespace latc::bench
