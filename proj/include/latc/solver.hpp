#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "latc/autoreg.hpp"
#include "latc/lowrank.hpp"
#include "latc/tensor_core.hpp"

namespace latc {

template <typename Scalar>
struct SolverConfig {
    /// Initial ADMM penalty rate.
    Scalar rho0 = Scalar(1e-4);
    /// Cap of the 1.05x schedule; unset means 1e5 * rho0.
    std::optional<Scalar> rho_max;
    /// Trade-off coefficient, lambda = c * rho. c = 0 disables the AR term.
    Scalar c = Scalar(1);
    /// Truncation: number of leading singular values left unpenalized.
    Index r = 1;
    std::vector<int> lags{1};
    ModeWeights<Scalar> weights{Scalar(1) / 3, Scalar(1) / 3, Scalar(1) / 3};
    int inner_iters = 3;
    int max_outer_iters = 100;
    Scalar tol = Scalar(1e-4);
    /// (M, I, J): sensors, time steps per day, days.
    Dims3 dims;
    /// Seeds the initial AR coefficients.
    std::uint64_t seed = 0;

    Scalar effective_rho_max() const { return rho_max.value_or(Scalar(1e5) * rho0); }
    Scalar lambda(Scalar rho) const { return c * rho; }
};

/// Checks the solver settings. `tensor_form` selects the truncation bound:
/// r < min(M, I, J) for the tensor model, r < min(M, I J) for the matrix model.
template <typename Scalar>
void validate(const SolverConfig<Scalar>& cfg, bool tensor_form = true) {
    const Dims3& d = cfg.dims;
    if (d.n1 <= 0 || d.n2 <= 0 || d.n3 <= 0) throw DomainError("solver dims must be positive, got " + to_string(d));
    if (!(cfg.rho0 > Scalar(0)) || !std::isfinite(cfg.rho0)) throw DomainError("rho0 must be finite and > 0");
    const Scalar rho_max = cfg.effective_rho_max();
    if (!(rho_max >= cfg.rho0) || !std::isfinite(rho_max)) throw DomainError("rho_max must be finite and >= rho0");
    if (!(cfg.c >= Scalar(0)) || !std::isfinite(cfg.c)) throw DomainError("c must be finite and >= 0");
    const Index bound = tensor_form ? std::min({d.n1, d.n2, d.n3}) : std::min(d.n1, d.n2 * d.n3);
    if (cfg.r < 0 || cfg.r >= bound)
        throw DomainError("truncation r=" + std::to_string(cfg.r) + " must be below " + std::to_string(bound));
    check_mode_weights(cfg.weights);
    if (cfg.inner_iters < 1) throw DomainError("inner_iters must be >= 1");
    if (cfg.max_outer_iters < 1) throw DomainError("max_outer_iters must be >= 1");
    if (!(cfg.tol > Scalar(0))) throw DomainError("tol must be > 0");
}

/// One outer iteration of the convergence trace.
template <typename Scalar>
struct IterationRecord {
    int outer_iter = 0;
    /// rho after the last inner step.
    Scalar rho = 0;
    /// ||X - Q(Z)||_F averaged over the inner steps.
    Scalar primal_residual = 0;
    /// ||Xhat^l - Xhat^{l-1}||_F / ||P_Omega(Y)||_F.
    Scalar relative_change = 0;
    /// Truncated nuclear norm of the latent variable.
    Scalar low_rank_norm = 0;
    /// Temporal variation of Z under the refitted coefficients (0 without the AR term).
    Scalar temporal_variation = 0;
};

/// Iterates threaded through the alternating scheme. `Latent` is Tensor3 for
/// the tensor model and the M x T matrix for the matrix model.
template <typename Scalar, typename Latent>
struct SolverState {
    Latent x;
    TimeSeriesMatrix<Scalar> z;
    ARCoefficients<Scalar> a;
    Latent dual;
    int outer_iter = 0;
    int inner_iter = 0;
    Scalar rho = 0;
    std::vector<IterationRecord<Scalar>> history;
};

template <typename Scalar>
using TensorSolverState = SolverState<Scalar, Tensor3<Scalar>>;
template <typename Scalar>
using MatrixSolverState = SolverState<Scalar, Matrix<Scalar>>;

template <typename Scalar>
struct ImputationResult {
    /// Recovered M x T matrix; equals Y on the observed support.
    TimeSeriesMatrix<Scalar> recovered;
    /// Final AR coefficients (M x 0 when the AR term is disabled).
    ARCoefficients<Scalar> coefficients;
    int iterations = 0;
    bool converged = false;
    std::vector<IterationRecord<Scalar>> history;
};

/// Called after every inner ADMM step.
template <typename Scalar, typename Latent>
using StepObserver = std::function<void(const SolverState<Scalar, Latent>&)>;

// --- individual updates -----------------------------------------------------

/// Low-rank step of the tensor model: for each mode p,
/// X_p = fold_p(D_{r, alpha_p/rho}(unfold_p(Q(Z) - dual/rho))), and X = sum_p alpha_p X_p.
template <typename Scalar>
Tensor3<Scalar> update_x(const TimeSeriesMatrix<Scalar>& z, const Tensor3<Scalar>& dual, const SolverConfig<Scalar>& cfg,
                         Scalar rho) {
    if (dual.dims() != cfg.dims) throw ShapeError("update_x: dual dims " + to_string(dual.dims()) + " vs " + to_string(cfg.dims));
    const Tensor3<Scalar> target = tensorize(z, cfg.dims) - dual / rho;
    Tensor3<Scalar> out(cfg.dims);
    for (int mode = 1; mode <= 3; ++mode) {
        const Scalar w = cfg.weights[static_cast<std::size_t>(mode - 1)];
        if (w == Scalar(0)) continue;
        out += w * fold(svt(unfold(target, mode), cfg.r, w / rho), mode, cfg.dims);
    }
    return out;
}

/// Low-rank step of the matrix model: D_{r, 1/rho}(Z - dual/rho).
template <typename Scalar>
Matrix<Scalar> update_x_matrix(const TimeSeriesMatrix<Scalar>& z, const Matrix<Scalar>& dual, Index r, Scalar rho) {
    if (dual.rows() != z.rows() || dual.cols() != z.cols()) throw ShapeError("update_x_matrix: dual shape mismatch");
    return svt(z - dual / rho, r, Scalar(1) / rho);
}

namespace detail {

template <typename Scalar>
TimeSeriesMatrix<Scalar> as_series(const Tensor3<Scalar>& x) {
    return detensorize(x);
}
template <typename Scalar>
const Matrix<Scalar>& as_series(const Matrix<Scalar>& x) {
    return x;
}

template <typename Scalar>
Tensor3<Scalar> embed_like(const TimeSeriesMatrix<Scalar>& z, const Tensor3<Scalar>& like) {
    return tensorize(z, like.dims());
}
template <typename Scalar>
const Matrix<Scalar>& embed_like(const TimeSeriesMatrix<Scalar>& z, const Matrix<Scalar>& like) {
    if (z.rows() != like.rows() || z.cols() != like.cols()) throw ShapeError("series/latent shape mismatch");
    return z;
}

template <typename Scalar, typename Latent>
TimeSeriesMatrix<Scalar> z_target(const Latent& x, const Latent& dual, Scalar rho) {
    if constexpr (std::is_same_v<Latent, Tensor3<Scalar>>) {
        if (x.dims() != dual.dims()) throw ShapeError("update_z: X and dual dims differ");
    } else {
        if (x.rows() != dual.rows() || x.cols() != dual.cols()) throw ShapeError("update_z: X and dual shapes differ");
    }
    return as_series<Scalar>(Latent(x + dual / rho));
}

template <typename Scalar, typename Latent>
TimeSeriesMatrix<Scalar> solve_z(const Latent& x, const Latent& dual, const ARCoefficients<Scalar>& a,
                                 const LagStructure& lags, Scalar rho, Scalar lambda) {
    if (!(lambda > Scalar(0))) throw DomainError("update_z: lambda must be > 0 (use update_z_without_ar for lambda = 0)");
    return solve_z_matrix(z_target(x, dual, rho), a, lags, rho / lambda);
}

}  // namespace detail

/// AR-regularized Z step: row m = solve_z_series(Q^{-1}(X + dual/rho)_m, a_m, lags, rho/lambda),
/// followed by restoring the observed entries of Y.
template <typename Scalar, typename Latent>
TimeSeriesMatrix<Scalar> update_z(const Latent& x, const Latent& dual, const ARCoefficients<Scalar>& a,
                                  const LagStructure& lags, const TimeSeriesMatrix<Scalar>& y,
                                  const ObservationMask& mask, Scalar rho, Scalar lambda) {
    TimeSeriesMatrix<Scalar> z = detail::solve_z(x, dual, a, lags, rho, lambda);
    restore_observed(z, y, mask);
    return z;
}

/// Z step with the temporal-variation term removed: Z = Q^{-1}(X + dual/rho)
/// off the support, Y on it.
template <typename Scalar, typename Latent>
TimeSeriesMatrix<Scalar> update_z_without_ar(const Latent& x, const Latent& dual, const TimeSeriesMatrix<Scalar>& y,
                                             const ObservationMask& mask, Scalar rho) {
    TimeSeriesMatrix<Scalar> z = detail::z_target(x, dual, rho);
    restore_observed(z, y, mask);
    return z;
}

/// dual + rho (X - Q(Z)).
template <typename Scalar>
Tensor3<Scalar> update_dual(const Tensor3<Scalar>& dual, const Tensor3<Scalar>& x, const TimeSeriesMatrix<Scalar>& z,
                            Scalar rho) {
    if (dual.dims() != x.dims()) throw ShapeError("update_dual: dual and X dims differ");
    return dual + rho * (x - tensorize(z, x.dims()));
}

template <typename Scalar>
Matrix<Scalar> update_dual(const Matrix<Scalar>& dual, const Matrix<Scalar>& x, const TimeSeriesMatrix<Scalar>& z,
                           Scalar rho) {
    if (dual.rows() != x.rows() || dual.cols() != x.cols() || z.rows() != x.rows() || z.cols() != x.cols())
        throw ShapeError("update_dual: shape mismatch");
    return dual + rho * (x - z);
}

// --- driver -------------------------------------------------------------------

namespace detail {

template <typename Scalar>
void check_inputs(const TimeSeriesMatrix<Scalar>& y, const ObservationMask& mask, const SolverConfig<Scalar>& cfg) {
    const Dims3& d = cfg.dims;
    if (y.rows() != d.n1 || y.cols() != d.n2 * d.n3)
        throw ShapeError("data is " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + " but dims " +
                         to_string(d) + " require " + std::to_string(d.n1) + "x" + std::to_string(d.n2 * d.n3));
    if (mask.rows() != y.rows() || mask.cols() != y.cols()) throw ShapeError("mask shape does not match data");
    if (mask.count() == 0) throw DomainError("at least one entry must be observed");
}

template <typename Scalar>
ARCoefficients<Scalar> initial_coefficients(Index sensors, Index lag_count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<Scalar> dist(Scalar(0), Scalar(0.01));
    ARCoefficients<Scalar> a(sensors, lag_count);
    for (Index m = 0; m < sensors; ++m)
        for (Index i = 0; i < lag_count; ++i) a(m, i) = dist(gen);
    return a;
}

/// Alternating minimization: K inner ADMM steps with A fixed, then the AR refit.
template <typename Scalar, typename Latent, typename LowRankStep, typename LowRankNorm>
ImputationResult<Scalar> run_imputer(const TimeSeriesMatrix<Scalar>& y, const ObservationMask& mask,
                                     const SolverConfig<Scalar>& cfg, Latent zero, LowRankStep&& lowrank_step,
                                     LowRankNorm&& lowrank_norm, const StepObserver<Scalar, Latent>& observer) {
    const bool with_ar = cfg.c > Scalar(0);
    const Index sensors = y.rows();
    std::optional<LagStructure> lags;
    if (with_ar) lags.emplace(cfg.lags, y.cols());

    SolverState<Scalar, Latent> state;
    state.z = project(y, mask);
    if (!state.z.allFinite()) throw DomainError("observed entries must be finite");
    state.dual = zero;
    state.x = std::move(zero);
    state.a = with_ar ? initial_coefficients<Scalar>(sensors, lags->count(), cfg.seed)
                      : ARCoefficients<Scalar>(sensors, 0);
    state.rho = cfg.rho0;

    const Scalar rho_max = cfg.effective_rho_max();
    const Scalar observed_norm = state.z.norm();
    const Scalar scale = observed_norm > Scalar(0) ? observed_norm : Scalar(1);
    TimeSeriesMatrix<Scalar> previous = state.z;
    TimeSeriesMatrix<Scalar> current = state.z;

    ImputationResult<Scalar> result;
    for (int outer = 1; outer <= cfg.max_outer_iters; ++outer) {
        state.outer_iter = outer;
        Scalar residual_sum = 0;
        for (int k = 0; k < cfg.inner_iters; ++k) {
            state.inner_iter = k + 1;
            state.rho = std::min(Scalar(1.05) * state.rho, rho_max);
            state.x = lowrank_step(state.z, state.dual, state.rho);
            if (with_ar)
                state.z = update_z(state.x, state.dual, state.a, *lags, y, mask, state.rho, cfg.lambda(state.rho));
            else
                state.z = update_z_without_ar(state.x, state.dual, y, mask, state.rho);
            state.dual = update_dual(state.dual, state.x, state.z, state.rho);
            residual_sum += (as_series<Scalar>(state.x) - state.z).norm();
            if (observer) observer(state);
        }

        IterationRecord<Scalar> rec;
        rec.outer_iter = outer;
        rec.rho = state.rho;
        rec.primal_residual = residual_sum / Scalar(cfg.inner_iters);
        if (with_ar) {
            state.a = update_coefficients(state.z, *lags);
            rec.temporal_variation = temporal_variation(state.z, state.a, *lags);
        }
        rec.low_rank_norm = lowrank_norm(state.x);
        current = as_series<Scalar>(state.x);
        rec.relative_change = (current - previous).norm() / scale;
        state.history.push_back(rec);
        previous = current;

        result.iterations = outer;
        if (rec.relative_change < cfg.tol) {
            result.converged = true;
            break;
        }
    }

    restore_observed(current, y, mask);
    result.recovered = std::move(current);
    result.coefficients = std::move(state.a);
    result.history = std::move(state.history);
    return result;
}

}  // namespace detail

/// Tensor-form imputation (LATC). With cfg.c == 0 this is the plain
/// truncated-nuclear-norm tensor completion (LRTC-TNN).
template <typename Scalar>
ImputationResult<Scalar> impute(const TimeSeriesMatrix<Scalar>& y, const ObservationMask& mask,
                                const SolverConfig<Scalar>& cfg,
                                const StepObserver<Scalar, Tensor3<Scalar>>& observer = {}) {
    validate(cfg, true);
    detail::check_inputs(y, mask, cfg);
    return detail::run_imputer<Scalar>(
        y, mask, cfg, Tensor3<Scalar>(cfg.dims),
        [&](const TimeSeriesMatrix<Scalar>& z, const Tensor3<Scalar>& dual, Scalar rho) {
            return update_x(z, dual, cfg, rho);
        },
        [&](const Tensor3<Scalar>& x) { return tensor_tnn(x, cfg.r, cfg.weights); }, observer);
}

/// Matrix-form variant (LAMC): the truncated nuclear norm acts on the M x T
/// matrix directly; cfg.dims only supplies M and T = I * J.
template <typename Scalar>
ImputationResult<Scalar> impute_lamc(const TimeSeriesMatrix<Scalar>& y, const ObservationMask& mask,
                                     const SolverConfig<Scalar>& cfg,
                                     const StepObserver<Scalar, Matrix<Scalar>>& observer = {}) {
    validate(cfg, false);
    detail::check_inputs(y, mask, cfg);
    return detail::run_imputer<Scalar>(
        y, mask, cfg, Matrix<Scalar>(Matrix<Scalar>::Zero(y.rows(), y.cols())),
        [&](const TimeSeriesMatrix<Scalar>& z, const Matrix<Scalar>& dual, Scalar rho) {
            return update_x_matrix(z, dual, cfg.r, rho);
        },
        [&](const Matrix<Scalar>& x) { return truncated_nuclear_norm(x, cfg.r); }, observer);
}

/// LATC with the temporal-variation term removed (lambda = 0): no AR solve
/// and no coefficient refit, so lags and seed are ignored.
template <typename Scalar>
ImputationResult<Scalar> lrtc_tnn_mode(const TimeSeriesMatrix<Scalar>& y, const ObservationMask& mask,
                                       SolverConfig<Scalar> cfg,
                                       const StepObserver<Scalar, Tensor3<Scalar>>& observer = {}) {
    cfg.c = Scalar(0);
    return impute(y, mask, cfg, observer);
}

}  // namespace latc
