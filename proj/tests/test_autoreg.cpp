#include <doctest.h>

#include "latc/autoreg.hpp"
#include "test_util.hpp"

using namespace latc;
using latc::testing::random_matrix;
using latc::testing::uniform_index;

namespace {

std::vector<Index> selected_columns(const MatrixXd& psi) {
    std::vector<Index> cols;
    for (Index t = 0; t < psi.rows(); ++t) {
        Index col = -1;
        CHECK(psi.row(t).sum() == 1.0);
        psi.row(t).maxCoeff(&col);
        cols.push_back(col);
    }
    return cols;
}

std::vector<int> random_lags(std::mt19937_64& gen, int max_lag) {
    std::vector<int> lags;
    std::bernoulli_distribution coin(0.5);
    for (int h = 1; h <= max_lag; ++h)
        if (coin(gen)) lags.push_back(h);
    if (lags.empty()) lags.push_back(1);
    return lags;
}

}  // namespace

TEST_CASE("selector matrices follow the block layout") {
    const LagStructure l13({1, 3}, 5);
    CHECK(l13.rows() == 2);
    // 0-based column indices; {4,5}, {3,4}, {1,2} in 1-based terms.
    CHECK(selected_columns(l13.selector(0)) == std::vector<Index>{3, 4});
    CHECK(selected_columns(l13.selector(1)) == std::vector<Index>{2, 3});
    CHECK(selected_columns(l13.selector(2)) == std::vector<Index>{0, 1});

    const LagStructure l1({1}, 3);
    CHECK(selected_columns(l1.selector(0)) == std::vector<Index>{1, 2});
    CHECK(selected_columns(l1.selector(1)) == std::vector<Index>{0, 1});

    VectorXd z(5);
    z << 1, 2, 3, 4, 5;
    const VectorXd picked = l13.selector(0) * z;
    CHECK(picked[0] == 4);
    CHECK(picked[1] == 5);

    const MatrixXd stacked = l13.stacked_selectors();
    CHECK(stacked.rows() == 2);
    CHECK(stacked.cols() == 10);
    CHECK(stacked.leftCols(5) == l13.selector(1));
    CHECK(stacked.rightCols(5) == l13.selector(2));
}

TEST_CASE("lag structure validation") {
    CHECK_THROWS_AS(LagStructure({}, 5), DomainError);
    CHECK_THROWS_AS(LagStructure({2, 1}, 5), DomainError);
    CHECK_THROWS_AS(LagStructure({1, 1}, 5), DomainError);
    CHECK_THROWS_AS(LagStructure({0, 1}, 5), DomainError);
    CHECK_THROWS_AS(LagStructure({1, 5}, 5), DomainError);
    CHECK_NOTHROW(LagStructure({1, 4}, 5));
}

TEST_CASE("temporal variation hand examples") {
    const LagStructure l1({1}, 3);
    MatrixXd z(1, 3);
    z << 1, 2, 3;
    CHECK(temporal_variation(z, MatrixXd::Constant(1, 1, 2.0), l1) == doctest::Approx(1.0));
    CHECK(temporal_variation(MatrixXd::Zero(1, 3), MatrixXd::Constant(1, 1, 0.7), l1) == 0.0);
    CHECK(temporal_variation(MatrixXd::Constant(1, 3, 7.0), MatrixXd::Constant(1, 1, 1.0), l1) == 0.0);
    CHECK_THROWS_AS(temporal_variation(z, MatrixXd::Zero(1, 2), l1), ShapeError);
    CHECK_THROWS_AS(temporal_variation(MatrixXd::Zero(1, 4), MatrixXd::Zero(1, 1), l1), ShapeError);
}

TEST_CASE("temporal variation equals the selector-matrix form") {
    std::mt19937_64 gen(41);
    for (int trial = 0; trial < 30; ++trial) {
        const Index m = uniform_index(1, 4, gen), t = uniform_index(8, 30, gen);
        const LagStructure lags(random_lags(gen, 5), t);
        const MatrixXd z = random_matrix(m, t, gen), a = random_matrix(m, lags.count(), gen);
        const double direct = temporal_variation(z, a, lags);
        CHECK(direct == doctest::Approx(latc::testing::temporal_variation_psi_form(z, a, lags)).epsilon(1e-10));
    }
}

TEST_CASE("band assembly matches the dense normal matrix") {
    std::mt19937_64 gen(43);
    for (int trial = 0; trial < 10; ++trial) {
        const Index t = uniform_index(7, 20, gen);
        const LagStructure lags(random_lags(gen, 6), t);
        const VectorXd a = random_matrix(lags.count(), 1, gen);
        const MatrixXd b = latc::testing::dense_ar_operator(a, lags);
        MatrixXd want = b.transpose() * b;
        want.diagonal().array() += 0.3;
        CHECK((ar_normal_matrix(a, lags, 0.3).dense() - want).norm() <= 1e-12 * want.norm());
    }
}

TEST_CASE("solve_z_series hand examples") {
    const LagStructure l1({1}, 2);
    VectorXd x(2);
    x << 1, 0;
    const VectorXd z = solve_z_series(x, VectorXd::Zero(1), l1, 1.0);
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == doctest::Approx(0.0));

    // An AR-consistent series is a fixed point.
    const LagStructure l10({1}, 10);
    const VectorXd c = VectorXd::Constant(10, 3.5);
    CHECK((solve_z_series(c, VectorXd::Ones(1), l10, 0.8) - c).norm() <= 1e-12);

    CHECK_THROWS_AS(solve_z_series(x, VectorXd::Zero(1), l1, 0.0), DomainError);
    CHECK_THROWS_AS(solve_z_series(x, VectorXd::Zero(2), l1, 1.0), ShapeError);
    CHECK_THROWS_AS(solve_z_series(VectorXd::Zero(3), VectorXd::Zero(1), l1, 1.0), ShapeError);
}

TEST_CASE("solve_z_series satisfies its normal equations") {
    std::mt19937_64 gen(47);
    for (int trial = 0; trial < 40; ++trial) {
        const Index t = uniform_index(8, 60, gen);
        const LagStructure lags(random_lags(gen, 6), t);
        const VectorXd x = random_matrix(t, 1, gen), a = random_matrix(lags.count(), 1, gen, 0.7);
        const double alpha = std::pow(10.0, std::uniform_real_distribution<double>(-2, 2)(gen));
        const VectorXd z = solve_z_series(x, a, lags, alpha);
        const MatrixXd b = latc::testing::dense_ar_operator(a, lags);
        const VectorXd residual = b.transpose() * (b * z) + alpha * z - alpha * x;
        CHECK(residual.norm() < 1e-9 * alpha * x.norm());
        CHECK((z - latc::testing::dense_z_solve(x, a, lags, alpha)).norm() <= 1e-9 * z.norm());
    }
}

TEST_CASE("large alpha leaves the series nearly unchanged") {
    std::mt19937_64 gen(53);
    const LagStructure lags({1, 2, 3}, 40);
    const VectorXd x = random_matrix(40, 1, gen), a = random_matrix(3, 1, gen);
    const MatrixXd b = latc::testing::dense_ar_operator(a, lags);
    const double alpha = 1e6 * Eigen::MatrixXd(b.transpose() * b).operatorNorm();
    CHECK((solve_z_series(x, a, lags, alpha) - x).norm() <= 1e-3 * x.norm());
}

TEST_CASE("solve_z_matrix works row by row") {
    std::mt19937_64 gen(59);
    const LagStructure lags({1, 2}, 20);
    const MatrixXd x = random_matrix(3, 20, gen), a = random_matrix(3, 2, gen);
    const MatrixXd z = solve_z_matrix(x, a, lags, 0.5);
    for (Index m = 0; m < 3; ++m) {
        const VectorXd xm = x.row(m).transpose(), am = a.row(m).transpose();
        CHECK((z.row(m).transpose() - solve_z_series(xm, am, lags, 0.5)).norm() == 0.0);
    }
    MatrixXd consistent(2, 20);
    consistent.row(0).setConstant(2.0);
    consistent.row(1).setConstant(-1.0);
    MatrixXd unit_a(2, 2);
    unit_a << 1, 0, 0.5, 0.5;
    CHECK((solve_z_matrix(consistent, unit_a, lags, 1.0) - consistent).norm() <= 1e-12);
    CHECK_THROWS_AS(solve_z_matrix(x, MatrixXd(random_matrix(2, 2, gen)), lags, 0.5), ShapeError);
}

TEST_CASE("vectorized joint solve agrees with the per-series solve") {
    std::mt19937_64 gen(61);
    for (int trial = 0; trial < 20; ++trial) {
        const Index m = uniform_index(1, 3, gen), t = uniform_index(5, 24, gen);
        const LagStructure lags(random_lags(gen, 3), t);
        const MatrixXd x = random_matrix(m, t, gen), a = random_matrix(m, lags.count(), gen, 0.7);
        const double alpha = std::array<double, 3>{0.1, 1.0, 10.0}[static_cast<std::size_t>(trial % 3)];
        const MatrixXd per_series = solve_z_matrix(x, a, lags, alpha);
        const MatrixXd joint = solve_z_vectorized(x, a, lags, alpha);
        CHECK(latc::testing::relative_error(per_series, joint) <= 1e-8);
    }
}

TEST_CASE("vectorized solve special cases and guard") {
    std::mt19937_64 gen(67);
    const LagStructure lags({1, 2}, 12);
    const MatrixXd x1 = random_matrix(1, 12, gen), a1 = random_matrix(1, 2, gen);
    const VectorXd x1v = x1.row(0).transpose(), a1v = a1.row(0).transpose();
    CHECK(latc::testing::relative_error(solve_z_vectorized(x1, a1, lags, 1.0),
                                        MatrixXd(solve_z_series(x1v, a1v, lags, 1.0).transpose())) <= 1e-10);

    const MatrixXd x2 = random_matrix(2, 12, gen);
    const MatrixXd zero_a = MatrixXd::Zero(2, 2);
    CHECK(latc::testing::relative_error(solve_z_vectorized(x2, zero_a, lags, 2.0),
                                        solve_z_matrix(x2, zero_a, lags, 2.0)) <= 1e-12);

    const LagStructure long_lags({1}, 1001);
    CHECK_THROWS_AS(solve_z_vectorized(MatrixXd(MatrixXd::Zero(2, 1001)), MatrixXd(MatrixXd::Zero(2, 1)), long_lags, 1.0),
                    DomainError);
}

TEST_CASE("AR coefficient refit recovers generating coefficients") {
    MatrixXd ar1(1, 10);
    ar1(0, 0) = 1.0;
    for (Index t = 1; t < 10; ++t) ar1(0, t) = 0.5 * ar1(0, t - 1);
    CHECK(std::abs(update_coefficients(ar1, LagStructure({1}, 10))(0, 0) - 0.5) <= 1e-10);

    const MatrixXd constant = MatrixXd::Constant(1, 10, 4.0);
    CHECK(update_coefficients(constant, LagStructure({1}, 10))(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    const MatrixXd zero = MatrixXd::Zero(2, 10);
    CHECK(update_coefficients(zero, LagStructure({1, 2}, 10)).isZero(0));
}

TEST_CASE("AR refit is least-squares optimal") {
    std::mt19937_64 gen(71);
    for (int trial = 0; trial < 5; ++trial) {
        const LagStructure lags({1, 2, 4}, 30);
        const MatrixXd z = random_matrix(3, 30, gen);
        const MatrixXd fit = update_coefficients(z, lags);
        const double best = temporal_variation(z, fit, lags);
        for (int k = 0; k < 100; ++k) {
            const MatrixXd other = fit + random_matrix(3, 3, gen, 0.3);
            CHECK(best <= temporal_variation(z, other, lags) + 1e-12);
        }
    }
}
