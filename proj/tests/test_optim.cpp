#include <doctest.h>

#include <cmath>

#include "qpt/optim.hpp"

using namespace qpt;
using namespace qpt::optim;

TEST_CASE("least squares matches the normal equations on a full-rank system") {
    Rng rng(3);
    RMatrix A(20, 4);
    RVector b(20);
    for (long i = 0; i < A.rows(); ++i) {
        for (long j = 0; j < A.cols(); ++j)
            A(i, j) = rng.normal();
        b(i) = rng.normal();
    }
    auto res = linear_least_squares(A, b);
    CHECK_FALSE(res.rank_deficient);
    CHECK(res.rank == 4);
    RVector via_normal = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    CHECK((res.x - via_normal).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("least squares flags rank deficiency and returns the minimum-norm solution") {
    RMatrix A(1, 2);
    A << 1.0, 1.0;
    RVector b(1);
    b << 2.0;
    auto res = linear_least_squares(A, b);
    CHECK(res.rank_deficient);
    CHECK(res.rank == 1);
    CHECK(res.x(0) == doctest::Approx(1.0));  // (1,1) is the shortest solution of x0+x1=2
    CHECK(res.x(1) == doctest::Approx(1.0));

    RMatrix B(3, 3);
    B << 1, 2, 3, 2, 4, 6, 1, 1, 1;  // row 2 = 2 * row 1
    RVector c(3);
    c << 1, 2, 1;
    CHECK(linear_least_squares(B, c).rank_deficient);
}

namespace {

double quadratic(const RVector& x, RVector& grad) {
    RVector target(3);
    target << 1.0, -2.0, 0.5;
    grad = 2.0 * (x - target);
    return (x - target).squaredNorm();
}

double rosenbrock(const RVector& p, RVector& grad) {
    const double x = p(0), y = p(1);
    grad.resize(2);
    grad(0) = -400.0 * x * (y - x * x) - 2.0 * (1.0 - x);
    grad(1) = 200.0 * (y - x * x);
    return 100.0 * std::pow(y - x * x, 2) + std::pow(1.0 - x, 2);
}

}  // namespace

TEST_CASE("adam settles a well-scaled quadratic") {
    AdamOptions opt;
    opt.lr = 0.05;
    opt.epochs = 2000;
    auto res = adam_minimize(quadratic, RVector::Zero(3), opt);
    CHECK(res.loss < 1e-10);
    CHECK(res.params(1) == doctest::Approx(-2.0).epsilon(1e-5));
    // determinism: same inputs, same trajectory
    auto res2 = adam_minimize(quadratic, RVector::Zero(3), opt);
    CHECK((res.params - res2.params).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rmsprop settles a well-scaled quadratic") {
    RmsPropOptions opt;
    opt.lr = 0.05;
    opt.epochs = 3000;
    auto res = rmsprop_minimize(quadratic, RVector::Zero(3), opt);
    CHECK(res.loss < 1e-8);
}

TEST_CASE("descent reports divergence on a poisoned objective") {
    auto bad = [](const RVector& x, RVector& grad) {
        grad = RVector::Zero(x.size());
        return std::numeric_limits<double>::quiet_NaN();
    };
    AdamOptions opt;
    opt.epochs = 1;
    CHECK_THROWS_AS(adam_minimize(bad, RVector::Zero(2), opt), Divergence);
}

TEST_CASE("bfgs lands on the rosenbrock minimum") {
    RVector init(2);
    init << -1.2, 1.0;
    BfgsOptions opt;
    opt.max_iters = 500;
    opt.grad_tol = 1e-9;
    auto res = bfgs_minimize(rosenbrock, init, opt);
    CHECK(res.status == BfgsStatus::converged);
    CHECK(res.params(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.params(1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.loss < 1e-12);
}

TEST_CASE("bfgs stalls honestly at a point with no descent direction") {
    // |x| has no Armijo-acceptable step from the kink once centered there
    auto absf = [](const RVector& x, RVector& grad) {
        grad.resize(1);
        grad(0) = x(0) >= 0.0 ? 1.0 : -1.0;
        return std::abs(x(0));
    };
    auto res = bfgs_minimize(absf, RVector::Zero(1));
    CHECK(res.status == BfgsStatus::stalled);
    CHECK(res.params(0) == 0.0);
}

TEST_CASE("central differences track an analytic gradient") {
    auto f = [](const RVector& x) {
        return std::sin(x(0)) * x(1) + x(2) * x(2) * x(2);
    };
    RVector x(3);
    x << 0.3, -1.1, 0.7;
    RVector grad = finite_diff_gradient(f, x, 1e-6);
    CHECK(grad(0) == doctest::Approx(std::cos(0.3) * -1.1).epsilon(1e-8));
    CHECK(grad(1) == doctest::Approx(std::sin(0.3)).epsilon(1e-8));
    CHECK(grad(2) == doctest::Approx(3.0 * 0.49).epsilon(1e-8));

    auto wrapped = with_finite_diff(f);
    RVector g2(3);
    CHECK(wrapped(x, g2) == doctest::Approx(f(x)));
    CHECK((g2 - grad).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scan refinement resolves a smooth minimum to high precision") {
    auto f = [](double x) { return (x - M_SQRT2) * (x - M_SQRT2); };
    auto res = scan_refine_1d(f, 0.0, 4.0, 101);
    CHECK(std::abs(res.x - M_SQRT2) < 1e-10);
}

TEST_CASE("scan refinement recovers a basin the coarse grid undervalues") {
    // deeper well at -2.9 sits between grid points; shallower well at +3.0
    // lands exactly on one, so the raw grid argmin is in the wrong basin
    auto f = [](double x) {
        return -std::exp(-2.0 * (x - 3.0) * (x - 3.0)) -
               1.05 * std::exp(-2.0 * (x + 2.9) * (x + 2.9));
    };
    auto res = scan_refine_1d(f, -10.0, 10.0, 13, 5);
    // a quadratic basin is only locatable to ~sqrt(eps) regardless of bracket width
    CHECK(std::abs(res.x + 2.9) < 1e-7);
    CHECK(res.value == doctest::Approx(-1.05).epsilon(1e-6));
}

TEST_CASE("scan refinement rejects bad intervals") {
    auto f = [](double x) { return x * x; };
    CHECK_THROWS_AS(scan_refine_1d(f, 1.0, 1.0, 10), InvalidArgument);
    CHECK_THROWS_AS(scan_refine_1d(f, 0.0, 1.0, 2), InvalidArgument);
}
