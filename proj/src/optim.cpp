#include "qpt/optim.hpp"

#include <algorithm>
#include <cmath>

namespace qpt::optim {

LinearLsqResult linear_least_squares(const RMatrix& A, const RVector& b,
                                     double threshold) {
    if (A.rows() != b.size())
        throw InvalidArgument("linear_least_squares: row count mismatch");
    Eigen::CompleteOrthogonalDecomposition<RMatrix> cod(A);
    cod.setThreshold(threshold);
    LinearLsqResult out;
    out.x = cod.solve(b);
    out.rank = cod.rank();
    out.rank_deficient = out.rank < A.cols();  // solution not uniquely determined
    return out;
}

namespace {

void check_finite(double loss, const RVector& grad, const char* who) {
    if (!std::isfinite(loss))
        throw Divergence(std::string(who) + ": non-finite loss");
    if (!grad.allFinite())
        throw Divergence(std::string(who) + ": non-finite gradient");
}

}  // namespace

DescentResult adam_minimize(const LossGradFn& f, RVector init, const AdamOptions& opt,
                            const ProgressFn& progress) {
    RVector x = std::move(init);
    RVector m = RVector::Zero(x.size()), v = RVector::Zero(x.size());
    RVector grad(x.size());
    double b1t = 1.0, b2t = 1.0;
    double lr = opt.lr;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        double loss = f(x, grad);
        check_finite(loss, grad, "adam_minimize");
        if (progress)
            progress(epoch, x, loss);
        b1t *= opt.beta1;
        b2t *= opt.beta2;
        m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
        v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
        for (long i = 0; i < x.size(); ++i) {
            const double mhat = m(i) / (1.0 - b1t);
            const double vhat = v(i) / (1.0 - b2t);
            x(i) -= lr * mhat / (std::sqrt(vhat) + opt.eps);
        }
        if (epoch >= opt.lr_decay_start)
            lr *= opt.lr_decay;
    }
    DescentResult out;
    out.params = std::move(x);
    out.epochs_run = opt.epochs;
    out.loss = f(out.params, grad);
    check_finite(out.loss, grad, "adam_minimize");
    return out;
}

DescentResult rmsprop_minimize(const LossGradFn& f, RVector init,
                               const RmsPropOptions& opt, const ProgressFn& progress) {
    RVector x = std::move(init);
    RVector v = RVector::Zero(x.size());
    RVector grad(x.size());
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        double loss = f(x, grad);
        check_finite(loss, grad, "rmsprop_minimize");
        if (progress)
            progress(epoch, x, loss);
        v = opt.decay * v + (1.0 - opt.decay) * grad.cwiseProduct(grad);
        x.array() -= opt.lr * grad.array() / (v.array().sqrt() + opt.eps);
    }
    DescentResult out;
    out.params = std::move(x);
    out.epochs_run = opt.epochs;
    out.loss = f(out.params, grad);
    check_finite(out.loss, grad, "rmsprop_minimize");
    return out;
}

BfgsResult bfgs_minimize(const LossGradFn& f, RVector init, const BfgsOptions& opt) {
    const long n = init.size();
    RVector x = std::move(init);
    RVector grad(n);
    double loss = f(x, grad);
    check_finite(loss, grad, "bfgs_minimize");
    RMatrix H = RMatrix::Identity(n, n);

    BfgsResult out;
    for (int iter = 0; iter < opt.max_iters; ++iter) {
        if (grad.cwiseAbs().maxCoeff() < opt.grad_tol) {
            out.status = BfgsStatus::converged;
            out.params = std::move(x);
            out.loss = loss;
            out.iters = iter;
            return out;
        }
        RVector dir = -(H * grad);
        double slope = grad.dot(dir);
        if (slope >= 0.0) {  // lost positive definiteness; restart from steepest descent
            H.setIdentity();
            dir = -grad;
            slope = grad.dot(dir);
        }

        double step = 1.0;
        RVector x_new(n), grad_new(n);
        double loss_new = 0.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            x_new = x + step * dir;
            loss_new = f(x_new, grad_new);
            if (std::isfinite(loss_new) && grad_new.allFinite() &&
                loss_new <= loss + opt.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            out.status = BfgsStatus::stalled;
            out.params = std::move(x);
            out.loss = loss;
            out.iters = iter;
            return out;
        }

        RVector s = x_new - x;
        RVector y = grad_new - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            // (I - rho s y') H (I - rho y s') + rho s s', expanded so the
            // update stays rank-2 instead of costing two dense products
            const double rho = 1.0 / sy;
            const RVector Hy = H * y;
            const double yHy = y.dot(Hy);
            H.noalias() -= rho * (Hy * s.transpose() + s * Hy.transpose());
            H.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
        }
        x = std::move(x_new);
        grad = std::move(grad_new);
        loss = loss_new;
    }
    out.status = BfgsStatus::max_iterations;
    out.params = std::move(x);
    out.loss = loss;
    out.iters = opt.max_iters;
    return out;
}

RVector finite_diff_gradient(const LossFn& f, const RVector& x, double step) {
    RVector grad(x.size());
    RVector probe = x;
    for (long i = 0; i < x.size(); ++i) {
        const double saved = probe(i);
        probe(i) = saved + step;
        const double hi = f(probe);
        probe(i) = saved - step;
        const double lo = f(probe);
        probe(i) = saved;
        grad(i) = (hi - lo) / (2.0 * step);
    }
    return grad;
}

LossGradFn with_finite_diff(LossFn f, double step) {
    return [f = std::move(f), step](const RVector& x, RVector& grad) {
        grad = finite_diff_gradient(f, x, step);
        return f(x);
    };
}

namespace {

// golden-section search on [a, b], assuming a single interior minimum
double golden_section(const ScalarFn& f, double a, double b, double width_tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > width_tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

ScanResult scan_refine_1d(const ScalarFn& f, double lo, double hi, int n_grid, int top_k,
                          double width_tol_rel) {
    if (!(hi > lo))
        throw InvalidArgument("scan_refine_1d: empty interval");
    if (n_grid < 3)
        throw InvalidArgument("scan_refine_1d: need at least three grid points");
    std::vector<double> xs(n_grid), fs(n_grid);
    const double dx = (hi - lo) / (n_grid - 1);
    for (int i = 0; i < n_grid; ++i) {
        xs[i] = lo + i * dx;
        fs[i] = f(xs[i]);
    }

    // candidate basins: local minima of the sampled values, endpoints included
    std::vector<int> candidates;
    for (int i = 0; i < n_grid; ++i) {
        const bool left_ok = i == 0 || fs[i] <= fs[i - 1];
        const bool right_ok = i == n_grid - 1 || fs[i] <= fs[i + 1];
        if (left_ok && right_ok)
            candidates.push_back(i);
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](int a, int b) { return fs[a] < fs[b]; });
    if (static_cast<int>(candidates.size()) > top_k)
        candidates.resize(top_k);

    const double width_tol = width_tol_rel * (hi - lo);
    ScanResult best{xs[candidates[0]], fs[candidates[0]]};
    for (int i : candidates) {
        const double a = i == 0 ? lo : xs[i - 1];
        const double b = i == n_grid - 1 ? hi : xs[i + 1];
        const double x = golden_section(f, a, b, width_tol);
        const double value = f(x);
        if (value < best.value) {
            best.x = x;
            best.value = value;
        }
    }
    return best;
}

}  // namespace qpt::optim
