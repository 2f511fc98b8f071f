#pragma once

#include <functional>

#include "qpt/core.hpp"

namespace qpt::optim {

// Minimum-norm solution of min ||Ax - b||_2 via a rank-revealing
// orthogonal decomposition. rank_deficient flags collapsed directions.
struct LinearLsqResult {
    RVector x;
    long rank = 0;
    bool rank_deficient = false;
};
LinearLsqResult linear_least_squares(const RMatrix& A, const RVector& b,
                                     double threshold = 1e-12);

// Loss callbacks. LossGradFn fills the gradient and returns the loss.
using LossFn = std::function<double(const RVector&)>;
using LossGradFn = std::function<double(const RVector&, RVector&)>;
using ScalarFn = std::function<double(double)>;

// Invoked once per epoch with the pre-update parameters and their loss.
using ProgressFn = std::function<void(int epoch, const RVector& x, double loss)>;

struct AdamOptions {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int epochs = 1000;
    // Per-epoch multiplicative learning-rate factor, applied from epoch
    // lr_decay_start on. Adam's steps approach lr-sized sign steps near a
    // minimum, so a fixed rate stalls at a loss floor of order lr^2; holding
    // the full rate first and then decaying lets it settle deep.
    double lr_decay = 1.0;
    int lr_decay_start = 0;
};

struct RmsPropOptions {
    double lr = 0.005;
    double decay = 0.9;
    double eps = 1e-8;
    int epochs = 500;
};

struct DescentResult {
    RVector params;
    double loss = 0.0;
    int epochs_run = 0;
};

// Bias-corrected Adam / plain RMSProp. Throw Divergence on non-finite loss
// or gradient.
DescentResult adam_minimize(const LossGradFn& f, RVector init, const AdamOptions& opt,
                            const ProgressFn& progress = {});
DescentResult rmsprop_minimize(const LossGradFn& f, RVector init,
                               const RmsPropOptions& opt,
                               const ProgressFn& progress = {});

enum class BfgsStatus { converged, max_iterations, stalled };

struct BfgsOptions {
    int max_iters = 200;
    double grad_tol = 1e-10;
    double armijo_c = 1e-4;
    int max_halvings = 50;
};

struct BfgsResult {
    RVector params;
    double loss = 0.0;
    int iters = 0;
    BfgsStatus status = BfgsStatus::converged;
};

// Dense inverse-Hessian BFGS with Armijo backtracking. A line search that
// cannot find decrease ends the run with status stalled.
BfgsResult bfgs_minimize(const LossGradFn& f, RVector init, const BfgsOptions& opt = {});

// Central differences.
RVector finite_diff_gradient(const LossFn& f, const RVector& x, double step = 1e-6);

// Adapter so loss-only objectives can feed the gradient-based minimizers.
LossGradFn with_finite_diff(LossFn f, double step = 1e-6);

struct ScanResult {
    double x = 0.0;
    double value = 0.0;
};

// Dense grid over [lo, hi] followed by golden-section refinement of the
// best top_k local basins; the final bracket width is width_tol_rel times
// the original interval.
ScanResult scan_refine_1d(const ScalarFn& f, double lo, double hi, int n_grid,
                          int top_k = 5, double width_tol_rel = 1e-12);

}  // namespace qpt::optim
