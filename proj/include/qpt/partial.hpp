#pragma once

#include <cstdint>
#include <vector>

#include "qpt/core.hpp"
#include "qpt/sampling.hpp"

namespace qpt::partial {

// The three Pauli observables on the measured qubit (qubit 0), identity on
// the hidden one.
const std::vector<Observable>& measured_observables();

// Probing plan: two known two-qubit input states, read out through the
// measured qubit only, on a geometric time schedule.
struct PartialSetup {
    std::vector<StateVector> states;
    std::vector<double> times;
    int restarts = 10;
};

// Default schedule matching the reconstruction experiments: 12 points,
// t_q = 0.2 * 1.15^q.
std::vector<double> default_schedule();

// Requires exactly two two-qubit states that are actually distinguishable
// (fidelity below 1 - 1e-6), a strictly increasing geometric schedule with a
// constant ratio, and at least one restart. Throws InvalidArgument.
void validate_setup(const PartialSetup& setup);

// Mean squared error between the recorded values and the expectations of the
// measured observables under exp(-i H t), where H is the traceless two-qubit
// operator with the given 15 coefficients. The trajectory must hold exactly
// one record per (state, observable, schedule time) combination.
double partial_loss(const RVector& h_params, const PartialSetup& setup,
                    const Trajectory& traj);

struct PartialOptions {
    double lr = 0.05;
    int epochs = 3000;
    double fd_step = 1e-6;  // central-difference step for both descent stages
};

struct PartialResult {
    RVector coefficients;  // recovered Pauli coefficients, basis order
    double loss = 0.0;     // winning restart, after the polish stage
    int winner = -1;
    std::vector<double> restart_losses;  // post-polish, one per restart
    std::vector<double> loss_history;    // winning restart's descent, per epoch
};

// Multi-start fit of the 15-parameter ansatz: each restart draws a standard
// normal starting vector from derive_seed(seed, restart), runs Adam with
// central finite-difference gradients, then polishes with BFGS. The lowest
// final loss wins, ties broken by restart index. Restarts whose descent
// diverges are recorded with an infinite loss; if every restart diverges the
// call throws OptimizationFailure.
PartialResult reconstruct_partial(const Trajectory& traj, const PartialSetup& setup,
                                  const PartialOptions& opt, std::uint64_t seed);

}  // namespace qpt::partial
