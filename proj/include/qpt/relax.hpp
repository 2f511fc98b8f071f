#pragma once

#include <cstdint>
#include <vector>

#include "qpt/bloch.hpp"
#include "qpt/core.hpp"
#include "qpt/sampling.hpp"

namespace qpt::relax {

enum class Mode { single_qubit, two_qubit };

// Adjoint-picture propagators at the delay times dt * 2^q, relaxed to plain
// real matrices. Single-qubit mode keeps every chain entry free. Two-qubit
// mode pins the first entry to the composed form
//   kron_bloch(ua, ub) * entanglement_bloch(angles) * kron_bloch(uc, ud)
// so a genuine SU(4) conjugation underlies it; only the later entries are
// free 15x15 matrices. Orthogonality, chain-consistency, and angle-circle
// penalties pull the relaxed variables back onto the true manifold.
struct RelaxParams {
    Mode mode = Mode::single_qubit;
    std::vector<RMatrix> free_chain;  // single: U_0..U_{Q-1}; two: U_1..U_{Q-1}
    RMatrix ua, ub, uc, ud;           // two-qubit factor blocks, 3x3
    EntanglementAngles angles;        // two-qubit relaxed (c, s) pairs

    int n_points() const {
        const int free = static_cast<int>(free_chain.size());
        return mode == Mode::single_qubit ? free : free + 1;
    }
    long matrix_dim() const { return mode == Mode::single_qubit ? 3 : 15; }
};

// U_0: the composed gate in two-qubit mode, the first free matrix otherwise.
RMatrix u0_matrix(const RelaxParams& p);

// All Q propagator matrices, with U_0 composed when needed.
std::vector<RMatrix> full_chain(const RelaxParams& p);

// Measurement table digested from a trajectory: every record becomes a
// (chain index, adjoint basis axis, value) triple. Requires a single initial
// state, Pauli-string observables, and times on the dt * 2^q grid.
struct DataPoint {
    int q = 0;
    long axis = 0;
    double value = 0.0;
};
struct RelaxData {
    int n_qubits = 0;
    int n_points = 0;
    std::vector<DataPoint> points;
};
RelaxData make_relax_data(const Trajectory& traj, double dt);

// Penalty terms. loss_orth covers every free matrix (factor blocks included
// in two-qubit mode); loss_steps ties each chain entry to the square of its
// predecessor; loss_theta keeps the relaxed angle pairs on the unit circle;
// loss_data is the mean squared error against the measurement table, using
// that expectation values are linear in the adjoint matrix.
double loss_orth(const RelaxParams& p);
double loss_steps(const RelaxParams& p);
double loss_theta(const EntanglementAngles& ang);
double loss_data(const RelaxParams& p, const RelaxData& data, const RVector& r0);

struct RelaxWeights {
    double data = 1.0;
    double orth = 1.0;
    double steps = 1.0;
    double theta = 1.0;
};

double total_loss(const RelaxParams& p, const RelaxData& data, const RVector& r0,
                  const RelaxWeights& w);

// Analytic gradient of the weighted total, shaped like the parameters.
// Returns the loss value.
double total_loss_grad(const RelaxParams& p, const RelaxData& data, const RVector& r0,
                       const RelaxWeights& w, RelaxParams& grad);

// Flat view for the descent loop; unpack_params is the exact inverse of
// pack_params for a matching shape.
int parameter_count(const RelaxParams& shape);
RVector pack_params(const RelaxParams& p);
RelaxParams unpack_params(const RelaxParams& shape, const RVector& x);

// Identity matrices plus seeded Gaussian entries of scale `noise`; angle
// pairs start near (1, 0).
RelaxParams initial_params(Mode mode, int n_points, double noise, std::uint64_t seed);

struct RelaxOptions {
    double lr = 0.01;
    double lr_decay = 1.0;
    int lr_decay_start = 0;
    int epochs = 5000;
    double init_noise = 0.01;
    int restarts = 1;      // independent seeded descents; the lowest loss wins
    int polish_iters = 0;  // BFGS steps refining the winning restart
    RelaxWeights weights;
};

struct RelaxResult {
    RelaxParams params;
    double loss = 0.0;
    std::vector<double> loss_history;  // per epoch, pre-update; winning restart
};

// Adam descent on the weighted total loss from a near-identity start. With
// restarts > 1, runs that many descents from distinct seeded inits and keeps
// the one with the lowest final loss. With polish_iters > 0, every restart
// is refined by BFGS with the analytic gradient before the comparison; the
// loss history still traces the winning descent only.
RelaxResult optimize_relax(Mode mode, const Trajectory& traj, const StateVector& psi0,
                           double dt, const RelaxOptions& opt, std::uint64_t seed);

// Hamiltonian generating U_0 over one time step. Single-qubit mode projects
// U_0 to a rotation and reads h off the rotation vector. Two-qubit mode
// projects the factor blocks and angles to a valid point, composes the SU(4)
// gate, takes its principal log as a starting guess, and then fits the 15
// Pauli coefficients to the raw U_0 with BFGS. If `branch_warning` is given
// it is set when the generator sits close enough to the log branch cut that
// the principal choice is no longer trustworthy.
PauliSumOperator extract_hamiltonian(const RelaxParams& p, double dt,
                                     bool* branch_warning = nullptr);

}  // namespace qpt::relax
