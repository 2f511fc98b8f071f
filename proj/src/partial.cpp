#include "qpt/partial.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include <Eigen/Eigenvalues>

#include "qpt/bloch.hpp"
#include "qpt/optim.hpp"

namespace qpt::partial {

namespace {

constexpr int kCoeffs = 15;

const std::array<CMatrix, kCoeffs>& basis_matrices() {
    static const std::array<CMatrix, kCoeffs> basis = [] {
        std::array<CMatrix, kCoeffs> out;
        for (int k = 0; k < kCoeffs; ++k)
            out[k] = PauliString(basis_label(2, k)).dense();
        return out;
    }();
    return basis;
}

// Trajectory values laid out as (3 * state + observable, time index); the
// states are kept as raw amplitude vectors for the propagation below.
struct CompiledData {
    std::vector<CVector> psi;
    RMatrix values;
};

CompiledData compile_data(const PartialSetup& setup, const Trajectory& traj) {
    if (setup.states.empty())
        throw InvalidArgument("partial: setup has no input states");
    for (const StateVector& s : setup.states)
        if (s.n_qubits != 2)
            throw InvalidArgument("partial: input states must have two qubits");
    if (setup.times.empty())
        throw InvalidArgument("partial: setup has no measurement times");
    if (traj.n_qubits != 2)
        throw InvalidArgument("partial: trajectory is not two-qubit data");

    std::map<double, int> time_index;
    for (int q = 0; q < static_cast<int>(setup.times.size()); ++q)
        time_index.emplace(setup.times[q], q);

    const std::vector<Observable>& obs = measured_observables();
    const int n_states = static_cast<int>(setup.states.size());
    const int n_times = static_cast<int>(setup.times.size());

    CompiledData data;
    data.psi.reserve(n_states);
    for (const StateVector& s : setup.states)
        data.psi.push_back(s.amplitudes);
    data.values.resize(3 * n_states, n_times);

    std::vector<char> seen(static_cast<std::size_t>(3 * n_states) * n_times, 0);
    for (const TrajectoryRecord& rec : traj.records) {
        if (rec.state_id < 0 || rec.state_id >= n_states)
            throw InvalidArgument("partial: record references an unknown state");
        int axis = -1;
        for (int o = 0; o < 3; ++o)
            if (rec.observable == obs[o].name)
                axis = o;
        if (axis < 0)
            throw InvalidArgument("partial: observable " + rec.observable +
                                  " is not measured on this qubit");
        // match the record time against the schedule with a little slack so
        // values that went through text round trips still line up
        auto it = time_index.lower_bound(rec.time);
        int q = -1;
        if (it != time_index.end() && std::abs(it->first - rec.time) <= 1e-9 * rec.time)
            q = it->second;
        if (q < 0 && it != time_index.begin()) {
            auto prev = std::prev(it);
            if (std::abs(prev->first - rec.time) <= 1e-9 * rec.time)
                q = prev->second;
        }
        if (q < 0)
            throw InvalidArgument("partial: record time is not on the schedule");
        const long slot = (3 * rec.state_id + axis) * static_cast<long>(n_times) + q;
        if (seen[slot])
            throw InvalidArgument("partial: duplicate record for one measurement slot");
        seen[slot] = 1;
        data.values(3 * rec.state_id + axis, q) = rec.value;
    }
    for (const char s : seen)
        if (!s)
            throw InvalidArgument("partial: trajectory is missing measurement records");
    return data;
}

double eval_loss(const RVector& x, const CompiledData& data,
                 const std::vector<double>& times) {
    CMatrix H = CMatrix::Zero(4, 4);
    const std::array<CMatrix, kCoeffs>& basis = basis_matrices();
    for (int k = 0; k < kCoeffs; ++k)
        H.noalias() += x[k] * basis[k];
    // one eigendecomposition serves every time point of the schedule
    const Eigen::SelfAdjointEigenSolver<CMatrix> eig(H);
    const CMatrix& V = eig.eigenvectors();
    const RVector& lam = eig.eigenvalues();

    const std::vector<Observable>& obs = measured_observables();
    std::array<CMatrix, 3> om;
    for (int o = 0; o < 3; ++o)
        om[o] = dense_matrix(obs[o].op);

    double acc = 0.0;
    for (int s = 0; s < static_cast<int>(data.psi.size()); ++s) {
        const CVector a0 = V.adjoint() * data.psi[s];
        for (int q = 0; q < static_cast<int>(times.size()); ++q) {
            CVector phased(4);
            for (int j = 0; j < 4; ++j)
                phased[j] = std::exp(Complex{0.0, -lam[j] * times[q]}) * a0[j];
            const CVector psi_t = V * phased;
            for (int o = 0; o < 3; ++o) {
                const double pred = psi_t.dot(om[o] * psi_t).real();
                const double diff = pred - data.values(3 * s + o, q);
                acc += diff * diff;
            }
        }
    }
    return acc / static_cast<double>(data.values.size());
}

}  // namespace

const std::vector<Observable>& measured_observables() {
    static const std::vector<Observable> obs = {
        pauli_observable("XI"), pauli_observable("YI"), pauli_observable("ZI")};
    return obs;
}

std::vector<double> default_schedule() { return time_schedule(0.2, 1.15, 12); }

void validate_setup(const PartialSetup& setup) {
    if (setup.states.size() != 2)
        throw InvalidArgument("partial: need exactly two input states");
    for (const StateVector& s : setup.states)
        if (s.n_qubits != 2)
            throw InvalidArgument("partial: input states must have two qubits");
    const Complex overlap = setup.states[0].amplitudes.dot(setup.states[1].amplitudes);
    if (std::norm(overlap) > 1.0 - 1e-6)
        throw InvalidArgument("partial: the two input states are indistinguishable");

    if (setup.times.size() < 2)
        throw InvalidArgument("partial: schedule needs at least two times");
    if (!(setup.times.front() > 0.0))
        throw InvalidArgument("partial: schedule must start at a positive time");
    const double ratio = setup.times[1] / setup.times[0];
    if (!(ratio > 1.0))
        throw InvalidArgument("partial: schedule must be strictly increasing");
    for (std::size_t q = 2; q < setup.times.size(); ++q)
        if (std::abs(setup.times[q] / setup.times[q - 1] - ratio) > 1e-9 * ratio)
            throw InvalidArgument("partial: schedule is not geometric");

    if (setup.restarts < 1)
        throw InvalidArgument("partial: need at least one restart");
}

double partial_loss(const RVector& h_params, const PartialSetup& setup,
                    const Trajectory& traj) {
    if (h_params.size() != kCoeffs)
        throw InvalidArgument("partial: ansatz expects 15 coefficients");
    return eval_loss(h_params, compile_data(setup, traj), setup.times);
}

PartialResult reconstruct_partial(const Trajectory& traj, const PartialSetup& setup,
                                  const PartialOptions& opt, std::uint64_t seed) {
    validate_setup(setup);
    if (!(opt.lr > 0.0))
        throw InvalidArgument("partial: learning rate must be positive");
    if (opt.epochs < 1)
        throw InvalidArgument("partial: need at least one epoch");
    if (!(opt.fd_step > 0.0) || opt.fd_step > 1e-2)
        throw InvalidArgument("partial: finite-difference step out of range");
    const CompiledData data = compile_data(setup, traj);

    const optim::LossFn f = [&](const RVector& x) { return eval_loss(x, data, setup.times); };
    const optim::LossGradFn fg = optim::with_finite_diff(f, opt.fd_step);

    optim::AdamOptions ao;
    ao.lr = opt.lr;
    ao.epochs = opt.epochs;

    PartialResult result;
    result.loss = std::numeric_limits<double>::infinity();
    result.restart_losses.reserve(setup.restarts);
    for (int r = 0; r < setup.restarts; ++r) {
        Rng rng(derive_seed(seed, r));
        RVector x0(kCoeffs);
        for (int k = 0; k < kCoeffs; ++k)
            x0[k] = rng.normal();
        std::vector<double> history;
        history.reserve(opt.epochs);
        const optim::ProgressFn record = [&](int, const RVector&, double value) {
            history.push_back(value);
        };
        double final_loss = std::numeric_limits<double>::infinity();
        RVector final_x;
        try {
            const optim::DescentResult descent = optim::adam_minimize(fg, x0, ao, record);
            const optim::BfgsResult polish = optim::bfgs_minimize(fg, descent.params);
            final_loss = polish.loss;
            final_x = polish.params;
        } catch (const Divergence&) {
            // recorded as an infinite loss; the restart simply cannot win
        }
        result.restart_losses.push_back(final_loss);
        if (final_loss < result.loss) {
            result.loss = final_loss;
            result.coefficients = std::move(final_x);
            result.winner = r;
            result.loss_history = std::move(history);
        }
    }
    if (result.winner < 0)
        throw OptimizationFailure("partial: every restart diverged");
    return result;
}

}  // namespace qpt::partial
