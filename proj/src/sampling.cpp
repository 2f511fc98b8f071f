#include "qpt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qpt/bloch.hpp"

namespace qpt {

std::vector<double> time_schedule(double dt, double gamma, int count) {
    if (!(dt > 0.0))
        throw InvalidArgument("time_schedule: dt must be positive");
    if (!(gamma > 0.0))
        throw InvalidArgument("time_schedule: gamma must be positive");
    if (count < 1)
        throw InvalidArgument("time_schedule: need at least one point");
    std::vector<double> times(count);
    double t = dt;
    for (int q = 0; q < count; ++q) {
        times[q] = t;
        t *= gamma;
    }
    return times;
}

int takens_point_count(int n_qubits) {
    const long d = pauli_basis_size(n_qubits);
    return static_cast<int>(2 * d + 1);
}

RVector born_distribution(const StateVector& psi) {
    return psi.amplitudes.cwiseAbs2();
}

Observable pauli_observable(const std::string& labels) {
    PauliString str(labels);  // validates
    PauliSumOperator op(str.n_qubits());
    op.add_term(labels, 1.0);
    return Observable{labels, std::move(op)};
}

Observable direction_observable(const RVector& m) {
    if (m.size() != 3)
        throw InvalidArgument("direction_observable: need a 3-vector");
    if (std::abs(m.norm() - 1.0) > 1e-9)
        throw InvalidArgument("direction_observable: direction must be unit length");
    PauliSumOperator op(1);
    op.add_term("X", m(0)).add_term("Y", m(1)).add_term("Z", m(2));
    char name[64];
    std::snprintf(name, sizeof(name), "d:%.9g,%.9g,%.9g", m(0), m(1), m(2));
    return Observable{name, std::move(op)};
}

Trajectory sample_trajectory(const PauliSumOperator& H,
                             const std::vector<StateVector>& states,
                             const std::vector<Observable>& observables,
                             const std::vector<double>& times, long shots,
                             std::uint64_t seed) {
    if (states.empty() || observables.empty() || times.empty())
        throw InvalidArgument("sample_trajectory: empty states, observables, or times");
    const int n = H.n_qubits;
    for (const auto& s : states)
        if (s.n_qubits != n)
            throw InvalidArgument("sample_trajectory: state qubit count mismatch");
    for (const auto& o : observables)
        if (o.op.n_qubits != n)
            throw InvalidArgument("sample_trajectory: observable qubit count mismatch");
    if (shots < 0)
        throw InvalidArgument("sample_trajectory: negative shot count");

    // one eigendecomposition serves every (state, time) pair
    Eigen::SelfAdjointEigenSolver<CMatrix> es(dense_matrix(H));
    if (es.info() != Eigen::Success)
        throw InvalidOperator("sample_trajectory: eigendecomposition failed");
    const CMatrix& V = es.eigenvectors();
    const RVector& lam = es.eigenvalues();

    Rng rng(seed);
    Trajectory out;
    out.n_qubits = n;
    out.records.reserve(states.size() * observables.size() * times.size());
    for (std::size_t si = 0; si < states.size(); ++si) {
        const CVector coeffs = V.adjoint() * states[si].amplitudes;
        // evolve once per time, reused across observables
        std::vector<StateVector> evolved;
        evolved.reserve(times.size());
        for (double t : times) {
            CVector phased(coeffs.size());
            for (long k = 0; k < coeffs.size(); ++k)
                phased(k) = std::exp(Complex{0.0, -lam(k) * t}) * coeffs(k);
            evolved.emplace_back(n, V * phased);
        }
        for (const auto& obs : observables) {
            for (std::size_t ti = 0; ti < times.size(); ++ti) {
                double value = expectation(evolved[ti], obs.op);
                if (shots > 0) {
                    const double p = std::clamp(0.5 * (1.0 + value), 0.0, 1.0);
                    long hits = 0;
                    for (long s = 0; s < shots; ++s)
                        if (rng.uniform() < p)
                            ++hits;
                    value = 2.0 * static_cast<double>(hits) / shots - 1.0;
                }
                out.records.push_back(
                    {static_cast<int>(si), obs.name, times[ti], value});
            }
        }
    }
    return out;
}

}  // namespace qpt
