#pragma once

#include <string>
#include <vector>

#include "qpt/core.hpp"

namespace qpt {

// Geometric measurement schedule t_q = dt * gamma^q for q = 0..count-1.
std::vector<double> time_schedule(double dt, double gamma, int count);

// Delay-embedding point count 2d + 1 for the d = 4^n - 1 dimensional
// adjoint dynamics.
int takens_point_count(int n_qubits);

RVector born_distribution(const StateVector& psi);

struct Observable {
    std::string name;
    PauliSumOperator op;
};

Observable pauli_observable(const std::string& labels);

// Single-qubit observable m . sigma for a unit direction m.
Observable direction_observable(const RVector& m);

struct TrajectoryRecord {
    int state_id = 0;
    std::string observable;
    double time = 0.0;
    double value = 0.0;
};

// Expectation-value records ordered by (state, observable position, time).
struct Trajectory {
    int n_qubits = 0;
    std::vector<TrajectoryRecord> records;
};

// Evolves each state under exp(-i H t) and records the listed expectation
// values. shots = 0 gives exact values; otherwise each value averages
// `shots` two-outcome +/-1 measurements with p(+1) = (1 + <O>)/2, which is
// the physical model for Pauli strings and unit measurement directions.
Trajectory sample_trajectory(const PauliSumOperator& H,
                             const std::vector<StateVector>& states,
                             const std::vector<Observable>& observables,
                             const std::vector<double>& times, long shots = 0,
                             std::uint64_t seed = 0);

}  // namespace qpt
