#include "doctest.h"

#include <cmath>
#include <vector>

#include "qpt/core.hpp"
#include "qpt/optim.hpp"
#include "qpt/partial.hpp"
#include "qpt/sampling.hpp"

using namespace qpt;
using namespace qpt::partial;

namespace {

RVector random_coeffs(std::uint64_t seed) {
    Rng rng(seed);
    RVector h(15);
    for (int k = 0; k < 15; ++k)
        h[k] = rng.normal();
    return h;
}

PartialSetup two_state_setup(std::uint64_t seed) {
    PartialSetup setup;
    setup.states = {random_state(2, derive_seed(seed, 1)), random_state(2, derive_seed(seed, 2))};
    setup.times = default_schedule();
    return setup;
}

Trajectory probe(const PauliSumOperator& H, const PartialSetup& setup) {
    return sample_trajectory(H, setup.states, measured_observables(), setup.times);
}

}  // namespace

TEST_CASE("measured observables and the default schedule") {
    const std::vector<Observable>& obs = measured_observables();
    REQUIRE(obs.size() == 3);
    CHECK(obs[0].name == "XI");
    CHECK(obs[1].name == "YI");
    CHECK(obs[2].name == "ZI");
    for (const Observable& o : obs)
        CHECK(o.op.n_qubits == 2);

    const std::vector<double> times = default_schedule();
    REQUIRE(times.size() == 12);
    CHECK(times[0] == doctest::Approx(0.2).epsilon(1e-12));
    for (std::size_t q = 1; q < times.size(); ++q)
        CHECK(times[q] / times[q - 1] == doctest::Approx(1.15).epsilon(1e-12));
}

TEST_CASE("setup validation") {
    const PartialSetup good = two_state_setup(40);
    CHECK_NOTHROW(validate_setup(good));

    PartialSetup bad = good;
    bad.states.pop_back();
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);
    bad = good;
    bad.states.push_back(random_state(2, 77));
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);
    bad = good;
    bad.states[1] = random_state(1, 77);
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);
    bad = good;
    bad.states[1] = bad.states[0];
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);

    bad = good;
    bad.times = {0.2};
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);
    bad.times = {0.0, 0.1, 0.2};
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);
    bad.times = {0.4, 0.2, 0.1};
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);
    bad.times = {0.2, 0.4, 0.7};
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);

    bad = good;
    bad.restarts = 0;
    CHECK_THROWS_AS(validate_setup(bad), InvalidArgument);
}

TEST_CASE("partial loss") {
    const PartialSetup setup = two_state_setup(41);
    const RVector h = random_coeffs(410);
    const PauliSumOperator H = pauli_sum_from_coefficients(2, h);
    const Trajectory traj = probe(H, setup);

    SUBCASE("vanishes at the generating coefficients") {
        CHECK(partial_loss(h, setup, traj) < 1e-20);
    }

    SUBCASE("positive for the zero ansatz against moving data") {
        CHECK(partial_loss(RVector::Zero(15), setup, traj) > 1e-4);
    }

    SUBCASE("matches a from-scratch recomputation") {
        const RVector x = random_coeffs(411);
        const PauliSumOperator Hx = pauli_sum_from_coefficients(2, x);
        double acc = 0.0;
        for (const TrajectoryRecord& rec : traj.records) {
            const StateVector psi_t =
                evolve(setup.states[rec.state_id], expm_hermitian(Hx, rec.time));
            int axis = rec.observable == "XI" ? 0 : rec.observable == "YI" ? 1 : 2;
            const double diff =
                expectation(psi_t, measured_observables()[axis].op) - rec.value;
            acc += diff * diff;
        }
        acc /= static_cast<double>(traj.records.size());
        const double loss = partial_loss(x, setup, traj);
        CHECK(std::abs(loss - acc) <= 1e-14 * std::max(1.0, acc));
    }

    SUBCASE("rejects malformed inputs") {
        CHECK_THROWS_AS(partial_loss(RVector::Zero(14), setup, traj), InvalidArgument);

        Trajectory missing = traj;
        missing.records.pop_back();
        CHECK_THROWS_AS(partial_loss(h, setup, missing), InvalidArgument);

        Trajectory dup = traj;
        dup.records.push_back(dup.records.front());
        CHECK_THROWS_AS(partial_loss(h, setup, dup), InvalidArgument);

        Trajectory renamed = traj;
        renamed.records.front().observable = "IX";
        CHECK_THROWS_AS(partial_loss(h, setup, renamed), InvalidArgument);

        Trajectory shifted = traj;
        shifted.records.front().time *= 1.5;
        CHECK_THROWS_AS(partial_loss(h, setup, shifted), InvalidArgument);

        Trajectory foreign = traj;
        foreign.records.front().state_id = 7;
        CHECK_THROWS_AS(partial_loss(h, setup, foreign), InvalidArgument);
    }
}

TEST_CASE("identity component of the generator is invisible") {
    const PartialSetup setup = two_state_setup(42);
    const RVector h = random_coeffs(420);
    PauliSumOperator shifted = pauli_sum_from_coefficients(2, h);
    shifted.add_term("II", 0.7);
    const Trajectory traj = probe(shifted, setup);
    CHECK(partial_loss(h, setup, traj) < 1e-20);
}

TEST_CASE("finite-difference gradient matches directional slopes") {
    const PartialSetup setup = two_state_setup(43);
    const Trajectory traj = probe(pauli_sum_from_coefficients(2, random_coeffs(430)), setup);
    const optim::LossFn f = [&](const RVector& x) { return partial_loss(x, setup, traj); };
    Rng rng(431);
    for (int rep = 0; rep < 3; ++rep) {
        RVector x(15), u(15);
        for (int k = 0; k < 15; ++k) {
            x[k] = rng.normal();
            u[k] = rng.normal();
        }
        u /= u.norm();
        const RVector g = optim::finite_diff_gradient(f, x, 1e-6);
        const double slope = (f(x + 1e-6 * u) - f(x - 1e-6 * u)) / 2e-6;
        CHECK(std::abs(g.dot(u) - slope) <= 1e-5 * std::max(1.0, std::abs(slope)));
    }
}
