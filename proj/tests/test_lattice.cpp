#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qpt/lattice.hpp"
#include "qpt/sampling.hpp"
#include "oracles.hpp"

using namespace qpt;
using namespace qpt::lattice;

namespace {

const Eigen::Vector3d kField(0.5, -0.8, 1.1);

double state_distance(const StateVector& a, const StateVector& b) {
    return (a.amplitudes - b.amplitudes).norm();
}

}  // namespace

TEST_CASE("lattice: edge builder counts nearest neighbors once") {
    CHECK(lattice_edges(3, 4, true).size() == 24);
    CHECK(lattice_edges(1, 2, false).size() == 1);
    CHECK(lattice_edges(2, 3, true).size() == 9);
    CHECK(lattice_edges(2, 2, true).size() == 4);  // wrap edges collapse onto open ones
    CHECK(lattice_edges(1, 1, true).empty());      // wrap-around self-loops dropped
    CHECK(lattice_edges(1, 5, false).size() == 4);

    const auto edges = lattice_edges(3, 4, true);
    CHECK(std::is_sorted(edges.begin(), edges.end()));
    for (const Edge& e : edges)
        CHECK(e.first < e.second);

    CHECK_THROWS_AS(lattice_edges(0, 3, false), InvalidArgument);
    CHECK_THROWS_AS(make_uniform_lattice(4, 4, true, 1.0, kField), ResourceLimit);
    CHECK_THROWS_AS(make_edge(2, 2), InvalidArgument);
    CHECK(make_edge(5, 2) == Edge{2, 5});
}

TEST_CASE("lattice: disordered instances are seeded draws from the stated laws") {
    const LatticeSpec a = make_disordered_lattice(3, 4, true, 77);
    const LatticeSpec b = make_disordered_lattice(3, 4, true, 77);
    const LatticeSpec c = make_disordered_lattice(3, 4, true, 78);

    CHECK_FALSE(a.uniform);
    CHECK(a.couplings == b.couplings);
    CHECK(a.couplings != c.couplings);
    for (const auto& [edge, J] : a.couplings) {
        CHECK(J >= 0.8);
        CHECK(J <= 1.2);
    }
    double x_spread = 0.0;
    for (const auto& [site, h] : a.fields) {
        CHECK(h.y() == 0.0);
        CHECK(h.z() == 0.0);
        x_spread = std::max(x_spread, std::abs(h.x()));
    }
    CHECK(x_spread > 0.05);  // a half-unit normal is essentially never this flat
}

TEST_CASE("lattice: hamiltonian assembles coupling and field terms") {
    LatticeSpec spec = make_uniform_lattice(1, 2, false, 0.7, kField);
    const PauliSumOperator H = lattice_hamiltonian(spec);
    CHECK(H.terms.size() == 7);  // one coupling, three field components per site

    CMatrix expected = -0.7 * oracle::pauli_string("ZZ");
    const char axes[] = {'X', 'Y', 'Z'};
    for (int k = 0; k < 3; ++k) {
        std::string left{axes[k], 'I'}, right{'I', axes[k]};
        expected -= kField[k] * (oracle::pauli_string(left) + oracle::pauli_string(right));
    }
    CHECK((dense_matrix(H) - expected).norm() < 1e-14);

    const LatticeSpec dis = make_disordered_lattice(2, 3, true, 5);
    // x-only disorder: one term per edge plus one per site
    CHECK(lattice_hamiltonian(dis).terms.size() == dis.edges.size() + dis.n_sites());
}

TEST_CASE("lattice: trotter circuit layout and trivial limits") {
    const LatticeSpec chain = make_uniform_lattice(1, 5, false, 1.0, kField);
    CHECK(make_trotter_circuit(chain, 0.2).gate_count() == 14);  // 5 + 4 + 5 per step
    const LatticeSpec grid = make_uniform_lattice(3, 4, true, 1.0, kField);
    CHECK(make_trotter_circuit(grid, 0.2).gate_count() == 48);

    const LatticeSpec off = make_uniform_lattice(2, 2, false, 0.0, Eigen::Vector3d::Zero());
    const StateVector psi = random_state(4, 3);
    const StateVector out = apply_trotter(make_trotter_circuit(off, 0.3), psi, 7);
    CHECK(state_distance(out, psi) == 0.0);

    CHECK_THROWS_AS(make_trotter_circuit(chain, 0.0), InvalidArgument);
    CHECK_THROWS_AS(make_trotter_circuit(chain, -0.1), InvalidArgument);
    const TrotterCircuit circ = make_trotter_circuit(chain, 0.2);
    CHECK_THROWS_AS(apply_trotter(circ, random_state(3, 1), 1), InvalidArgument);
    CHECK_THROWS_AS(apply_trotter(circ, random_state(5, 1), -1), InvalidArgument);

    LatticeSpec broken = chain;
    broken.couplings.erase(broken.couplings.begin());
    CHECK_THROWS_AS(make_trotter_circuit(broken, 0.2), InvalidArgument);
}

TEST_CASE("lattice: trotter step preserves norm and tracks the propagator") {
    const LatticeSpec dis = make_disordered_lattice(2, 3, true, 9);
    StateVector psi = random_state(6, 10);
    psi = apply_trotter(make_trotter_circuit(dis, 0.25), psi, 50);
    CHECK(std::abs(psi.amplitudes.norm() - 1.0) < 1e-12);

    // One-step error against the exact propagator shrinks as the cube of the
    // step: slope of the log-log fit near 3.
    const LatticeSpec spec = make_uniform_lattice(2, 2, true, 1.0, kField);
    const PauliSumOperator H = lattice_hamiltonian(spec);
    const StateVector psi0 = random_state(4, 42);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double steps[] = {0.4, 0.2, 0.1, 0.05};
    for (double dt : steps) {
        const StateVector trot = apply_trotter(make_trotter_circuit(spec, dt), psi0, 1);
        const StateVector exact = krylov_evolve(H, psi0, dt, 1e-13);
        const double x = std::log(dt), y = std::log(state_distance(trot, exact));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = 4.0;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope > 2.8);
    CHECK(slope < 3.2);

    // Halving the step divides the one-step error by about eight.
    const LatticeSpec pair = make_uniform_lattice(1, 2, false, 1.0, kField);
    const PauliSumOperator Hp = lattice_hamiltonian(pair);
    const StateVector phi0 = random_state(2, 7);
    const double e1 = state_distance(apply_trotter(make_trotter_circuit(pair, 0.2), phi0, 1),
                                     krylov_evolve(Hp, phi0, 0.2, 1e-13));
    const double e2 = state_distance(apply_trotter(make_trotter_circuit(pair, 0.1), phi0, 1),
                                     krylov_evolve(Hp, phi0, 0.1, 1e-13));
    CHECK(e1 / e2 > 7.0);
    CHECK(e1 / e2 < 9.0);
}

TEST_CASE("lattice: coupling gate order is irrelevant") {
    const LatticeSpec spec = make_disordered_lattice(2, 3, true, 13);
    LatticeSpec shuffled = spec;
    std::reverse(shuffled.edges.begin(), shuffled.edges.end());
    const StateVector psi0 = random_state(6, 14);
    const StateVector a = apply_trotter(make_trotter_circuit(spec, 0.2), psi0, 3);
    const StateVector b = apply_trotter(make_trotter_circuit(shuffled, 0.2), psi0, 3);
    CHECK(state_distance(a, b) < 1e-12);
}

TEST_CASE("lattice: kl divergence is a clamped divergence") {
    RVector p(2), q(2);
    p << 0.3, 0.7;
    CHECK(kl_divergence(p, p) == 0.0);

    p << 1.0, 0.0;
    q << 0.5, 0.5;
    CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(kl_divergence(q, p) > 0.0);  // zero model entry hits the clamp...
    CHECK(std::isfinite(kl_divergence(q, p)));  // ...instead of log(0)

    Rng rng(55);
    RVector u(8), v(8);
    for (int i = 0; i < 8; ++i) {
        u[i] = rng.uniform(0.01, 1.0);
        v[i] = rng.uniform(0.01, 1.0);
    }
    u /= u.sum();
    v /= v.sum();
    CHECK(kl_divergence(u, v) > 0.0);
    CHECK(kl_divergence(u, u) == 0.0);

    RVector w(3);
    CHECK_THROWS_AS(kl_divergence(p, w), InvalidArgument);
}

TEST_CASE("lattice: parameter vectors round-trip") {
    const LatticeSpec uni = make_uniform_lattice(2, 2, true, 1.3, kField);
    CHECK(parameter_count(uni) == 4);
    RVector packed = pack_parameters(uni);
    CHECK(packed[0] == 1.3);
    CHECK((packed.segment(1, 3) - kField).norm() == 0.0);

    RVector fresh(4);
    fresh << 0.4, -0.1, 0.2, 0.9;
    const LatticeSpec refit = with_parameters(uni, fresh);
    for (const Edge& e : refit.edges)
        CHECK(refit.couplings.at(e) == 0.4);
    CHECK((pack_parameters(refit) - fresh).norm() == 0.0);

    const LatticeSpec dis = make_disordered_lattice(2, 3, true, 99);
    CHECK(parameter_count(dis) == 15);  // 9 couplings + 6 site fields
    RVector values(15);
    for (int i = 0; i < 15; ++i)
        values[i] = 0.1 * (i + 1);
    CHECK((pack_parameters(with_parameters(dis, values)) - values).norm() == 0.0);

    CHECK_THROWS_AS(with_parameters(dis, fresh), InvalidArgument);
}

TEST_CASE("lattice: loss sits on a positive floor that shrinks with the step") {
    const LatticeSpec spec = make_uniform_lattice(2, 3, true, 1.0, kField);
    const PauliSumOperator H = lattice_hamiltonian(spec);
    const StateVector psi0 = random_state(6, 11);
    const auto reference = reference_distributions(H, psi0, 0.2, 3);
    REQUIRE(reference.size() == 3);

    const RVector truth = pack_parameters(spec);
    const double floor = lattice_loss(truth, spec, 0.2, psi0, reference);
    CHECK(floor > 0.0);  // the splitting never reproduces the exact state

    // Hand-rolled equivalent of the loss: one circuit step per reference time.
    {
        const TrotterCircuit circ = make_trotter_circuit(spec, 0.2);
        StateVector psi = psi0;
        double total = 0.0;
        for (const RVector& target : reference) {
            psi = apply_trotter(circ, psi, 1);
            total += kl_divergence(target, born_distribution(psi));
        }
        CHECK(floor == doctest::Approx(total).epsilon(1e-14));
    }

    // Reaching the same physical times with a halved step shrinks the floor
    // by roughly 2^4: the accumulated state error is quadratic in the step
    // and the divergence is quadratic in the state error.
    double prev = floor;
    for (int halvings = 1; halvings <= 2; ++halvings) {
        const double dt = 0.2 / (1 << halvings);
        const TrotterCircuit circ = make_trotter_circuit(spec, dt);
        StateVector psi = psi0;
        double loss = 0.0;
        for (const RVector& target : reference) {
            psi = apply_trotter(circ, psi, 1 << halvings);
            loss += kl_divergence(target, born_distribution(psi));
        }
        const double ratio = prev / loss;
        CHECK(ratio > 10.0);
        CHECK(ratio < 25.0);
        prev = loss;
    }

    CHECK_THROWS_AS(lattice_loss(truth, spec, 0.2, psi0, {}), InvalidArgument);
    CHECK_THROWS_AS(reference_distributions(H, psi0, 0.2, 0), InvalidArgument);
}

TEST_CASE("lattice: reconstruction recovers uniform parameters") {
    const LatticeSpec truth = make_uniform_lattice(2, 3, true, 1.0, kField);
    const PauliSumOperator H = lattice_hamiltonian(truth);
    const StateVector psi0 = random_state(6, 31);
    const LatticeOptions opt;
    const auto reference = reference_distributions(H, psi0, opt.dt, opt.time_points);

    const LatticeResult res = reconstruct_lattice(reference, psi0, truth, opt, 32, &truth);
    const LatticeErrors err = relative_errors(truth, res.params);
    CHECK(err.coupling < 0.05);
    CHECK(err.field < 0.05);
    CHECK(res.loss_history.size() == 500);
    CHECK(res.coupling_error_history.size() == 500);
    CHECK(res.field_error_history.size() == 500);
    CHECK(res.loss_history.front() > 100.0 * res.loss_history.back());
    CHECK(res.loss < res.loss_history.front());

    // Without ground truth only the loss curve is recorded.
    const LatticeResult blind = reconstruct_lattice(reference, psi0, truth, opt, 32);
    CHECK(blind.coupling_error_history.empty());
    CHECK((blind.params - res.params).norm() == 0.0);  // same seed, same trajectory
}

TEST_CASE("lattice: reconstruction recovers disordered parameters") {
    const LatticeSpec truth = make_disordered_lattice(2, 3, true, 21);
    const PauliSumOperator H = lattice_hamiltonian(truth);
    const StateVector psi0 = random_state(6, derive_seed(21, 1));
    const LatticeOptions opt;
    const auto reference = reference_distributions(H, psi0, opt.dt, opt.time_points);

    const LatticeResult res =
        reconstruct_lattice(reference, psi0, truth, opt, derive_seed(21, 2), &truth);
    const LatticeErrors err = relative_errors(truth, res.params);
    CHECK(err.coupling < 0.10);
    CHECK(err.field < 0.10);
    CHECK(res.loss < 1e-3);
}
