#include "qpt/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qpt/sampling.hpp"

namespace qpt::lattice {

namespace {

void check_grid(int rows, int cols) {
    if (rows < 1 || cols < 1)
        throw InvalidArgument("lattice: rows and cols must be positive");
    if (rows * cols > kMaxDenseQubits)
        throw ResourceLimit("lattice: site count exceeds the dense-state limit");
}

// One 2x2 gate on `site`, acting through the bit at position n-1-site.
void apply_single(CVector& amps, int n, int site, const Eigen::Matrix2cd& g) {
    const std::size_t stride = std::size_t{1} << (n - 1 - site);
    const std::size_t dim = amps.size();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t off = 0; off < stride; ++off) {
            const std::size_t i0 = base + off;
            const std::size_t i1 = i0 + stride;
            const Complex a0 = amps[i0];
            const Complex a1 = amps[i1];
            amps[i0] = g(0, 0) * a0 + g(0, 1) * a1;
            amps[i1] = g(1, 0) * a0 + g(1, 1) * a1;
        }
    }
}

void apply_coupling(CVector& amps, int n, const Edge& e, Complex aligned, Complex opposed) {
    const int shift_a = n - 1 - e.first;
    const int shift_b = n - 1 - e.second;
    const std::size_t dim = amps.size();
    for (std::size_t i = 0; i < dim; ++i) {
        const bool same = (((i >> shift_a) ^ (i >> shift_b)) & 1u) == 0;
        amps[i] *= same ? aligned : opposed;
    }
}

}  // namespace

Edge make_edge(int a, int b) {
    if (a == b)
        throw InvalidArgument("lattice: an edge cannot join a site to itself");
    return a < b ? Edge{a, b} : Edge{b, a};
}

std::vector<Edge> lattice_edges(int rows, int cols, bool periodic) {
    check_grid(rows, cols);
    std::set<Edge> edges;
    auto site = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int right_c = (c + 1 < cols) ? c + 1 : (periodic ? 0 : -1);
            if (right_c >= 0 && right_c != c)
                edges.insert(make_edge(site(r, c), site(r, right_c)));
            const int down_r = (r + 1 < rows) ? r + 1 : (periodic ? 0 : -1);
            if (down_r >= 0 && down_r != r)
                edges.insert(make_edge(site(r, c), site(down_r, c)));
        }
    }
    return {edges.begin(), edges.end()};
}

LatticeSpec make_uniform_lattice(int rows, int cols, bool periodic, double coupling,
                                 const Eigen::Vector3d& field) {
    check_grid(rows, cols);
    LatticeSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.periodic = periodic;
    spec.uniform = true;
    spec.edges = lattice_edges(rows, cols, periodic);
    for (const Edge& e : spec.edges)
        spec.couplings[e] = coupling;
    for (int j = 0; j < spec.n_sites(); ++j)
        spec.fields[j] = field;
    return spec;
}

LatticeSpec make_disordered_lattice(int rows, int cols, bool periodic, std::uint64_t seed) {
    check_grid(rows, cols);
    LatticeSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.periodic = periodic;
    spec.uniform = false;
    spec.edges = lattice_edges(rows, cols, periodic);
    Rng rng(seed);
    for (const Edge& e : spec.edges)
        spec.couplings[e] = rng.uniform(0.8, 1.2);
    for (int j = 0; j < spec.n_sites(); ++j)
        spec.fields[j] = Eigen::Vector3d(0.5 * rng.normal(), 0.0, 0.0);
    return spec;
}

PauliSumOperator lattice_hamiltonian(const LatticeSpec& spec) {
    const int n = spec.n_sites();
    PauliSumOperator H(n);
    for (const Edge& e : spec.edges) {
        std::string labels(n, 'I');
        labels[e.first] = 'Z';
        labels[e.second] = 'Z';
        H.add_term(labels, -spec.couplings.at(e));
    }
    for (int j = 0; j < n; ++j) {
        const Eigen::Vector3d& h = spec.fields.at(j);
        for (int axis = 0; axis < 3; ++axis) {
            if (h[axis] == 0.0)
                continue;
            std::string labels(n, 'I');
            labels[j] = "XYZ"[axis];
            H.add_term(labels, -h[axis]);
        }
    }
    return H;
}

int TrotterCircuit::gate_count() const {
    return 2 * spec.n_sites() + static_cast<int>(spec.edges.size());
}

TrotterCircuit make_trotter_circuit(const LatticeSpec& spec, double dt) {
    check_grid(spec.rows, spec.cols);
    if (!(dt > 0.0))
        throw InvalidArgument("lattice: time step must be positive");
    if (spec.couplings.size() != spec.edges.size())
        throw InvalidArgument("lattice: every edge needs a coupling");
    if (spec.fields.size() != static_cast<std::size_t>(spec.n_sites()))
        throw InvalidArgument("lattice: every site needs a field vector");

    TrotterCircuit circ;
    circ.spec = spec;
    circ.dt = dt;

    // The Hamiltonian carries minus signs on both sums, so exp(-i H dt)
    // splits into gates with positive phases: exp(+i dt/2 h.sigma) per site
    // and exp(+i dt J sz sz) per edge.
    circ.half_rotations.reserve(spec.n_sites());
    for (int j = 0; j < spec.n_sites(); ++j) {
        const Eigen::Vector3d h = spec.fields.at(j);
        const double norm = h.norm();
        Eigen::Matrix2cd g = Eigen::Matrix2cd::Identity();
        if (norm > 0.0) {
            const Eigen::Vector3d axis = h / norm;
            const double a = 0.5 * dt * norm;
            const double ca = std::cos(a), sa = std::sin(a);
            g(0, 0) = Complex(ca, sa * axis.z());
            g(0, 1) = Complex(sa * axis.y(), sa * axis.x());
            g(1, 0) = Complex(-sa * axis.y(), sa * axis.x());
            g(1, 1) = Complex(ca, -sa * axis.z());
        }
        circ.half_rotations.push_back(g);
    }
    circ.phase_aligned.reserve(spec.edges.size());
    circ.phase_opposed.reserve(spec.edges.size());
    for (const Edge& e : spec.edges) {
        const double J = spec.couplings.at(e);
        circ.phase_aligned.push_back(std::polar(1.0, dt * J));
        circ.phase_opposed.push_back(std::polar(1.0, -dt * J));
    }
    return circ;
}

StateVector apply_trotter(const TrotterCircuit& circ, StateVector psi, int steps) {
    const int n = circ.spec.n_sites();
    if (psi.n_qubits != n)
        throw InvalidArgument("apply_trotter: state size does not match the lattice");
    if (steps < 0)
        throw InvalidArgument("apply_trotter: step count must be nonnegative");
    for (int s = 0; s < steps; ++s) {
        for (int j = 0; j < n; ++j)
            apply_single(psi.amplitudes, n, j, circ.half_rotations[j]);
        for (std::size_t k = 0; k < circ.spec.edges.size(); ++k)
            apply_coupling(psi.amplitudes, n, circ.spec.edges[k], circ.phase_aligned[k],
                           circ.phase_opposed[k]);
        for (int j = 0; j < n; ++j)
            apply_single(psi.amplitudes, n, j, circ.half_rotations[j]);
    }
    return psi;
}

double kl_divergence(const RVector& p, const RVector& q) {
    if (p.size() != q.size())
        throw InvalidArgument("kl_divergence: distributions differ in length");
    constexpr double kFloor = 1e-12;
    double sum = 0.0;
    for (long j = 0; j < p.size(); ++j) {
        if (p[j] <= 0.0)
            continue;
        sum += p[j] * std::log(p[j] / std::max(q[j], kFloor));
    }
    return sum;
}

int parameter_count(const LatticeSpec& spec) {
    if (spec.uniform)
        return 4;
    return static_cast<int>(spec.edges.size()) + spec.n_sites();
}

RVector pack_parameters(const LatticeSpec& spec) {
    RVector params(parameter_count(spec));
    if (spec.uniform) {
        params[0] = spec.edges.empty() ? 0.0 : spec.couplings.at(spec.edges.front());
        params.segment(1, 3) = spec.fields.at(0);
        return params;
    }
    long k = 0;
    for (const Edge& e : spec.edges)
        params[k++] = spec.couplings.at(e);
    for (int j = 0; j < spec.n_sites(); ++j)
        params[k++] = spec.fields.at(j).x();
    return params;
}

LatticeSpec with_parameters(const LatticeSpec& tmpl, const RVector& params) {
    if (params.size() != parameter_count(tmpl))
        throw InvalidArgument("with_parameters: wrong parameter count for this lattice");
    LatticeSpec spec = tmpl;
    if (spec.uniform) {
        for (const Edge& e : spec.edges)
            spec.couplings[e] = params[0];
        for (int j = 0; j < spec.n_sites(); ++j)
            spec.fields[j] = params.segment(1, 3);
        return spec;
    }
    long k = 0;
    for (const Edge& e : spec.edges)
        spec.couplings[e] = params[k++];
    for (int j = 0; j < spec.n_sites(); ++j)
        spec.fields[j] = Eigen::Vector3d(params[k++], 0.0, 0.0);
    return spec;
}

std::vector<RVector> reference_distributions(const PauliSumOperator& H, const StateVector& psi0,
                                             double dt, int time_points, double tol) {
    if (time_points < 1)
        throw InvalidArgument("reference_distributions: need at least one time point");
    std::vector<RVector> reference;
    reference.reserve(time_points);
    for (int k = 1; k <= time_points; ++k)
        reference.push_back(born_distribution(krylov_evolve(H, psi0, k * dt, tol)));
    return reference;
}

double lattice_loss(const RVector& params, const LatticeSpec& tmpl, double dt,
                    const StateVector& psi0, const std::vector<RVector>& reference) {
    if (reference.empty())
        throw InvalidArgument("lattice_loss: no reference distributions");
    const TrotterCircuit circ = make_trotter_circuit(with_parameters(tmpl, params), dt);
    StateVector psi = psi0;
    double loss = 0.0;
    for (const RVector& target : reference) {
        psi = apply_trotter(circ, std::move(psi), 1);
        loss += kl_divergence(target, born_distribution(psi));
    }
    return loss;
}

LatticeErrors relative_errors(const LatticeSpec& truth, const RVector& params) {
    const RVector ref = pack_parameters(truth);
    if (params.size() != ref.size())
        throw InvalidArgument("relative_errors: parameter count mismatch");
    LatticeErrors err;
    if (truth.uniform) {
        if (!truth.edges.empty())
            err.coupling = std::abs(params[0] - ref[0]) / std::abs(ref[0]);
        err.field = (params.segment(1, 3) - ref.segment(1, 3)).norm() / ref.segment(1, 3).norm();
        return err;
    }
    const long n_edges = static_cast<long>(truth.edges.size());
    for (long k = 0; k < n_edges; ++k)
        err.coupling = std::max(err.coupling, std::abs(params[k] - ref[k]) / std::abs(ref[k]));
    for (long k = n_edges; k < ref.size(); ++k)
        err.field = std::max(err.field, std::abs(params[k] - ref[k]) / std::abs(ref[k]));
    return err;
}

LatticeResult reconstruct_lattice(const std::vector<RVector>& reference, const StateVector& psi0,
                                  const LatticeSpec& tmpl, const LatticeOptions& opt,
                                  std::uint64_t seed, const LatticeSpec* truth) {
    RVector x0(parameter_count(tmpl));
    if (tmpl.uniform)
        x0 << 0.5, 0.0, 0.0, 0.5;
    else {
        x0.head(tmpl.edges.size()).setConstant(1.0);
        x0.tail(tmpl.n_sites()).setZero();
    }
    Rng rng(seed);
    for (long i = 0; i < x0.size(); ++i)
        x0[i] += opt.init_noise * rng.normal();

    const optim::LossFn loss = [&](const RVector& p) {
        return lattice_loss(p, tmpl, opt.dt, psi0, reference);
    };

    LatticeResult out;
    const optim::ProgressFn record = [&](int, const RVector& x, double value) {
        out.loss_history.push_back(value);
        if (truth != nullptr) {
            const LatticeErrors err = relative_errors(*truth, x);
            out.coupling_error_history.push_back(err.coupling);
            out.field_error_history.push_back(err.field);
        }
    };

    optim::RmsPropOptions ro;
    ro.lr = opt.lr;
    ro.epochs = opt.epochs;
    const optim::DescentResult fit =
        optim::rmsprop_minimize(optim::with_finite_diff(loss, opt.fd_step), x0, ro, record);
    out.params = fit.params;
    out.loss = fit.loss;
    return out;
}

}  // namespace qpt::lattice
