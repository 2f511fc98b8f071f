#include "qpt/relax.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

#include "qpt/optim.hpp"

namespace qpt::relax {

namespace {

// Pauli-extended 4x4 block [[1, 0], [0, A]] used by the adjoint of a tensor
// product; slot 0 is the identity component.
RMatrix extend4(const RMatrix& a) {
    RMatrix e = RMatrix::Zero(4, 4);
    e(0, 0) = 1.0;
    e.block<3, 3>(1, 1) = a;
    return e;
}

// Adjoint row/column index of the two-site label pair (a, b), identity pair
// excluded.
long pair_index(int a, int b) {
    return 4 * a + b - 1;
}

// Accumulates d(loss)/dA and d(loss)/dB for P = kron_bloch(A, B) given
// d(loss)/dP. The extended blocks carry constants in their identity slots,
// so only the 3x3 interiors receive gradient.
void kron_bloch_backprop(const RMatrix& a, const RMatrix& b, const RMatrix& dp,
                         RMatrix& da, RMatrix& db) {
    const RMatrix ae = extend4(a);
    const RMatrix be = extend4(b);
    for (int j = 1; j <= 3; ++j) {
        for (int k = 1; k <= 3; ++k) {
            double acc_a = 0.0, acc_b = 0.0;
            for (int u = 0; u < 4; ++u) {
                for (int v = 0; v < 4; ++v) {
                    acc_a += dp(pair_index(j, u), pair_index(k, v)) * be(u, v);
                    acc_b += dp(pair_index(u, j), pair_index(v, k)) * ae(u, v);
                }
            }
            da(j - 1, k - 1) += acc_a;
            db(j - 1, k - 1) += acc_b;
        }
    }
}

// Each interaction factor is affine in its (c, s) pair, so three fixed
// matrices per generator describe it completely: value at (0,0) and the two
// partial derivatives.
struct FactorBasis {
    RMatrix base, dc, ds;
};

RMatrix single_factor(int j, double c, double s) {
    EntanglementAngles ang;  // the other generators stay at the identity
    ang.c[j] = c;
    ang.s[j] = s;
    return entanglement_bloch(ang);
}

const std::array<FactorBasis, 3>& factor_bases() {
    static const std::array<FactorBasis, 3> bases = [] {
        std::array<FactorBasis, 3> out;
        for (int j = 0; j < 3; ++j) {
            const RMatrix zero = single_factor(j, 0.0, 0.0);
            out[j].base = zero;
            out[j].dc = single_factor(j, 1.0, 0.0) - zero;
            out[j].ds = single_factor(j, 0.0, 1.0) - zero;
        }
        return out;
    }();
    return bases;
}

RMatrix factor_at(int j, const EntanglementAngles& ang) {
    const FactorBasis& fb = factor_bases()[j];
    return fb.base + ang.c[j] * fb.dc + ang.s[j] * fb.ds;
}

void check_alignment(const RelaxParams& p, const RelaxData& data, const RVector& r0) {
    if (data.points.empty())
        throw InvalidArgument("relax: empty measurement table");
    if (p.n_points() != data.n_points)
        throw InvalidArgument("relax: chain length does not match the measurement table");
    if (r0.size() != p.matrix_dim())
        throw InvalidArgument("relax: initial Bloch vector has the wrong dimension");
}

double orth_defect(const RMatrix& m) {
    const RMatrix s = m * m.transpose() - RMatrix::Identity(m.rows(), m.cols());
    return s.squaredNorm();
}

RelaxParams zero_like(const RelaxParams& shape) {
    RelaxParams g = shape;
    for (RMatrix& m : g.free_chain)
        m.setZero();
    if (shape.mode == Mode::two_qubit) {
        g.ua.setZero();
        g.ub.setZero();
        g.uc.setZero();
        g.ud.setZero();
        g.angles.c = {0.0, 0.0, 0.0};
        g.angles.s = {0.0, 0.0, 0.0};
    }
    return g;
}

CMatrix kron2(const CMatrix& a, const CMatrix& b) {
    CMatrix out(4, 4);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

CMatrix su2_of_block(const RMatrix& block) {
    return su2_from_quaternion(quaternion_from_rotation(project_to_rotation(block)));
}

}  // namespace

RMatrix u0_matrix(const RelaxParams& p) {
    if (p.mode == Mode::single_qubit) {
        if (p.free_chain.empty())
            throw InvalidArgument("relax: empty chain");
        return p.free_chain.front();
    }
    return kron_bloch(p.ua, p.ub) * entanglement_bloch(p.angles) * kron_bloch(p.uc, p.ud);
}

std::vector<RMatrix> full_chain(const RelaxParams& p) {
    std::vector<RMatrix> chain;
    chain.reserve(p.n_points());
    if (p.mode == Mode::two_qubit)
        chain.push_back(u0_matrix(p));
    chain.insert(chain.end(), p.free_chain.begin(), p.free_chain.end());
    if (chain.empty())
        throw InvalidArgument("relax: empty chain");
    return chain;
}

RelaxData make_relax_data(const Trajectory& traj, double dt) {
    if (traj.records.empty())
        throw InvalidArgument("relax: trajectory has no records");
    if (!(dt > 0.0))
        throw InvalidArgument("relax: time step must be positive");

    RelaxData data;
    data.n_qubits = traj.n_qubits;

    std::map<double, int> time_index;
    for (const TrajectoryRecord& rec : traj.records)
        time_index.emplace(rec.time, 0);
    data.n_points = static_cast<int>(time_index.size());
    int q = 0;
    for (auto& [time, index] : time_index) {
        const double expected = dt * static_cast<double>(1 << q);
        if (std::abs(time - expected) > 1e-9 * expected)
            throw InvalidArgument("relax: measurement times must follow the doubling grid");
        index = q++;
    }

    const int first_state = traj.records.front().state_id;
    data.points.reserve(traj.records.size());
    for (const TrajectoryRecord& rec : traj.records) {
        if (rec.state_id != first_state)
            throw InvalidArgument("relax: expected a single initial state");
        const std::string& name = rec.observable;
        if (static_cast<int>(name.size()) != traj.n_qubits ||
            name.find_first_not_of("IXYZ") != std::string::npos)
            throw InvalidArgument("relax: observables must be Pauli strings");
        if (name.find_first_not_of('I') == std::string::npos)
            throw InvalidArgument("relax: identity observable carries no signal");
        data.points.push_back({time_index.at(rec.time), basis_index(name), rec.value});
    }
    return data;
}

double loss_orth(const RelaxParams& p) {
    double sum = 0.0;
    for (const RMatrix& m : p.free_chain)
        sum += orth_defect(m);
    if (p.mode == Mode::two_qubit)
        sum += orth_defect(p.ua) + orth_defect(p.ub) + orth_defect(p.uc) + orth_defect(p.ud);
    return sum;
}

double loss_steps(const RelaxParams& p) {
    const std::vector<RMatrix> chain = full_chain(p);
    double sum = 0.0;
    for (std::size_t q = 1; q < chain.size(); ++q)
        sum += (chain[q] - chain[q - 1] * chain[q - 1]).squaredNorm();
    return sum;
}

double loss_theta(const EntanglementAngles& ang) {
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double viol = ang.c[j] * ang.c[j] + ang.s[j] * ang.s[j] - 1.0;
        sum += viol * viol;
    }
    return sum;
}

double loss_data(const RelaxParams& p, const RelaxData& data, const RVector& r0) {
    check_alignment(p, data, r0);
    const std::vector<RMatrix> chain = full_chain(p);
    std::vector<RVector> predicted(chain.size());
    for (std::size_t q = 0; q < chain.size(); ++q)
        predicted[q] = chain[q] * r0;
    double sum = 0.0;
    for (const DataPoint& pt : data.points) {
        const double resid = predicted[pt.q][pt.axis] - pt.value;
        sum += resid * resid;
    }
    return sum / static_cast<double>(data.points.size());
}

double total_loss(const RelaxParams& p, const RelaxData& data, const RVector& r0,
                  const RelaxWeights& w) {
    double loss = w.data * loss_data(p, data, r0) + w.orth * loss_orth(p) +
                  w.steps * loss_steps(p);
    if (p.mode == Mode::two_qubit)
        loss += w.theta * loss_theta(p.angles);
    return loss;
}

double total_loss_grad(const RelaxParams& p, const RelaxData& data, const RVector& r0,
                       const RelaxWeights& w, RelaxParams& grad) {
    check_alignment(p, data, r0);
    const int n_points = p.n_points();
    const long dim = p.matrix_dim();
    grad = zero_like(p);

    std::vector<RMatrix> chain = full_chain(p);
    std::vector<RMatrix> g(n_points, RMatrix::Zero(dim, dim));
    double loss = 0.0;

    // data term: residuals are linear in the chain entries
    std::vector<RVector> predicted(n_points);
    for (int q = 0; q < n_points; ++q)
        predicted[q] = chain[q] * r0;
    const double inv_count = 1.0 / static_cast<double>(data.points.size());
    double sq = 0.0;
    for (const DataPoint& pt : data.points) {
        const double resid = predicted[pt.q][pt.axis] - pt.value;
        sq += resid * resid;
        g[pt.q].row(pt.axis) += (2.0 * w.data * inv_count * resid) * r0.transpose();
    }
    loss += w.data * sq * inv_count;

    // squaring-cascade term
    for (int q = 1; q < n_points; ++q) {
        const RMatrix err = chain[q] - chain[q - 1] * chain[q - 1];
        loss += w.steps * err.squaredNorm();
        g[q] += (2.0 * w.steps) * err;
        g[q - 1] -= (2.0 * w.steps) *
                    (err * chain[q - 1].transpose() + chain[q - 1].transpose() * err);
    }

    const auto add_orth = [&](const RMatrix& m, RMatrix& gm) {
        const RMatrix s = m * m.transpose() - RMatrix::Identity(m.rows(), m.cols());
        loss += w.orth * s.squaredNorm();
        gm += (4.0 * w.orth) * (s * m);
    };

    if (p.mode == Mode::single_qubit) {
        for (int q = 0; q < n_points; ++q) {
            add_orth(chain[q], g[q]);
            grad.free_chain[q] = g[q];
        }
        return loss;
    }

    for (int q = 1; q < n_points; ++q) {
        add_orth(chain[q], g[q]);
        grad.free_chain[q - 1] = g[q];
    }
    add_orth(p.ua, grad.ua);
    add_orth(p.ub, grad.ub);
    add_orth(p.uc, grad.uc);
    add_orth(p.ud, grad.ud);

    for (int j = 0; j < 3; ++j) {
        const double viol =
            p.angles.c[j] * p.angles.c[j] + p.angles.s[j] * p.angles.s[j] - 1.0;
        loss += w.theta * viol * viol;
        grad.angles.c[j] += (4.0 * w.theta * viol) * p.angles.c[j];
        grad.angles.s[j] += (4.0 * w.theta * viol) * p.angles.s[j];
    }

    // chain gradient at entry 0 flows into the composed factors
    const RMatrix p_out = kron_bloch(p.ua, p.ub);
    const RMatrix p_in = kron_bloch(p.uc, p.ud);
    const std::array<RMatrix, 3> f = {factor_at(0, p.angles), factor_at(1, p.angles),
                                      factor_at(2, p.angles)};
    const RMatrix rb = f[0] * f[1] * f[2];

    const RMatrix& g0 = g[0];
    kron_bloch_backprop(p.ua, p.ub, g0 * (rb * p_in).transpose(), grad.ua, grad.ub);
    kron_bloch_backprop(p.uc, p.ud, (p_out * rb).transpose() * g0, grad.uc, grad.ud);

    const RMatrix drb = p_out.transpose() * g0 * p_in.transpose();
    const std::array<RMatrix, 3> df = {drb * (f[1] * f[2]).transpose(),
                                       f[0].transpose() * drb * f[2].transpose(),
                                       (f[0] * f[1]).transpose() * drb};
    for (int j = 0; j < 3; ++j) {
        grad.angles.c[j] += df[j].cwiseProduct(factor_bases()[j].dc).sum();
        grad.angles.s[j] += df[j].cwiseProduct(factor_bases()[j].ds).sum();
    }
    return loss;
}

int parameter_count(const RelaxParams& shape) {
    const long dim = shape.matrix_dim();
    long count = static_cast<long>(shape.free_chain.size()) * dim * dim;
    if (shape.mode == Mode::two_qubit)
        count += 4 * 9 + 6;
    return static_cast<int>(count);
}

RVector pack_params(const RelaxParams& p) {
    RVector x(parameter_count(p));
    long at = 0;
    const auto put = [&](const RMatrix& m) {
        x.segment(at, m.size()) = Eigen::Map<const RVector>(m.data(), m.size());
        at += m.size();
    };
    if (p.mode == Mode::two_qubit) {
        put(p.ua);
        put(p.ub);
        put(p.uc);
        put(p.ud);
        for (int j = 0; j < 3; ++j)
            x[at++] = p.angles.c[j];
        for (int j = 0; j < 3; ++j)
            x[at++] = p.angles.s[j];
    }
    for (const RMatrix& m : p.free_chain)
        put(m);
    return x;
}

RelaxParams unpack_params(const RelaxParams& shape, const RVector& x) {
    if (x.size() != parameter_count(shape))
        throw InvalidArgument("relax: flat parameter vector has the wrong length");
    RelaxParams p = shape;
    long at = 0;
    const auto take = [&](RMatrix& m) {
        m = Eigen::Map<const RMatrix>(x.segment(at, m.size()).data(), m.rows(), m.cols());
        at += m.size();
    };
    if (p.mode == Mode::two_qubit) {
        take(p.ua);
        take(p.ub);
        take(p.uc);
        take(p.ud);
        for (int j = 0; j < 3; ++j)
            p.angles.c[j] = x[at++];
        for (int j = 0; j < 3; ++j)
            p.angles.s[j] = x[at++];
    }
    for (RMatrix& m : p.free_chain)
        take(m);
    return p;
}

RelaxParams initial_params(Mode mode, int n_points, double noise, std::uint64_t seed) {
    if (n_points < 1)
        throw InvalidArgument("relax: need at least one time point");
    Rng rng(seed);
    const auto noisy_identity = [&](long dim) {
        RMatrix m = RMatrix::Identity(dim, dim);
        for (long col = 0; col < dim; ++col)
            for (long row = 0; row < dim; ++row)
                m(row, col) += noise * rng.normal();
        return m;
    };
    RelaxParams p;
    p.mode = mode;
    if (mode == Mode::single_qubit) {
        for (int q = 0; q < n_points; ++q)
            p.free_chain.push_back(noisy_identity(3));
        return p;
    }
    p.ua = noisy_identity(3);
    p.ub = noisy_identity(3);
    p.uc = noisy_identity(3);
    p.ud = noisy_identity(3);
    for (int j = 0; j < 3; ++j)
        p.angles.c[j] = 1.0 + noise * rng.normal();
    for (int j = 0; j < 3; ++j)
        p.angles.s[j] = noise * rng.normal();
    for (int q = 1; q < n_points; ++q)
        p.free_chain.push_back(noisy_identity(15));
    return p;
}

RelaxResult optimize_relax(Mode mode, const Trajectory& traj, const StateVector& psi0,
                           double dt, const RelaxOptions& opt, std::uint64_t seed) {
    const RelaxData data = make_relax_data(traj, dt);
    const int need_qubits = mode == Mode::single_qubit ? 1 : 2;
    if (data.n_qubits != need_qubits)
        throw InvalidArgument("relax: trajectory qubit count does not match the mode");
    if (psi0.n_qubits != need_qubits)
        throw InvalidArgument("relax: initial state does not match the mode");
    if (opt.restarts < 1)
        throw InvalidArgument("relax: need at least one restart");
    const RVector r0 = bloch_vector(psi0);

    optim::AdamOptions ao;
    ao.lr = opt.lr;
    ao.lr_decay = opt.lr_decay;
    ao.lr_decay_start = opt.lr_decay_start;
    ao.epochs = opt.epochs;

    RelaxResult best;
    best.loss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < opt.restarts; ++r) {
        const RelaxParams shape =
            initial_params(mode, data.n_points, opt.init_noise, derive_seed(seed, r));
        RelaxParams grad_buffer = shape;
        const optim::LossGradFn f = [&](const RVector& x, RVector& g) {
            const double loss = total_loss_grad(unpack_params(shape, x), data, r0,
                                                opt.weights, grad_buffer);
            g = pack_params(grad_buffer);
            return loss;
        };
        RelaxResult attempt;
        const optim::ProgressFn record = [&](int, const RVector&, double value) {
            attempt.loss_history.push_back(value);
        };
        const optim::DescentResult fit =
            optim::adam_minimize(f, pack_params(shape), ao, record);
        attempt.params = unpack_params(shape, fit.params);
        attempt.loss = fit.loss;
        if (opt.polish_iters > 0) {
            // polish every restart, not just the lowest Adam endpoint: a
            // restart in the right basin beats a shallower one only after
            // BFGS has driven it down
            optim::BfgsOptions bo;
            bo.max_iters = opt.polish_iters;
            const optim::BfgsResult polished =
                optim::bfgs_minimize(f, pack_params(attempt.params), bo);
            if (polished.loss < attempt.loss) {
                attempt.params = unpack_params(shape, polished.params);
                attempt.loss = polished.loss;
            }
        }
        if (attempt.loss < best.loss)
            best = std::move(attempt);
    }
    return best;
}

PauliSumOperator extract_hamiltonian(const RelaxParams& p, double dt, bool* branch_warning) {
    if (!(dt > 0.0))
        throw InvalidArgument("relax: time step must be positive");
    const RMatrix target = u0_matrix(p);
    if (std::sqrt(orth_defect(target)) > 1e-3)
        throw InvalidRotation("relax: U_0 strayed too far from the orthogonal manifold");

    if (p.mode == Mode::single_qubit) {
        const Quaternion quat = quaternion_from_rotation(project_to_rotation(target));
        const RVector rho = rotation_vector_from_quaternion(quat);
        // Half the rotation angle bounds the generator phases; at a half-turn
        // the rotation no longer pins the sign of the axis.
        if (branch_warning != nullptr)
            *branch_warning = rho.norm() > M_PI - 1e-6;
        return pauli_sum_from_coefficients(1, rho / (2.0 * dt));
    }

    std::array<double, 3> theta{};
    for (int j = 0; j < 3; ++j) {
        const double radius = std::hypot(p.angles.c[j], p.angles.s[j]);
        if (radius < 1e-9)
            throw InvalidRotation("relax: relaxed angle pair has no direction");
        theta[j] = std::atan2(p.angles.s[j], p.angles.c[j]);
    }
    const CMatrix composed = kron2(su2_of_block(p.ua), su2_of_block(p.ub)) *
                             entanglement_gate(theta).entries *
                             kron2(su2_of_block(p.uc), su2_of_block(p.ud));
    const RVector start = pauli_coefficients(
        principal_log_hamiltonian(UnitaryMatrix(2, composed), dt), 2);

    // The data pins the gate only up to eigenphase rewinds by 2*pi, so a gate
    // eigenvalue at the cut means rival generators fit equally well.  Flag that
    // from the gate spectrum itself; the fitted H may land on any one of the
    // equivalent branches and says nothing about whether the choice was forced.
    if (branch_warning != nullptr) {
        *branch_warning = false;
        const Eigen::ComplexSchur<CMatrix> schur(composed);
        if (schur.info() != Eigen::Success)
            throw InvalidOperator("relax: Schur decomposition of the gate failed");
        for (int j = 0; j < 4; ++j)
            if (std::abs(std::arg(schur.matrixT()(j, j))) > M_PI - 1e-6)
                *branch_warning = true;
    }

    const optim::LossFn fit_u0 = [&](const RVector& x) {
        const UnitaryMatrix u = expm_hermitian(pauli_sum_from_coefficients(2, x), dt);
        return (bloch_map(u).entries - target).squaredNorm();
    };
    const optim::BfgsResult fit =
        optim::bfgs_minimize(optim::with_finite_diff(fit_u0, 1e-6), start, {});

    return pauli_sum_from_coefficients(2, fit.params);
}

}  // namespace qpt::relax
