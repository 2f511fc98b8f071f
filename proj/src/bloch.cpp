#include "qpt/bloch.hpp"

#include <algorithm>
#include <cmath>

namespace qpt {

long pauli_basis_size(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxDenseQubits)
        throw InvalidArgument("pauli_basis_size: bad qubit count");
    return (1L << (2 * n_qubits)) - 1;
}

std::string basis_label(int n_qubits, long index) {
    if (index < 0 || index >= pauli_basis_size(n_qubits))
        throw InvalidArgument("basis_label: index out of range");
    std::string labels(n_qubits, 'I');
    long code = index + 1;
    for (int j = n_qubits - 1; j >= 0; --j) {
        labels[j] = pauli_label(static_cast<int>(code % 4));
        code /= 4;
    }
    return labels;
}

long basis_index(const std::string& labels) {
    PauliString str(labels);  // validates
    if (str.is_identity())
        throw InvalidArgument("basis_index: identity has no index");
    long code = 0;
    for (char c : labels)
        code = code * 4 + pauli_index(c);
    return code - 1;
}

namespace {

// tr(sigma_labels * M) using the one-nonzero-per-column structure of a
// Pauli string: entry (r(c), c) has value amp(c).
Complex pauli_trace_product(const std::string& labels, const CMatrix& M) {
    const int n = static_cast<int>(labels.size());
    const long dim = 1L << n;
    Complex acc{0.0, 0.0};
    for (long c = 0; c < dim; ++c) {
        long r = 0;
        Complex amp{1.0, 0.0};
        for (int j = 0; j < n; ++j) {
            const int bit = static_cast<int>((c >> (n - 1 - j)) & 1);
            int out_bit = bit;
            switch (labels[j]) {
                case 'I': break;
                case 'X': out_bit = 1 - bit; break;
                case 'Y':
                    out_bit = 1 - bit;
                    amp *= bit == 0 ? Complex{0.0, 1.0} : Complex{0.0, -1.0};
                    break;
                case 'Z':
                    if (bit == 1) amp = -amp;
                    break;
            }
            r = (r << 1) | out_bit;
        }
        acc += amp * M(c, r);
    }
    return acc;
}

}  // namespace

RVector bloch_vector(const StateVector& psi) {
    const long size = pauli_basis_size(psi.n_qubits);
    RVector r(size);
    for (long alpha = 0; alpha < size; ++alpha) {
        PauliSumOperator op(psi.n_qubits);
        op.add_term(basis_label(psi.n_qubits, alpha), 1.0);
        r(alpha) = expectation(psi, op);
    }
    return r;
}

StateVector state_from_bloch(const RVector& r) {
    if (r.size() != 3)
        throw InvalidArgument("state_from_bloch: need a 3-vector");
    if (std::abs(r.norm() - 1.0) > 1e-9)
        throw InvalidArgument("state_from_bloch: need a unit vector (pure state)");
    const double theta = std::acos(std::clamp(r(2), -1.0, 1.0));
    const double phi = std::atan2(r(1), r(0));
    CVector amps(2);
    amps(0) = std::cos(theta / 2.0);
    amps(1) = std::exp(Complex{0.0, phi}) * std::sin(theta / 2.0);
    return StateVector(1, std::move(amps));
}

BlochMatrix::BlochMatrix(int n, RMatrix m) : n_qubits(n), entries(std::move(m)) {
    const long size = pauli_basis_size(n_qubits);
    if (entries.rows() != size || entries.cols() != size)
        throw InvalidArgument("BlochMatrix: shape does not match qubit count");
}

BlochMatrix bloch_map(const UnitaryMatrix& U) {
    const int n = U.n_qubits;
    const long size = pauli_basis_size(n);
    const double scale = 1.0 / static_cast<double>(1L << n);
    RMatrix out(size, size);
    for (long beta = 0; beta < size; ++beta) {
        const CMatrix M =
            U.entries * PauliString(basis_label(n, beta)).dense() * U.entries.adjoint();
        for (long alpha = 0; alpha < size; ++alpha)
            out(alpha, beta) = scale * pauli_trace_product(basis_label(n, alpha), M).real();
    }
    return BlochMatrix(n, std::move(out));
}

Quaternion quaternion_from_su2(const CMatrix& U) {
    if (U.rows() != 2 || U.cols() != 2)
        throw InvalidArgument("quaternion_from_su2: need a 2x2 matrix");
    const Complex det = U(0, 0) * U(1, 1) - U(0, 1) * U(1, 0);
    if (std::abs(det) < 0.5)
        throw InvalidArgument("quaternion_from_su2: matrix is far from unitary");
    const Complex phase = std::sqrt(det);
    const CMatrix V = U / phase;
    Quaternion q;
    q.w = 0.5 * (V(0, 0).real() + V(1, 1).real());
    q.x = -0.5 * (V(0, 1).imag() + V(1, 0).imag());
    q.y = 0.5 * (V(1, 0).real() - V(0, 1).real());
    q.z = 0.5 * (V(1, 1).imag() - V(0, 0).imag());
    const double norm = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    double sign = 1.0;
    if (q.w < 0.0 || (q.w == 0.0 && (q.x < 0.0 || (q.x == 0.0 && (q.y < 0.0 || (q.y == 0.0 && q.z < 0.0))))))
        sign = -1.0;
    q.w *= sign / norm;
    q.x *= sign / norm;
    q.y *= sign / norm;
    q.z *= sign / norm;
    return q;
}

CMatrix su2_from_quaternion(const Quaternion& q) {
    CMatrix U(2, 2);
    U(0, 0) = Complex{q.w, -q.z};
    U(0, 1) = Complex{-q.y, -q.x};
    U(1, 0) = Complex{q.y, -q.x};
    U(1, 1) = Complex{q.w, q.z};
    return U;
}

RMatrix rotation_from_quaternion(const Quaternion& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    RMatrix R(3, 3);
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Quaternion quaternion_from_rotation(const RMatrix& R) {
    if (R.rows() != 3 || R.cols() != 3)
        throw InvalidArgument("quaternion_from_rotation: need a 3x3 matrix");
    if ((R.transpose() * R - RMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() > 1e-6 ||
        R.determinant() < 0.0)
        throw InvalidRotation("quaternion_from_rotation: not a proper rotation");

    // Shepperd: branch on the largest of 1+tr and the diagonal-based squares
    const double t = R.trace();
    Quaternion q;
    if (t >= R(0, 0) && t >= R(1, 1) && t >= R(2, 2)) {
        const double w = 0.5 * std::sqrt(1.0 + t);
        q.w = w;
        q.x = (R(2, 1) - R(1, 2)) / (4.0 * w);
        q.y = (R(0, 2) - R(2, 0)) / (4.0 * w);
        q.z = (R(1, 0) - R(0, 1)) / (4.0 * w);
    } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
        const double x = 0.5 * std::sqrt(1.0 + 2.0 * R(0, 0) - t);
        q.x = x;
        q.w = (R(2, 1) - R(1, 2)) / (4.0 * x);
        q.y = (R(0, 1) + R(1, 0)) / (4.0 * x);
        q.z = (R(0, 2) + R(2, 0)) / (4.0 * x);
    } else if (R(1, 1) >= R(2, 2)) {
        const double y = 0.5 * std::sqrt(1.0 + 2.0 * R(1, 1) - t);
        q.y = y;
        q.w = (R(0, 2) - R(2, 0)) / (4.0 * y);
        q.x = (R(0, 1) + R(1, 0)) / (4.0 * y);
        q.z = (R(1, 2) + R(2, 1)) / (4.0 * y);
    } else {
        const double z = 0.5 * std::sqrt(1.0 + 2.0 * R(2, 2) - t);
        q.z = z;
        q.w = (R(1, 0) - R(0, 1)) / (4.0 * z);
        q.x = (R(0, 2) + R(2, 0)) / (4.0 * z);
        q.y = (R(1, 2) + R(2, 1)) / (4.0 * z);
    }
    const double norm = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    double sign = 1.0;
    if (q.w < 0.0 || (q.w == 0.0 && (q.x < 0.0 || (q.x == 0.0 && (q.y < 0.0 || (q.y == 0.0 && q.z < 0.0))))))
        sign = -1.0;
    q.w *= sign / norm;
    q.x *= sign / norm;
    q.y *= sign / norm;
    q.z *= sign / norm;
    return q;
}

RMatrix project_to_rotation(const RMatrix& M) {
    if (M.rows() != 3 || M.cols() != 3)
        throw InvalidArgument("project_to_rotation: need a 3x3 matrix");
    Eigen::JacobiSVD<RMatrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RMatrix R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0.0)
        throw InvalidRotation("project_to_rotation: nearest orthogonal matrix is a reflection");
    return R;
}

RVector rotation_vector_from_quaternion(const Quaternion& q) {
    RVector v(3);
    v << q.x, q.y, q.z;
    const double s = v.norm();
    if (s < 1e-12)
        return 2.0 * v;  // small-angle limit with w ~ 1
    const double angle = 2.0 * std::atan2(s, q.w);
    return (angle / s) * v;
}

RMatrix kron_bloch(const RMatrix& a, const RMatrix& b) {
    if (a.rows() != 3 || a.cols() != 3 || b.rows() != 3 || b.cols() != 3)
        throw InvalidArgument("kron_bloch: need 3x3 blocks");
    // extend each block with the identity component, take the tensor
    // product, then drop the identity-identity row and column
    RMatrix A = RMatrix::Identity(4, 4), B = RMatrix::Identity(4, 4);
    A.block<3, 3>(1, 1) = a;
    B.block<3, 3>(1, 1) = b;
    RMatrix out(15, 15);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (i == 0 && j == 0) continue;
            for (int k = 0; k < 4; ++k)
                for (int l = 0; l < 4; ++l) {
                    if (k == 0 && l == 0) continue;
                    out(i * 4 + j - 1, k * 4 + l - 1) = A(i, k) * B(j, l);
                }
        }
    return out;
}

EntanglementAngles EntanglementAngles::from_angles(const std::array<double, 3>& theta) {
    EntanglementAngles ang;
    for (int j = 0; j < 3; ++j) {
        ang.c[j] = std::cos(theta[j]);
        ang.s[j] = std::sin(theta[j]);
    }
    return ang;
}

namespace {

// Adjoint action of exp(-(i/2) theta G) with G = sigma_j x sigma_j, in the
// relaxed (c, s) parametrization. Strings commuting with G are fixed; an
// anticommuting P goes to c P + (+/-) s P'' with P G = (+/-i) P''.
RMatrix entanglement_factor(const std::string& g_labels, double c, double s) {
    const PauliString G(g_labels);
    RMatrix F = RMatrix::Zero(15, 15);
    for (long alpha = 0; alpha < 15; ++alpha) {
        const PauliString P(basis_label(2, alpha));
        const PauliProduct pg = pauli_mul(P, G);
        const PauliProduct gp = pauli_mul(G, P);
        if (pg.phase_power == gp.phase_power) {
            F(alpha, alpha) = 1.0;
        } else {
            F(alpha, alpha) = c;
            const double coeff = pg.phase_power == 1 ? -1.0 : 1.0;  // Re(i * i^k)
            F(basis_index(pg.labels), alpha) = coeff * s;
        }
    }
    return F;
}

}  // namespace

RMatrix entanglement_bloch(const EntanglementAngles& ang) {
    return entanglement_factor("XX", ang.c[0], ang.s[0]) *
           entanglement_factor("YY", ang.c[1], ang.s[1]) *
           entanglement_factor("ZZ", ang.c[2], ang.s[2]);
}

UnitaryMatrix entanglement_gate(const std::array<double, 3>& theta) {
    PauliSumOperator H(2);
    H.add_term("XX", 0.5 * theta[0]);
    H.add_term("YY", 0.5 * theta[1]);
    H.add_term("ZZ", 0.5 * theta[2]);
    return expm_hermitian(H, 1.0);
}

UnitaryMatrix su4_from_bloch(const RMatrix& T) {
    if (T.rows() != 15 || T.cols() != 15)
        throw InvalidArgument("su4_from_bloch: need a 15x15 matrix");

    // dense Paulis including the identity at slot 0
    std::vector<CMatrix> sigma;
    sigma.push_back(CMatrix::Identity(4, 4));
    for (long alpha = 0; alpha < 15; ++alpha)
        sigma.push_back(PauliString(basis_label(2, alpha)).dense());

    RMatrix T16 = RMatrix::Zero(16, 16);
    T16(0, 0) = 1.0;
    T16.block<15, 15>(1, 1) = T;

    // Choi matrix of the channel X -> sum_ab T16(a,b) sigma_a tr(sigma_b X)/4;
    // for a unitary channel it is (a multiple of) a rank-one projector onto
    // vec(U).
    CMatrix choi = CMatrix::Zero(16, 16);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CMatrix lambda = CMatrix::Zero(4, 4);
            for (int a = 0; a < 16; ++a) {
                Complex coeff{0.0, 0.0};
                for (int b = 0; b < 16; ++b)
                    coeff += T16(a, b) * sigma[b](j, i);
                lambda += (coeff / 4.0) * sigma[a];
            }
            choi.block<4, 4>(4 * i, 4 * j) = lambda;
        }

    Eigen::SelfAdjointEigenSolver<CMatrix> es((choi + choi.adjoint()) / 2.0);
    const CVector v = es.eigenvectors().col(15);  // largest eigenvalue
    CMatrix U(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            U(k, i) = 2.0 * v(4 * i + k);

    // polish to an exact unitary
    Eigen::JacobiSVD<CMatrix> svd(U, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return UnitaryMatrix(2, svd.matrixU() * svd.matrixV().adjoint());
}

CMatrix principal_log_hamiltonian(const UnitaryMatrix& U, double dt) {
    if (dt == 0.0)
        throw InvalidArgument("principal_log_hamiltonian: dt must be nonzero");
    const long d = U.dim();
    CMatrix best;
    double best_norm = std::numeric_limits<double>::infinity();
    // the global phase of U is not physical; scan a ring of phase shifts and
    // keep the branch with the smallest traceless generator
    for (int k = 0; k < 16; ++k) {
        const Complex phase = std::exp(Complex{0.0, 2.0 * M_PI * k / 16.0});
        Eigen::ComplexSchur<CMatrix> schur(phase * U.entries);
        if (schur.info() != Eigen::Success)
            throw InvalidOperator("principal_log_hamiltonian: Schur decomposition failed");
        const CMatrix& Q = schur.matrixU();
        CVector h(d);
        for (long j = 0; j < d; ++j)
            h(j) = -std::arg(schur.matrixT()(j, j)) / dt;
        CMatrix H = Q * h.asDiagonal() * Q.adjoint();
        H = (H + H.adjoint()) / 2.0;
        H -= (H.trace() / static_cast<double>(d)) * CMatrix::Identity(d, d);
        const double norm = H.norm();
        if (norm < best_norm) {
            best_norm = norm;
            best = std::move(H);
        }
    }
    return best;
}

RVector pauli_coefficients(const CMatrix& H, int n_qubits) {
    const long size = pauli_basis_size(n_qubits);
    const long dim = 1L << n_qubits;
    if (H.rows() != dim || H.cols() != dim)
        throw InvalidArgument("pauli_coefficients: shape does not match qubit count");
    RVector out(size);
    for (long alpha = 0; alpha < size; ++alpha)
        out(alpha) =
            pauli_trace_product(basis_label(n_qubits, alpha), H).real() / static_cast<double>(dim);
    return out;
}

}  // namespace qpt
