#pragma once

#include <array>

#include "qpt/core.hpp"

namespace qpt {

// Basis for the adjoint representation: the 4^n - 1 non-identity Pauli
// strings in lexicographic order (I < X < Y < Z per site, leftmost site most
// significant). basis_index("IX") == 0, basis_index("ZZ") == 14 for n = 2.
long pauli_basis_size(int n_qubits);
std::string basis_label(int n_qubits, long index);
long basis_index(const std::string& labels);

// r_alpha = <psi| sigma^alpha |psi>
RVector bloch_vector(const StateVector& psi);

// Single-qubit pure state with the given unit Bloch vector.
StateVector state_from_bloch(const RVector& r);

// Action of conjugation by U on the Pauli coefficient vector:
// entries(alpha, beta) = tr[sigma^alpha U sigma^beta U^dag] / 2^n.
// Satisfies bloch_vector(U psi) = entries * bloch_vector(psi).
struct BlochMatrix {
    int n_qubits = 0;
    RMatrix entries;

    BlochMatrix() = default;
    BlochMatrix(int n, RMatrix m);

    long dim() const { return pauli_basis_size(n_qubits); }
};

BlochMatrix bloch_map(const UnitaryMatrix& U);

// ---------------------------------------------------------------------------
// Single qubit: SU(2) <-> SO(3)
// ---------------------------------------------------------------------------

// U = w I - i (x sx + y sy + z sz), normalized with w >= 0.
struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

// Accepts any U(2) matrix; the global phase is stripped first.
Quaternion quaternion_from_su2(const CMatrix& U);
CMatrix su2_from_quaternion(const Quaternion& q);

RMatrix rotation_from_quaternion(const Quaternion& q);

// Shepperd-style extraction from a proper rotation matrix.
Quaternion quaternion_from_rotation(const RMatrix& R);

// Nearest orthogonal matrix (SVD polar factor). A reflection, i.e. negative
// determinant, throws InvalidRotation.
RMatrix project_to_rotation(const RMatrix& M);

// angle * axis; for U = exp(-i h.sigma dt) this equals 2 dt h.
RVector rotation_vector_from_quaternion(const Quaternion& q);

// ---------------------------------------------------------------------------
// Two qubits: canonical decomposition U = (ua x ub) R (uc x ud)
// ---------------------------------------------------------------------------

// 15x15 adjoint matrix of a tensor product from the two 3x3 single-qubit
// blocks (bilinear, so it also accepts non-orthogonal inputs).
RMatrix kron_bloch(const RMatrix& a, const RMatrix& b);

// Interaction part R = exp(-(i/2) sum_j theta_j sigma_j x sigma_j) in a
// relaxed parametrization: (c_j, s_j) stand in for (cos theta_j, sin theta_j)
// but are free to leave the circle during optimization.
struct EntanglementAngles {
    std::array<double, 3> c{1.0, 1.0, 1.0};
    std::array<double, 3> s{0.0, 0.0, 0.0};

    static EntanglementAngles from_angles(const std::array<double, 3>& theta);
};

RMatrix entanglement_bloch(const EntanglementAngles& ang);
UnitaryMatrix entanglement_gate(const std::array<double, 3>& theta);

// ---------------------------------------------------------------------------
// Recovering generators
// ---------------------------------------------------------------------------

// Nearest unitary consistent with a 15x15 adjoint matrix, via the top
// eigenvector of the Choi matrix. The global phase is arbitrary.
UnitaryMatrix su4_from_bloch(const RMatrix& T);

// Hermitian H with exp(-i H dt) = U (up to global phase), choosing the log
// branch that minimizes the norm of the traceless part. Faithful only while
// the eigenphase spread stays under 2 pi.
CMatrix principal_log_hamiltonian(const UnitaryMatrix& U, double dt);

// Pauli coefficients of a Hermitian matrix (identity component dropped):
// out(alpha) = tr[sigma^alpha H] / 2^n.
RVector pauli_coefficients(const CMatrix& H, int n_qubits);

}  // namespace qpt
