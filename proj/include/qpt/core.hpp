#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qpt/errors.hpp"

namespace qpt {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

// Dense 2^n x 2^n paths refuse anything above this.
inline constexpr int kMaxDenseQubits = 12;

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

// mt19937_64 driven uniform/normal draws with a hand-rolled Box-Muller so the
// stream does not depend on the standard library's distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal();

    // standard complex normal: Re, Im ~ N(0, 1/2) independently
    Complex complex_normal() {
        const double s = 1.0 / std::sqrt(2.0);
        double re = normal(), im = normal();
        return {s * re, s * im};
    }

    std::uint64_t integer() { return gen_(); }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Counter-based derivation of per-trial seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Normalized pure state on n qubits. Qubit 0 is the leftmost tensor factor
// (most significant bit of the basis index).
struct StateVector {
    int n_qubits = 0;
    CVector amplitudes;

    StateVector() = default;
    StateVector(int n, CVector amps);

    int dim() const { return 1 << n_qubits; }
};

// Tensor product of single-qubit Paulis, stored as a label string over
// {I, X, Y, Z}; labels[j] acts on qubit j.
struct PauliString {
    std::string labels;

    PauliString() = default;
    explicit PauliString(std::string l);

    int n_qubits() const { return static_cast<int>(labels.size()); }
    bool is_identity() const;
    CMatrix dense() const;

    bool operator==(const PauliString& other) const { return labels == other.labels; }
    bool operator<(const PauliString& other) const { return labels < other.labels; }
};

// labels encoded as {I:0, X:1, Y:2, Z:3}
int pauli_index(char label);
char pauli_label(int index);

// Product of two Pauli strings: a * b = i^phase_power * labels.
struct PauliProduct {
    int phase_power = 0;  // product phase is i^phase_power, phase_power in {0,1,2,3}
    std::string labels;
};
PauliProduct pauli_mul(const PauliString& a, const PauliString& b);

// Real linear combination of Pauli strings (a Hermitian operator).
struct PauliSumOperator {
    int n_qubits = 0;
    std::vector<std::pair<PauliString, double>> terms;

    PauliSumOperator() = default;
    explicit PauliSumOperator(int n) : n_qubits(n) {}
    PauliSumOperator(int n, std::vector<std::pair<PauliString, double>> t);

    PauliSumOperator& add_term(const std::string& labels, double coeff);

    // Copy with any all-identity term removed; also reports its coefficient.
    std::pair<PauliSumOperator, double> traceless() const;

    // Coefficient vector over the 4^n - 1 non-identity strings in
    // lexicographic index order (see bloch.hpp for the ordering).
    RVector coefficient_vector() const;

    double operator_norm_bound() const;  // sum of |coeff|, crude sup-norm bound
};

// Builds the operator whose coefficient on basis string k (lexicographic,
// identity excluded) is coeffs[k].
PauliSumOperator pauli_sum_from_coefficients(int n_qubits, const RVector& coeffs);

// JSON form: {"n_qubits": n, "terms": [{"string": "ZZ", "coeff": 1.5}, ...]}
std::string pauli_sum_to_json(const PauliSumOperator& op);
PauliSumOperator pauli_sum_from_json(const std::string& text);

struct UnitaryMatrix {
    int n_qubits = 0;
    CMatrix entries;

    UnitaryMatrix() = default;
    UnitaryMatrix(int n, CMatrix u);

    int dim() const { return 1 << n_qubits; }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Haar-like random state: i.i.d. standard complex normal entries, normalized.
StateVector random_state(int n_qubits, std::uint64_t seed);

CMatrix dense_matrix(const PauliSumOperator& op);

// U = exp(-i H t) via Hermitian eigendecomposition of the dense matrix.
UnitaryMatrix expm_hermitian(const PauliSumOperator& H, double t);

StateVector evolve(const StateVector& psi, const UnitaryMatrix& U);

double expectation(const StateVector& psi, const PauliSumOperator& M);

// Matrix-free H|psi> (sum over Pauli terms with bit arithmetic).
CVector apply_pauli_sum(const PauliSumOperator& op, const CVector& psi);

// Lanczos propagator on the matrix-free application; feasible well past the
// dense-matrix regime.
StateVector krylov_evolve(const PauliSumOperator& H, const StateVector& psi, double t,
                          double tol = 1e-10, int max_dim = 60);

}  // namespace qpt
