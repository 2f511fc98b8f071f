#include "qpt/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include <json.hpp>

namespace qpt {

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 pulled away from 0 so the log is finite.
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    // splitmix64 finalizer applied to the (master, index) counter
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

StateVector::StateVector(int n, CVector amps) : n_qubits(n), amplitudes(std::move(amps)) {
    if (n_qubits < 1)
        throw InvalidArgument("StateVector: need at least one qubit");
    if (amplitudes.size() != (1LL << n_qubits))
        throw InvalidArgument("StateVector: amplitude count does not match qubit count");
}

PauliString::PauliString(std::string l) : labels(std::move(l)) {
    if (labels.empty())
        throw InvalidArgument("PauliString: empty label string");
    for (char c : labels)
        if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
            throw InvalidArgument(std::string("PauliString: bad label '") + c + "'");
}

bool PauliString::is_identity() const {
    return labels.find_first_not_of('I') == std::string::npos;
}

int pauli_index(char label) {
    switch (label) {
        case 'I': return 0;
        case 'X': return 1;
        case 'Y': return 2;
        case 'Z': return 3;
    }
    throw InvalidArgument(std::string("pauli_index: bad label '") + label + "'");
}

char pauli_label(int index) {
    static const char table[] = {'I', 'X', 'Y', 'Z'};
    if (index < 0 || index > 3)
        throw InvalidArgument("pauli_label: index out of range");
    return table[index];
}

CMatrix PauliString::dense() const {
    const int n = n_qubits();
    if (n > kMaxDenseQubits)
        throw ResourceLimit("PauliString::dense: too many qubits for a dense matrix");
    const long dim = 1L << n;
    CMatrix m = CMatrix::Zero(dim, dim);
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
        m(r, c) = amp;
    }
    return m;
}

PauliProduct pauli_mul(const PauliString& a, const PauliString& b) {
    if (a.n_qubits() != b.n_qubits())
        throw InvalidArgument("pauli_mul: qubit counts differ");
    // single-site products: result label and the power of i picked up
    static const int kLabel[4][4] = {
        {0, 1, 2, 3},
        {1, 0, 3, 2},
        {2, 3, 0, 1},
        {3, 2, 1, 0},
    };
    static const int kPhase[4][4] = {
        {0, 0, 0, 0},
        {0, 0, 1, 3},
        {0, 3, 0, 1},
        {0, 1, 3, 0},
    };
    PauliProduct out;
    out.labels.resize(a.labels.size());
    int power = 0;
    for (std::size_t j = 0; j < a.labels.size(); ++j) {
        const int pa = pauli_index(a.labels[j]);
        const int pb = pauli_index(b.labels[j]);
        out.labels[j] = pauli_label(kLabel[pa][pb]);
        power += kPhase[pa][pb];
    }
    out.phase_power = power % 4;
    return out;
}

PauliSumOperator::PauliSumOperator(int n, std::vector<std::pair<PauliString, double>> t)
    : n_qubits(n) {
    if (n_qubits < 1)
        throw InvalidArgument("PauliSumOperator: need at least one qubit");
    for (auto& [str, coeff] : t)
        add_term(str.labels, coeff);
}

PauliSumOperator& PauliSumOperator::add_term(const std::string& labels, double coeff) {
    PauliString str(labels);
    if (str.n_qubits() != n_qubits)
        throw InvalidArgument("PauliSumOperator: term length does not match qubit count");
    for (auto& [existing, c] : terms) {
        if (existing == str) {
            c += coeff;
            return *this;
        }
    }
    terms.emplace_back(std::move(str), coeff);
    return *this;
}

std::pair<PauliSumOperator, double> PauliSumOperator::traceless() const {
    PauliSumOperator out(n_qubits);
    double identity_coeff = 0.0;
    for (const auto& [str, coeff] : terms) {
        if (str.is_identity())
            identity_coeff += coeff;
        else
            out.terms.emplace_back(str, coeff);
    }
    return {out, identity_coeff};
}

RVector PauliSumOperator::coefficient_vector() const {
    if (n_qubits > kMaxDenseQubits)
        throw ResourceLimit("coefficient_vector: too many qubits");
    const long size = (1L << (2 * n_qubits)) - 1;
    RVector v = RVector::Zero(size);
    for (const auto& [str, coeff] : terms) {
        if (str.is_identity())
            continue;
        long idx = 0;
        for (char c : str.labels)
            idx = idx * 4 + pauli_index(c);
        v(idx - 1) += coeff;
    }
    return v;
}

double PauliSumOperator::operator_norm_bound() const {
    double s = 0.0;
    for (const auto& [str, coeff] : terms)
        s += std::abs(coeff);
    return s;
}

PauliSumOperator pauli_sum_from_coefficients(int n_qubits, const RVector& coeffs) {
    if (n_qubits < 1 || n_qubits > kMaxDenseQubits)
        throw InvalidArgument("pauli_sum_from_coefficients: bad qubit count");
    const long size = (1L << (2 * n_qubits)) - 1;
    if (coeffs.size() != size)
        throw InvalidArgument("pauli_sum_from_coefficients: coefficient count mismatch");
    PauliSumOperator op(n_qubits);
    for (long idx = 0; idx < size; ++idx) {
        if (coeffs(idx) == 0.0)
            continue;
        std::string labels(n_qubits, 'I');
        long code = idx + 1;
        for (int j = n_qubits - 1; j >= 0; --j) {
            labels[j] = pauli_label(static_cast<int>(code % 4));
            code /= 4;
        }
        op.terms.emplace_back(PauliString(labels), coeffs(idx));
    }
    return op;
}

std::string pauli_sum_to_json(const PauliSumOperator& op) {
    nlohmann::json j;
    j["n_qubits"] = op.n_qubits;
    j["terms"] = nlohmann::json::array();
    for (const auto& [str, coeff] : op.terms)
        j["terms"].push_back({{"string", str.labels}, {"coeff", coeff}});
    return j.dump(2);
}

PauliSumOperator pauli_sum_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("operator JSON parse error: ") + e.what());
    }
    if (!j.contains("n_qubits") || !j["n_qubits"].is_number_integer())
        throw InvalidArgument("operator JSON: missing integer field 'n_qubits'");
    if (!j.contains("terms") || !j["terms"].is_array())
        throw InvalidArgument("operator JSON: missing array field 'terms'");
    PauliSumOperator op(j["n_qubits"].get<int>());
    for (const auto& term : j["terms"]) {
        if (!term.contains("string") || !term["string"].is_string() ||
            !term.contains("coeff") || !term["coeff"].is_number())
            throw InvalidArgument("operator JSON: each term needs 'string' and 'coeff'");
        op.add_term(term["string"].get<std::string>(), term["coeff"].get<double>());
    }
    return op;
}

UnitaryMatrix::UnitaryMatrix(int n, CMatrix u) : n_qubits(n), entries(std::move(u)) {
    if (n_qubits < 1)
        throw InvalidArgument("UnitaryMatrix: need at least one qubit");
    if (entries.rows() != (1LL << n_qubits) || entries.cols() != entries.rows())
        throw InvalidArgument("UnitaryMatrix: shape does not match qubit count");
}

StateVector random_state(int n_qubits, std::uint64_t seed) {
    if (n_qubits < 1)
        throw InvalidArgument("random_state: need at least one qubit");
    Rng rng(seed);
    CVector amps(1L << n_qubits);
    for (long k = 0; k < amps.size(); ++k)
        amps(k) = rng.complex_normal();
    double norm = amps.norm();
    if (norm == 0.0)
        throw InvalidArgument("random_state: drew the zero vector");
    amps /= norm;
    return StateVector(n_qubits, std::move(amps));
}

CMatrix dense_matrix(const PauliSumOperator& op) {
    if (op.n_qubits > kMaxDenseQubits)
        throw ResourceLimit("dense_matrix: too many qubits for a dense matrix");
    const long dim = 1L << op.n_qubits;
    CMatrix m = CMatrix::Zero(dim, dim);
    for (const auto& [str, coeff] : op.terms)
        m += coeff * str.dense();
    return m;
}

UnitaryMatrix expm_hermitian(const PauliSumOperator& H, double t) {
    CMatrix m = dense_matrix(H);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    if (es.info() != Eigen::Success)
        throw InvalidOperator("expm_hermitian: eigendecomposition failed");
    const auto& vals = es.eigenvalues();
    const auto& vecs = es.eigenvectors();
    CVector phases(vals.size());
    for (long k = 0; k < vals.size(); ++k)
        phases(k) = std::exp(Complex{0.0, -vals(k) * t});
    return UnitaryMatrix(H.n_qubits, vecs * phases.asDiagonal() * vecs.adjoint());
}

StateVector evolve(const StateVector& psi, const UnitaryMatrix& U) {
    if (psi.n_qubits != U.n_qubits)
        throw InvalidArgument("evolve: qubit counts differ");
    return StateVector(psi.n_qubits, U.entries * psi.amplitudes);
}

namespace {

// masks with qubit j at bit position (n - 1 - j)
struct TermMasks {
    std::uint64_t flip = 0;  // X or Y sites
    std::uint64_t sign = 0;  // Y or Z sites
    Complex prefactor{1.0, 0.0};
};

TermMasks make_masks(const PauliString& str) {
    const int n = str.n_qubits();
    TermMasks m;
    int n_y = 0;
    for (int j = 0; j < n; ++j) {
        const std::uint64_t bit = 1ULL << (n - 1 - j);
        switch (str.labels[j]) {
            case 'X': m.flip |= bit; break;
            case 'Y':
                m.flip |= bit;
                m.sign |= bit;
                ++n_y;
                break;
            case 'Z': m.sign |= bit; break;
            default: break;
        }
    }
    static const Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    m.prefactor = kIPow[n_y % 4];
    return m;
}

}  // namespace

CVector apply_pauli_sum(const PauliSumOperator& op, const CVector& psi) {
    const long dim = psi.size();
    if (dim != (1L << op.n_qubits))
        throw InvalidArgument("apply_pauli_sum: state size does not match operator");
    CVector out = CVector::Zero(dim);
    for (const auto& [str, coeff] : op.terms) {
        const TermMasks m = make_masks(str);
        const Complex base = coeff * m.prefactor;
        for (long c = 0; c < dim; ++c) {
            const long r = static_cast<long>(c ^ static_cast<long>(m.flip));
            const int parity = std::popcount(static_cast<std::uint64_t>(c) & m.sign) & 1;
            out(r) += parity ? -base * psi(c) : base * psi(c);
        }
    }
    return out;
}

double expectation(const StateVector& psi, const PauliSumOperator& M) {
    if (psi.n_qubits != M.n_qubits)
        throw InvalidArgument("expectation: qubit counts differ");
    return psi.amplitudes.dot(apply_pauli_sum(M, psi.amplitudes)).real();
}

StateVector krylov_evolve(const PauliSumOperator& H, const StateVector& psi, double t,
                          double tol, int max_dim) {
    if (psi.n_qubits != H.n_qubits)
        throw InvalidArgument("krylov_evolve: qubit counts differ");
    const long dim = psi.amplitudes.size();
    const double input_norm = psi.amplitudes.norm();
    if (input_norm == 0.0)
        throw InvalidArgument("krylov_evolve: zero state");
    if (t == 0.0)
        return psi;

    max_dim = static_cast<int>(std::min<long>(max_dim, dim));
    std::vector<CVector> basis;
    basis.reserve(max_dim);
    basis.push_back(psi.amplitudes / input_norm);
    std::vector<double> alpha, beta;

    for (int j = 0; j < max_dim; ++j) {
        CVector w = apply_pauli_sum(H, basis[j]);
        alpha.push_back(basis[j].dot(w).real());
        w -= alpha[j] * basis[j];
        if (j > 0)
            w -= beta[j - 1] * basis[j - 1];
        // full reorthogonalization keeps the basis clean over long recurrences
        for (const auto& v : basis)
            w -= v.dot(w) * v;

        const int k = j + 1;
        Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(k, k);
        for (int i = 0; i < k; ++i) {
            tri(i, i) = alpha[i];
            if (i > 0)
                tri(i, i - 1) = tri(i - 1, i) = beta[i - 1];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
        CVector y = CVector::Zero(k);
        for (int i = 0; i < k; ++i) {
            Complex phase = std::exp(Complex{0.0, -es.eigenvalues()(i) * t});
            y += phase * es.eigenvectors().col(i) *
                 Complex{es.eigenvectors()(0, i), 0.0};
        }

        const double next_beta = w.norm();
        const double err = next_beta * std::abs(y(k - 1)) * std::abs(t);
        if (err < tol || next_beta < 1e-14 || k == static_cast<int>(dim)) {
            CVector result = CVector::Zero(dim);
            for (int i = 0; i < k; ++i)
                result += y(i) * basis[i];
            return StateVector(psi.n_qubits, input_norm * result);
        }
        if (j + 1 == max_dim)
            break;
        beta.push_back(next_beta);
        basis.push_back(w / next_beta);
    }
    throw ConvergenceFailure("krylov_evolve: subspace limit reached before tolerance");
}

}  // namespace qpt
