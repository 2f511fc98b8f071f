#include "qpt/single_qubit.hpp"

#include <algorithm>
#include <cmath>

#include "qpt/optim.hpp"

namespace qpt::single_qubit {

namespace {

RVector cross(const RVector& a, const RVector& b) {
    RVector c(3);
    c << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2),
        a(0) * b(1) - a(1) * b(0);
    return c;
}

void check_unit3(const RVector& v, const char* name) {
    if (v.size() != 3)
        throw InvalidArgument(std::string(name) + ": need a 3-vector");
    if (std::abs(v.norm() - 1.0) > 1e-9)
        throw InvalidArgument(std::string(name) + ": need a unit vector");
}

void check_series(const std::vector<double>& times, const std::vector<double>& values) {
    if (times.size() != values.size())
        throw InvalidArgument("time and value series differ in length");
    if (times.size() < 4)
        throw InvalidArgument("need at least four samples to fit a frequency");
    if (times.front() <= 0.0)
        throw InvalidArgument("sample times must be positive");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            throw InvalidArgument("sample times must be strictly increasing");
}

}  // namespace

Geometry make_geometry(const RVector& r, const RVector& m) {
    check_unit3(r, "make_geometry: r");
    check_unit3(m, "make_geometry: m");
    Geometry g;
    g.r = r;
    g.m = m;
    g.mr = m.dot(r);
    RVector rxm = cross(r, m);
    g.cross_norm = rxm.norm();
    if (g.cross_norm < 1e-9)
        throw InvalidGeometry("make_geometry: measurement direction is parallel to the initial vector");
    g.u1 = rxm / g.cross_norm;
    g.u2 = (r + m).normalized();
    g.u3 = (r - m).normalized();
    return g;
}

RVector rotate_bloch(const RVector& v, double angle, const RVector& r) {
    check_unit3(v, "rotate_bloch: axis");
    if (r.size() != 3)
        throw InvalidArgument("rotate_bloch: need a 3-vector");
    return std::cos(angle) * r + std::sin(angle) * cross(v, r) +
           (1.0 - std::cos(angle)) * v.dot(r) * v;
}

double projection_value(const RVector& h, const RVector& r, const RVector& m, double t) {
    const double norm = h.norm();
    if (norm == 0.0)
        return m.dot(r);
    return m.dot(rotate_bloch(h / norm, 2.0 * norm * t, r));
}

std::vector<double> projection_series(const RVector& h, const RVector& r,
                                      const RVector& m,
                                      const std::vector<double>& times) {
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        out[i] = projection_value(h, r, m, times[i]);
    return out;
}

FrequencyFit fit_frequency(const std::vector<double>& times,
                           const std::vector<double>& values,
                           const ReconstructionOptions& opt) {
    check_series(times, values);
    const long q = static_cast<long>(times.size());

    const double spread =
        *std::max_element(values.begin(), values.end()) -
        *std::min_element(values.begin(), values.end());
    if (spread < 1e-12)
        throw DegenerateTrajectory("fit_frequency: the measured projection is constant");

    double omega_max = opt.omega_max;
    if (omega_max <= 0.0) {
        double min_dt = times[1] - times[0];
        for (long i = 2; i < q; ++i)
            min_dt = std::min(min_dt, times[i] - times[i - 1]);
        omega_max = 4.0 * M_PI / min_dt;
    }

    RVector b(q);
    for (long i = 0; i < q; ++i)
        b(i) = values[i];
    auto design = [&](double omega) {
        RMatrix A(q, 3);
        for (long i = 0; i < q; ++i) {
            A(i, 0) = std::cos(omega * times[i]);
            A(i, 1) = std::sin(omega * times[i]);
            A(i, 2) = 1.0;
        }
        return A;
    };
    auto rms_at = [&](double omega) {
        const RMatrix A = design(omega);
        const auto sol = optim::linear_least_squares(A, b);
        return (A * sol.x - b).norm() / std::sqrt(static_cast<double>(q));
    };

    const double lo = omega_max / opt.n_grid;
    const auto best = optim::scan_refine_1d(rms_at, lo, omega_max, opt.n_grid, opt.top_k,
                                            opt.width_tol_rel);

    const RMatrix A = design(best.x);
    const auto sol = optim::linear_least_squares(A, b);
    if (sol.rank_deficient)
        throw DegenerateGrid("fit_frequency: sampling grid cannot separate the fit basis");
    FrequencyFit fit;
    fit.omega = best.x;
    fit.A = sol.x(0);
    fit.B = sol.x(1);
    fit.c = sol.x(2);
    fit.rms_residual = best.value;
    return fit;
}

AlphaKappaFit fit_alpha_kappa(const std::vector<double>& times,
                              const std::vector<double>& values, double omega,
                              double mr) {
    check_series(times, values);
    const long q = static_cast<long>(times.size());
    RMatrix A(q, 2);
    RVector b(q);
    for (long i = 0; i < q; ++i) {
        const double c = std::cos(omega * times[i]);
        A(i, 0) = std::sin(omega * times[i]);
        A(i, 1) = 1.0 - c;
        b(i) = values[i] - c * mr;  // strip the axis-independent part
    }
    const auto sol = optim::linear_least_squares(A, b);
    if (sol.rank_deficient)
        throw DegenerateGrid("fit_alpha_kappa: sampling grid cannot separate sin from 1-cos");
    AlphaKappaFit fit;
    fit.alpha1 = sol.x(0);
    fit.kappa = sol.x(1);
    fit.rms_residual = (A * sol.x - b).norm() / std::sqrt(static_cast<double>(q));
    return fit;
}

Reconstruction reconstruct(const Geometry& geom, const std::vector<double>& times,
                           const std::vector<double>& values,
                           const ReconstructionOptions& opt) {
    Reconstruction rec;
    rec.freq = fit_frequency(times, values, opt);
    rec.fit = fit_alpha_kappa(times, values, rec.freq.omega, geom.mr);

    // the fitted alpha1 = m.(v x r) carries a factor ||r x m|| relative to
    // the u1 expansion coefficient
    rec.a1 = rec.fit.alpha1 / geom.cross_norm;
    const double tol = opt.consistency_tol;
    if (rec.a1 * rec.a1 > 1.0 + tol)
        throw InconsistentData("reconstruct: the fitted in-plane component exceeds unit length");
    rec.a1 = std::clamp(rec.a1, -1.0, 1.0);

    const double lam_minus = -0.5 * (1.0 - geom.mr);
    double a2_sq = rec.fit.kappa - (1.0 - rec.a1 * rec.a1) * lam_minus;
    if (a2_sq < -tol)
        throw InconsistentData("reconstruct: negative squared coefficient for u2");
    a2_sq = std::max(a2_sq, 0.0);
    double a3_sq = 1.0 - rec.a1 * rec.a1 - a2_sq;
    if (a3_sq < -tol)
        throw InconsistentData("reconstruct: negative squared coefficient for u3");
    a3_sq = std::max(a3_sq, 0.0);
    rec.a2 = std::sqrt(a2_sq);
    rec.a3 = std::sqrt(a3_sq);

    for (double s2 : {1.0, -1.0})
        for (double s3 : {1.0, -1.0}) {
            RVector v = rec.a1 * geom.u1 + s2 * rec.a2 * geom.u2 + s3 * rec.a3 * geom.u3;
            rec.axes.push_back(v);
            rec.hamiltonians.push_back(0.5 * rec.freq.omega * v);
        }
    return rec;
}

int disambiguate(Reconstruction& rec, const RVector& r2, const RVector& m2,
                 const std::vector<double>& times,
                 const std::vector<double>& values, double tol) {
    if (rec.axes.size() != 4)
        throw InvalidArgument("disambiguate: reconstruction has no candidates");
    if (times.size() != values.size() || times.empty())
        throw InvalidArgument("disambiguate: bad discrimination series");
    check_unit3(r2, "disambiguate: r2");
    check_unit3(m2, "disambiguate: m2");

    std::array<double, 4> rms{};
    for (int i = 0; i < 4; ++i) {
        const auto pred = projection_series(rec.hamiltonians[i], r2, m2, times);
        double acc = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k)
            acc += (pred[k] - values[k]) * (pred[k] - values[k]);
        rms[i] = std::sqrt(acc / values.size());
    }
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (rms[i] < rms[best])
            best = i;
    // duplicates of the winning axis (degenerate a2 or a3) are the same
    // solution, not a rival
    double runner_up = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        if (i == best || (rec.axes[i] - rec.axes[best]).norm() < 1e-9)
            continue;
        runner_up = std::min(runner_up, rms[i]);
    }
    if (runner_up - rms[best] < tol)
        throw StillAmbiguous("disambiguate: second direction does not separate the candidates");
    rec.chosen = best;
    rec.h = rec.hamiltonians[best];
    return best;
}

}  // namespace qpt::single_qubit
