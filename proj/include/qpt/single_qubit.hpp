#pragma once

#include <vector>

#include "qpt/core.hpp"

namespace qpt::single_qubit {

// Measurement configuration: initial Bloch vector r, measurement direction m,
// and the orthonormal frame used to express the rotation axis.
struct Geometry {
    RVector r, m;
    RVector u1, u2, u3;
    double cross_norm = 0.0;  // ||r x m||
    double mr = 0.0;          // m . r
};

// Throws InvalidGeometry when m is (anti)parallel to r, which makes the
// frame collapse and the axis unrecoverable.
Geometry make_geometry(const RVector& r, const RVector& m);

// Rodrigues rotation of r around the unit axis v by the given angle.
RVector rotate_bloch(const RVector& v, double angle, const RVector& r);

// m-projection of the precessing Bloch vector under H = h . sigma:
// y(t) = m . R(2 ||h|| t, h/||h||) r.
double projection_value(const RVector& h, const RVector& r, const RVector& m, double t);
std::vector<double> projection_series(const RVector& h, const RVector& r,
                                      const RVector& m,
                                      const std::vector<double>& times);

struct ReconstructionOptions {
    double omega_max = 0.0;       // 0: 4 pi over the smallest time spacing
    int n_grid = 2000;            // frequency scan resolution
    int top_k = 8;                // basins refined after the scan
    double width_tol_rel = 1e-13; // golden-section bracket, relative to omega_max
    double consistency_tol = 1e-7;  // slack before squared coefficients count as negative
};

// Stage 1: y(t) = A cos(omega t) + B sin(omega t) + c, frequency found by a
// scan with an exact linear fit inside, then refined.
struct FrequencyFit {
    double omega = 0.0;
    double A = 0.0, B = 0.0, c = 0.0;
    double rms_residual = 0.0;
};
FrequencyFit fit_frequency(const std::vector<double>& times,
                           const std::vector<double>& values,
                           const ReconstructionOptions& opt = {});

// Stage 2: with omega fixed, fit y - cos(omega t)(m.r) against
// {sin(omega t), 1 - cos(omega t)} to get alpha1 = m.(v x r) and
// kappa = (v.r)(m.v).
struct AlphaKappaFit {
    double alpha1 = 0.0;
    double kappa = 0.0;
    double rms_residual = 0.0;
};
AlphaKappaFit fit_alpha_kappa(const std::vector<double>& times,
                              const std::vector<double>& values, double omega,
                              double mr);

// Full reconstruction output. The axis is determined up to the four sign
// choices of (a2, a3); all four produce identical m-projections, so picking
// one requires data from a second direction.
struct Reconstruction {
    FrequencyFit freq;
    AlphaKappaFit fit;
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;  // frame coefficients, a2/a3 >= 0
    std::vector<RVector> axes;            // the four candidate unit axes
    std::vector<RVector> hamiltonians;    // (omega/2) * axis for each
    int chosen = -1;
    RVector h;  // set once a candidate is chosen
};

Reconstruction reconstruct(const Geometry& geom, const std::vector<double>& times,
                           const std::vector<double>& values,
                           const ReconstructionOptions& opt = {});

// Ranks the candidates against measurements taken along a second direction
// m2 (initial Bloch vector r2) and selects the best match. Throws
// StillAmbiguous when the runner-up explains the data essentially as well.
int disambiguate(Reconstruction& rec, const RVector& r2, const RVector& m2,
                 const std::vector<double>& times,
                 const std::vector<double>& values, double tol = 1e-6);

}  // namespace qpt::single_qubit
