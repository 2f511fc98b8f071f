#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qpt/core.hpp"
#include "qpt/lattice.hpp"
#include "qpt/sampling.hpp"

namespace qpt::report {

// Full-precision decimal form that parses back to the identical double.
std::string format_double(double value);

// Columns: state_id,observable,time,value. Records are written in container
// order and read back verbatim; the qubit count comes from the label widths.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);

// Columns: time,p_0,...,p_{d-1}. One row per time point.
void write_born_csv(std::ostream& out, const std::vector<double>& times,
                    const std::vector<RVector>& distributions);
struct BornSeries {
    std::vector<double> times;
    std::vector<RVector> distributions;
};
BornSeries read_born_csv(std::istream& in);

// Columns: epoch,loss. Epochs count from zero.
void write_history_csv(std::ostream& out, const std::vector<double>& history);

// Linear-interpolation quantile of an unsorted sample (numpy's default rule).
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

// Per-epoch median and quartile curves over equally long histories; unequal
// lengths throw InvalidArgument.
struct QuantileCurves {
    std::vector<double> median, q25, q75;
};
QuantileCurves aggregate_histories(const std::vector<std::vector<double>>& histories);
void write_quantile_csv(std::ostream& out, const QuantileCurves& curves);

// Lattice geometry with couplings keyed "r,c-r',c'" (smaller site first) and
// site fields keyed "r,c".
std::string lattice_spec_to_json(const lattice::LatticeSpec& spec);
lattice::LatticeSpec lattice_spec_from_json(const std::string& text);

}  // namespace qpt::report
