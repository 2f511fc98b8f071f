#include "qpt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace qpt::report {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        fields.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos)
            break;
        start = pos + 1;
    }
    return fields;
}

double parse_double(const std::string& text) {
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw InvalidArgument("report: cannot parse number " + text);
    return value;
}

int parse_int(const std::string& text) {
    char* end = nullptr;
    const long value = std::strtol(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
        throw InvalidArgument("report: cannot parse integer " + text);
    return static_cast<int>(value);
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    return line;
}

std::string site_key(const lattice::LatticeSpec& spec, int site) {
    return std::to_string(site / spec.cols) + "," + std::to_string(site % spec.cols);
}

int parse_site(const std::string& key, int rows, int cols) {
    const std::vector<std::string> rc = split_line(key, ',');
    if (rc.size() != 2)
        throw InvalidArgument("report: bad site key " + key);
    const int r = parse_int(rc[0]), c = parse_int(rc[1]);
    if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw InvalidArgument("report: site " + key + " is outside the lattice");
    return r * cols + c;
}

}  // namespace

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "state_id,observable,time,value\n";
    for (const TrajectoryRecord& rec : traj.records)
        out << rec.state_id << ',' << rec.observable << ',' << format_double(rec.time)
            << ',' << format_double(rec.value) << '\n';
}

Trajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "state_id,observable,time,value")
        throw InvalidArgument("report: trajectory csv must start with its header");
    Trajectory traj;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty())
            continue;
        const std::vector<std::string> fields = split_line(line, ',');
        if (fields.size() != 4)
            throw InvalidArgument("report: trajectory row needs 4 fields: " + line);
        TrajectoryRecord rec;
        rec.state_id = parse_int(fields[0]);
        rec.observable = fields[1];
        rec.time = parse_double(fields[2]);
        rec.value = parse_double(fields[3]);
        if (rec.observable.empty() ||
            rec.observable.find_first_not_of("IXYZ") != std::string::npos)
            throw InvalidArgument("report: bad observable label " + rec.observable);
        if (traj.n_qubits == 0)
            traj.n_qubits = static_cast<int>(rec.observable.size());
        else if (static_cast<int>(rec.observable.size()) != traj.n_qubits)
            throw InvalidArgument("report: observable labels disagree on qubit count");
        traj.records.push_back(std::move(rec));
    }
    if (traj.records.empty())
        throw InvalidArgument("report: trajectory csv has no records");
    return traj;
}

void write_born_csv(std::ostream& out, const std::vector<double>& times,
                    const std::vector<RVector>& distributions) {
    if (times.size() != distributions.size())
        throw InvalidArgument("report: one distribution per time point");
    if (times.empty())
        throw InvalidArgument("report: empty born series");
    const long dim = distributions.front().size();
    out << "time";
    for (long j = 0; j < dim; ++j)
        out << ",p_" << j;
    out << '\n';
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (distributions[k].size() != dim)
            throw InvalidArgument("report: born distributions must share one dimension");
        out << format_double(times[k]);
        for (long j = 0; j < dim; ++j)
            out << ',' << format_double(distributions[k][j]);
        out << '\n';
    }
}

BornSeries read_born_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw InvalidArgument("report: empty born csv");
    const std::vector<std::string> header = split_line(strip_cr(line), ',');
    if (header.size() < 2 || header[0] != "time")
        throw InvalidArgument("report: born csv must start with time,p_0,...");
    const long dim = static_cast<long>(header.size()) - 1;
    for (long j = 0; j < dim; ++j)
        if (header[j + 1] != "p_" + std::to_string(j))
            throw InvalidArgument("report: bad born csv column " + header[j + 1]);
    BornSeries series;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty())
            continue;
        const std::vector<std::string> fields = split_line(line, ',');
        if (static_cast<long>(fields.size()) != dim + 1)
            throw InvalidArgument("report: born row width mismatch: " + line);
        series.times.push_back(parse_double(fields[0]));
        RVector p(dim);
        for (long j = 0; j < dim; ++j)
            p[j] = parse_double(fields[j + 1]);
        series.distributions.push_back(std::move(p));
    }
    if (series.times.empty())
        throw InvalidArgument("report: born csv has no rows");
    return series;
}

void write_history_csv(std::ostream& out, const std::vector<double>& history) {
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < history.size(); ++e)
        out << e << ',' << format_double(history[e]) << '\n';
}

double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw InvalidArgument("report: quantile of an empty sample");
    if (!(q >= 0.0) || !(q <= 1.0))
        throw InvalidArgument("report: quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size())
        return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

QuantileCurves aggregate_histories(const std::vector<std::vector<double>>& histories) {
    if (histories.empty())
        throw InvalidArgument("report: nothing to aggregate");
    const std::size_t epochs = histories.front().size();
    for (const std::vector<double>& h : histories)
        if (h.size() != epochs)
            throw InvalidArgument("report: histories disagree on epoch count");
    QuantileCurves curves;
    curves.median.reserve(epochs);
    curves.q25.reserve(epochs);
    curves.q75.reserve(epochs);
    std::vector<double> column(histories.size());
    for (std::size_t e = 0; e < epochs; ++e) {
        for (std::size_t t = 0; t < histories.size(); ++t)
            column[t] = histories[t][e];
        curves.median.push_back(quantile(column, 0.5));
        curves.q25.push_back(quantile(column, 0.25));
        curves.q75.push_back(quantile(column, 0.75));
    }
    return curves;
}

void write_quantile_csv(std::ostream& out, const QuantileCurves& curves) {
    out << "epoch,median,q25,q75\n";
    for (std::size_t e = 0; e < curves.median.size(); ++e)
        out << e << ',' << format_double(curves.median[e]) << ','
            << format_double(curves.q25[e]) << ',' << format_double(curves.q75[e]) << '\n';
}

std::string lattice_spec_to_json(const lattice::LatticeSpec& spec) {
    nlohmann::json j;
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    j["periodic"] = spec.periodic;
    j["uniform"] = spec.uniform;
    nlohmann::json couplings = nlohmann::json::object();
    for (const auto& [edge, value] : spec.couplings)
        couplings[site_key(spec, edge.first) + "-" + site_key(spec, edge.second)] = value;
    j["couplings"] = std::move(couplings);
    nlohmann::json fields = nlohmann::json::object();
    for (const auto& [site, h] : spec.fields)
        fields[site_key(spec, site)] = {h[0], h[1], h[2]};
    j["fields"] = std::move(fields);
    return j.dump(2);
}

lattice::LatticeSpec lattice_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("report: bad lattice json: ") + e.what());
    }
    lattice::LatticeSpec spec;
    try {
        spec.rows = j.at("rows").get<int>();
        spec.cols = j.at("cols").get<int>();
        spec.periodic = j.at("periodic").get<bool>();
        spec.uniform = j.at("uniform").get<bool>();
        if (spec.rows < 1 || spec.cols < 1)
            throw InvalidArgument("report: lattice shape must be positive");
        spec.edges = lattice::lattice_edges(spec.rows, spec.cols, spec.periodic);
        for (const auto& [key, value] : j.at("couplings").items()) {
            const std::vector<std::string> ends = split_line(key, '-');
            if (ends.size() != 2)
                throw InvalidArgument("report: bad edge key " + key);
            const lattice::Edge edge = lattice::make_edge(
                parse_site(ends[0], spec.rows, spec.cols),
                parse_site(ends[1], spec.rows, spec.cols));
            if (std::find(spec.edges.begin(), spec.edges.end(), edge) == spec.edges.end())
                throw InvalidArgument("report: " + key + " is not a lattice edge");
            spec.couplings[edge] = value.get<double>();
        }
        for (const auto& [key, value] : j.at("fields").items()) {
            if (!value.is_array() || value.size() != 3)
                throw InvalidArgument("report: field " + key + " needs 3 components");
            Eigen::Vector3d h;
            for (int a = 0; a < 3; ++a)
                h[a] = value[a].get<double>();
            spec.fields[parse_site(key, spec.rows, spec.cols)] = h;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("report: bad lattice json: ") + e.what());
    }
    if (spec.couplings.size() != spec.edges.size())
        throw InvalidArgument("report: lattice json must cover every edge");
    if (static_cast<int>(spec.fields.size()) != spec.n_sites())
        throw InvalidArgument("report: lattice json must cover every site");
    return spec;
}

}  // namespace qpt::report
