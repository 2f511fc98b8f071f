// Python face of the library: the dense quantum primitives plus the
// experiment layer, everything keyed on plain arrays and json strings so the
// python side needs no mirrored class hierarchy.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qpt/bloch.hpp"
#include "qpt/core.hpp"
#include "qpt/experiment.hpp"
#include "qpt/sampling.hpp"

#include <json.hpp>

namespace py = pybind11;
namespace ex = qpt::experiment;

namespace {

qpt::StateVector as_state(const qpt::CVector& amplitudes) {
    int n = 0;
    while ((1L << n) < amplitudes.size())
        ++n;
    return qpt::StateVector(n, amplitudes);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hamiltonian reconstruction from time-delayed measurements";

    py::register_exception<qpt::Error>(m, "QptError");

    m.def("time_schedule", &qpt::time_schedule, py::arg("dt"), py::arg("gamma"),
          py::arg("points"), "geometric measurement times dt * gamma**q");

    m.def("pauli_labels", [](int n_qubits) {
        std::vector<std::string> labels;
        for (long k = 0; k < qpt::pauli_basis_size(n_qubits); ++k)
            labels.push_back(qpt::basis_label(n_qubits, k));
        return labels;
    }, py::arg("n_qubits"), "traceless Pauli basis labels in coefficient order");

    m.def("dense_hamiltonian", [](int n_qubits, const qpt::RVector& coeffs) {
        return qpt::dense_matrix(qpt::pauli_sum_from_coefficients(n_qubits, coeffs));
    }, py::arg("n_qubits"), py::arg("coeffs"),
       "dense matrix of the Pauli sum with the given coefficients");

    m.def("random_state", [](int n_qubits, std::uint64_t seed) {
        return qpt::random_state(n_qubits, seed).amplitudes;
    }, py::arg("n_qubits"), py::arg("seed"), "seeded Haar-like random state");

    m.def("evolve_state", [](int n_qubits, const qpt::RVector& coeffs,
                             const qpt::CVector& psi, double t) {
        const qpt::UnitaryMatrix U =
            qpt::expm_hermitian(qpt::pauli_sum_from_coefficients(n_qubits, coeffs), t);
        return qpt::evolve(as_state(psi), U).amplitudes;
    }, py::arg("n_qubits"), py::arg("coeffs"), py::arg("psi"), py::arg("t"),
       "exp(-i H t) psi for the Pauli sum H");

    m.def("expectation", [](const std::string& label, const qpt::CVector& psi) {
        const qpt::StateVector state = as_state(psi);
        qpt::PauliSumOperator op(state.n_qubits);
        op.add_term(label, 1.0);
        return qpt::expectation(state, op);
    }, py::arg("label"), py::arg("psi"), "<psi| P |psi> for a Pauli string P");

    m.def("sample_trajectory_csv", [](int n_qubits, const qpt::RVector& coeffs,
                                      const std::vector<qpt::CVector>& states,
                                      const std::vector<std::string>& observables,
                                      const std::vector<double>& times) {
        std::vector<qpt::StateVector> psis;
        for (const qpt::CVector& amps : states)
            psis.push_back(as_state(amps));
        std::vector<qpt::Observable> obs;
        for (const std::string& label : observables)
            obs.push_back(qpt::pauli_observable(label));
        const qpt::Trajectory traj = qpt::sample_trajectory(
            qpt::pauli_sum_from_coefficients(n_qubits, coeffs), psis, obs, times);
        std::ostringstream out;
        qpt::report::write_trajectory_csv(out, traj);
        return out.str();
    }, py::arg("n_qubits"), py::arg("coeffs"), py::arg("states"), py::arg("observables"),
       py::arg("times"), "exact expectation-value records as csv text");

    m.def("preset_names", &ex::preset_names, "names of the shipped presets");

    m.def("preset_config_json", [](const std::string& name) {
        return ex::config_to_json(ex::preset_config(name));
    }, py::arg("name"), "fully resolved preset configuration as json text");

    m.def("run_experiment_json", [](const std::string& config_text) {
        const ex::ExperimentConfig cfg =
            ex::apply_config_json(ex::ExperimentConfig{}, config_text);
        std::string payload;
        {
            py::gil_scoped_release release;
            payload = ex::report_to_json(ex::run_experiment(cfg));
        }
        return payload;
    }, py::arg("config_json"), "run the configured trials and return the report json");

    m.def("simulate_to_dir", [](const std::string& config_text, const std::string& dir) {
        const ex::ExperimentConfig cfg =
            ex::apply_config_json(ex::ExperimentConfig{}, config_text);
        py::gil_scoped_release release;
        ex::simulate_to_dir(cfg, dir);
    }, py::arg("config_json"), py::arg("dir"), "write per-trial data files");

    m.def("aggregate_reports_json", [](const std::vector<std::string>& report_texts) {
        const ex::AggregateCurves curves = ex::aggregate_reports(report_texts);
        nlohmann::json j;
        j["loss"] = {{"median", curves.loss.median},
                     {"q25", curves.loss.q25},
                     {"q75", curves.loss.q75}};
        if (!curves.error.median.empty())
            j["error"] = {{"median", curves.error.median},
                          {"q25", curves.error.q25},
                          {"q75", curves.error.q75}};
        return j.dump(2);
    }, py::arg("report_texts"), "pooled quantile curves over report payloads as json");
}
