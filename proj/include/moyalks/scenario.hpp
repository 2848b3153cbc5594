#pragma once

// Named experiment presets and deterministic report rendering: a Scenario
// resolves to the library calls a script would make by hand, and every
// table is rendered into a string so reruns compare byte for byte.

#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "algebraic.hpp"
#include "expressions.hpp"
#include "quantum_entropy.hpp"

namespace moyalks {

struct Scenario {
    std::string system = "cat";
    std::string hamiltonian;
    double kick = 10.0;
    double window = 12.0;
    int grid = 128;
    std::vector<int> depths = {2, 3, 4, 5, 6};
    int n_max = 14;
    std::vector<double> hbars = {0.1};
    std::string estimator = "quasi";
    std::string layer = "measure";
    SamplingPlan plan;

    void validate() const {
        static const std::vector<std::string> known = {
            "cat", "baker", "rotation", "standard", "kicked-rotor", "harmonic", "custom"};
        bool found = false;
        for (const std::string& k : known) found = found || k == system;
        if (!found) throw ConfigError("unknown system preset: " + system);
        if (system == "custom" && hamiltonian.empty())
            throw ConfigError("custom systems need a hamiltonian expression");
        if (!hamiltonian.empty() && system != "custom")
            throw ConfigError("hamiltonian expressions require system=custom");
        if (depths.empty()) throw ConfigError("no partition depths requested");
        for (int k : depths)
            if (k < 0 || k > 12) throw ConfigError("partition depth out of range");
        if (n_max < 2 || n_max > 4096) throw ConfigError("n_max out of range");
        if (grid < 8 || grid > 4096 || (grid & (grid - 1)))
            throw ConfigError("grid must be a power of two in [8, 4096]");
        if (estimator != "quasi" && estimator != "symbol")
            throw ConfigError("estimator must be quasi or symbol");
        if (layer != "measure" && layer != "algebraic")
            throw ConfigError("layer must be measure or algebraic");
        plan.validate();
    }
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline Observable harmonic_hamiltonian(const PhaseSpace& s) {
    Poly h = Poly::monomial(2, 0, HbarPoly(rat(1, 2))) +
             Poly::monomial(0, 2, HbarPoly(rat(1, 2)));
    return Observable::from_poly(s, h);
}

}  // namespace detail

// Deformable systems as flows; the kicked rotor and the standard map are
// the same kick, so both names resolve to the kicked flow.
inline FlowSpec scenario_flow(const Scenario& sc, double hbar) {
    if (sc.system == "kicked-rotor" || sc.system == "standard") {
        PhaseSpace s = torus_2pi(sc.grid);
        return FlowSpec::kicked_flow(s, kicked_rotor(s, sc.kick), Hbar(hbar));
    }
    if (sc.system == "harmonic") {
        PhaseSpace s = plane_window(sc.window, sc.grid);
        return FlowSpec::autonomous(s, detail::harmonic_hamiltonian(s), Hbar(hbar));
    }
    if (sc.system == "custom") {
        PhaseSpace s = plane_window(sc.window, sc.grid);
        Poly h = parse_poly(sc.hamiltonian);
        return FlowSpec::autonomous(s, Observable::from_poly(s, h), Hbar(hbar));
    }
    throw ConfigError("system " + sc.system + " has no deformation; use the classical runner");
}

inline PointMapSystem scenario_system(const Scenario& sc) {
    if (sc.system == "cat") return PointMapSystem::cat(sc.grid);
    if (sc.system == "baker") return PointMapSystem::baker(sc.grid);
    if (sc.system == "rotation") return PointMapSystem::rotation(sc.grid);
    if (sc.system == "standard" || sc.system == "kicked-rotor")
        return PointMapSystem::standard(sc.kick, sc.grid);
    return PointMapSystem::time_one(scenario_flow(sc, 0.0));
}

struct RunArtifacts {
    std::string summary;
    std::string table_csv;
    std::string sweep_csv;
    std::string manifest;
    int exit_code = 0;
};

namespace detail {

inline void manifest_header(std::ostringstream& os, const Scenario& sc, const std::string& cmd) {
    os << "moyalks run manifest\n";
    os << "version: 1.0.0\n";
    os << "command: " << cmd << "\n";
    os << "config:\n";
    os << "  system: " << sc.system << "\n";
    if (!sc.hamiltonian.empty()) os << "  hamiltonian: " << sc.hamiltonian << "\n";
    os << "  kick: " << fmt(sc.kick) << "\n";
    os << "  window: " << fmt(sc.window) << "\n";
    os << "  grid: " << sc.grid << "\n";
    os << "  depths:";
    for (int k : sc.depths) os << " " << k;
    os << "\n";
    os << "  n_max: " << sc.n_max << "\n";
    os << "  hbar:";
    for (double h : sc.hbars) os << " " << fmt(h);
    os << "\n";
    os << "  estimator: " << sc.estimator << "\n";
    os << "  layer: " << sc.layer << "\n";
    os << "  samples: " << sc.plan.samples << "\n";
    os << "  seed: " << sc.plan.seed << "\n";
    os << "  saturation_fraction: " << fmt(sc.plan.saturation_fraction) << "\n";
    os << "  field_tail: " << fmt(sc.plan.field_tail) << "\n";
    os << "  work_budget: " << sc.plan.work_budget << "\n";
    os << "tolerances:\n";
    os << "  convergence_window_bits: 0.02\n";
    os << "  negativity_reliability_threshold: 0.2\n";
    os << "formats:\n";
    os << "  table.csv: layer,hbar,k,n,H_n,rate,converged,negativity_mass\n";
    os << "  sweep.csv: hbar,h_hbar,h_symbol,discrepancy,negativity_mass_max,classical_h,status\n";
    os << "workers: MOYALKS_WORKERS environment variable, 0 = hardware\n";
}

inline void table_rows(std::ostringstream& os, const std::string& layer, const std::string& hbar,
                       const EntropyReport& rep) {
    for (const PartitionRow& row : rep.per_partition)
        for (std::size_t n = 0; n < row.entropies.size(); ++n)
            os << layer << "," << hbar << "," << row.depth << "," << (n + 1) << ","
               << fmt(row.entropies[n]) << "," << fmt(row.rate) << "," << (row.converged ? 1 : 0)
               << "," << fmt(row.negativity_mass) << "\n";
}

inline void report_lines(std::ostringstream& os, const EntropyReport& rep) {
    os << "estimator: " << rep.estimator << "\n";
    os << "ks_estimate_bits: " << fmt(rep.ks_estimate) << "\n";
    os << "inconclusive: " << (rep.inconclusive ? "yes" : "no") << "\n";
    os << "monotone: " << (rep.monotone ? "yes" : "no") << "\n";
    os << "negativity_mass_max: " << fmt(rep.negativity_mass_max) << "\n";
    for (const PartitionRow& row : rep.per_partition) {
        os << "depth " << row.depth << ": rate " << fmt(row.rate) << " converged "
           << (row.converged ? "yes" : "no") << " usable_n " << row.usable_n;
        if (row.failed) os << " failed";
        os << "\n";
    }
}

}  // namespace detail

inline RunArtifacts run_entropy_classical(const Scenario& sc) {
    sc.validate();
    PointMapSystem sys = scenario_system(sc);
    PartitionFamily family = PartitionFamily::dyadic(sys.space, sc.depths);
    EntropyReport rep =
        sc.layer == "algebraic"
            ? algebraic_ks(AlgebraicEndomorphism::koopman(sys), AlgebraicState::flat(sys.space),
                           family, sc.n_max, sc.plan)
            : ks_entropy(sys, family, sc.n_max, sc.plan);

    RunArtifacts art;
    std::ostringstream sum;
    sum << "moyalks entropy report\n";
    sum << "system: " << sys.name << " (grid " << sc.grid << ")\n";
    sum << "layer: " << sc.layer << "\n";
    detail::report_lines(sum, rep);
    art.summary = sum.str();

    std::ostringstream csv;
    csv << "layer,hbar,k,n,H_n,rate,converged,negativity_mass\n";
    detail::table_rows(csv, sc.layer, "0", rep);
    art.table_csv = csv.str();

    std::ostringstream man;
    detail::manifest_header(man, sc, "entropy classical");
    art.manifest = man.str();
    art.exit_code = rep.inconclusive ? 3 : 0;
    return art;
}

inline RunArtifacts run_entropy_quantum(const Scenario& sc) {
    sc.validate();
    if (sc.layer == "algebraic")
        throw ConfigError("the algebraic layer realizes classical point maps; use entropy classical");
    if (sc.hbars.empty()) throw ConfigError("quantum runs need an hbar value");
    double hbar = sc.hbars.front();
    FlowSpec flow = scenario_flow(sc, hbar);
    PartitionFamily family = PartitionFamily::dyadic(flow.space, sc.depths);
    QuantumEstimator which = sc.estimator == "symbol" ? QuantumEstimator::SymbolPoint
                                                      : QuantumEstimator::QuasiProbability;
    QuantumEntropyReport rep = ks_entropy_quantum(flow, family, sc.n_max, sc.plan, which);

    RunArtifacts art;
    std::ostringstream sum;
    sum << "moyalks quantum entropy report\n";
    sum << "system: " << sc.system << " (grid " << sc.grid << ")\n";
    sum << "hbar: " << detail::fmt(hbar) << "\n";
    detail::report_lines(sum, rep.quantum);
    sum << "classical_h_bits: " << detail::fmt(rep.classical.ks_estimate) << "\n";
    sum << "chaotic: " << (rep.chaotic ? "yes" : "no") << "\n";
    sum << "quantum_chaotic: " << (rep.quantum_chaotic ? "yes" : "no") << "\n";
    sum << "unreliable: " << (rep.unreliable ? "yes" : "no") << "\n";
    art.summary = sum.str();

    std::ostringstream csv;
    csv << "layer,hbar,k,n,H_n,rate,converged,negativity_mass\n";
    detail::table_rows(csv, sc.layer, detail::fmt(hbar), rep.quantum);
    art.table_csv = csv.str();

    std::ostringstream man;
    detail::manifest_header(man, sc, "entropy quantum");
    art.manifest = man.str();
    art.exit_code = rep.quantum.inconclusive ? 3 : 0;
    return art;
}

inline RunArtifacts run_sweep(const Scenario& sc) {
    sc.validate();
    if (sc.layer == "algebraic")
        throw ConfigError("the algebraic layer realizes classical point maps; use entropy classical");
    if (sc.hbars.empty()) throw ConfigError("sweep needs a non-empty hbar list");

    RunArtifacts art;
    std::ostringstream sum, csv, tab;
    sum << "moyalks hbar sweep\n";
    sum << "system: " << sc.system << " (grid " << sc.grid << ")\n";
    csv << "hbar,h_hbar,h_symbol,discrepancy,negativity_mass_max,classical_h,status\n";
    tab << "layer,hbar,k,n,H_n,rate,converged,negativity_mass\n";

    QuantumEstimator primary = sc.estimator == "symbol" ? QuantumEstimator::SymbolPoint
                                                        : QuantumEstimator::QuasiProbability;
    bool torus = sc.system != "harmonic" && sc.system != "custom";
    int failures = 0, soft = 0;
    double classical_h = std::numeric_limits<double>::quiet_NaN();

    for (double hbar : sc.hbars) {
        std::string status = "ok";
        double h_primary = std::numeric_limits<double>::quiet_NaN();
        double h_symbol = std::numeric_limits<double>::quiet_NaN();
        double negativity = std::numeric_limits<double>::quiet_NaN();
        try {
            FlowSpec flow = scenario_flow(sc, hbar);
            PartitionFamily family = PartitionFamily::dyadic(flow.space, sc.depths);
            QuantumEntropyReport rep = ks_entropy_quantum(flow, family, sc.n_max, sc.plan, primary);
            h_primary = rep.quantum.ks_estimate;
            negativity = rep.quantum.negativity_mass_max;
            classical_h = rep.classical.ks_estimate;
            detail::table_rows(tab, sc.layer, detail::fmt(hbar), rep.quantum);
            if (torus && hbar > 0.0) {
                QuantumEntropyReport srep =
                    ks_entropy_quantum(flow, family, sc.n_max, sc.plan, QuantumEstimator::SymbolPoint);
                h_symbol = srep.quantum.ks_estimate;
            } else {
                h_symbol = h_primary;
            }
            if (rep.quantum.inconclusive) {
                status = "inconclusive";
                ++soft;
            }
        } catch (const StabilityError&) {
            status = "aborted";
            ++failures;
        } catch (const StatisticsError&) {
            status = "aborted";
            ++failures;
        } catch (const ResolutionError&) {
            status = "aborted";
            ++failures;
        }
        double gap = h_primary - h_symbol;
        csv << detail::fmt(hbar) << "," << detail::fmt(h_primary) << "," << detail::fmt(h_symbol)
            << "," << detail::fmt(std::abs(gap)) << "," << detail::fmt(negativity) << ","
            << detail::fmt(classical_h) << "," << status << "\n";
        sum << "hbar " << detail::fmt(hbar) << ": h " << detail::fmt(h_primary) << " negativity "
            << detail::fmt(negativity) << " status " << status << "\n";
    }
    sum << "classical_h_bits: " << detail::fmt(classical_h) << "\n";

    art.summary = sum.str();
    art.sweep_csv = csv.str();
    art.table_csv = tab.str();
    std::ostringstream man;
    detail::manifest_header(man, sc, "sweep");
    art.manifest = man.str();
    art.exit_code = failures == int(sc.hbars.size()) ? 4 : (failures + soft ? 3 : 0);
    return art;
}

}  // namespace moyalks
