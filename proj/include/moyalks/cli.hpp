#pragma once

// Command-line front end: flags (optionally seeded from a JSON config the
// flags override) select a scenario, the scenario runs, and the artifacts
// go to stdout or to files under --out. Exit taxonomy: 0 success, 2 config
// error, 3 inconclusive estimate, 4 numerical-stability abort.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenario.hpp"
#include "starproduct.hpp"

namespace moyalks {

namespace detail {

inline std::vector<int> parse_depths(const std::string& text) {
    std::vector<int> out;
    auto range = text.find("..");
    try {
        if (range != std::string::npos) {
            int a = std::stoi(text.substr(0, range));
            int b = std::stoi(text.substr(range + 2));
            if (b < a) throw ConfigError("depth range is reversed: " + text);
            for (int k = a; k <= b; ++k) out.push_back(k);
            return out;
        }
        std::stringstream ss(text);
        std::string piece;
        while (std::getline(ss, piece, ',')) out.push_back(std::stoi(piece));
    } catch (const std::invalid_argument&) {
        throw ConfigError("cannot parse depth list: " + text);
    } catch (const std::out_of_range&) {
        throw ConfigError("cannot parse depth list: " + text);
    }
    if (out.empty()) throw ConfigError("empty depth list: " + text);
    return out;
}

inline std::vector<double> parse_hbars(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string piece;
    try {
        while (std::getline(ss, piece, ',')) out.push_back(std::stod(piece));
    } catch (const std::invalid_argument&) {
        throw ConfigError("cannot parse hbar list: " + text);
    } catch (const std::out_of_range&) {
        throw ConfigError("cannot parse hbar list: " + text);
    }
    if (out.empty()) throw ConfigError("empty hbar list: " + text);
    return out;
}

inline std::string render_depths(const std::vector<int>& ks) {
    std::string out;
    for (int k : ks) out += (out.empty() ? "" : ",") + std::to_string(k);
    return out;
}

inline std::string render_hbars(const std::vector<double>& hs) {
    std::string out;
    for (double h : hs) out += (out.empty() ? "" : ",") + fmt(h);
    return out;
}

// JSON keys mirror the long flag names; unknown keys and wrong types are
// reported by field
struct ConfigSeen {
    bool depths = false;
    bool n_max = false;
    bool hbar = false;
};

inline ConfigSeen apply_config(const nlohmann::json& cfg, Scenario& sc) {
    ConfigSeen seen;
    if (!cfg.is_object()) throw ConfigError("config root must be an object");
    for (const auto& [key, value] : cfg.items()) {
        try {
            if (key == "system")
                sc.system = value.get<std::string>();
            else if (key == "hamiltonian")
                sc.hamiltonian = value.get<std::string>();
            else if (key == "kick")
                sc.kick = value.get<double>();
            else if (key == "window")
                sc.window = value.get<double>();
            else if (key == "grid")
                sc.grid = value.get<int>();
            else if (key == "depths") {
                if (value.is_string())
                    sc.depths = parse_depths(value.get<std::string>());
                else
                    sc.depths = value.get<std::vector<int>>();
                seen.depths = true;
            } else if (key == "n_max") {
                sc.n_max = value.get<int>();
                seen.n_max = true;
            } else if (key == "hbar") {
                if (value.is_number())
                    sc.hbars = {value.get<double>()};
                else
                    sc.hbars = value.get<std::vector<double>>();
                seen.hbar = true;
            } else if (key == "estimator")
                sc.estimator = value.get<std::string>();
            else if (key == "layer")
                sc.layer = value.get<std::string>();
            else if (key == "samples")
                sc.plan.samples = value.get<std::size_t>();
            else if (key == "seed")
                sc.plan.seed = value.get<std::uint64_t>();
            else if (key == "saturation_fraction")
                sc.plan.saturation_fraction = value.get<double>();
            else if (key == "field_tail")
                sc.plan.field_tail = value.get<double>();
            else if (key == "work_budget")
                sc.plan.work_budget = value.get<std::size_t>();
            else if (key == "workers")
                sc.plan.workers = value.get<int>();
            else if (key == "out")
                ;  // handled by the caller
            else
                throw ConfigError("unknown config field '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config field '" + key + "': " + e.what());
        }
    }
    return seen;
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open output file " + path.string());
    os << body;
}

inline void emit(const RunArtifacts& art, const std::string& outdir, std::ostream& out) {
    out << art.summary;
    if (outdir.empty()) {
        out << "-- table.csv --\n" << art.table_csv;
        if (!art.sweep_csv.empty()) out << "-- sweep.csv --\n" << art.sweep_csv;
        out << "-- manifest --\n" << art.manifest;
        return;
    }
    std::filesystem::path dir(outdir);
    std::filesystem::create_directories(dir);
    write_file(dir / "summary.txt", art.summary);
    write_file(dir / "table.csv", art.table_csv);
    if (!art.sweep_csv.empty()) write_file(dir / "sweep.csv", art.sweep_csv);
    write_file(dir / "manifest.txt", art.manifest);
    out << "wrote " << (dir / "manifest.txt").string() << "\n";
}

inline int run_bracket(const std::string& f_text, const std::string& g_text, double hbar,
                       int grid, std::ostream& out) {
    PhaseSpace s = torus_2pi(grid);
    auto tf = parse_trig_word(f_text, s);
    auto tg = parse_trig_word(g_text, s);
    if (bool(tf) != bool(tg))
        throw ConfigError("bracket arguments must both be polynomial or both trigonometric");
    if (tf) {
        out << trig_to_string(moyal_bracket_trig(*tf, *tg, hbar)) << "\n";
        return 0;
    }
    Poly br = moyal_bracket_poly(parse_poly(f_text), parse_poly(g_text));
    out << poly_to_string(br, hbar) << "\n";
    return 0;
}

}  // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    try {
        // the config file seeds the defaults; explicit flags then override
        Scenario sc;
        std::string outdir;
        detail::ConfigSeen from_config;
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string cfg_path;
            if (args[i] == "--config" && i + 1 < args.size()) {
                cfg_path = args[i + 1];
                args.erase(args.begin() + i, args.begin() + i + 2);
            } else if (args[i].rfind("--config=", 0) == 0) {
                cfg_path = args[i].substr(9);
                args.erase(args.begin() + i);
            } else {
                continue;
            }
            std::ifstream is(cfg_path);
            if (!is) throw ConfigError("cannot read config file " + cfg_path);
            nlohmann::json cfg;
            try {
                is >> cfg;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config file " + cfg_path + ": " + e.what());
            }
            from_config = detail::apply_config(cfg, sc);
            if (cfg.contains("out")) outdir = cfg["out"].get<std::string>();
            break;
        }

        CLI::App app{"phase-space entropy toolkit"};
        app.require_subcommand(1);

        std::string depths_str, hbars_str;
        std::string f_text, g_text;
        double bracket_hbar = 0.0;

        auto add_common = [&](CLI::App* cmd) {
            cmd->add_option("--system", sc.system,
                            "cat | baker | rotation | standard | kicked-rotor | harmonic | custom");
            cmd->add_option("--hamiltonian", sc.hamiltonian, "polynomial in q and p (custom systems)");
            cmd->add_option("--K", sc.kick, "kick strength");
            cmd->add_option("--window", sc.window, "plane window half-width");
            cmd->add_option("--grid", sc.grid, "grid points per axis (power of two)");
            cmd->add_option("--depths", depths_str, "partition depths, e.g. 2..6 or 1,2,4");
            cmd->add_option("--n", sc.n_max, "maximum refinement length");
            cmd->add_option("--samples", sc.plan.samples, "sample budget per series");
            cmd->add_option("--seed", sc.plan.seed, "RNG seed");
            cmd->add_option("--saturation", sc.plan.saturation_fraction,
                            "usable-level saturation fraction");
            cmd->add_option("--field-tail", sc.plan.field_tail, "evolved-field tail mass to shed");
            cmd->add_option("--work-budget", sc.plan.work_budget, "joint-walk work budget");
            cmd->add_option("--workers", sc.plan.workers, "worker threads, 0 = MOYALKS_WORKERS/auto");
            cmd->add_option("--layer", sc.layer, "measure | algebraic");
            cmd->add_option("--out", outdir, "directory for report files");
        };

        CLI::App* entropy = app.add_subcommand("entropy", "refinement-entropy reports");
        entropy->require_subcommand(1);
        CLI::App* classical = entropy->add_subcommand("classical", "classical point-map entropy");
        add_common(classical);
        CLI::App* quantum = entropy->add_subcommand("quantum", "deformed entropy at one hbar");
        add_common(quantum);
        quantum->add_option("--hbar", hbars_str, "deformation parameter");
        quantum->add_option("--estimator", sc.estimator, "quasi | symbol");

        CLI::App* sweep = app.add_subcommand("sweep", "entropy across an hbar list");
        add_common(sweep);
        sweep->add_option("--hbar", hbars_str, "comma-separated hbar list");
        sweep->add_option("--estimator", sc.estimator, "quasi | symbol");

        CLI::App* bracket = app.add_subcommand("bracket", "deformed bracket of two observables");
        bracket->add_option("--f", f_text, "first observable")->required();
        bracket->add_option("--g", g_text, "second observable")->required();
        bracket->add_option("--hbar", bracket_hbar, "deformation parameter");
        bracket->add_option("--grid", sc.grid, "grid points per axis (trig inputs)");

        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return 0;
        } catch (const CLI::ParseError& e) {
            err << "config: " << e.what() << "\n";
            return 2;
        }

        if (bracket->parsed()) return detail::run_bracket(f_text, g_text, bracket_hbar, sc.grid, out);

        if (!depths_str.empty()) sc.depths = detail::parse_depths(depths_str);
        if (!hbars_str.empty()) sc.hbars = detail::parse_hbars(hbars_str);

        bool quantum_run = quantum->parsed() || sweep->parsed();
        if (quantum_run && !from_config.depths && depths_str.empty()) sc.depths = {1, 2};
        if (quantum_run && !from_config.n_max && quantum->count("--n") == 0 &&
            sweep->count("--n") == 0)
            sc.n_max = 8;
        if (sweep->parsed() && !from_config.hbar && hbars_str.empty())
            sc.hbars = {0.0, 0.05, 0.1, 0.2};

        RunArtifacts art;
        if (classical->parsed())
            art = run_entropy_classical(sc);
        else if (quantum->parsed())
            art = run_entropy_quantum(sc);
        else
            art = run_sweep(sc);
        detail::emit(art, outdir, out);
        return art.exit_code;
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return 2;
    } catch (const StabilityError& e) {
        err << e.what() << "\n";
        return 4;
    } catch (const StatisticsError& e) {
        err << e.what() << "\n";
        return 4;
    } catch (const ResolutionError& e) {
        err << e.what() << "\n";
        return 4;
    } catch (const DegenerateFitError& e) {
        err << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace moyalks
