#include "bd/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "bd/dynamics.hpp"
#include "bd/spectral.hpp"

namespace bd {

namespace {

class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json num_or_inf(double v) {
    if (std::isfinite(v)) return v;
    return "inf";
}

struct Scenario {
    CoefficientModel model;
    nlohmann::json model_json;
    std::string mode;
    std::optional<double> z;
    std::optional<double> mass;
    std::size_t n = 400;
    double t_end = 40.0;
    std::optional<double> eta;
    std::optional<double> nu;
    double tol = 1e-10;
    double rtol = 1e-10;
    double atol = 1e-13;
    std::optional<double> snapshot_every;
    std::vector<double> w_grid;
    std::string out = "bd_out";
    std::uint64_t seed = 1234;
    double epsilon = 1e-3;
    std::size_t kmax = 100000;
    bool dump_states = false;
    bool sweep_numeric = false;
    std::size_t sweep_n = 400;
    unsigned threads = 1;
};

Scenario parse_scenario(const nlohmann::json& j, const ScenarioOverrides& ov) {
    if (!j.is_object()) throw validation_error("config: expected a JSON object");
    static const std::set<std::string> known = {
        "model", "mode",  "z",    "mass",        "n",           "t_end",       "eta",
        "nu",    "tol",   "rtol", "atol",        "snapshot_every", "w_grid",   "out",
        "seed",  "epsilon", "kmax", "dump_states", "sweep_numeric", "sweep_n", "threads"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw validation_error("config: unknown field '" + it.key() + "'");

    Scenario s;
    if (!j.contains("model")) throw validation_error("config: missing 'model'");
    try {
        s.model = model_from_json(j.at("model"));
    } catch (const std::exception& e) {
        throw validation_error(e.what());
    }
    s.model_json = model_to_json(s.model);

    if (!j.contains("mode") && !ov.mode) throw validation_error("config: missing 'mode'");
    s.mode = ov.mode ? *ov.mode : j.at("mode").get<std::string>();
    static const std::set<std::string> modes = {"equilibrium", "spectrum", "simulate", "sweep",
                                                "hardy"};
    if (!modes.count(s.mode)) throw validation_error("config: mode '" + s.mode + "' not known");

    if (j.contains("z")) s.z = j.at("z").get<double>();
    if (j.contains("mass")) s.mass = j.at("mass").get<double>();
    if (ov.z) s.z = *ov.z;
    if (ov.mass) s.mass = *ov.mass;
    if (s.z && s.mass)
        throw validation_error("config: fields 'z' and 'mass' are mutually exclusive; got both");

    if (j.contains("n")) s.n = j.at("n").get<std::size_t>();
    if (ov.n) s.n = *ov.n;
    if (j.contains("t_end")) s.t_end = j.at("t_end").get<double>();
    if (ov.t_end) s.t_end = *ov.t_end;
    if (j.contains("eta")) s.eta = j.at("eta").get<double>();
    if (ov.eta) s.eta = *ov.eta;
    if (j.contains("nu")) s.nu = j.at("nu").get<double>();
    if (j.contains("tol")) s.tol = j.at("tol").get<double>();
    if (j.contains("rtol")) s.rtol = j.at("rtol").get<double>();
    if (j.contains("atol")) s.atol = j.at("atol").get<double>();
    if (j.contains("snapshot_every")) s.snapshot_every = j.at("snapshot_every").get<double>();
    if (j.contains("w_grid")) s.w_grid = j.at("w_grid").get<std::vector<double>>();
    if (j.contains("out")) s.out = j.at("out").get<std::string>();
    if (ov.out) s.out = *ov.out;
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("epsilon")) s.epsilon = j.at("epsilon").get<double>();
    if (j.contains("kmax")) s.kmax = j.at("kmax").get<std::size_t>();
    if (j.contains("dump_states")) s.dump_states = j.at("dump_states").get<bool>();
    if (j.contains("sweep_numeric")) s.sweep_numeric = j.at("sweep_numeric").get<bool>();
    if (j.contains("sweep_n")) s.sweep_n = j.at("sweep_n").get<std::size_t>();
    if (j.contains("threads")) {
        s.threads = j.at("threads").get<unsigned>();
    } else if (s.mode == "sweep") {
        s.threads = std::max(1u, std::thread::hardware_concurrency());
    }
    if (ov.threads) s.threads = std::max(1u, std::min(s.threads, *ov.threads));

    const bool needs_density = s.mode != "sweep";
    if (needs_density && !s.z && !s.mass)
        throw validation_error("config: mode '" + s.mode + "' requires one of 'z' or 'mass'");
    if (s.mode == "sweep" && s.w_grid.empty())
        throw validation_error("config: mode 'sweep' requires a nonempty 'w_grid'");
    if (s.n < 3) throw validation_error("config: n must be >= 3");
    if (!(s.t_end > 0.0)) throw validation_error("config: t_end must be positive");
    if (!(s.tol > 0.0) || !(s.rtol > 0.0) || !(s.atol > 0.0))
        throw validation_error("config: tolerances must be positive");
    return s;
}

nlohmann::json resolved_config(const Scenario& s) {
    nlohmann::json j;
    j["model"] = s.model_json;
    j["mode"] = s.mode;
    if (s.z) j["z"] = *s.z;
    if (s.mass) j["mass"] = *s.mass;
    j["n"] = s.n;
    j["t_end"] = s.t_end;
    if (s.eta) j["eta"] = *s.eta;
    if (s.nu) j["nu"] = *s.nu;
    j["tol"] = s.tol;
    j["rtol"] = s.rtol;
    j["atol"] = s.atol;
    if (s.snapshot_every) j["snapshot_every"] = *s.snapshot_every;
    if (!s.w_grid.empty()) j["w_grid"] = s.w_grid;
    j["out"] = s.out;
    j["seed"] = s.seed;
    j["epsilon"] = s.epsilon;
    j["kmax"] = s.kmax;
    j["dump_states"] = s.dump_states;
    j["sweep_numeric"] = s.sweep_numeric;
    j["sweep_n"] = s.sweep_n;
    j["threads"] = s.threads;
    return j;
}

double resolve_z(const Scenario& s) {
    if (s.z) {
        if (!(*s.z > 0.0)) throw validation_error("config: z must be positive");
        return *s.z;
    }
    if (!(*s.mass > 0.0)) throw validation_error("config: mass must be positive");
    return z_of_mass(s.model, *s.mass, s.tol);
}

double max_db_residual(const EquilibriumProfile& p, const CoefficientModel& m) {
    double worst = 0.0;
    for (std::size_t i = 1; i < p.n; ++i) {
        const double lhs = m.log_attach(i) + p.log_weight[0] + p.log_weight[i - 1];
        const double rhs = m.log_detach(i + 1) + p.log_weight[i];
        worst = std::max(worst, std::abs(std::expm1(lhs - rhs)));
    }
    return worst;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file " + path);
    f << body;
}

int run_parsed(const Scenario& s, std::ostream& summary_out) {
    nlohmann::json summary;
    summary["config"] = resolved_config(s);
    summary["mode"] = s.mode;
    nlohmann::json checks = nlohmann::json::object();
    nlohmann::json results = nlohmann::json::object();
    std::vector<std::string> outputs;

    if (s.mode == "sweep") {
        SweepOptions opts;
        opts.tol = std::max(s.tol, 1e-10);
        opts.with_numeric = s.sweep_numeric;
        opts.n_numeric = s.sweep_n;
        opts.threads = s.threads;
        SweepResult res = critical_sweep(s.model, s.w_grid, opts);
        std::ostringstream csv;
        csv << "w,z,B,lambda_lo,lambda_hi";
        if (opts.with_numeric) csv << ",lambda_numeric";
        csv << "\n";
        for (const auto& row : res.rows) {
            csv << fmt17(row.w) << "," << fmt17(row.z) << ",";
            if (!row.ok)
                csv << "error,,";
            else {
                csv << (row.b_finite ? fmt17(row.b) : std::string("inf")) << ","
                    << fmt17(row.lambda_lo) << ","
                    << (std::isfinite(row.lambda_hi) ? fmt17(row.lambda_hi)
                                                     : std::string("inf"));
            }
            if (opts.with_numeric) csv << "," << fmt17(row.lambda_numeric);
            csv << "\n";
        }
        const std::string path = s.out + "_sweep.csv";
        write_text(path, csv.str());
        outputs.push_back(path);
        results["fitted_exponent"] = res.fitted_exponent;
        results["fit_intercept"] = res.fit_intercept;
        results["fit_r2"] = res.fit_r2;
        results["fit_points"] = res.fit_points;
        results["ratio_diag_min"] = res.ratio_diag_min;
        results["ratio_diag_max"] = res.ratio_diag_max;
        checks["all_rows_ok"] = true;
        for (const auto& row : res.rows)
            if (!row.ok) checks["all_rows_ok"] = false;
        checks["ratio_diag_positive"] = res.ratio_diag_min > 0.0;
    } else {
        const double z = resolve_z(s);
        EquilibriumProfile profile = equilibrium_profile(s.model, z, s.n, s.tol);
        checks["detailed_balance"] = max_db_residual(profile, s.model) < 1e-12;
        results["z"] = z;
        results["mass"] = profile.mass;

        if (s.mode == "equilibrium") {
            const std::string path = s.out + "_profile.json";
            write_text(path, profile_to_json(profile).dump(2) + "\n");
            outputs.push_back(path);
            results["m2"] = profile.m2;
            results["m3"] = num_or_inf(profile.m3);
            results["a_quantity"] = profile.a_quantity;
        } else if (s.mode == "spectrum") {
            SpectralReport rep = spectral_report(s.model, profile, s.n, s.tol);
            const std::string path = s.out + "_spectral.json";
            write_text(path, spectral_report_to_json(rep).dump(2) + "\n");
            outputs.push_back(path);
            results["B"] = num_or_inf(rep.b.value);
            results["lambda_lo"] = rep.lambda_lo;
            results["lambda_hi"] = num_or_inf(rep.lambda_hi);
            results["lambda_numeric"] = rep.lambda_numeric;
            checks["bracket"] = rep.lambda_lo <= rep.lambda_numeric + 1e-8 &&
                                (!std::isfinite(rep.lambda_hi) ||
                                 rep.lambda_numeric <= rep.lambda_hi * (1.0 + 1e-6) + 1e-8);
            checks["hardy_matches_b"] =
                rep.b.finite && std::abs(rep.hardy_b - rep.b.value) <= 1e-9 * rep.b.value;
        } else if (s.mode == "hardy") {
            SpectralReport rep = spectral_report(s.model, profile, s.n, s.tol);
            nlohmann::json hj;
            hj["b"] = num_or_inf(rep.hardy_b);
            hj["witness_k"] = rep.hardy_witness_k;
            hj["witness_ratio"] = rep.hardy_witness_ratio;
            hj["quantity_b"] = num_or_inf(rep.b.value);
            const std::string path = s.out + "_hardy.json";
            write_text(path, hj.dump(2) + "\n");
            outputs.push_back(path);
            results["hardy_b"] = num_or_inf(rep.hardy_b);
            results["witness_k"] = rep.hardy_witness_k;
            results["witness_ratio"] = rep.hardy_witness_ratio;
            checks["witness_realizes_lower_half"] =
                rep.hardy_witness_ratio >= rep.hardy_b * (1.0 - 1e-6);
            checks["matches_sup_quantity"] =
                rep.b.finite && std::abs(rep.hardy_b - rep.b.value) <= 1e-9 * rep.b.value;
        } else { // simulate
            const double w = std::log(profile.zs / profile.z);
            const double eta = s.eta ? *s.eta : 0.25 * w;
            const double nu = s.nu ? *s.nu : 0.25 * w;
            ObservablePlan plan{&profile, nu, eta};
            IntegrateOptions opts;
            opts.rtol = s.rtol;
            opts.atol = s.atol;
            opts.snapshot_every = s.snapshot_every ? *s.snapshot_every : s.t_end / 80.0;

            StateVector s0 = perturbed_equilibrium(profile, s.epsilon, s.seed);
            Trajectory traj = integrate(s.model, s0, s.t_end, opts, &plan);

            std::ostringstream csv;
            csv << "t,mass,H,Fz,D,exp_moment,l1_dist\n";
            for (const auto& row : traj.observables)
                csv << fmt17(row.t) << "," << fmt17(row.mass) << "," << fmt17(row.h) << ","
                    << fmt17(row.fz) << "," << fmt17(row.d) << "," << fmt17(row.exp_moment)
                    << "," << fmt17(row.l1_dist) << "\n";
            const std::string path = s.out + "_trajectory.csv";
            write_text(path, csv.str());
            outputs.push_back(path);
            if (s.dump_states) {
                nlohmann::json js;
                js["times"] = traj.times;
                js["states"] = traj.states;
                const std::string spath = s.out + "_states.json";
                write_text(spath, js.dump() + "\n");
                outputs.push_back(spath);
            }

            std::vector<double> l1;
            for (const auto& row : traj.observables) l1.push_back(row.l1_dist);
            DecayFit fit = fit_decay_rate(traj.times, l1);

            BQuantity b = quantity_B(s.model, profile.z, s.tol);
            GapBounds g = gap_bounds(b.finite ? b.value : kInf, profile.m2, profile.m3);
            results["B"] = num_or_inf(b.value);
            results["lambda_lo"] = g.lambda_lo;
            results["lambda_hi"] = num_or_inf(g.lambda_hi);
            results["inv_B"] = b.finite ? 1.0 / b.value : 0.0;
            results["fitted_rate"] = fit.rate;
            results["fit_r2"] = fit.r2;
            results["fit_points"] = fit.points;
            results["eta"] = eta;
            results["nu"] = nu;

            double max_h_increase = 0.0;
            double min_fz = kInf;
            double worst_energy_mismatch = 0.0;
            double max_moment = 0.0;
            for (std::size_t k = 0; k + 1 < traj.observables.size(); ++k) {
                max_h_increase = std::max(
                    max_h_increase, traj.observables[k + 1].h - traj.observables[k].h);
            }
            for (std::size_t k = 0; k < traj.observables.size(); ++k) {
                min_fz = std::min(min_fz, traj.observables[k].fz);
                max_moment = std::max(max_moment, traj.observables[k].exp_moment);
            }
            for (std::size_t k = 1; k + 1 < traj.observables.size(); ++k) {
                const auto& a = traj.observables[k - 1];
                const auto& c = traj.observables[k + 1];
                const double d_mid = traj.observables[k].d;
                if (!(d_mid > 1e-13 * std::abs(traj.observables[k].fz) + 1e-300)) continue;
                const double slope = (c.fz - a.fz) / (c.t - a.t);
                worst_energy_mismatch =
                    std::max(worst_energy_mismatch, std::abs(slope + d_mid) / d_mid);
            }
            const double mass_drift =
                std::abs(traj.observables.back().mass - traj.observables.front().mass) /
                traj.observables.front().mass;
            results["mass_drift"] = mass_drift;
            results["max_h_increase"] = max_h_increase;
            results["min_fz"] = min_fz;
            results["energy_identity_worst"] = worst_energy_mismatch;
            checks["mass_conserved"] = mass_drift < 1e-8;
            checks["h_monotone"] = max_h_increase <= 1e-10;
            checks["fz_nonnegative"] = min_fz >= -1e-10;
            checks["energy_identity"] = worst_energy_mismatch <= 0.02;
            checks["exp_moment_bounded"] =
                max_moment <= 2.0 * traj.observables.front().exp_moment;
            checks["rate_above_lower_bound"] = fit.rate >= 0.9 * g.lambda_lo;
        }
    }

    summary["results"] = results;
    summary["checks"] = checks;
    summary["outputs"] = outputs;
    bool all_ok = true;
    for (auto it = checks.begin(); it != checks.end(); ++it)
        if (it.value().is_boolean() && !it.value().get<bool>()) all_ok = false;
    summary["all_checks_passed"] = all_ok;
    summary_out << summary.dump(2) << "\n";
    return 0;
}

} // namespace

int run_scenario(const nlohmann::json& config, const ScenarioOverrides& overrides,
                 std::ostream& summary_out, std::ostream& err_out) {
    Scenario s;
    try {
        s = parse_scenario(config, overrides);
    } catch (const validation_error& e) {
        err_out << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err_out << "validation error: " << e.what() << "\n";
        return 2;
    }
    try {
        return run_parsed(s, summary_out);
    } catch (const std::exception& e) {
        err_out << "error (" << s.mode << "): " << e.what() << "\n";
        return 1;
    }
}

int run_scenario_file(const std::string& config_path, const ScenarioOverrides& overrides,
                      std::ostream& summary_out, std::ostream& err_out) {
    std::ifstream f(config_path);
    if (!f) {
        err_out << "validation error: cannot open config file " << config_path << "\n";
        return 2;
    }
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        err_out << "validation error: config is not valid JSON: " << e.what() << "\n";
        return 2;
    }
    return run_scenario(j, overrides, summary_out, err_out);
}

} // namespace bd
