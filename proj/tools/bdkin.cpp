#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bd/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"bdkin: cluster-kinetics equilibria, spectral gap brackets and decay runs"};

    std::string config_path;
    app.add_option("config", config_path, "scenario config (JSON)")->required();

    bd::ScenarioOverrides ov;
    std::string mode, out;
    double z = 0, mass = 0, t_end = 0, eta = 0;
    std::size_t n = 0;
    auto* omode = app.add_option("--mode", mode, "override the scenario mode");
    auto* oz = app.add_option("--z", z, "override the monomer density");
    auto* omass = app.add_option("--mass", mass, "override the conserved mass");
    auto* on = app.add_option("--n", n, "override the truncation size");
    auto* otend = app.add_option("--t-end", t_end, "override the end time");
    auto* oeta = app.add_option("--eta", eta, "override the l1 weight rate");
    auto* oout = app.add_option("--out", out, "override the output path prefix");

    CLI11_PARSE(app, argc, argv);

    if (*omode) ov.mode = mode;
    if (*oz) ov.z = z;
    if (*omass) ov.mass = mass;
    if (*on) ov.n = n;
    if (*otend) ov.t_end = t_end;
    if (*oeta) ov.eta = eta;
    if (*oout) ov.out = out;

    if (const char* env = std::getenv("BD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) ov.threads = static_cast<unsigned>(v);
    }

    return bd::run_scenario_file(config_path, ov, std::cout, std::cerr);
}
