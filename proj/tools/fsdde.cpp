// Command-line front end: configuration ingestion, experiment orchestration,
// report persistence. Exit codes: 0 all checks pass, 1 any violation,
// 2 usage or configuration error.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include <fsdde/config.hpp>
#include <fsdde/parallel.hpp>
#include <fsdde/pipelines.hpp>

namespace {

struct Overrides {
    std::string config_path;
    std::string out_dir;
    double t = -1.0;
    long long paths = -1;
    long long seed = -1;
    long long threads = -1;
    bool svg = false;
};

fsdde::RunConfig load_config(const Overrides& ov, bool early) {
    fsdde::RunConfig cfg = ov.config_path.empty() ? fsdde::RunConfig()
                                                  : fsdde::RunConfig::from_file(ov.config_path);
    if (ov.t > 0.0) {
        if (early)
            cfg.t_early = ov.t;
        else
            cfg.t_late = ov.t;
    }
    if (ov.paths > 0) cfg.paths = static_cast<std::size_t>(ov.paths);
    if (ov.seed >= 0) cfg.seed = static_cast<std::uint64_t>(ov.seed);
    if (ov.svg) cfg.write_svg = true;
    if (!ov.out_dir.empty()) {
        cfg.out_dir = ov.out_dir;
    } else if (!cfg.out_dir_from_config) {
        if (const char* env = std::getenv("FSDDE_OUT")) cfg.out_dir = env;
    }
    if (ov.threads > 0) fsdde::worker_count() = static_cast<std::size_t>(ov.threads);
    return cfg;
}

void add_common(CLI::App* cmd, Overrides& ov, bool need_config) {
    auto* opt = cmd->add_option("-c,--config", ov.config_path, "configuration file (INI)");
    if (need_config) opt->required();
    cmd->add_option("-o,--out", ov.out_dir, "output directory (overrides config and FSDDE_OUT)");
    cmd->add_option("--paths", ov.paths, "number of Monte Carlo paths");
    cmd->add_option("--seed", ov.seed, "RNG seed");
    cmd->add_option("--threads", ov.threads, "worker threads (results are identical for any count)");
    cmd->add_flag("--svg", ov.svg, "emit SVG plots alongside CSV");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical verification lab for fBm-driven delay equations"};
    app.set_help_flag("--help", "print help"); // keep --h available for the Hurst index
    app.require_subcommand(1);

    Overrides ov;

    // check-lemmas has its own small flag set
    double h = 0.75;
    std::size_t trials = 10000;
    double tol = 1e-10;
    long long lemma_seed = 42;
    std::string lemma_out = "out";
    auto* lemmas = app.add_subcommand("check-lemmas", "verify both appendix identities");
    lemmas->add_option("--h", h, "Hurst index in (0.5, 1)");
    lemmas->add_option("--trials", trials, "random pairs for the half-norm inequality");
    lemmas->add_option("--tol", tol, "relative tolerance for the interval identity");
    lemmas->add_option("--seed", lemma_seed, "RNG seed");
    lemmas->add_option("-o,--out", lemma_out, "output directory");

    auto* simulate = app.add_subcommand("simulate", "solve a path batch and dump diagnostics");
    add_common(simulate, ov, true);

    auto* gf = app.add_subcommand("gf", "estimate the variance proxy g_F and check its bracket");
    add_common(gf, ov, true);
    gf->add_option("--t", ov.t, "evaluation time in (0, r]");

    auto* density = app.add_subcommand("density", "NV-formula density vs KDE with agreement check");
    add_common(density, ov, true);
    density->add_option("--t", ov.t, "evaluation time in (0, r]");

    auto* early = app.add_subcommand("verify-early", "two-sided density bound on (0, r]");
    add_common(early, ov, true);
    early->add_option("--t", ov.t, "evaluation time in (0, r]");

    auto* late = app.add_subcommand("verify-late", "density lower bound checks on (r, T]");
    add_common(late, ov, true);
    late->add_option("--t", ov.t, "evaluation time in (r, T]");

    auto* kh = app.add_subcommand("kh-constants", "chain constants ledger and block checks");
    add_common(kh, ov, true);
    kh->add_option("--t", ov.t, "chain time in (r, T]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        fsdde::pipelines::PipelineResult result;
        if (lemmas->parsed()) {
            if (lemma_seed < 0) throw fsdde::ConfigError("seed must be non-negative");
            result = fsdde::pipelines::run_check_lemmas(
                h, trials, tol, static_cast<std::uint64_t>(lemma_seed), lemma_out);
        } else if (simulate->parsed()) {
            result = fsdde::pipelines::run_simulate(load_config(ov, true));
        } else if (gf->parsed()) {
            result = fsdde::pipelines::run_gf(load_config(ov, true));
        } else if (density->parsed()) {
            result = fsdde::pipelines::run_verify_early(load_config(ov, true), true);
        } else if (early->parsed()) {
            result = fsdde::pipelines::run_verify_early(load_config(ov, true), false);
        } else if (late->parsed()) {
            result = fsdde::pipelines::run_verify_late(load_config(ov, false));
        } else if (kh->parsed()) {
            result = fsdde::pipelines::run_kh_constants(load_config(ov, false));
        }
        return result.all_pass ? 0 : 1;
    } catch (const fsdde::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const fsdde::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
