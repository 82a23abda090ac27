// floquet_lab: band structures, Fermi varieties, Hill discriminants, impurity
// scans and Floquet-transform checks from the command line.
//
//   floquet_lab bands --potential mathieu:1 --cutoff 8 --grid 201 --nbands 4
//   floquet_lab fermi --potential free --lambda 1 --grid 61
//   floquet_lab hill --potential mathieu:1 --lambda-max 60
//   floquet_lab scan --background mathieu:1 --impurity gaussian:-2,1 --window -5,20
//   floquet_lab floquet-check
//   floquet_lab replay out/manifest.json --out again

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "floquet/cli.hpp"

namespace {

std::vector<double> parse_list(const std::string& s, const char* what) {
    return floquet::detail::parse_number_list(s, what);
}

}  // namespace

int main(int argc, char** argv) {
    using floquet::RunConfig;
    CLI::App app{"Periodic Schroedinger operator laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(FLOQUET_VERSION));

    RunConfig cfg;
    std::string window = "8.9,10.8", ladder = "20,40,80", manifest_path;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out,-o", cfg.output_dir, "output directory");
        sub->add_option("--cutoff", cfg.cutoff, "plane-wave cutoff M (0: 8 / 6 / 3 by dimension)");
        sub->add_option("--grid", cfg.grid, "Brillouin grid nodes per axis (0: dimension default)");
        sub->add_option("--dim", cfg.dim, "dimension for dimension-free presets (0: subcommand default)");
    };

    auto* bands = app.add_subcommand("bands", "band functions on a Brillouin grid, bands and gaps");
    common(bands);
    bands->add_option("--potential,-p", cfg.potential, "free | const:c | mathieu:a | mathieu2d:a,b | mathieu3d:a,b,c | file:path");
    bands->add_option("--nbands", cfg.nbands, "number of band functions");
    bands->add_option("--refine-tol", cfg.refine_tol, "extremum refinement tolerance");

    auto* fermi = app.add_subcommand("fermi", "real Fermi variety trace and complex-line probes");
    common(fermi);
    fermi->add_option("--potential,-p", cfg.potential, "potential preset");
    fermi->add_option("--lambda,-l", cfg.lambda, "energy");
    fermi->add_option("--probe", cfg.probes, "complex line probe j,re0,re1,im0,im1 (repeatable)");

    auto* hill = app.add_subcommand("hill", "Hill discriminant table and band intervals (1D)");
    hill->add_option("--out,-o", cfg.output_dir, "output directory");
    hill->add_option("--potential,-p", cfg.potential, "1D potential preset");
    hill->add_option("--lambda-min", cfg.lambda_min, "table start (default: potential lower bound)");
    hill->add_option("--lambda-max", cfg.lambda_max, "table end and band search limit");
    hill->add_option("--step", cfg.table_step, "table spacing");
    hill->add_option("--tol", cfg.tol, "integrator tolerance");

    auto* scan = app.add_subcommand("scan", "impurity eigenvalues across a box ladder");
    scan->set_help_flag("--help", "print this help message and exit");
    scan->add_option("--out,-o", cfg.output_dir, "output directory");
    scan->add_option("--dim", cfg.dim, "box dimension (1 or 2)");
    scan->add_option("--background", cfg.background, "background potential preset");
    scan->add_option("--impurity", cfg.impurity, "none | gaussian:A,w[,c] | wvn:lambda | table:path");
    scan->add_option("--window", window, "energy window a,b");
    scan->add_option("--ladder", ladder, "box half-widths, ascending");
    scan->add_option("--h", cfg.h, "grid step");
    scan->add_option("--order", cfg.order, "finite-difference order (2, 4, 6, 8)");
    scan->add_flag("--dump-vectors", cfg.dump_vectors, "write eigenfunction samples");

    auto* check = app.add_subcommand("floquet-check", "Floquet transform invariant suite");
    check->add_option("--out,-o", cfg.output_dir, "output directory");
    check->add_option("--cells", cfg.cells, "cell range");
    check->add_option("--samples", cfg.samples, "samples per cell");
    check->add_option("--seed", cfg.seed, "random seed");

    std::string replay_out;
    auto* replay = app.add_subcommand("replay", "rerun the configuration stored in a manifest");
    replay->add_option("manifest", manifest_path, "manifest.json")->required();
    replay->add_option("--out,-o", replay_out, "output directory (default: the manifest's)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : floquet::exit_config_error;
    }

    try {
        if (replay->parsed()) {
            std::ifstream in(manifest_path);
            if (!in) throw floquet::InputError("cannot open manifest '" + manifest_path + "'");
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw floquet::InputError(std::string("manifest is not valid JSON: ") + e.what());
            }
            if (!j.contains("config")) throw floquet::InputError("manifest has no config block");
            cfg = floquet::config_from_json(j.at("config"));
            if (!replay_out.empty()) cfg.output_dir = replay_out;
        } else {
            cfg.subcommand = app.get_subcommands().front()->get_name();
            if (scan->parsed()) {
                cfg.window = parse_list(window, "--window");
                cfg.ladder = parse_list(ladder, "--ladder");
            }
        }
    } catch (const floquet::InputError& e) {
        std::cerr << "floquet_lab: configuration error: " << e.what() << '\n';
        return floquet::exit_config_error;
    }
    return floquet::run(cfg);
}
