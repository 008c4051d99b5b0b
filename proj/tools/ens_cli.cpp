// ens: scoring, masking, curation, baseline and fixture generation for multicube
// forecasts. Exit codes: 0 ok, 1 fatal error, 2 evaluation finished with per-cube
// errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ens/ens.hpp"

namespace fs = std::filesystem;

namespace {

std::size_t resolve_workers(std::size_t flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("ENS_NUM_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return std::size_t(v);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring ENS_NUM_WORKERS='" << env << "'\n";
    }
    return ens::default_workers();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ens::IoError("cannot create " + path.string());
    out << text;
    if (!out) throw ens::IoError("write failed: " + path.string());
}

struct EvaluateArgs {
    std::string track = "iid";
    std::string targets, predictions, out, csv;
    std::size_t workers = 0;
};

int run_evaluate(const EvaluateArgs& a) {
    const auto track = ens::TrackSpec::parse(a.track);
    const auto manifest = ens::scan_cube_dir(a.targets);
    if (manifest.entries.empty()) throw ens::EmptyInput("no cubes under " + a.targets);
    const auto report = ens::evaluate(manifest, a.predictions, track, {}, resolve_workers(a.workers));
    write_text(a.out, ens::to_json(report).dump(2) + "\n");
    if (!a.csv.empty()) {
        std::ostringstream csv;
        ens::write_summary_csv(report, csv);
        write_text(a.csv, csv.str());
    }
    std::cout << ens::format_summary_table(report);
    for (const auto& e : report.errors) {
        std::cerr << (e.cube_id.empty() ? "<dataset>" : e.cube_id) << ": " << e.kind << ": " << e.message << "\n";
    }
    if (!report.summary && report.errors.empty()) return 1;
    return report.errors.empty() ? 0 : 2;
}

int run_mask(const std::string& in, const std::string& out) {
    auto cube = ens::read_cube(in);
    ens::apply_quality_mask(cube);
    ens::write_cube(cube, out);
    std::size_t masked = 0;
    for (std::size_t t = 0; t < cube.frames(); ++t) {
        for (float v : cube.hr_dynamic.plane(t, ens::idx(ens::HrChannel::quality_mask))) masked += v != 0.0f;
    }
    std::cout << cube.cube_id << ": " << masked << " of " << cube.frames() * cube.hr_dynamic.frame_size()
              << " pixels masked\n";
    return 0;
}

struct CurateArgs {
    std::string table, out;
    std::uint64_t seed = 0;
    double x = 0.5;
    ens::CurationConfig cfg;
};

int run_curate(const CurateArgs& a) {
    auto rows = ens::read_quality_table(a.table);
    for (auto& r : rows) r.qs = ens::quality_score(r.q, a.cfg);
    const auto curated = ens::curate(rows, a.x, a.cfg);
    std::vector<ens::QualityTableRow> corpus;
    corpus.reserve(curated.selection.size());
    for (auto i : curated.selection) corpus.push_back(rows[i]);
    const auto split = ens::sample_ood_split(corpus, a.seed, a.cfg);
    write_text(a.out, ens::split_to_json(split, a.seed, curated.x_final).dump(2) + "\n");
    std::cout << "x_final " << curated.x_final << ": train " << split.train.size() << ", iid " << split.iid.size()
              << ", ood " << split.ood.size() << " (" << split.ood_tiles.size() << " tiles, draw " << split.draws
              << ")\n";
    return 0;
}

int run_baseline(const std::string& track_name, const std::string& cubes, const std::string& out,
                 const std::string& mode_name) {
    const auto track = ens::TrackSpec::parse(track_name);
    const auto mode = ens::parse_baseline_mode(mode_name);
    const auto manifest = ens::scan_cube_dir(cubes);
    fs::create_directories(out);
    for (const auto& e : manifest.entries) {
        auto cube = ens::read_cube(manifest.cube_path(e));
        cube.cube_id = e.cube_id;
        ens::write_prediction(ens::persistence_prediction(cube, track, mode), out);
    }
    std::cout << "wrote " << manifest.entries.size() << " predictions to " << out << "\n";
    return 0;
}

struct SynthArgs {
    std::uint64_t seed = 0;
    std::size_t n = 10;
    std::string out;
    std::string profile = "clean";
    std::string track = "iid";
    std::size_t frames = 30;
    std::size_t tiles = 0;
    std::size_t workers = 0;
    bool table_only = false;
};

int run_synth(const SynthArgs& a) {
    const auto profile = ens::parse_corpus_profile(a.profile);
    fs::create_directories(a.out);
    const std::size_t tiles = a.tiles ? a.tiles : std::max<std::size_t>(1, a.n / 10);

    if (a.table_only) {
        if (a.n % tiles != 0) throw ens::InvalidArgument("--n must be a multiple of --tiles");
        ens::CorpusParams cp;
        cp.n_tiles = tiles;
        cp.cubes_per_tile = a.n / tiles;
        cp.profile = profile;
        const auto corpus = ens::synth_corpus(a.seed, cp);
        ens::write_quality_table(corpus.rows, fs::path(a.out) / "quality_table.csv");
        std::cout << "wrote " << corpus.rows.size() << " quality rows to " << a.out << "\n";
        return 0;
    }

    const auto track = ens::TrackSpec::parse(a.track);
    std::vector<ens::QualityTableRow> rows(a.n);
    std::vector<ens::ManifestEntry> entries(a.n);
    ens::parallel_for(a.n, resolve_workers(a.workers), [&](std::size_t i) {
        ens::Rng r(ens::Rng::derive(a.seed, i));
        ens::SynthParams p;
        p.frames = a.frames;
        p.tile = ens::synth_tile_name(i % tiles);
        p.start_month = 1 + int(i % 12);
        if (profile == ens::CorpusProfile::clean) {
            p.cloud_rate = 0.05 * r.uniform();
        } else {
            p.cloud_rate = 0.5 * r.uniform();
            p.water_fraction = (i % 10 == 0) ? 0.6 : 0.2 * r.uniform();
        }
        const auto cube = ens::synth_cube(r.next(), p);
        ens::write_cube(cube, fs::path(a.out) / (cube.cube_id + ".npz"));
        auto& row = rows[i];
        row.cube_id = cube.cube_id;
        row.tile = cube.tile;
        row.latitude_band = cube.latitude_band;
        row.start_month = cube.start_month;
        row.q = ens::compute_indicators(cube, track);
        row.qs = ens::quality_score(row.q);
        entries[i] = {cube.cube_id, cube.cube_id + ".npz", cube.tile, ""};
    });
    ens::DatasetManifest m;
    m.root = a.out;
    m.entries = std::move(entries);
    std::sort(m.entries.begin(), m.entries.end(), [](const auto& x, const auto& y) { return x.cube_id < y.cube_id; });
    std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.cube_id < y.cube_id; });
    ens::write_manifest(m, fs::path(a.out) / "manifest.jsonl");
    ens::write_quality_table(rows, fs::path(a.out) / "quality_table.csv");
    std::cout << "wrote " << a.n << " cubes to " << a.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EarthNetScore evaluation and dataset tooling"};
    app.require_subcommand(1);

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against target cubes");
    evaluate->add_option("--track", ev.track, "iid, ood, extreme or seasonal")
        ->check(CLI::IsMember({"iid", "ood", "extreme", "seasonal"}));
    evaluate->add_option("--targets", ev.targets, "Directory of target cubes")->required();
    evaluate->add_option("--predictions", ev.predictions, "Directory with one folder of trajectories per cube")->required();
    evaluate->add_option("--out", ev.out, "Report JSON")->required();
    evaluate->add_option("--workers", ev.workers, "Worker threads (default: ENS_NUM_WORKERS or all cores)");
    evaluate->add_option("--csv", ev.csv, "Also write the summary row as CSV");

    std::string mask_in, mask_out;
    auto* mask = app.add_subcommand("mask", "Recompute the quality mask channel of a cube");
    mask->add_option("--cube", mask_in)->required()->check(CLI::ExistingFile);
    mask->add_option("--out", mask_out)->required();

    CurateArgs cu;
    auto* curate = app.add_subcommand("curate", "Filter, rank and split a quality table");
    curate->add_option("--quality-table", cu.table)->required()->check(CLI::ExistingFile);
    curate->add_option("--out", cu.out, "split.json")->required();
    curate->add_option("--seed", cu.seed);
    curate->add_option("--x", cu.x, "Initial quality restriction in (0, 1]");
    curate->add_option("--min-total", cu.cfg.min_total);
    curate->add_option("--max-per-tile", cu.cfg.max_per_tile);
    curate->add_option("--north-min", cu.cfg.north_min_total);
    curate->add_option("--ood-tiles", cu.cfg.ood_tile_count);
    curate->add_option("--ood-min", cu.cfg.ood_min);
    curate->add_option("--ood-max", cu.cfg.ood_max);
    curate->add_option("--ood-north-min", cu.cfg.ood_north_min);
    curate->add_option("--max-draws", cu.cfg.ood_max_draws);
    curate->add_option("--iid-fraction", cu.cfg.iid_fraction);
    curate->add_flag("--literal-log-guard", cu.cfg.literal_log_guard, "Use max(1-eps, .) inside the logarithms");

    std::string bl_track = "iid", bl_cubes, bl_out, bl_mode = "mean";
    auto* baseline = app.add_subcommand("baseline", "Write persistence predictions");
    baseline->add_option("--track", bl_track)->check(CLI::IsMember({"iid", "ood", "extreme", "seasonal"}));
    baseline->add_option("--cubes", bl_cubes)->required();
    baseline->add_option("--out", bl_out)->required();
    baseline->add_option("--mode", bl_mode, "mean or last_valid")->check(CLI::IsMember({"mean", "last_valid"}));

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "Generate synthetic cubes or a synthetic quality table");
    synth->add_option("--seed", sy.seed);
    synth->add_option("--n", sy.n, "Number of cubes (or table rows)");
    synth->add_option("--out", sy.out)->required();
    synth->add_option("--profile", sy.profile)->check(CLI::IsMember({"clean", "mixed"}));
    synth->add_option("--frames", sy.frames);
    synth->add_option("--track", sy.track, "Track whose context length feeds the quality indicators");
    synth->add_option("--tiles", sy.tiles, "Number of tiles (default n/10)");
    synth->add_option("--workers", sy.workers);
    synth->add_flag("--table-only", sy.table_only, "Write only quality_table.csv, no cube files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*evaluate) return run_evaluate(ev);
        if (*mask) return run_mask(mask_in, mask_out);
        if (*curate) return run_curate(cu);
        if (*baseline) return run_baseline(bl_track, bl_cubes, bl_out, bl_mode);
        if (*synth) return run_synth(sy);
    } catch (const ens::Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
