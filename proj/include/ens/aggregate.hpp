#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ens/cube_io.hpp"
#include "ens/cube_model.hpp"
#include "ens/error.hpp"
#include "ens/numeric.hpp"
#include "ens/parallel.hpp"
#include "ens/scoring.hpp"

namespace ens {

/// Harmonic mean of the available subscores; NaN ones are left out.
inline double cube_ens(const SubscoreVector& s) {
    const std::array<double, 4> v{s.mad, s.ols, s.emd, s.ssim};
    const double h = harmonic_mean_ignoring_nan(v);
    if (std::isnan(h)) throw AllSubscoresMissing("every subscore is NaN");
    return h;
}

inline bool has_any_subscore(const SubscoreVector& s) {
    return !(std::isnan(s.mad) && std::isnan(s.ols) && std::isnan(s.emd) && std::isnan(s.ssim));
}

/// All four subscores of one trajectory, with the per-cube ENS filled in (NaN when
/// no subscore could be computed).
inline SubscoreVector score_trajectory(const ScoreInput& in, const ScoreConfig& cfg = {}) {
    SubscoreVector s;
    s.mad = mad_score(in, cfg);
    s.ols = ols_score(in, cfg);
    s.emd = emd_score(in, cfg);
    s.ssim = ssim_score(in, cfg);
    s.ens = has_any_subscore(s) ? cube_ens(s) : kNaN;
    return s;
}

struct BestChoice {
    std::size_t index = 0;
    SubscoreVector subscores;
};

/// The trajectory with the highest per-cube ENS; the lowest index wins ties. Vectors
/// without any subscore rank last.
inline BestChoice select_best(const std::vector<SubscoreVector>& candidates) {
    if (candidates.empty()) throw EmptyInput("select_best: no candidate trajectories");
    BestChoice best{0, candidates.front()};
    double best_ens = has_any_subscore(candidates.front()) ? cube_ens(candidates.front()) : -1.0;
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        const double e = has_any_subscore(candidates[k]) ? cube_ens(candidates[k]) : -1.0;
        if (e > best_ens) {
            best_ens = e;
            best = {k, candidates[k]};
        }
    }
    if (has_any_subscore(best.subscores)) best.subscores.ens = best_ens;
    return best;
}

struct DatasetSummary {
    double ens = kNaN;
    double mad = kNaN;
    double ols = kNaN;
    double emd = kNaN;
    double ssim = kNaN;
};

/// NaN-ignoring mean per subscore over cubes, then the harmonic mean of the means.
inline DatasetSummary dataset_ens(const std::vector<SubscoreVector>& per_cube) {
    if (per_cube.empty()) throw EmptyInput("dataset_ens: no cubes");
    std::vector<double> col(per_cube.size());
    auto mean_of = [&](double SubscoreVector::*field) {
        for (std::size_t i = 0; i < per_cube.size(); ++i) col[i] = per_cube[i].*field;
        return nan_mean(col);
    };
    DatasetSummary d;
    d.mad = mean_of(&SubscoreVector::mad);
    d.ols = mean_of(&SubscoreVector::ols);
    d.emd = mean_of(&SubscoreVector::emd);
    d.ssim = mean_of(&SubscoreVector::ssim);
    const std::array<double, 4> means{d.mad, d.ols, d.emd, d.ssim};
    d.ens = harmonic_mean_ignoring_nan(means);
    if (std::isnan(d.ens)) throw AllSubscoresMissing("dataset_ens: every subscore mean is NaN");
    return d;
}

struct CubeResult {
    std::string cube_id;
    std::size_t best_trajectory = 0;
    std::size_t trajectories = 0;
    SubscoreVector subscores;
};

struct EvaluationError {
    std::string cube_id;
    std::string kind;
    std::string message;
};

struct EvaluationReport {
    TrackSpec track = TrackSpec::iid();
    std::optional<DatasetSummary> summary;
    std::vector<CubeResult> cubes;
    std::vector<EvaluationError> errors;
};

/// Scores every trajectory against one target and keeps the best.
inline CubeResult score_cube(const std::string& cube_id, const Tensor4<float>& target,
                             const Tensor4<std::uint8_t>& mask, const std::vector<Tensor4<float>>& trajectories,
                             const ScoreConfig& cfg = {}) {
    if (trajectories.empty()) throw MissingPrediction(cube_id + ": no trajectory");
    std::vector<SubscoreVector> subs;
    subs.reserve(trajectories.size());
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        const auto& p = trajectories[k];
        if (p.shape() != target.shape()) {
            throw ShapeError(cube_id + ": trajectory " + std::to_string(k) + " has shape " + shape_string(p.shape()) +
                             ", expected " + shape_string(target.shape()));
        }
        for (float v : p.values()) {
            if (!std::isfinite(v)) throw NonFinitePrediction(cube_id + ": trajectory " + std::to_string(k) + " contains non-finite values");
        }
        subs.push_back(score_trajectory(ScoreInput{target, mask, p}, cfg));
    }
    auto best = select_best(subs);
    return {cube_id, best.index, trajectories.size(), best.subscores};
}

/// Target frames and per-band masks of a stored cube for a track. A cube holding
/// exactly t_T frames is taken as target-only.
inline std::pair<Tensor4<float>, Tensor4<std::uint8_t>> load_target(const std::filesystem::path& cube_path,
                                                                   const std::string& cube_id, const TrackSpec& track) {
    const auto hr = read_cube_hr(cube_path);
    std::size_t first;
    if (hr.frames() == track.target_frames) {
        first = 0;
    } else if (hr.frames() >= track.total_frames()) {
        first = track.context_frames;
    } else {
        throw InsufficientFrames(cube_id + ": track " + std::string(to_string(track.name)) + " needs " +
                                 std::to_string(track.total_frames()) + " frames, cube has " +
                                 std::to_string(hr.frames()));
    }
    return {hr.frames_range(first, track.target_frames).channel_range(0, kBands),
            band_masks(hr, first, track.target_frames)};
}

/// Scores a directory of predictions against the cubes of a manifest. Per-cube
/// problems are collected in the report; results are ordered by cube id so the
/// report does not depend on `workers`.
inline EvaluationReport evaluate(const DatasetManifest& manifest, const std::filesystem::path& predictions_dir,
                                 const TrackSpec& track, const ScoreConfig& cfg = {},
                                 std::size_t workers = default_workers()) {
    const auto index = index_predictions(predictions_dir, manifest);
    std::vector<const ManifestEntry*> order;
    for (const auto& e : manifest.entries) order.push_back(&e);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->cube_id < b->cube_id; });

    struct Slot {
        std::optional<CubeResult> result;
        std::optional<EvaluationError> error;
    };
    std::vector<Slot> slots(order.size());
    parallel_for(order.size(), workers, [&](std::size_t i) {
        const auto& e = *order[i];
        try {
            auto it = index.files.find(e.cube_id);
            if (it == index.files.end()) throw MissingPrediction("no prediction for cube " + e.cube_id);
            auto [target, mask] = load_target(manifest.cube_path(e), e.cube_id, track);
            auto pred = load_prediction(e.cube_id, it->second);
            slots[i].result = score_cube(e.cube_id, target, mask, pred.trajectories, cfg);
        } catch (const Error& ex) {
            slots[i].error = EvaluationError{e.cube_id, ex.kind(), ex.what()};
        } catch (const std::exception& ex) {
            slots[i].error = EvaluationError{e.cube_id, "Error", ex.what()};
        }
    });

    EvaluationReport report;
    report.track = track;
    for (const auto& id : index.orphans) {
        report.errors.push_back({id, "OrphanPrediction", "prediction folder without a matching cube: " + id});
    }
    std::vector<SubscoreVector> best;
    for (auto& s : slots) {
        if (s.result) {
            best.push_back(s.result->subscores);
            report.cubes.push_back(std::move(*s.result));
        }
        if (s.error) report.errors.push_back(std::move(*s.error));
    }
    if (!best.empty()) {
        try {
            report.summary = dataset_ens(best);
        } catch (const AllSubscoresMissing& ex) {
            report.errors.push_back({"", ex.kind(), ex.what()});
        }
    }
    return report;
}

} // namespace ens
