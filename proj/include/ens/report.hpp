#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "json.hpp"

#include "ens/aggregate.hpp"

namespace ens {

inline constexpr int kReportSchemaVersion = 1;

inline std::string_view track_label(TrackName n) {
    switch (n) {
    case TrackName::iid: return "IID";
    case TrackName::ood: return "OOD";
    case TrackName::extreme: return "Extreme";
    case TrackName::seasonal: return "Seasonal";
    }
    return "?";
}

namespace detail {
inline nlohmann::ordered_json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}
} // namespace detail

inline nlohmann::ordered_json to_json(const SubscoreVector& s) {
    nlohmann::ordered_json j;
    j["mad"] = detail::number_or_null(s.mad);
    j["ols"] = detail::number_or_null(s.ols);
    j["emd"] = detail::number_or_null(s.emd);
    j["ssim"] = detail::number_or_null(s.ssim);
    j["ens"] = detail::number_or_null(s.ens);
    return j;
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    j["track"] = std::string(to_string(r.track.name));
    if (r.summary) {
        nlohmann::ordered_json s;
        s["ens"] = detail::number_or_null(r.summary->ens);
        s["mad"] = detail::number_or_null(r.summary->mad);
        s["ols"] = detail::number_or_null(r.summary->ols);
        s["emd"] = detail::number_or_null(r.summary->emd);
        s["ssim"] = detail::number_or_null(r.summary->ssim);
        j["summary"] = s;
    } else {
        j["summary"] = nullptr;
    }
    j["cubes"] = nlohmann::ordered_json::array();
    for (const auto& c : r.cubes) {
        nlohmann::ordered_json cj;
        cj["cube_id"] = c.cube_id;
        cj["best_trajectory"] = c.best_trajectory;
        cj["trajectories"] = c.trajectories;
        cj["subscores"] = to_json(c.subscores);
        j["cubes"].push_back(std::move(cj));
    }
    j["errors"] = nlohmann::ordered_json::array();
    for (const auto& e : r.errors) {
        j["errors"].push_back({{"cube_id", e.cube_id}, {"kind", e.kind}, {"message", e.message}});
    }
    return j;
}

/// One Table-1 style row: test set, ENS, MAD, OLS, EMD, SSIM.
inline void write_summary_csv(const EvaluationReport& r, std::ostream& out) {
    out << "test_set,ens,mad,ols,emd,ssim\n";
    out << track_label(r.track.name);
    const DatasetSummary s = r.summary.value_or(DatasetSummary{});
    for (double v : {s.ens, s.mad, s.ols, s.emd, s.ssim}) {
        out << ',';
        if (!std::isnan(v)) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf;
        }
    }
    out << '\n';
}

inline std::string format_summary_table(const EvaluationReport& r) {
    const DatasetSummary s = r.summary.value_or(DatasetSummary{});
    auto cell = [](double v) {
        char buf[16];
        if (std::isnan(v)) return std::string("   nan");
        std::snprintf(buf, sizeof buf, "%6.4f", v);
        return std::string(buf);
    };
    std::string out = "Test set     ENS     MAD     OLS     EMD    SSIM\n";
    char label[16];
    std::snprintf(label, sizeof label, "%-9s", std::string(track_label(r.track.name)).c_str());
    out += label;
    for (double v : {s.ens, s.mad, s.ols, s.emd, s.ssim}) out += "  " + cell(v);
    out += '\n';
    return out;
}

} // namespace ens
