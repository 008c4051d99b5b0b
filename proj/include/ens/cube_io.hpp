#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ens/cube_model.hpp"
#include "ens/error.hpp"
#include "ens/indicators.hpp"
#include "ens/npz.hpp"

namespace ens {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Multicube container
//
// Arrays are stored spatial-first: highresdynamic [h, w, c, t], mesodynamic
// [h, w, c, 5t], statics [h, w]. In memory dynamic arrays are [t, c, h, w].

/// Reorders stored [h, w, c, t] into [t, c, h, w].
inline Tensor4<float> from_storage_order(const npz::NpyArray& a) {
    const std::size_t h = a.shape[0], w = a.shape[1], c = a.shape[2], t = a.shape[3];
    Tensor4<float> out({t, c, h, w});
    auto dst = out.values();
    const float* src = a.data.data();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t k = 0; k < c; ++k)
                for (std::size_t f = 0; f < t; ++f) dst[out.index(f, k, y, x)] = *src++;
    return out;
}

/// Reorders [t, c, h, w] into stored [h, w, c, t].
inline npz::NpyArray to_storage_order(const Tensor4<float>& in) {
    npz::NpyArray a;
    a.shape = {in.height(), in.width(), in.channels(), in.frames()};
    a.data.resize(in.size());
    float* dst = a.data.data();
    const auto src = in.values();
    for (std::size_t y = 0; y < in.height(); ++y)
        for (std::size_t x = 0; x < in.width(); ++x)
            for (std::size_t k = 0; k < in.channels(); ++k)
                for (std::size_t f = 0; f < in.frames(); ++f) *dst++ = src[in.index(f, k, y, x)];
    return a;
}

namespace detail {

inline Grid<float> grid_from(const npz::NpyArray& a, std::size_t size, const std::string& name) {
    const bool ok = (a.shape.size() == 2 && a.shape[0] == size && a.shape[1] == size) ||
                    (a.shape.size() == 3 && a.shape[0] == size && a.shape[1] == size && a.shape[2] == 1);
    if (!ok) throw ShapeError(name + " must be " + std::to_string(size) + "x" + std::to_string(size));
    Grid<float> g(size, size);
    std::copy(a.data.begin(), a.data.end(), g.values().begin());
    return g;
}

inline void check_dynamic(const npz::NpyArray& a, std::size_t size, std::size_t channels, const std::string& name) {
    if (a.shape.size() != 4 || a.shape[0] != size || a.shape[1] != size || a.shape[2] != channels) {
        std::string got = "(";
        for (auto d : a.shape) got += std::to_string(d) + ",";
        got += ")";
        throw ShapeError(name + " must be " + std::to_string(size) + "x" + std::to_string(size) + "x" +
                         std::to_string(channels) + "xt, got " + got);
    }
}

} // namespace detail

/// MGRS latitude band letter of a tile id ("32UMC" -> 'U'); bands U..X lie in the
/// northern half of the European study extent.
inline LatitudeBand latitude_band_of_tile(std::string_view tile) {
    std::size_t i = 0;
    while (i < tile.size() && std::isdigit(static_cast<unsigned char>(tile[i]))) ++i;
    if (i == 0 || i >= tile.size()) return LatitudeBand::south;
    const char band = char(std::toupper(static_cast<unsigned char>(tile[i])));
    return (band >= 'U' && band <= 'X') ? LatitudeBand::north : LatitudeBand::south;
}

/// Fills tile, latitude band and start month from an id of the form
/// `<tile>_<YYYY-MM-DD>_...`. Fields that cannot be parsed keep their defaults.
inline void apply_id_metadata(Multicube& cube, const std::string& cube_id) {
    cube.cube_id = cube_id;
    const auto us = cube_id.find('_');
    cube.tile = cube_id.substr(0, us);
    cube.latitude_band = latitude_band_of_tile(cube.tile);
    if (us != std::string::npos && cube_id.size() >= us + 8 && cube_id[us + 5] == '-') {
        int month = 0;
        const char* b = cube_id.data() + us + 6;
        if (std::from_chars(b, b + 2, month).ec == std::errc{} && month >= 1 && month <= 12) {
            cube.start_month = month;
        }
    }
}

inline Multicube read_cube(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("no such file: " + path.string());
    npz::ZipReader zip(path);
    auto hr = npz::read_array(zip, "highresdynamic");
    auto meso = npz::read_array(zip, "mesodynamic");
    auto hrs = npz::read_array(zip, "highresstatic");
    auto mesos = npz::read_array(zip, "mesostatic");
    detail::check_dynamic(hr, kHrSize, kHrChannels, "highresdynamic");
    detail::check_dynamic(meso, kMesoSize, kMesoChannels, "mesodynamic");
    if (hr.shape[3] == 0) throw ShapeError("highresdynamic has zero frames");
    if (meso.shape[3] != kMesoDaysPerFrame * hr.shape[3]) {
        throw ShapeError("mesodynamic length " + std::to_string(meso.shape[3]) + " != 5 x " +
                         std::to_string(hr.shape[3]));
    }
    Multicube cube;
    cube.hr_dynamic = from_storage_order(hr);
    cube.meso_dynamic = from_storage_order(meso);
    cube.hr_static = detail::grid_from(hrs, kHrSize, "highresstatic");
    cube.meso_static = detail::grid_from(mesos, kMesoSize, "mesostatic");
    for (std::size_t t = 0; t < cube.frames(); ++t) {
        for (float& v : cube.hr_dynamic.plane(t, idx(HrChannel::quality_mask))) {
            v = (v >= 0.5f || std::isnan(v)) ? 1.0f : 0.0f;
        }
    }
    apply_id_metadata(cube, path.stem().string());
    return cube;
}

/// Reads only the high-resolution dynamic array, [t, 7, 128, 128].
inline Tensor4<float> read_cube_hr(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("no such file: " + path.string());
    npz::ZipReader zip(path);
    auto hr = npz::read_array(zip, "highresdynamic");
    detail::check_dynamic(hr, kHrSize, kHrChannels, "highresdynamic");
    auto out = from_storage_order(hr);
    for (std::size_t t = 0; t < out.frames(); ++t) {
        for (float& v : out.plane(t, idx(HrChannel::quality_mask))) v = (v >= 0.5f || std::isnan(v)) ? 1.0f : 0.0f;
    }
    return out;
}

inline void write_cube(const Multicube& cube, const fs::path& path, int level = 1) {
    if (cube.frames() == 0) throw ShapeError(cube.cube_id + ": cannot write a zero-frame cube");
    if (auto v = validate_cube(cube); !v.empty()) {
        throw ShapeError(cube.cube_id + ": " + v.front().field + ": " + v.front().rule);
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    npz::ZipWriter zip(path, level);
    zip.add_array("highresdynamic", to_storage_order(cube.hr_dynamic));
    zip.add_array("mesodynamic", to_storage_order(cube.meso_dynamic));
    npz::NpyArray hs{{kHrSize, kHrSize}, {cube.hr_static.values().begin(), cube.hr_static.values().end()}};
    zip.add_array("highresstatic", hs);
    npz::NpyArray ms{{kMesoSize, kMesoSize}, {cube.meso_static.values().begin(), cube.meso_static.values().end()}};
    zip.add_array("mesostatic", ms);
    zip.finish();
}

// ---------------------------------------------------------------------------
// Predictions: <dir>/<cube_id>/<trajectory>.npz, each holding highresdynamic
// [128, 128, 4, t_T].

inline void write_trajectory(const Tensor4<float>& trajectory, const fs::path& path, int level = 1) {
    if (trajectory.channels() != kBands) throw ShapeError("trajectory must have 4 bands");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    npz::ZipWriter zip(path, level);
    zip.add_array("highresdynamic", to_storage_order(trajectory));
    zip.finish();
}

inline Tensor4<float> read_trajectory(const fs::path& path) {
    npz::ZipReader zip(path);
    auto a = npz::read_array(zip, "highresdynamic");
    if (a.shape.size() != 4 || a.shape[2] != kBands) {
        throw ShapeError(path.string() + ": prediction highresdynamic must be h x w x 4 x t");
    }
    return from_storage_order(a);
}

inline void write_prediction(const Prediction& p, const fs::path& dir, int level = 1) {
    for (std::size_t k = 0; k < p.trajectories.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "pred_%03zu.npz", k);
        write_trajectory(p.trajectories[k], dir / p.cube_id / name, level);
    }
}

struct ManifestEntry {
    std::string cube_id;
    std::string path; // relative to the manifest root
    std::string tile;
    std::string split;
};

struct DatasetManifest {
    fs::path root;
    std::vector<ManifestEntry> entries;

    fs::path cube_path(const ManifestEntry& e) const { return root / e.path; }
};

/// Trajectory files found per cube, plus prediction folders without a cube.
struct PredictionIndex {
    std::map<std::string, std::vector<fs::path>> files;
    std::vector<std::string> orphans;
};

inline std::vector<fs::path> sorted_npz_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".npz") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    return out;
}

inline PredictionIndex index_predictions(const fs::path& dir, const DatasetManifest& manifest) {
    if (!fs::is_directory(dir)) throw IoError("prediction directory not found: " + dir.string());
    std::set<std::string> known;
    for (const auto& e : manifest.entries) known.insert(e.cube_id);
    PredictionIndex idx;
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) subdirs.push_back(e.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs) {
        const auto id = sub.filename().string();
        auto files = sorted_npz_files(sub);
        if (files.empty()) continue;
        if (!known.count(id)) {
            idx.orphans.push_back(id);
            continue;
        }
        idx.files.emplace(id, std::move(files));
    }
    return idx;
}

inline Prediction load_prediction(const std::string& cube_id, const std::vector<fs::path>& files) {
    Prediction p;
    p.cube_id = cube_id;
    for (const auto& f : files) p.trajectories.push_back(read_trajectory(f));
    p.validate();
    return p;
}

/// Single-consumer stream of predictions, in manifest order, grouping every
/// trajectory file of a cube.
class PredictionStream {
public:
    PredictionStream(const fs::path& dir, const DatasetManifest& manifest)
        : index_(index_predictions(dir, manifest)) {
        if (!index_.orphans.empty()) {
            throw OrphanPrediction("predictions without a matching cube: " + index_.orphans.front() +
                                   (index_.orphans.size() > 1
                                        ? " (+" + std::to_string(index_.orphans.size() - 1) + " more)"
                                        : std::string{}));
        }
        for (const auto& e : manifest.entries) {
            if (index_.files.count(e.cube_id)) order_.push_back(e.cube_id);
        }
    }

    std::optional<Prediction> next() {
        if (pos_ >= order_.size()) return std::nullopt;
        const auto& id = order_[pos_++];
        return load_prediction(id, index_.files.at(id));
    }

private:
    PredictionIndex index_;
    std::vector<std::string> order_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Manifests: newline-delimited JSON, one {cube_id, path, tile, split} per line.

inline DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    DatasetManifest m;
    m.root = path.parent_path();
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ManifestEntry e;
        try {
            auto j = nlohmann::json::parse(line);
            e.cube_id = j.at("cube_id").get<std::string>();
            e.path = j.at("path").get<std::string>();
            e.tile = j.value("tile", std::string{});
            e.split = j.value("split", std::string{});
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
        if (!seen.insert(e.cube_id).second) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": duplicate cube_id " + e.cube_id);
        }
        if (!fs::exists(m.root / e.path)) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": missing cube file " + e.path);
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline void write_manifest(const DatasetManifest& m, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    for (const auto& e : m.entries) {
        nlohmann::ordered_json j;
        j["cube_id"] = e.cube_id;
        j["path"] = e.path;
        j["tile"] = e.tile;
        j["split"] = e.split;
        out << j.dump() << '\n';
    }
}

/// Manifest for a directory of cubes: `manifest.jsonl` when present, otherwise every
/// `.npz` below `dir`, sorted by relative path, with the file stem as cube id.
inline DatasetManifest scan_cube_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("cube directory not found: " + dir.string());
    if (fs::exists(dir / "manifest.jsonl")) return read_manifest(dir / "manifest.jsonl");
    DatasetManifest m;
    m.root = dir;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".npz") files.push_back(fs::relative(e.path(), dir));
    }
    std::sort(files.begin(), files.end());
    std::set<std::string> seen;
    for (const auto& f : files) {
        ManifestEntry e;
        e.cube_id = f.stem().string();
        if (!seen.insert(e.cube_id).second) throw ParseError("duplicate cube id " + e.cube_id + " under " + dir.string());
        e.path = f.generic_string();
        e.tile = e.cube_id.substr(0, e.cube_id.find('_'));
        m.entries.push_back(std::move(e));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Data quality table (RFC-4180 CSV).

inline const std::vector<std::string>& quality_table_header() {
    static const std::vector<std::string> h = [] {
        std::vector<std::string> cols{"cube_id", "tile", "latitude_band", "start_month", "frames"};
        for (const char* fam : {"cd", "mcd", "d"}) {
            for (int x : kMaskThresholds) cols.push_back(std::string(fam) + "_" + std::to_string(x));
        }
        for (const char* c : {"w", "apct", "pct", "qs"}) cols.emplace_back(c);
        return cols;
    }();
    return h;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// Splits CSV text into records; each record remembers the line it started on.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv(std::string_view text,
                                                                                const std::string& source) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;
    auto end_record = [&] {
        if (field_started || !fields.empty()) {
            fields.push_back(std::move(field));
            records.emplace_back(record_line, std::move(fields));
        }
        fields.clear();
        field.clear();
        field_started = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (!field.empty()) throw ParseError(source + ":" + std::to_string(line) + ": stray quote");
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\r') {
            continue;
        } else if (c == '\n') {
            end_record();
            ++line;
            record_line = line;
        } else {
            if (!field_started && fields.empty()) record_line = line;
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw ParseError(source + ":" + std::to_string(line) + ": unterminated quoted field");
    end_record();
    return records;
}

} // namespace detail

inline void write_quality_table(const std::vector<QualityTableRow>& rows, std::ostream& out) {
    const auto& header = quality_table_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\r\n";
    for (const auto& r : rows) {
        out << detail::csv_field(r.cube_id) << ',' << detail::csv_field(r.tile) << ','
            << to_string(r.latitude_band) << ',' << r.start_month << ',' << r.q.frames;
        for (const auto* fam : {&r.q.cd, &r.q.mcd, &r.q.d}) {
            for (int v : *fam) out << ',' << v;
        }
        out << ',' << detail::format_double(r.q.w) << ',' << detail::format_double(r.q.apct) << ','
            << detail::format_double(r.q.pct) << ',' << detail::format_double(r.qs) << "\r\n";
    }
}

inline void write_quality_table(const std::vector<QualityTableRow>& rows, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    write_quality_table(rows, out);
}

inline std::vector<QualityTableRow> parse_quality_table(std::string_view text, const std::string& source = "<csv>") {
    auto records = detail::parse_csv(text, source);
    if (records.empty()) throw ParseError(source + ":1: missing header row");
    const auto& header = quality_table_header();
    const auto& got = records.front().second;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i >= got.size()) throw ParseError(source + ":1: missing column '" + header[i] + "'");
        if (got[i] != header[i]) {
            throw ParseError(source + ":1: expected column '" + header[i] + "' at position " +
                             std::to_string(i + 1) + ", found '" + got[i] + "'");
        }
    }
    if (got.size() != header.size()) throw ParseError(source + ":1: unexpected extra column '" + got[header.size()] + "'");

    std::vector<QualityTableRow> rows;
    rows.reserve(records.size() - 1);
    for (std::size_t k = 1; k < records.size(); ++k) {
        const std::size_t line = records[k].first;
        const auto& f = records[k].second;
        const auto where = source + ":" + std::to_string(line) + ": ";
        if (f.size() != header.size()) {
            throw ParseError(where + "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        }
        auto as_int = [&](std::size_t col) {
            int v = 0;
            const auto& s = f[col];
            auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || v < 0) {
                throw ParseError(where + "column '" + header[col] + "' must be a non-negative integer, got '" + s + "'");
            }
            return v;
        };
        auto as_fraction = [&](std::size_t col, bool bounded) {
            double v = 0;
            const auto& s = f[col];
            auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
                throw ParseError(where + "column '" + header[col] + "' is not a number: '" + s + "'");
            }
            if (bounded && !(v >= 0.0 && v <= 1.0)) {
                throw ParseError(where + "column '" + header[col] + "' must lie in [0,1], got '" + s + "'");
            }
            return v;
        };
        QualityTableRow r;
        r.cube_id = f[0];
        r.tile = f[1];
        try {
            r.latitude_band = parse_latitude_band(f[2]);
        } catch (const ParseError&) {
            throw ParseError(where + "column 'latitude_band' must be north or south, got '" + f[2] + "'");
        }
        r.start_month = as_int(3);
        if (r.start_month < 1 || r.start_month > 12) throw ParseError(where + "column 'start_month' must lie in 1..12");
        r.q.frames = as_int(4);
        std::size_t col = 5;
        for (auto* fam : {&r.q.cd, &r.q.mcd, &r.q.d}) {
            for (auto& v : *fam) {
                v = as_int(col);
                if (v > r.q.frames) {
                    throw ParseError(where + "column '" + header[col] + "' exceeds frame count " + std::to_string(r.q.frames));
                }
                ++col;
            }
        }
        r.q.w = as_fraction(col++, true);
        r.q.apct = as_fraction(col++, true);
        r.q.pct = as_fraction(col++, true);
        r.qs = as_fraction(col++, false);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<QualityTableRow> read_quality_table(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_quality_table(ss.str(), path.string());
}

} // namespace ens
