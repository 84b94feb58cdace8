#pragma once

// File formats.
//
//   records (JSON lines)   one header object, then one object per input:
//       {"version":1,"N":3,"m":10,"epsilon":0.1,"norm":"linf"}
//       {"input_id":"x0","true_label":3,"outputs":[{"label":3,"cert":1},...]}
//   predictions (JSON lines)  {"input_id":"x0","label":3,"cert":1}
//   weights (JSON)         {"version":1,"weights":[...], ...}
//   grid (CSV)             px,py,truth,s0_label,s0_cert,s1_label,s1_cert,...
//   violations (CSV)       p,px,py,p_label,p_cert,q,qx,qy,q_label,q_cert,distance
//   trace (CSV)            epoch,objective,best_objective

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "certens/core.hpp"
#include "certens/toy_lab.hpp"
#include "certens/weight_learner.hpp"

namespace certens {

inline constexpr int kRecordFormatVersion = 1;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    return out;
}

inline bool is_blank(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline json parse_line(const std::string& text, std::size_t line)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
}

inline std::uint64_t require_uint(const json& obj, const char* key, std::size_t line, const std::string& path)
{
    const std::string field = path.empty() ? key : path + "." + key;
    if (!obj.contains(key)) throw SchemaError(line, field, "missing");
    const json& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
        throw SchemaError(line, field, "expected a nonnegative integer, got " + v.dump());
    return v.get<std::uint64_t>();
}

} // namespace detail

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

inline RecordSet read_records(std::istream& in)
{
    using detail::json;
    RecordSet rs;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (detail::is_blank(text)) continue;
        const json obj = detail::parse_line(text, line);
        if (!obj.is_object()) throw SchemaError(line, have_header ? "record" : "header", "expected a JSON object");

        if (!have_header) {
            const auto version = detail::require_uint(obj, "version", line, "header");
            if (version != kRecordFormatVersion)
                throw SchemaError(line, "header.version", "unsupported version " + std::to_string(version));
            rs.constituents = detail::require_uint(obj, "N", line, "header");
            rs.class_count = detail::require_uint(obj, "m", line, "header");
            if (rs.constituents < 1) throw SchemaError(line, "header.N", "must be at least 1");
            if (rs.class_count < 2) throw SchemaError(line, "header.m", "must be at least 2");
            if (!obj.contains("epsilon") || !obj["epsilon"].is_number() || obj["epsilon"].get<double>() < 0.0)
                throw SchemaError(line, "header.epsilon", "expected a nonnegative number");
            rs.epsilon = obj["epsilon"].get<double>();
            if (!obj.contains("norm") || !obj["norm"].is_string())
                throw SchemaError(line, "header.norm", "expected \"l2\" or \"linf\"");
            const auto norm = parse_norm(obj["norm"].get<std::string>());
            if (!norm) throw SchemaError(line, "header.norm", "expected \"l2\" or \"linf\", got " + obj["norm"].dump());
            rs.norm = *norm;
            if (obj.contains("model_names")) {
                const json& names = obj["model_names"];
                if (!names.is_array() || names.size() != rs.constituents)
                    throw SchemaError(line, "header.model_names", "expected an array of N strings");
                for (const auto& nm : names) {
                    if (!nm.is_string()) throw SchemaError(line, "header.model_names", "expected strings");
                    rs.model_names.push_back(nm.get<std::string>());
                }
            }
            have_header = true;
            continue;
        }

        PredictionRecord r;
        if (!obj.contains("input_id")) throw SchemaError(line, "input_id", "missing");
        const json& id = obj["input_id"];
        if (id.is_string())
            r.input_id = id.get<std::string>();
        else if (id.is_number_integer())
            r.input_id = id.dump();
        else
            throw SchemaError(line, "input_id", "expected a string or integer");
        const std::string base = "record[" + r.input_id + "]";

        const auto y = detail::require_uint(obj, "true_label", line, base);
        if (y >= rs.class_count)
            throw SchemaError(line, base + ".true_label",
                              std::to_string(y) + " is not below m=" + std::to_string(rs.class_count));
        r.true_label = Label{static_cast<std::uint32_t>(y)};

        if (!obj.contains("outputs") || !obj["outputs"].is_array())
            throw SchemaError(line, base + ".outputs", "expected an array");
        const json& outs = obj["outputs"];
        if (outs.size() != rs.constituents)
            throw SchemaError(line, base + ".outputs",
                              "has " + std::to_string(outs.size()) + " entries, expected N=" +
                                  std::to_string(rs.constituents));
        for (std::size_t i = 0; i < outs.size(); ++i) {
            const std::string path = base + ".outputs[" + std::to_string(i) + "]";
            if (!outs[i].is_object()) throw SchemaError(line, path, "expected an object");
            const auto label = detail::require_uint(outs[i], "label", line, path);
            if (label >= rs.class_count)
                throw SchemaError(line, path + ".label",
                                  std::to_string(label) + " is not below m=" + std::to_string(rs.class_count));
            if (!outs[i].contains("cert")) throw SchemaError(line, path + ".cert", "missing");
            const json& c = outs[i]["cert"];
            bool cert = false;
            if (c.is_boolean())
                cert = c.get<bool>();
            else if (c.is_number_integer() && (c.get<std::int64_t>() == 0 || c.get<std::int64_t>() == 1))
                cert = c.get<std::int64_t>() == 1;
            else
                throw SchemaError(line, path + ".cert", "expected 0 or 1, got " + c.dump());
            r.outputs.push_back({Label{static_cast<std::uint32_t>(label)}, cert});
        }
        rs.records.push_back(std::move(r));
    }
    if (!have_header) throw DataError("record file is empty: missing header line");
    return rs;
}

inline RecordSet load_records(const std::string& path)
{
    auto in = detail::open_in(path);
    return read_records(in);
}

inline void write_records(std::ostream& out, const RecordSet& rs)
{
    using detail::ordered_json;
    ordered_json header;
    header["version"] = kRecordFormatVersion;
    header["N"] = rs.constituents;
    header["m"] = rs.class_count;
    header["epsilon"] = rs.epsilon;
    header["norm"] = to_string(rs.norm);
    if (!rs.model_names.empty()) header["model_names"] = rs.model_names;
    out << header.dump() << '\n';
    for (const auto& r : rs.records) {
        ordered_json o;
        o["input_id"] = r.input_id;
        o["true_label"] = r.true_label.value;
        ordered_json outs = ordered_json::array();
        for (const auto& c : r.outputs) outs.push_back({{"label", c.label.value}, {"cert", c.cert ? 1 : 0}});
        o["outputs"] = std::move(outs);
        out << o.dump() << '\n';
    }
}

inline void save_records(const std::string& path, const RecordSet& rs)
{
    auto out = detail::open_out(path);
    write_records(out, rs);
}

inline void write_predictions(std::ostream& out, const RecordSet& rs, std::span<const CertOutput> preds)
{
    if (preds.size() != rs.size()) throw DimensionError("write_predictions: one prediction per record required");
    for (std::size_t i = 0; i < preds.size(); ++i) {
        detail::ordered_json o;
        o["input_id"] = rs.records[i].input_id;
        o["label"] = preds[i].label.value;
        o["cert"] = preds[i].cert ? 1 : 0;
        out << o.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// Reads {"weights": [...]} or a bare array. Entries that already sum to
/// one are kept as written; other nonnegative vectors are normalized.
inline WeightVector read_weights(std::istream& in)
{
    using detail::json;
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("weights: invalid JSON: ") + e.what());
    }
    const json* arr = &doc;
    if (doc.is_object()) {
        if (!doc.contains("weights")) throw DataError("weights: missing \"weights\" field");
        arr = &doc["weights"];
    }
    if (!arr->is_array() || arr->empty()) throw DataError("weights: expected a non-empty array of numbers");
    std::vector<double> w;
    for (const auto& x : *arr) {
        if (!x.is_number()) throw DataError("weights: expected numbers, got " + x.dump());
        w.push_back(x.get<double>());
    }
    try {
        // already on the simplex: keep the values bit for bit
        double sum = 0.0;
        for (double x : w) sum += x;
        const bool in_unit = std::all_of(w.begin(), w.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
        if (in_unit && std::abs(sum - 1.0) <= kWeightSumTolerance) return WeightVector::from_normalized(std::move(w));
        return WeightVector::normalized(std::move(w));
    } catch (const PreconditionError& e) {
        throw DataError(std::string("weights: ") + e.what());
    }
}

inline WeightVector load_weights(const std::string& path)
{
    auto in = detail::open_in(path);
    return read_weights(in);
}

inline void write_weights(std::ostream& out, const WeightVector& w, const LearnerTrace* trace = nullptr)
{
    detail::ordered_json doc;
    doc["version"] = kRecordFormatVersion;
    doc["weights"] = std::vector<double>(w.values().begin(), w.values().end());
    if (trace) {
        doc["learned_weights"] = std::vector<double>(trace->learned.values().begin(), trace->learned.values().end());
        doc["learned_objective"] = trace->learned_objective;
        doc["learned_exact"] = trace->learned_exact;
        doc["selected_exact"] = trace->selected_exact;
        doc["selected"] = trace->selected_one_hot < 0 ? std::string("learned")
                                                      : "one-hot:" + std::to_string(trace->selected_one_hot);
        doc["epochs_run"] = trace->epochs_run;
    }
    out << doc.dump(2) << '\n';
}

inline void write_trace_csv(std::ostream& out, const LearnerTrace& trace)
{
    out << "epoch,objective,best_objective\n";
    for (std::size_t e = 0; e < trace.objectives.size(); ++e)
        out << e << ',' << format_double(trace.objectives[e]) << ',' << format_double(trace.best_objectives[e]) << '\n';
}

// ---------------------------------------------------------------------------
// Grid CSV
// ---------------------------------------------------------------------------

/// Writes one row per point with each system's (label, cert). `systems`
/// holds one answer vector per system, each with one entry per point.
inline void write_grid_csv(std::ostream& out, const ToyGrid& g, std::span<const std::vector<CertOutput>> systems)
{
    out << "px,py,truth";
    for (std::size_t s = 0; s < systems.size(); ++s) out << ",s" << s << "_label,s" << s << "_cert";
    out << '\n';
    for (const auto& sys : systems)
        if (sys.size() != g.size()) throw DimensionError("write_grid_csv: system answer count mismatch");
    for (std::size_t p = 0; p < g.size(); ++p) {
        out << format_double(g.points[p].x) << ',' << format_double(g.points[p].y) << ',' << g.truth[p].value;
        for (const auto& sys : systems) out << ',' << sys[p].label.value << ',' << (sys[p].cert ? 1 : 0);
        out << '\n';
    }
}

/// Writes the grid with its constituents as the systems.
inline void write_grid_csv(std::ostream& out, const ToyGrid& g)
{
    std::vector<std::vector<CertOutput>> systems;
    for (std::size_t i = 0; i < g.constituents; ++i) systems.push_back(constituent_over_grid(g, i));
    write_grid_csv(out, g, systems);
}

inline void save_grid_csv(const std::string& path, const ToyGrid& g)
{
    auto out = detail::open_out(path);
    write_grid_csv(out, g);
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

template <class T>
T parse_cell(std::string_view cell, std::size_t line, const std::string& column)
{
    T value{};
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw ParseError(line, "column '" + column + "': cannot parse '" + std::string(cell) + "'");
    return value;
}

inline double min_spacing(std::vector<double> coords)
{
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    double h = 0.0;
    for (std::size_t i = 1; i < coords.size(); ++i) {
        const double d = coords[i] - coords[i - 1];
        if (h == 0.0 || d < h) h = d;
    }
    return h;
}

} // namespace detail

/// Reads a grid CSV; every s<i> column pair becomes constituent i. The step,
/// bounding box and lattice shape are inferred from the coordinates and the
/// class count from the largest label seen. Epsilon and norm are not stored
/// in the file and are left at their defaults.
inline ToyGrid read_grid_csv(std::istream& in)
{
    std::string text;
    if (!std::getline(in, text)) throw DataError("grid file is empty: missing header line");
    if (!text.empty() && text.back() == '\r') text.pop_back();
    const auto header = detail::split_csv(text);
    if (header.size() < 3 || header[0] != "px" || header[1] != "py" || header[2] != "truth" || (header.size() - 3) % 2 != 0)
        throw ParseError(1, "grid header must be px,py,truth followed by s<i>_label,s<i>_cert pairs");
    const std::size_t n = (header.size() - 3) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string s = "s" + std::to_string(i);
        if (header[3 + 2 * i] != s + "_label" || header[4 + 2 * i] != s + "_cert")
            throw ParseError(1, "expected columns " + s + "_label," + s + "_cert");
    }

    ToyGrid g;
    g.constituents = n;
    std::uint32_t max_label = 1;
    std::size_t line = 1;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (detail::is_blank(text)) continue;
        const auto cells = detail::split_csv(text);
        if (cells.size() != header.size())
            throw ParseError(line, "expected " + std::to_string(header.size()) + " columns, got " +
                                       std::to_string(cells.size()));
        g.points.push_back({detail::parse_cell<double>(cells[0], line, "px"),
                            detail::parse_cell<double>(cells[1], line, "py")});
        const auto truth = detail::parse_cell<std::uint32_t>(cells[2], line, "truth");
        g.truth.push_back(Label{truth});
        max_label = std::max(max_label, truth);
        std::vector<CertOutput> row;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string s = "s" + std::to_string(i);
            const auto label = detail::parse_cell<std::uint32_t>(cells[3 + 2 * i], line, s + "_label");
            const auto cert = detail::parse_cell<std::uint32_t>(cells[4 + 2 * i], line, s + "_cert");
            if (cert > 1) throw SchemaError(line, s + "_cert", "expected 0 or 1");
            max_label = std::max(max_label, label);
            row.push_back({Label{label}, cert == 1});
        }
        g.outputs.push_back(std::move(row));
    }
    g.class_count = static_cast<std::size_t>(max_label) + 1;
    if (!g.points.empty()) {
        std::vector<double> xs, ys;
        for (const auto& p : g.points) {
            xs.push_back(p.x);
            ys.push_back(p.y);
        }
        g.xmin = *std::min_element(xs.begin(), xs.end());
        g.xmax = *std::max_element(xs.begin(), xs.end());
        g.ymin = *std::min_element(ys.begin(), ys.end());
        g.ymax = *std::max_element(ys.begin(), ys.end());
        const double hx = detail::min_spacing(xs), hy = detail::min_spacing(ys);
        g.h = hx == 0.0 ? hy : hy == 0.0 ? hx : std::min(hx, hy);
        g.nx = std::set<double>(xs.begin(), xs.end()).size();
        g.ny = std::set<double>(ys.begin(), ys.end()).size();
    }
    return g;
}

inline ToyGrid load_grid_csv(const std::string& path)
{
    auto in = detail::open_in(path);
    return read_grid_csv(in);
}

inline void write_violations_csv(std::ostream& out, std::span<const Violation> violations)
{
    out << "p,px,py,p_label,p_cert,q,qx,qy,q_label,q_cert,distance\n";
    for (const auto& v : violations) {
        out << v.p << ',' << format_double(v.p_point.x) << ',' << format_double(v.p_point.y) << ','
            << v.at_p.label.value << ',' << (v.at_p.cert ? 1 : 0) << ',' << v.q << ',' << format_double(v.q_point.x)
            << ',' << format_double(v.q_point.y) << ',' << v.at_q.label.value << ',' << (v.at_q.cert ? 1 : 0) << ','
            << format_double(v.distance) << '\n';
    }
}

} // namespace certens
