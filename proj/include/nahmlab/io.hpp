#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nahmlab/flow.hpp"
#include "nahmlab/matrix.hpp"

namespace nahmlab {

using nlohmann::json;

/// Malformed input documents raise this; the message names the offending
/// field or line.
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parsed problem description.  Complex numbers are [re, im] pairs,
/// matrices row-major lists of n^2 pairs.
struct InputDocument {
    int n = 0;
    std::optional<FlowForm> form;
    int block_split = 0;
    std::vector<Matrix> coeffs;
    // optional metadata
    std::optional<int> d;
    std::optional<Complex> a;
    std::optional<Matrix> phi1;
};

namespace detail {

inline Complex complex_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw input_error(where + ": expected a [re, im] pair");
    const Complex z(j[0].get<double>(), j[1].get<double>());
    if (!is_finite(z)) throw input_error(where + ": non-finite value");
    return z;
}

inline Matrix matrix_from_json(const json& j, int n, const std::string& where) {
    if (!j.is_array() || j.size() != static_cast<size_t>(n) * n)
        throw input_error(where + ": expected " + std::to_string(n * n) + " [re, im] entries");
    std::vector<Complex> entries;
    entries.reserve(static_cast<size_t>(n) * n);
    for (size_t i = 0; i < j.size(); ++i)
        entries.push_back(complex_from_json(j[i], where + "[" + std::to_string(i) + "]"));
    return Matrix(n, std::move(entries));
}

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline json matrix_to_json(const Matrix& m) {
    json a = json::array();
    for (const auto& v : m.entries()) a.push_back(complex_to_json(v));
    return a;
}

} // namespace detail

inline InputDocument parse_input_document(const json& j) {
    if (!j.is_object()) throw input_error("document: expected a JSON object");
    InputDocument doc;
    if (!j.contains("n") || !j["n"].is_number_integer())
        throw input_error("n: required integer field");
    doc.n = j["n"].get<int>();
    if (doc.n < 1 || doc.n > 16) throw input_error("n: must be in [1,16]");

    if (j.contains("form")) {
        if (!j["form"].is_string()) throw input_error("form: expected a string");
        try {
            doc.form = parse_form(j["form"].get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw input_error(std::string("form: ") + e.what());
        }
    }
    if (j.contains("block_split")) {
        if (!j["block_split"].is_number_integer()) throw input_error("block_split: expected an integer");
        doc.block_split = j["block_split"].get<int>();
    }

    if (!j.contains("coeffs") || !j["coeffs"].is_array())
        throw input_error("coeffs: required list of matrices");
    for (size_t k = 0; k < j["coeffs"].size(); ++k)
        doc.coeffs.push_back(
            detail::matrix_from_json(j["coeffs"][k], doc.n, "coeffs[" + std::to_string(k) + "]"));

    if (j.contains("metadata")) {
        const json& md = j["metadata"];
        if (!md.is_object()) throw input_error("metadata: expected an object");
        if (md.contains("d")) {
            if (!md["d"].is_number_integer()) throw input_error("metadata.d: expected an integer");
            doc.d = md["d"].get<int>();
        }
        if (md.contains("a")) doc.a = detail::complex_from_json(md["a"], "metadata.a");
        if (md.contains("phi1")) doc.phi1 = detail::matrix_from_json(md["phi1"], 2, "metadata.phi1");
    }
    return doc;
}

inline InputDocument load_input_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open input file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw input_error("JSON parse error in " + path + ": " + e.what());
    }
    return parse_input_document(j);
}

/// Builds the flow state described by a document.  The form may be
/// overridden (CLI flag beats the file).
inline NahmState state_from_document(const InputDocument& doc,
                                     std::optional<FlowForm> form_override = std::nullopt) {
    NahmState s;
    if (form_override) s.form = *form_override;
    else if (doc.form) s.form = *doc.form;
    else throw input_error("form: not given in the document or on the command line");
    s.block_split = doc.block_split;
    if (s.form == FlowForm::parabolic && s.block_split == 0)
        throw input_error("block_split: required for the parabolic form");
    s.c = doc.coeffs;
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw input_error(std::string("coeffs: ") + e.what());
    }
    return s;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// Writes content to path atomically (temp file + rename).
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

/// Trajectory CSV: a metadata comment, a header row, then one row per
/// sample with t and the flattened re/im entries of every coefficient
/// matrix.  17 significant digits, so finite doubles round-trip exactly.
inline std::string trajectory_to_csv(const Trajectory& traj) {
    std::ostringstream os;
    const int n = traj.dim();
    const int ncoeff = traj.samples.empty() ? 0 : static_cast<int>(traj.samples.front().c.size());
    os << "# nahmlab trajectory form=" << form_name(traj.form) << " n=" << n
       << " split=" << traj.block_split << " dt=" << detail::format_double(traj.step)
       << " blow_up=" << (traj.blew_up ? 1 : 0) << "\n";
    os << "t";
    for (int k = 0; k < ncoeff; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                os << ",m" << k << "_" << i << "_" << j << "_re,m" << k << "_" << i << "_" << j
                   << "_im";
    os << "\n";
    for (const auto& s : traj.samples) {
        os << detail::format_double(s.t);
        for (const auto& m : s.c)
            for (const auto& v : m.entries())
                os << "," << detail::format_double(v.real()) << ","
                   << detail::format_double(v.imag());
        os << "\n";
    }
    return os.str();
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    atomic_write(path, trajectory_to_csv(traj));
}

inline Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open trajectory file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# nahmlab trajectory", 0) != 0)
        throw input_error(path + ":1: missing trajectory header comment");

    Trajectory traj;
    int n = 0;
    {
        std::istringstream hs(line.substr(std::string("# nahmlab trajectory").size()));
        std::string tok;
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "form") traj.form = parse_form(val);
            else if (key == "n") n = std::stoi(val);
            else if (key == "split") traj.block_split = std::stoi(val);
            else if (key == "dt") traj.step = std::stod(val);
            else if (key == "blow_up") traj.blew_up = (val == "1");
        }
    }
    if (n < 1 || n > 16) throw input_error(path + ":1: bad dimension in header");
    const int ncoeff = (traj.form == FlowForm::parabolic) ? 4 : 3;
    const size_t want_fields = 1 + static_cast<size_t>(ncoeff) * n * n * 2;

    if (!std::getline(in, line)) throw input_error(path + ":2: missing column header");
    size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> fields;
        fields.reserve(want_fields);
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                fields.push_back(v);
            } catch (const std::exception&) {
                throw input_error(path + ":" + std::to_string(lineno) + ": bad numeric field '" +
                                  cell + "'");
            }
        }
        if (fields.size() != want_fields)
            throw input_error(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(want_fields) + " fields, got " +
                              std::to_string(fields.size()));
        NahmState s;
        s.form = traj.form;
        s.block_split = traj.block_split;
        s.t = fields[0];
        size_t idx = 1;
        for (int k = 0; k < ncoeff; ++k) {
            std::vector<Complex> entries(static_cast<size_t>(n) * n);
            for (auto& v : entries) {
                v = Complex(fields[idx], fields[idx + 1]);
                idx += 2;
            }
            s.c.emplace_back(n, std::move(entries));
        }
        if (!traj.samples.empty() && s.t <= traj.samples.back().t)
            throw input_error(path + ":" + std::to_string(lineno) + ": time stamps not increasing");
        traj.samples.push_back(std::move(s));
    }
    if (traj.samples.empty()) throw input_error(path + ": no samples");
    return traj;
}

} // namespace nahmlab
