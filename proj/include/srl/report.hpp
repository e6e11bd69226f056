#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "srl/experiments.hpp"

namespace srl {

/// Real with 17 significant digits, '.' decimal, independent of locale.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string format_field(const FieldValue& f) {
    struct Visitor {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const { return format_real(d); }
        std::string operator()(const std::string& s) const { return s; }
    };
    return std::visit(Visitor{}, f);
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { line(header); }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw std::logic_error("CsvWriter: row width differs from header");
        line(cells);
    }

    const std::string& str() const { return out_; }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            out_ += cells[i];
        }
        out_ += '\n';
    }

    std::size_t columns_;
    std::string out_;
};

inline std::string phase_table_csv(const PhaseTable& t) {
    CsvWriter w({"ensemble", "n", "N", "s", "trials", "successes", "rate", "seed"});
    for (std::size_t a = 0; a < t.N_values.size(); ++a)
        for (std::size_t b = 0; b < t.s_values.size(); ++b)
            w.row({to_string(t.ensemble.kind), std::to_string(t.n), std::to_string(t.N_values[a]),
                   std::to_string(t.s_values[b]), std::to_string(t.trials), std::to_string(t.successes[a][b]),
                   format_real(t.rate(a, b)), std::to_string(t.master_seed)});
    return w.str();
}

/// Records sharing one field layout as CSV: experiment, seed, params..., outcome...
inline std::string records_csv(const std::vector<TrialRecord>& recs) {
    if (recs.empty()) return "experiment,seed\n";
    std::vector<std::string> header{"experiment", "seed"};
    for (const auto& [k, v] : recs.front().params) header.push_back(k);
    for (const auto& [k, v] : recs.front().outcome) header.push_back(k);
    CsvWriter w(header);
    for (const auto& r : recs) {
        std::vector<std::string> cells{r.experiment, std::to_string(r.seed)};
        for (const auto& [k, v] : r.params) cells.push_back(format_field(v));
        for (const auto& [k, v] : r.outcome) cells.push_back(format_field(v));
        w.row(cells);
    }
    return w.str();
}

inline std::string matrix_csv(const DenseMatrix& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_real(m(i, j));
        }
        out += '\n';
    }
    return out;
}

/// Writes to a sibling temporary file, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

}  // namespace srl
