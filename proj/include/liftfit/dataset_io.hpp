#ifndef LIFTFIT_DATASET_IO_HPP
#define LIFTFIT_DATASET_IO_HPP

// CSV datasets, the reproducible synthetic-data generator, and the FNV-1a
// input digest.
//
// CSV: comma separated, '.' decimal point, mandatory header naming the data
// variables followed by the response column `y`.
//
// Generator stream (part of the file contract): splitmix64 seeded with the
// user seed. For each row, one uniform per data variable in column order,
// then two uniforms for a Box-Muller normal (always drawn, even when the
// noise level is zero).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "liftfit/error.hpp"
#include "liftfit/linsolve.hpp"
#include "liftfit/model.hpp"

namespace liftfit {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Top 53 bits of next() / 2^64, in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [low, high).
    double uniform(double low, double high)
    {
        const double x = low + (high - low) * uniform();
        return x < high ? x : std::nextafter(high, low);
    }

    /// Box-Muller, cosine branch; consumes exactly two uniforms.
    double normal()
    {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::string hex64(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                : comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return cells;
}

} // namespace detail

/// Parses CSV text; `source` names the input in error messages.
inline Dataset parse_dataset_csv(std::string_view text, const std::string& source = "<csv>")
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos)
            nl = text.size();
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    while (!lines.empty() && detail::trim(lines.back()).empty())
        lines.pop_back();
    if (lines.empty())
        throw DataError(source + ": empty file");

    const auto header = detail::split_commas(lines[0]);
    if (header.size() < 1 || header.back() != "y")
        throw DataError(source + ": response column must be last and named 'y'");
    Dataset data;
    for (std::size_t c = 0; c + 1 < header.size(); ++c) {
        const std::string name(header[c]);
        if (name.empty())
            throw DataError(source + ": missing header name in column " + std::to_string(c + 1));
        if (name == "y")
            throw DataError(source + ": response column must be last and named 'y'");
        if (!detail::is_identifier(name))
            throw DataError(source + ": header name '" + name + "' is not an identifier");
        if (std::find(data.data_var_names.begin(), data.data_var_names.end(), name) != data.data_var_names.end())
            throw DataError(source + ": duplicate header name '" + name + "'");
        data.data_var_names.push_back(name);
    }

    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto cells = detail::split_commas(lines[l]);
        if (cells.size() != header.size())
            throw DataError(source + ": row " + std::to_string(l + 1) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(header.size()));
        Sample row;
        row.point.reserve(cells.size() - 1);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double value = 0.0;
            const auto cell = cells[c];
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value))
                throw DataError(source + ": row " + std::to_string(l + 1) + ", column " + std::to_string(c + 1) +
                                " ('" + std::string(header[c]) + "'): not a finite number: '" + std::string(cell) +
                                "'");
            if (c + 1 < cells.size())
                row.point.push_back(value);
            else
                row.response = value;
        }
        data.rows.push_back(std::move(row));
    }
    if (data.rows.empty())
        throw DataError(source + ": no data rows");
    return data;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw DataError("failed writing '" + path + "'");
}

inline Dataset load_dataset_csv(const std::string& path) { return parse_dataset_csv(read_file(path), path); }

/// Header plus one line per row, numbers in shortest round-trip form.
inline std::string format_dataset_csv(const Dataset& data)
{
    std::string out;
    for (const auto& name : data.data_var_names)
        out += name + ",";
    out += "y\n";
    for (const auto& row : data.rows) {
        for (double x : row.point)
            out += format_number(x) + ",";
        out += format_number(row.response) + "\n";
    }
    return out;
}

inline void write_dataset_csv(const Dataset& data, const std::string& path)
{
    write_file(path, format_dataset_csv(data));
}

// ---------------------------------------------------------------------------

struct GenSpec {
    std::string model_text;
    std::vector<std::string> param_names;
    std::vector<double> true_params;
    /// Sampling interval per data variable; unlisted variables use [-1, 1).
    std::map<std::string, std::pair<double, double>> ranges;
    std::size_t sample_count = 50;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

inline Dataset generate_synthetic(const GenSpec& spec)
{
    if (spec.sample_count < 1)
        throw DataError("sample count must be at least 1");
    if (!std::isfinite(spec.noise_sigma) || spec.noise_sigma < 0.0)
        throw DataError("noise sigma must be finite and non-negative");
    const CanonicalModel model = parse_model(spec.model_text, spec.param_names);
    if (spec.true_params.size() != model.parameter_count())
        throw ModelError("expected " + std::to_string(model.parameter_count()) + " true parameter values, got " +
                         std::to_string(spec.true_params.size()));

    std::vector<std::pair<double, double>> ranges(model.data_count(), {-1.0, 1.0});
    for (const auto& [name, range] : spec.ranges) {
        const auto it = std::find(model.data_var_names.begin(), model.data_var_names.end(), name);
        if (it == model.data_var_names.end())
            throw DataError("range given for unknown data variable '" + name + "'");
        if (!(range.first < range.second) || !std::isfinite(range.first) || !std::isfinite(range.second))
            throw DataError("range for '" + name + "' needs finite low < high");
        ranges[static_cast<std::size_t>(it - model.data_var_names.begin())] = range;
    }

    SplitMix64 rng(spec.seed);
    Dataset data;
    data.data_var_names = model.data_var_names;
    data.rows.reserve(spec.sample_count);
    for (std::size_t i = 0; i < spec.sample_count; ++i) {
        Sample row;
        row.point.resize(model.data_count());
        for (std::size_t k = 0; k < row.point.size(); ++k)
            row.point[k] = rng.uniform(ranges[k].first, ranges[k].second);
        const double g = rng.normal();
        row.response = evaluate(model, spec.true_params, row.point) + spec.noise_sigma * g;
        data.rows.push_back(std::move(row));
    }
    return data;
}

/// Generates and writes the dataset; the returned value equals what
/// load_dataset_csv(out_path) reads back.
inline Dataset generate_synthetic(const GenSpec& spec, const std::string& out_path)
{
    Dataset data = generate_synthetic(spec);
    write_dataset_csv(data, out_path);
    return data;
}

} // namespace liftfit

#endif // LIFTFIT_DATASET_IO_HPP
