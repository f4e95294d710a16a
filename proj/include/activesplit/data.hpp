#pragma once

#include <activesplit/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace activesplit {

inline constexpr std::size_t kFingerprintBits = 128;

/// 128-bit structural fingerprint. Bit 0 is the most significant bit of the
/// hex encoding, i.e. the first character of the hex string holds bits 0..3.
class Fingerprint {
public:
    Fingerprint() = default;

    static Fingerprint from_hex(std::string_view hex) {
        if (hex.size() != kFingerprintBits / 4)
            throw ValidationError("fingerprint must have " + std::to_string(kFingerprintBits / 4) +
                                  " hex digits (" + std::to_string(kFingerprintBits) + " bits), got " +
                                  std::to_string(hex.size()) + " digits (" +
                                  std::to_string(hex.size() * 4) + " bits)");
        Fingerprint fp;
        for (std::size_t i = 0; i < hex.size(); ++i) {
            const int nibble = hex_value(hex[i]);
            if (nibble < 0)
                throw ValidationError(std::string("non-hex character '") + hex[i] + "' in fingerprint");
            for (int b = 0; b < 4; ++b)
                fp.set(i * 4 + static_cast<std::size_t>(b), (nibble >> (3 - b)) & 1);
        }
        return fp;
    }

    static Fingerprint from_bits(const std::array<bool, kFingerprintBits>& bits) {
        Fingerprint fp;
        for (std::size_t i = 0; i < kFingerprintBits; ++i) fp.set(i, bits[i]);
        return fp;
    }

    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(kFingerprintBits / 4, '0');
        for (std::size_t i = 0; i < out.size(); ++i) {
            int nibble = 0;
            for (int b = 0; b < 4; ++b) nibble = (nibble << 1) | (test(i * 4 + static_cast<std::size_t>(b)) ? 1 : 0);
            out[i] = digits[nibble];
        }
        return out;
    }

    bool test(std::size_t bit) const noexcept { return (words_[bit >> 6] >> (bit & 63)) & 1U; }

    void set(std::size_t bit, bool value) noexcept {
        const std::uint64_t mask = std::uint64_t{1} << (bit & 63);
        if (value)
            words_[bit >> 6] |= mask;
        else
            words_[bit >> 6] &= ~mask;
    }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::popcount(words_[0]) + std::popcount(words_[1]));
    }

    const std::array<std::uint64_t, 2>& words() const noexcept { return words_; }

    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

private:
    static int hex_value(char c) noexcept {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    }

    std::array<std::uint64_t, 2> words_{};
};

struct Molecule {
    std::string id;
    Fingerprint fingerprint;
    double activity = 0.0;  // pIC50, higher = more active

    friend bool operator==(const Molecule&, const Molecule&) = default;
};

/// Activity-sorted, validated collection of molecules for one target.
/// Immutable once built; index i is the i-th least active molecule.
class Dataset {
public:
    static constexpr std::size_t kMinSize = 10;

    Dataset(std::string name, std::string target_id, std::vector<Molecule> molecules)
        : name_(std::move(name)), target_id_(std::move(target_id)), molecules_(std::move(molecules)) {
        for (const auto& m : molecules_) {
            if (m.id.empty()) throw ValidationError("dataset '" + name_ + "': empty molecule id");
            if (!std::isfinite(m.activity))
                throw ValidationError("dataset '" + name_ + "': non-finite activity for '" + m.id + "'");
        }
        std::sort(molecules_.begin(), molecules_.end(), [](const Molecule& a, const Molecule& b) {
            if (a.activity != b.activity) return a.activity < b.activity;
            return a.id < b.id;
        });
        check_unique_ids();
        if (molecules_.size() < kMinSize)
            throw SizeError("dataset '" + name_ + "' has " + std::to_string(molecules_.size()) +
                            " molecules; at least " + std::to_string(kMinSize) + " are required");
    }

    const std::string& name() const noexcept { return name_; }
    const std::string& target_id() const noexcept { return target_id_; }
    std::size_t size() const noexcept { return molecules_.size(); }
    const std::vector<Molecule>& molecules() const noexcept { return molecules_; }
    const Molecule& operator[](std::size_t i) const { return molecules_[i]; }

    /// Rows of the requested indices as a dense 0/1 design matrix.
    template <class IndexRange>
    Eigen::MatrixXd features(const IndexRange& indices) const {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(std::size(indices)), static_cast<Eigen::Index>(kFingerprintBits));
        Eigen::Index r = 0;
        for (auto i : indices) {
            const auto& fp = molecules_.at(static_cast<std::size_t>(i)).fingerprint;
            for (std::size_t b = 0; b < kFingerprintBits; ++b) x(r, static_cast<Eigen::Index>(b)) = fp.test(b) ? 1.0 : 0.0;
            ++r;
        }
        return x;
    }

    template <class IndexRange>
    Eigen::VectorXd activities(const IndexRange& indices) const {
        Eigen::VectorXd y(static_cast<Eigen::Index>(std::size(indices)));
        Eigen::Index r = 0;
        for (auto i : indices) y(r++) = molecules_.at(static_cast<std::size_t>(i)).activity;
        return y;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    void check_unique_ids() const {
        std::vector<std::string_view> ids;
        ids.reserve(molecules_.size());
        for (const auto& m : molecules_) ids.push_back(m.id);
        std::sort(ids.begin(), ids.end());
        const auto dup = std::adjacent_find(ids.begin(), ids.end());
        if (dup != ids.end())
            throw ValidationError("dataset '" + name_ + "': duplicate id '" + std::string(*dup) + "'");
    }

    std::string name_;
    std::string target_id_;
    std::vector<Molecule> molecules_;
};

struct IngestOptions {
    /// Average the activities of rows sharing an id instead of rejecting them.
    bool dedup_average = false;
    /// Overrides the dataset name (otherwise "# name:" comment, else file stem).
    std::optional<std::string> name;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

namespace detail {

/// Parse the `id,activity,fp` CSV format. `source` is used in error messages
/// and its stem is the fallback dataset name.
inline Dataset parse_csv(std::istream& in, const std::string& source, const std::string& fallback_name,
                         const IngestOptions& options) {
    std::string name;
    std::string target_id;
    std::optional<std::array<std::size_t, 3>> columns;  // id, activity, fp
    std::vector<Molecule> rows;
    std::map<std::string, std::pair<std::size_t, std::size_t>> seen;  // id -> (row index, count)

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = detail::trim(raw);
        if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto body = detail::trim(line.substr(1));
            const auto colon = body.find(':');
            if (colon != std::string_view::npos) {
                const auto key = detail::trim(body.substr(0, colon));
                const auto value = detail::trim(body.substr(colon + 1));
                if (key == "name") name = std::string(value);
                if (key == "target_id") target_id = std::string(value);
            }
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (!columns) {
            std::array<std::size_t, 3> idx{};
            const std::array<std::string_view, 3> wanted{"id", "activity", "fp"};
            if (fields.size() != 3) throw ParseError(source, line_no, "header must be id,activity,fp");
            for (std::size_t w = 0; w < 3; ++w) {
                const auto it = std::find(fields.begin(), fields.end(), wanted[w]);
                if (it == fields.end())
                    throw ParseError(source, line_no, "header missing column '" + std::string(wanted[w]) + "'");
                idx[w] = static_cast<std::size_t>(it - fields.begin());
            }
            columns = idx;
            continue;
        }
        if (fields.size() != 3)
            throw ParseError(source, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        const auto id = std::string(fields[(*columns)[0]]);
        if (id.empty()) throw ParseError(source, line_no, "empty id");
        const auto activity = detail::parse_double(fields[(*columns)[1]]);
        if (!activity)
            throw ParseError(source, line_no,
                             "unparseable activity '" + std::string(fields[(*columns)[1]]) + "' for '" + id + "'");
        Fingerprint fp;
        try {
            fp = Fingerprint::from_hex(fields[(*columns)[2]]);
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, "row '" + id + "': " + e.what());
        }
        auto [it, inserted] = seen.try_emplace(id, rows.size(), 1);
        if (inserted) {
            rows.push_back({id, fp, *activity});
            continue;
        }
        if (!options.dedup_average)
            throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate id '" + id + "'");
        auto& [row_index, count] = it->second;
        auto& m = rows[row_index];
        if (m.fingerprint != fp)
            throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate id '" + id +
                                  "' with a different fingerprint");
        // running mean over all measurements of this id
        ++count;
        m.activity += (*activity - m.activity) / static_cast<double>(count);
    }
    if (!columns) throw ParseError(source, line_no == 0 ? 1 : line_no, "missing header id,activity,fp");
    if (options.name) name = *options.name;
    if (name.empty()) name = fallback_name;
    return Dataset(std::move(name), std::move(target_id), std::move(rows));
}

}  // namespace detail

inline Dataset parse_dataset(std::istream& in, const std::string& source, const IngestOptions& options = {}) {
    return detail::parse_csv(in, source, source, options);
}

inline Dataset parse_dataset(const std::filesystem::path& path, const IngestOptions& options = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset file '" + path.string() + "'");
    return detail::parse_csv(in, path.string(), path.stem().string(), options);
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_exact(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
    out << "# name: " << ds.name() << '\n';
    if (!ds.target_id().empty()) out << "# target_id: " << ds.target_id() << '\n';
    out << "id,activity,fp\n";
    for (const auto& m : ds.molecules()) out << m.id << ',' << format_exact(m.activity) << ',' << m.fingerprint.to_hex() << '\n';
}

inline std::string serialize_dataset(const Dataset& ds) {
    std::ostringstream os;
    write_dataset(os, ds);
    return os.str();
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write dataset file '" + path.string() + "'");
    write_dataset(out, ds);
}

/// Activity at sorted index floor(N * fraction), clamped to [0, N-1].
inline double empirical_quantile(const Dataset& ds, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw DomainError("quantile fraction must lie in (0,1), got " + format_exact(fraction));
    const auto n = static_cast<long long>(ds.size());
    long long idx = static_cast<long long>(std::floor(static_cast<double>(n) * fraction));
    idx = std::clamp(idx, 0LL, n - 1);
    return ds[static_cast<std::size_t>(idx)].activity;
}

struct DatasetSummary {
    std::size_t n = 0;
    double activity_min = 0, activity_median = 0, activity_max = 0;
    double mean_bits_set = 0;       // per molecule
    double bit_density = 0;         // fraction of all bits set
    std::size_t constant_columns = 0;
    double min_column_density = 0, max_column_density = 0;
};

inline DatasetSummary summarize(const Dataset& ds) {
    DatasetSummary s;
    s.n = ds.size();
    const auto& ms = ds.molecules();
    s.activity_min = ms.front().activity;
    s.activity_max = ms.back().activity;
    s.activity_median = s.n % 2 ? ms[s.n / 2].activity : 0.5 * (ms[s.n / 2 - 1].activity + ms[s.n / 2].activity);
    std::array<std::size_t, kFingerprintBits> col{};
    std::size_t total = 0;
    for (const auto& m : ms) {
        total += m.fingerprint.count();
        for (std::size_t b = 0; b < kFingerprintBits; ++b) col[b] += m.fingerprint.test(b);
    }
    s.mean_bits_set = static_cast<double>(total) / static_cast<double>(s.n);
    s.bit_density = s.mean_bits_set / static_cast<double>(kFingerprintBits);
    s.min_column_density = 1.0;
    for (auto c : col) {
        const double d = static_cast<double>(c) / static_cast<double>(s.n);
        s.min_column_density = std::min(s.min_column_density, d);
        s.max_column_density = std::max(s.max_column_density, d);
        if (c == 0 || c == s.n) ++s.constant_columns;
    }
    return s;
}

}  // namespace activesplit
