#pragma once

// Synthetic stand-ins for the 25 ChEMBL benchmark targets. Each dataset has
// the published target name, ChEMBL id and size; molecules and activities
// are simulated. Fingerprints come in chemical series (noisy copies of a
// scaffold prototype) and activity combines a series offset, additive bit
// contributions, pairwise bit interactions and measurement noise, then is
// rescaled to a pIC50-like range.

#include <activesplit/data.hpp>
#include <activesplit/rng.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace activesplit {

struct CorpusEntry {
    const char* name;
    const char* chembl_id;
    std::size_t n;
};

inline constexpr std::array<CorpusEntry, 25> kBenchmarkTargets{{
    {"A2a", "CHEMBL1867", 203},          {"ABL1", "CHEMBL1862", 773},         {"Acetylcholin", "CHEMBL220", 3159},
    {"Androgen", "CHEMBL1871", 1290},    {"Aurora-A", "CHEMBL4722", 2125},    {"B-raf", "CHEMBL5145", 1730},
    {"Cannabinoid", "CHEMBL218", 1116},  {"Carbonic", "CHEMBL205", 603},      {"Caspase", "CHEMBL2334", 1606},
    {"Coagulation", "CHEMBL204", 1700},  {"COX-1", "CHEMBL221", 1343},        {"COX-2", "CHEMBL230", 2855},
    {"Dihydrofolate", "CHEMBL202", 584}, {"Dopamine", "CHEMBL217", 479},      {"Ephrin", "CHEMBL222", 1740},
    {"erbB1", "CHEMBL203", 4868},        {"Estrogen", "CHEMBL206", 1705},     {"Glucocorticoid", "CHEMBL2034", 1447},
    {"Glycogen", "CHEMBL262", 1757},     {"HERG", "CHEMBL240", 5207},         {"JAK2", "CHEMBL2971", 2655},
    {"LCK", "CHEMBL258", 1352},          {"Monoamine", "CHEMBL1951", 1379},   {"Opioid", "CHEMBL233", 840},
    {"Vanilloid", "CHEMBL4794", 1923},
}};

inline const CorpusEntry& benchmark_target(std::string_view name) {
    for (const auto& e : kBenchmarkTargets)
        if (name == e.name) return e;
    throw DomainError("unknown benchmark target '" + std::string(name) + "'");
}

struct SyntheticParams {
    double bit_density = 0.3;
    std::size_t molecules_per_series = 30;
    double member_keep = 0.92;        // chance a member keeps each scaffold bit
    double additive_fraction = 0.35;  // bits with a nonzero additive effect
    double additive_sd = 0.25;
    std::size_t interactions = 64;
    double interaction_sd = 0.8;
    double series_sd = 0.8;
    double noise_sd = 0.3;
    double activity_mean = 6.5;
    double activity_sd = 1.2;
};

inline Dataset make_synthetic_dataset(const CorpusEntry& entry, std::uint64_t seed = 0, const SyntheticParams& p = {}) {
    Rng rng(mix_seed(seed, fnv1a64(entry.name)));
    constexpr std::size_t kBits = kFingerprintBits;

    // per-bit base frequency, skewed so some bits are common and many rare
    std::array<double, kBits> freq{};
    for (auto& f : freq) {
        const double u = rng.uniform();
        f = std::min(0.95, 2.0 * p.bit_density * u * u + 0.01);
    }
    std::array<double, kBits> additive{};
    for (auto& w : additive) w = rng.bernoulli(p.additive_fraction) ? rng.normal() * p.additive_sd : 0.0;
    struct Pair {
        std::size_t a, b;
        double w;
    };
    std::vector<Pair> pairs;
    for (std::size_t k = 0; k < p.interactions; ++k)
        pairs.push_back({static_cast<std::size_t>(rng.uniform_index(kBits)), static_cast<std::size_t>(rng.uniform_index(kBits)),
                         rng.normal() * p.interaction_sd});

    const std::size_t n_series = std::max<std::size_t>(4, entry.n / p.molecules_per_series);
    std::vector<Fingerprint> scaffolds(n_series);
    std::vector<double> offsets(n_series);
    for (std::size_t s = 0; s < n_series; ++s) {
        for (std::size_t b = 0; b < kBits; ++b) scaffolds[s].set(b, rng.bernoulli(freq[b]));
        offsets[s] = rng.normal() * p.series_sd;
    }

    std::vector<Fingerprint> fps;
    std::vector<double> raw;
    fps.reserve(entry.n);
    for (std::size_t i = 0; i < entry.n; ++i) {
        const auto s = static_cast<std::size_t>(rng.uniform_index(n_series));
        Fingerprint fp;
        for (std::size_t b = 0; b < kBits; ++b)
            fp.set(b, rng.bernoulli(p.member_keep) ? scaffolds[s].test(b) : rng.bernoulli(freq[b]));
        double y = offsets[s];
        for (std::size_t b = 0; b < kBits; ++b)
            if (fp.test(b)) y += additive[b];
        for (const auto& pr : pairs)
            if (fp.test(pr.a) && fp.test(pr.b)) y += pr.w;
        y += rng.normal() * p.noise_sd;
        fps.push_back(fp);
        raw.push_back(y);
    }

    double mean = 0.0, var = 0.0;
    for (double y : raw) mean += y;
    mean /= static_cast<double>(raw.size());
    for (double y : raw) var += (y - mean) * (y - mean);
    const double sd = std::sqrt(var / static_cast<double>(raw.size()));

    std::vector<Molecule> molecules;
    molecules.reserve(entry.n);
    for (std::size_t i = 0; i < entry.n; ++i) {
        const double y = p.activity_mean + p.activity_sd * (raw[i] - mean) / (sd > 0 ? sd : 1.0);
        char id[64];
        std::snprintf(id, sizeof id, "%s-%05zu", entry.name, i + 1);
        molecules.push_back({id, fps[i], std::round(y * 100.0) / 100.0});
    }
    return Dataset(entry.name, entry.chembl_id, std::move(molecules));
}

}  // namespace activesplit
