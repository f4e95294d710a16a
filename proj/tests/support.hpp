#pragma once

#include <activesplit/data.hpp>
#include <activesplit/rng.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace testing_support {

/// Directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("activesplit-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Random dataset with distinct ids; activity = weighted bit sum + noise.
inline activesplit::Dataset random_dataset(std::size_t n, std::uint64_t seed, const std::string& name = "toy") {
    activesplit::Rng rng(seed);
    std::vector<double> w(activesplit::kFingerprintBits);
    for (auto& x : w) x = rng.normal() * 0.3;
    std::vector<activesplit::Molecule> ms;
    for (std::size_t i = 0; i < n; ++i) {
        activesplit::Fingerprint fp;
        double y = 5.0;
        for (std::size_t b = 0; b < activesplit::kFingerprintBits; ++b) {
            const bool bit = rng.bernoulli(0.3);
            fp.set(b, bit);
            if (bit) y += w[b];
        }
        y += rng.normal() * 0.2;
        ms.push_back({name + "-" + std::to_string(i), fp, y});
    }
    return activesplit::Dataset(name, "", std::move(ms));
}

}  // namespace testing_support
