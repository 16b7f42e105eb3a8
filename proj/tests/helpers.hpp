#pragma once

#include "dlev/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing_util {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("dlev-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
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
    std::string str() const { return path_.string(); }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

  private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::vector<std::string> words(const std::string& s) { return dlev::split_words(s); }

// Example with single-word utterances built from the given strings.
inline dlev::EvalExample make_example(const std::string& ctx_id, std::vector<std::string> context,
                                      const std::string& model, const std::string& reference, double human,
                                      dlev::SourceModel src = dlev::SourceModel::OTHER) {
    dlev::EvalExample ex;
    ex.context.context_id = ctx_id;
    for (auto& c : context) ex.context.utterances.push_back({std::move(c), std::nullopt});
    ex.model_response.text = model;
    ex.reference_response.text = reference;
    ex.human_score = human;
    ex.source_model = src;
    return ex;
}

inline std::vector<double> random_series(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

} // namespace testing_util
