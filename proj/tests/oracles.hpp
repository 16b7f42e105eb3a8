#pragma once

// Independent reference implementations used to cross-check the library.
// They are deliberately naive: exhaustive search, textbook formulas.

#include "dlev/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Longest common subsequence by enumerating every subsequence of the shorter input.
inline std::size_t lcs_brute_force(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const auto& s = a.size() <= b.size() ? a : b;
    const auto& t = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    const std::size_t n = s.size();
    for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
        std::size_t len = 0;
        std::size_t j = 0;
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            if (!(mask & (1UL << i))) continue;
            while (j < t.size() && t[j] != s[i]) ++j;
            if (j == t.size()) ok = false;
            else {
                ++j;
                ++len;
            }
        }
        if (ok) best = std::max(best, len);
    }
    return best;
}

inline double rouge_l_from_lcs(double lcs, double cand_len, double ref_len, double beta) {
    if (lcs == 0.0) return 0.0;
    const double r = lcs / ref_len;
    const double p = lcs / cand_len;
    return (1.0 + beta * beta) * r * p / (r + beta * beta * p);
}

// r = sum (x - mx)(y - my) / sqrt(sum (x - mx)^2 sum (y - my)^2), accumulated in long double.
inline double pearson_definition(const std::vector<double>& x, const std::vector<double>& y) {
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Rank of each value: 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> ranks_by_counting(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double less = 0, equal = 0;
        for (double v : x) {
            if (v < x[i]) ++less;
            else if (v == x[i]) ++equal;
        }
        r[i] = 1.0 + less + (equal - 1.0) / 2.0;
    }
    return r;
}

inline double spearman_definition(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson_definition(ranks_by_counting(x), ranks_by_counting(y));
}

// BPE learning by recounting every adjacent pair after each merge.
inline std::vector<std::pair<std::string, std::string>> bpe_brute_force(const std::vector<std::string>& words,
                                                                      int merges) {
    std::vector<std::vector<std::string>> seqs;
    for (const auto& w : words) {
        std::vector<std::string> s;
        for (std::size_t i = 0; i < w.size(); ++i) s.push_back(std::string(1, w[i]));
        s.back() += "</w>";
        seqs.push_back(s);
    }
    std::vector<std::pair<std::string, std::string>> rules;
    for (int m = 0; m < merges; ++m) {
        std::map<std::pair<std::string, std::string>, int> counts;
        for (const auto& s : seqs)
            for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
        if (counts.empty()) break;
        std::pair<std::string, std::string> best;
        int best_count = 0;
        for (const auto& [p, c] : counts) {
            const bool better = c > best_count ||
                                (c == best_count && (p.first + p.second < best.first + best.second ||
                                                     (p.first + p.second == best.first + best.second && p.first < best.first)));
            if (better) {
                best = p;
                best_count = c;
            }
        }
        rules.push_back(best);
        for (auto& s : seqs) {
            std::vector<std::string> out;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (i + 1 < s.size() && s[i] == best.first && s[i + 1] == best.second) {
                    out.push_back(best.first + best.second);
                    ++i;
                } else {
                    out.push_back(s[i]);
                }
            }
            s = out;
        }
    }
    return rules;
}

struct GradCheck {
    double worst = 0.0;   // largest per-tensor relative error
    std::string tensor;   // where it occurred
    std::size_t checked = 0;
};

// Central differences on every coordinate of every tensor. Relative error of a
// tensor is |analytic - numeric|_2 / max(|analytic|_2, |numeric|_2); tensors
// whose gradients are both below `floor` in norm count as exact.
inline GradCheck check_gradients(const std::vector<dlev::NamedTensor>& params,
                                 const std::vector<dlev::NamedTensor>& analytic, const std::function<double()>& loss,
                                 double step, double floor = 1e-10) {
    GradCheck out;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto values = params[t].values;
        double diff2 = 0, a2 = 0, n2 = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double orig = values[i];
            values[i] = orig + step;
            const double up = loss();
            values[i] = orig - step;
            const double down = loss();
            values[i] = orig;
            const double numeric = (up - down) / (2 * step);
            const double a = analytic[t].values[i];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
            ++out.checked;
        }
        const double scale = std::sqrt(std::max(a2, n2));
        const double rel = scale < floor ? 0.0 : std::sqrt(diff2) / scale;
        if (rel > out.worst) {
            out.worst = rel;
            out.tensor = params[t].name;
        }
    }
    return out;
}

} // namespace oracle
