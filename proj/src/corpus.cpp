#include "dlev/corpus.hpp"

#include "dlev/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace dlev {

namespace {

using json = nlohmann::ordered_json;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return is_space(c); });
}

std::string location(std::string_view source, std::size_t line) {
    std::ostringstream os;
    os << source << ":" << line;
    return os.str();
}

std::string require_string(const json& obj, const char* field, std::string_view where) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw ValidationError(std::string(where) + ": missing field '" + field + "'");
    }
    if (!it->is_string()) {
        throw ValidationError(std::string(where) + ": field '" + field + "' must be a string");
    }
    auto s = it->get<std::string>();
    if (blank(s)) {
        throw ValidationError(std::string(where) + ": field '" + field + "' is empty");
    }
    return s;
}

// Splits a word into UTF-8 code points; invalid lead bytes are kept as single bytes.
std::vector<std::string> utf8_chars(std::string_view word) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < word.size()) {
        auto lead = static_cast<unsigned char>(word[i]);
        std::size_t len = 1;
        if ((lead & 0xE0) == 0xC0) {
            len = 2;
        } else if ((lead & 0xF0) == 0xE0) {
            len = 3;
        } else if ((lead & 0xF8) == 0xF0) {
            len = 4;
        }
        len = std::min(len, word.size() - i);
        out.emplace_back(word.substr(i, len));
        i += len;
    }
    return out;
}

std::vector<std::string> initial_symbols(std::string_view word) {
    auto chars = utf8_chars(word);
    if (!chars.empty()) {
        chars.back() += kWordEnd;
    }
    return chars;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
            merged.push_back(left + right);
            ++i;
        } else {
            merged.push_back(std::move(symbols[i]));
        }
    }
    symbols = std::move(merged);
}

} // namespace

std::string_view to_string(SourceModel m) {
    switch (m) {
    case SourceModel::TFIDF:
        return "TFIDF";
    case SourceModel::DE:
        return "DE";
    case SourceModel::HRED:
        return "HRED";
    case SourceModel::HUMAN:
        return "HUMAN";
    case SourceModel::OTHER:
        break;
    }
    return "OTHER";
}

SourceModel parse_source_model(std::string_view tag) {
    std::string upper(tag);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    if (upper == "TFIDF") return SourceModel::TFIDF;
    if (upper == "DE") return SourceModel::DE;
    if (upper == "HRED" || upper == "VHRED") return SourceModel::HRED;
    if (upper == "HUMAN") return SourceModel::HUMAN;
    return SourceModel::OTHER;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

std::string strip_speaker_tokens(std::string_view text) {
    std::string out;
    for (const auto& w : split_words(text)) {
        bool speaker = w.size() > 2 && w.front() == '<' && w.back() == '>' &&
                       w.find("speaker") != std::string::npos;
        if (speaker) continue;
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

Dataset parse_dataset(std::istream& in, std::string_view source_name) {
    Dataset ds;
    std::map<std::string, std::vector<std::string>> seen_contexts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto where = location(source_name, line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) {
            throw ValidationError(where + ": expected a JSON object");
        }

        EvalExample ex;
        ex.line = line_no;
        ex.context.context_id = require_string(obj, "context_id", where);

        auto ctx = obj.find("context");
        if (ctx == obj.end()) throw ValidationError(where + ": missing field 'context'");
        if (!ctx->is_array() || ctx->empty()) {
            throw ValidationError(where + ": field 'context' must be a non-empty list of strings");
        }
        std::vector<std::string> turns;
        for (const auto& u : *ctx) {
            if (!u.is_string() || blank(u.get<std::string>())) {
                throw ValidationError(where + ": field 'context' must contain non-empty strings");
            }
            turns.push_back(u.get<std::string>());
            ex.context.utterances.push_back(Utterance{turns.back(), std::nullopt});
        }

        ex.model_response.text = require_string(obj, "model_response", where);
        ex.reference_response.text = require_string(obj, "reference_response", where);

        auto score = obj.find("human_score");
        if (score == obj.end()) throw ValidationError(where + ": missing field 'human_score'");
        if (!score->is_number()) throw ValidationError(where + ": field 'human_score' must be a number");
        ex.human_score = score->get<double>();
        if (!(ex.human_score >= 1.0 && ex.human_score <= 5.0)) {
            std::ostringstream os;
            os << where << ": field 'human_score' = " << ex.human_score << " outside [1,5]";
            throw ValidationError(os.str());
        }

        ex.source_model = parse_source_model(require_string(obj, "source_model", where));

        auto [it, inserted] = seen_contexts.emplace(ex.context.context_id, turns);
        if (!inserted && it->second != turns) {
            throw ValidationError(where + ": context_id '" + ex.context.context_id +
                                  "' reused with a different context");
        }
        ds.push_back(std::move(ex));
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
    return parse_dataset(in, path.string());
}

void write_dataset(std::ostream& out, const Dataset& ds) {
    for (const auto& ex : ds) {
        json obj;
        obj["context_id"] = ex.context.context_id;
        json turns = json::array();
        for (const auto& u : ex.context.utterances) turns.push_back(u.text);
        obj["context"] = std::move(turns);
        obj["model_response"] = ex.model_response.text;
        obj["reference_response"] = ex.reference_response.text;
        obj["human_score"] = ex.human_score;
        obj["source_model"] = std::string(to_string(ex.source_model));
        out << obj.dump() << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset '" + path.string() + "'");
    write_dataset(out, ds);
}

std::vector<std::string> distinct_context_ids(const Dataset& ds) {
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& ex : ds) {
        if (seen.insert(ex.context.context_id).second) ids.push_back(ex.context.context_id);
    }
    return ids;
}

DatasetSplit split_by_context(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed) {
    double total = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-6) throw ValidationError("split ratios must sum to 1");

    auto ids = distinct_context_ids(ds);
    const auto n = static_cast<long>(ids.size());
    if (n < 3) {
        throw ValidationError("need at least 3 distinct contexts to split, found " + std::to_string(n));
    }

    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    long n_train = std::max(1L, std::lround(ratios[0] * static_cast<double>(n)));
    long n_val = std::max(1L, std::lround(ratios[1] * static_cast<double>(n)));
    if (n_val > n - 2) n_val = n - 2;
    if (n_train + n_val > n - 1) n_train = n - 1 - n_val;

    std::unordered_map<std::string, int> assignment;
    for (long i = 0; i < n; ++i) {
        assignment[ids[static_cast<std::size_t>(i)]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    }

    DatasetSplit out;
    for (const auto& ex : ds) {
        switch (assignment.at(ex.context.context_id)) {
        case 0:
            out.train.push_back(ex);
            break;
        case 1:
            out.validation.push_back(ex);
            break;
        default:
            out.test.push_back(ex);
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

BpeMerges learn_bpe(std::span<const std::string> texts, int num_merges) {
    if (num_merges < 0) throw ValidationError("num_merges must be >= 0");

    std::map<std::string, long> word_counts;
    for (const auto& t : texts) {
        for (auto& w : split_words(t)) ++word_counts[w];
    }
    if (word_counts.empty()) throw ValidationError("cannot learn BPE from an empty corpus");

    std::vector<std::pair<std::vector<std::string>, long>> words;
    words.reserve(word_counts.size());
    for (const auto& [w, c] : word_counts) words.emplace_back(initial_symbols(w), c);

    BpeMerges merges;
    for (int step = 0; step < num_merges; ++step) {
        std::map<std::pair<std::string, std::string>, long> pairs;
        for (const auto& [symbols, count] : words) {
            for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pairs[{symbols[i], symbols[i + 1]}] += count;
        }
        if (pairs.empty()) break;

        auto best = pairs.begin();
        std::string best_merged = best->first.first + best->first.second;
        for (auto it = std::next(pairs.begin()); it != pairs.end(); ++it) {
            std::string merged = it->first.first + it->first.second;
            if (it->second > best->second || (it->second == best->second && merged < best_merged)) {
                best = it;
                best_merged = std::move(merged);
            }
        }
        const auto [left, right] = best->first;
        for (auto& [symbols, count] : words) apply_merge(symbols, left, right);
        merges.rules.emplace_back(left, right);
    }
    return merges;
}

MergeRanks::MergeRanks(const BpeMerges& merges) {
    ranks_.reserve(merges.rules.size());
    for (std::size_t i = 0; i < merges.rules.size(); ++i) {
        ranks_.emplace(merges.rules[i].first + ' ' + merges.rules[i].second, i);
    }
}

std::size_t MergeRanks::rank(const std::string& left, const std::string& right) const {
    auto it = ranks_.find(left + ' ' + right);
    return it == ranks_.end() ? npos : it->second;
}

std::vector<std::string> bpe_segment_word(std::string_view word, const BpeMerges& merges, const MergeRanks& ranks) {
    auto symbols = initial_symbols(word);
    // Repeatedly apply the earliest-learned rule present in the word.
    while (symbols.size() > 1) {
        std::size_t best = MergeRanks::npos;
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            best = std::min(best, ranks.rank(symbols[i], symbols[i + 1]));
        }
        if (best == MergeRanks::npos) break;
        apply_merge(symbols, merges.rules[best].first, merges.rules[best].second);
    }
    return symbols;
}

std::vector<std::string> bpe_segment_word(std::string_view word, const BpeMerges& merges) {
    return bpe_segment_word(word, merges, MergeRanks(merges));
}

namespace {

std::vector<std::string> symbols_with(std::string_view text, const BpeMerges& merges, const MergeRanks& ranks) {
    std::vector<std::string> out;
    for (const auto& w : split_words(text)) {
        auto seg = bpe_segment_word(w, merges, ranks);
        out.insert(out.end(), std::make_move_iterator(seg.begin()), std::make_move_iterator(seg.end()));
    }
    return out;
}

} // namespace

std::vector<std::string> bpe_symbols(std::string_view text, const BpeMerges& merges) {
    return symbols_with(text, merges, MergeRanks(merges));
}

std::string detokenize(std::span<const std::string> symbols) {
    std::string out;
    for (const auto& s : symbols) {
        if (s.size() >= kWordEnd.size() && s.compare(s.size() - kWordEnd.size(), kWordEnd.size(), kWordEnd) == 0) {
            out.append(s, 0, s.size() - kWordEnd.size());
            out += ' ';
        } else {
            out += s;
        }
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

void save_merges(const std::filesystem::path& path, const BpeMerges& merges) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write merges '" + path.string() + "'");
    for (const auto& [l, r] : merges.rules) out << l << ' ' << r << '\n';
}

BpeMerges load_merges(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open merges '" + path.string() + "'");
    BpeMerges merges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        auto parts = split_words(line);
        if (parts.size() != 2) {
            throw ValidationError(location(path.string(), line_no) + ": expected 'left right'");
        }
        merges.rules.emplace_back(parts[0], parts[1]);
    }
    return merges;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> regular_tokens) {
    id_to_token_ = {"<pad>", "<unk>", "</s>", "</d>"};
    for (auto& t : regular_tokens) id_to_token_.push_back(std::move(t));
    for (int i = 0; i < static_cast<int>(id_to_token_.size()); ++i) {
        auto [it, inserted] = token_to_id_.emplace(id_to_token_[static_cast<std::size_t>(i)], i);
        if (!inserted) throw ValidationError("duplicate vocabulary token '" + it->first + "'");
    }
}

int Vocabulary::id(std::string_view symbol) const {
    auto it = token_to_id_.find(std::string(symbol));
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

bool Vocabulary::contains(std::string_view symbol) const { return token_to_id_.count(std::string(symbol)) > 0; }

std::span<const std::string> Vocabulary::regular_tokens() const {
    return std::span<const std::string>(id_to_token_).subspan(kNumReserved);
}

Vocabulary build_vocab(std::span<const std::string> texts, const BpeMerges& merges, int max_size) {
    if (max_size <= Vocabulary::kNumReserved) {
        throw ValidationError("vocabulary max_size must exceed the " + std::to_string(Vocabulary::kNumReserved) +
                              " reserved tokens");
    }
    const MergeRanks ranks(merges);
    std::map<std::string, long> counts;
    for (const auto& t : texts) {
        for (auto& s : symbols_with(t, merges, ranks)) ++counts[s];
    }
    std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    const auto keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(max_size - Vocabulary::kNumReserved));
    std::vector<std::string> tokens;
    tokens.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
    return Vocabulary(std::move(tokens));
}

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write vocabulary '" + path.string() + "'");
    for (const auto& t : vocab.regular_tokens()) out << t << '\n';
}

Vocabulary load_vocab(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocabulary '" + path.string() + "'");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
}

std::vector<int> bpe_tokenize(std::string_view text, const BpeMerges& merges, const Vocabulary& vocab) {
    return Tokenizer(merges, vocab)(text);
}

Tokenizer::Tokenizer(BpeMerges merges, Vocabulary vocab)
    : merges_(std::move(merges)), vocab_(std::move(vocab)), ranks_(merges_) {}

std::vector<std::string> Tokenizer::symbols(std::string_view text) const { return symbols_with(text, merges_, ranks_); }

std::vector<int> Tokenizer::operator()(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& s : symbols(text)) ids.push_back(vocab_.id(s));
    ids.push_back(Vocabulary::kEndOfUtterance);
    return ids;
}

void tokenize_example(EvalExample& ex, const Tokenizer& tok) {
    for (auto& u : ex.context.utterances) u.tokens = tok(u.text);
    ex.model_response.tokens = tok(ex.model_response.text);
    ex.reference_response.tokens = tok(ex.reference_response.text);
}

void tokenize_dataset(Dataset& ds, const Tokenizer& tok) {
    for (auto& ex : ds) tokenize_example(ex, tok);
}

std::vector<std::string> dataset_texts(const Dataset& ds) {
    std::vector<std::string> texts;
    std::unordered_set<std::string> seen_contexts;
    for (const auto& ex : ds) {
        if (seen_contexts.insert(ex.context.context_id).second) {
            for (const auto& u : ex.context.utterances) texts.push_back(u.text);
        }
        texts.push_back(ex.model_response.text);
        texts.push_back(ex.reference_response.text);
    }
    return texts;
}

} // namespace dlev
