#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dlev {

enum class SourceModel { TFIDF, DE, HRED, HUMAN, OTHER };

std::string_view to_string(SourceModel m);
// Unknown tags map to OTHER.
SourceModel parse_source_model(std::string_view tag);

struct Utterance {
    std::string text;
    std::optional<std::vector<int>> tokens;
};

struct Context {
    std::string context_id;
    std::vector<Utterance> utterances;
};

struct EvalExample {
    Context context;
    Utterance model_response;
    Utterance reference_response;
    double human_score = 0.0;
    SourceModel source_model = SourceModel::OTHER;
    // 1-based source line, 0 when the example was built in memory.
    std::size_t line = 0;
};

using Dataset = std::vector<EvalExample>;

// Whitespace tokenization used by the word-overlap metrics and length statistics.
std::vector<std::string> split_words(std::string_view text);

// Removes "<first_speaker>"-style turn markers, which inflate overlap scores.
std::string strip_speaker_tokens(std::string_view text);

// JSONL: one object per line with context_id, context, model_response,
// reference_response, human_score, source_model. Blank lines are skipped.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in, std::string_view source_name);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
void write_dataset(std::ostream& out, const Dataset& ds);

struct DatasetSplit {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// Assigns whole contexts to splits; examples keep their input order inside each split.
DatasetSplit split_by_context(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed);

std::vector<std::string> distinct_context_ids(const Dataset& ds);

// ---------------------------------------------------------------------------
// Byte pair encoding

inline constexpr std::string_view kWordEnd = "</w>";

struct BpeMerges {
    std::vector<std::pair<std::string, std::string>> rules;

    bool empty() const { return rules.empty(); }
    std::size_t size() const { return rules.size(); }
};

// Greedy most-frequent-pair learning. Merges never cross whitespace; each
// word's final character carries the word-end marker. Ties go to the
// lexicographically smallest merged symbol, then the smallest left symbol.
BpeMerges learn_bpe(std::span<const std::string> texts, int num_merges);

// Splits one word into UTF-8 characters (the last one suffixed with the
// word-end marker) and applies the merge rules in learned order.
std::vector<std::string> bpe_segment_word(std::string_view word, const BpeMerges& merges);
std::vector<std::string> bpe_symbols(std::string_view text, const BpeMerges& merges);

// Concatenates sub-words, turning word-end markers back into spaces.
std::string detokenize(std::span<const std::string> symbols);

void save_merges(const std::filesystem::path& path, const BpeMerges& merges);
BpeMerges load_merges(const std::filesystem::path& path);

// Reserved ids occupy [0, kNumReserved); file-backed tokens start after them.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kEndOfUtterance = 2;
    static constexpr int kEndOfContext = 3;
    static constexpr int kNumReserved = 4;

    Vocabulary();
    explicit Vocabulary(std::vector<std::string> regular_tokens);

    int id(std::string_view symbol) const;
    const std::string& token(int id) const;
    bool contains(std::string_view symbol) const;
    int size() const { return static_cast<int>(id_to_token_.size()); }
    // Non-reserved tokens in id order.
    std::span<const std::string> regular_tokens() const;

  private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

Vocabulary build_vocab(std::span<const std::string> texts, const BpeMerges& merges, int max_size);

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::filesystem::path& path);

// Symbol ids followed by the end-of-utterance id. Never fails: anything
// outside the vocabulary becomes UNK.
std::vector<int> bpe_tokenize(std::string_view text, const BpeMerges& merges, const Vocabulary& vocab);

// Rule lookup keyed by "left right"; built once per merge list.
class MergeRanks {
  public:
    explicit MergeRanks(const BpeMerges& merges);
    // Rule index, or npos when the pair is not a rule.
    std::size_t rank(const std::string& left, const std::string& right) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  private:
    std::unordered_map<std::string, std::size_t> ranks_;
};

std::vector<std::string> bpe_segment_word(std::string_view word, const BpeMerges& merges, const MergeRanks& ranks);

// Merges and vocabulary bundled with a precomputed rule index.
class Tokenizer {
  public:
    Tokenizer(BpeMerges merges, Vocabulary vocab);

    std::vector<int> operator()(std::string_view text) const;
    std::vector<std::string> symbols(std::string_view text) const;

    const BpeMerges& merges() const { return merges_; }
    const Vocabulary& vocab() const { return vocab_; }

  private:
    BpeMerges merges_;
    Vocabulary vocab_;
    MergeRanks ranks_;
};

// Fills the tokens of every utterance in the example.
void tokenize_example(EvalExample& ex, const Tokenizer& tok);
void tokenize_dataset(Dataset& ds, const Tokenizer& tok);

// Every utterance text of the dataset (context turns, model and reference responses).
std::vector<std::string> dataset_texts(const Dataset& ds);

} // namespace dlev
