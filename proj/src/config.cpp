#include "dlev/config.hpp"

#include "dlev/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dlev {

namespace {

using T = ConfigType;

std::vector<ConfigKey> build_schema() {
    constexpr double inf = 1e300;
    return {
        {"run.seed", T::Int, "42", "global seed for every random stream", 0, 9.2e18},

        {"corpus.bpe_merges", T::Int, "2000", "number of BPE merge operations learned on the training split", 0},
        {"corpus.vocab_size", T::Int, "5000", "vocabulary size including the 4 reserved tokens", 5},
        {"corpus.train_ratio", T::Real, "0.7", "share of contexts in the training split", 0, 1, true},
        {"corpus.validation_ratio", T::Real, "0.15", "share of contexts in the validation split", 0, 1, true},
        {"corpus.test_ratio", T::Real, "0.15", "share of contexts in the test split", 0, 1, true},
        {"corpus.strip_speaker_tokens", T::Bool, "true", "drop <first_speaker>-style markers from all texts"},

        {"encoder.embed_dim", T::Int, "32", "word embedding size", 1},
        {"encoder.utterance_hidden", T::Int, "64", "utterance-level LSTM hidden size", 1},
        {"encoder.context_hidden", T::Int, "64", "context-level LSTM hidden size (encoder output size)", 1},
        {"encoder.layer_norm", T::Bool, "true", "layer-normalize the LSTM gate pre-activations"},

        {"vhred.latent_dim", T::Int, "16", "latent variable size", 1},
        {"vhred.net_hidden", T::Int, "64", "hidden size of the prior and posterior networks", 1},
        {"vhred.decoder_hidden", T::Int, "64", "decoder LSTM hidden size", 1},
        {"vhred.word_dropout", T::Real, "0.25", "probability of replacing a decoder input word by <unk>", 0, 1},
        {"vhred.anneal_batches", T::Int, "2000", "batches over which the KL weight rises linearly to 1", 1},
        {"vhred.batches", T::Int, "2000", "training batches", 0},
        {"vhred.batch_size", T::Int, "8", "dialogues per batch", 1},
        {"vhred.learning_rate", T::Real, "0.002", "Adam learning rate", 0, inf, true},
        {"vhred.grad_clip", T::Real, "5", "global gradient-norm clip", 0, inf, true},

        {"adem.pca_dim", T::Int, "50", "PCA output dimension n", 1},
        {"adem.gamma", T::Real, "0.075", "L2 penalty on M and N", 0},
        {"adem.learning_rate", T::Real, "0.01", "Adam learning rate", 0, inf, true},
        {"adem.batch_size", T::Int, "32", "examples per minibatch", 1},
        {"adem.max_epochs", T::Int, "50", "epoch limit", 0},
        {"adem.patience", T::Int, "5", "epochs without validation improvement before stopping", 1},
        {"adem.subsample", T::Bool, "true", "balance response-length bins per score level before training"},
        {"adem.length_bins", T::IntList, "1,6,11,21", "lower edges (in words) of the response-length bins", 0},

        {"metrics.bleu_smoothing", T::String, "epsilon", "none or epsilon (add epsilon to zero n-gram matches)", -inf,
         inf, false, {"none", "epsilon"}},
        {"metrics.bleu_epsilon", T::Real, "1e-9", "smoothing constant for bleu_smoothing=epsilon", 0, inf, true},
        {"metrics.rouge_beta", T::Real, "1.2", "ROUGE-L recall weight", 0, inf, true},
        {"metrics.meteor_alpha", T::Real, "0.9", "METEOR precision/recall weight", 0, 1},
        {"metrics.meteor_gamma", T::Real, "0.5", "METEOR fragmentation penalty weight", 0, 1},
        {"metrics.meteor_theta", T::Real, "3", "METEOR fragmentation exponent", 0},
        {"metrics.meteor_stem", T::Bool, "true", "add the suffix-stripping match stage after exact matching"},

        {"analytics.delta_w", T::Int, "6", "length-difference threshold in words", 0},
        {"analytics.high_threshold", T::Real, "4", "'high score' threshold of the failure slices"},
        {"analytics.low_threshold", T::Real, "2", "'low score' threshold of the failure slices"},
        {"analytics.jitter_sd", T::Real, "0.3", "standard deviation of the scatter jitter column", 0},
        {"analytics.sweep_fractions", T::RealList, "1,0.75,0.5,0.25,0.1,0.05", "training fractions of the sweep", 0,
         1, true},
        {"analytics.sweep_seeds", T::Int, "1", "seeds averaged per sweep fraction", 1},

        {"synth.variant", T::String, "realizable", "realizable, noisy or length-biased", -inf, inf, false,
         {"realizable", "noisy", "length-biased"}},
        {"synth.contexts", T::Int, "700", "number of contexts", 3},
        {"synth.sources", T::Int, "4", "responses per context (TFIDF, DE, HRED, HUMAN)", 1, 4},
        {"synth.noise_sd", T::Real, "0.1", "noise added to realizable scores", 0},
        {"synth.pca_dim", T::Int, "50", "PCA dimension the realizable rule is computed in", 1},
        {"synth.bpe_merges", T::Int, "300", "BPE merges learned on the synthetic texts", 0},
        {"synth.vocab_size", T::Int, "2000", "vocabulary size limit for the synthetic texts", 5},
        {"synth.length_slope", T::Real, "0.3", "score shift per length bin (length-biased variant)"},
        {"synth.rule_perturbation", T::Real, "0", "random perturbation of the realizable rule away from identity", 0},
    };
}

const ConfigKey* find_key(const std::string& key) {
    for (const auto& k : config_schema()) {
        if (k.key == key) return &k;
    }
    return nullptr;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<long long> to_int(const std::string& s) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || s.empty()) return std::nullopt;
    return v;
}

std::optional<double> to_real(const std::string& s) {
    double v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || s.empty() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<bool> to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    return std::nullopt;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::string type_name(ConfigType t) {
    switch (t) {
    case T::Int:
        return "an integer";
    case T::Real:
        return "a number";
    case T::Bool:
        return "true or false";
    case T::String:
        return "a string";
    case T::RealList:
        return "a comma-separated list of numbers";
    case T::IntList:
        return "a comma-separated list of integers";
    }
    return "?";
}

std::optional<std::string> range_problem(const ConfigKey& k, double v) {
    const bool below = k.lo_open ? v <= k.lo : v < k.lo;
    if (below || v > k.hi) {
        std::ostringstream os;
        os << k.key << " = " << v << " is out of range " << (k.lo_open ? "(" : "[") << k.lo << ", ";
        if (k.hi >= 1e300) {
            os << "inf)";
        } else {
            os << k.hi << "]";
        }
        return os.str();
    }
    return std::nullopt;
}

std::optional<std::string> check_value(const ConfigKey& k, const std::string& value) {
    const std::string bad = k.key + " = '" + value + "' is not " + type_name(k.type);
    switch (k.type) {
    case T::Int: {
        auto v = to_int(value);
        if (!v) return bad;
        return range_problem(k, static_cast<double>(*v));
    }
    case T::Real: {
        auto v = to_real(value);
        if (!v) return bad;
        return range_problem(k, *v);
    }
    case T::Bool:
        if (!to_bool(value)) return bad;
        return std::nullopt;
    case T::String:
        if (!k.choices.empty()) {
            for (const auto& c : k.choices) {
                if (c == value) return std::nullopt;
            }
            std::string msg = k.key + " = '" + value + "' is not one of:";
            for (const auto& c : k.choices) msg += " " + c;
            return msg;
        }
        return std::nullopt;
    case T::RealList:
    case T::IntList: {
        const auto items = split_list(value);
        if (items.empty()) return k.key + " must not be empty";
        for (const auto& item : items) {
            std::optional<double> v;
            if (k.type == T::IntList) {
                if (auto i = to_int(item)) v = static_cast<double>(*i);
            } else {
                v = to_real(item);
            }
            if (!v) return bad;
            if (auto p = range_problem(k, *v)) return p;
        }
        return std::nullopt;
    }
    }
    return std::nullopt;
}

} // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = build_schema();
    return schema;
}

RunConfig::RunConfig() {
    for (const auto& k : config_schema()) values_[k.key] = k.default_value;
}

std::optional<std::string> RunConfig::set(const std::string& key, const std::string& value) {
    if (find_key(key) == nullptr) return "unknown config key '" + key + "'";
    values_[key] = trim(value);
    return std::nullopt;
}

std::vector<std::string> RunConfig::apply_file(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        return {"config file " + e.filename() + ":" + std::to_string(e.line()) + ": " + e.message()};
    }
    std::vector<std::string> problems;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            problems.push_back(path.string() + ": key '" + section + "' is outside any [section]");
            continue;
        }
        for (const auto& [name, leaf] : body) {
            if (auto p = set(section + "." + name, leaf.data())) problems.push_back(path.string() + ": " + *p);
        }
    }
    return problems;
}

std::vector<std::string> RunConfig::violations() const {
    std::vector<std::string> out;
    for (const auto& k : config_schema()) {
        if (auto p = check_value(k, values_.at(k.key))) out.push_back(*p);
    }
    const double total = get_real("corpus.train_ratio") + get_real("corpus.validation_ratio") +
                         get_real("corpus.test_ratio");
    if (out.empty() && std::abs(total - 1.0) > 1e-9) out.push_back("corpus split ratios must sum to 1");
    return out;
}

const std::string& RunConfig::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
}

long long RunConfig::get_int(const std::string& key) const {
    auto v = to_int(raw(key));
    if (!v) throw UsageError(key + " is not an integer");
    return *v;
}

double RunConfig::get_real(const std::string& key) const {
    auto v = to_real(raw(key));
    if (!v) throw UsageError(key + " is not a number");
    return *v;
}

bool RunConfig::get_bool(const std::string& key) const {
    auto v = to_bool(raw(key));
    if (!v) throw UsageError(key + " is not a boolean");
    return *v;
}

const std::string& RunConfig::get_string(const std::string& key) const { return raw(key); }

std::vector<double> RunConfig::get_real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(raw(key))) {
        auto v = to_real(item);
        if (!v) throw UsageError(key + " contains a non-number");
        out.push_back(*v);
    }
    return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : split_list(raw(key))) {
        auto v = to_int(item);
        if (!v) throw UsageError(key + " contains a non-integer");
        out.push_back(static_cast<int>(*v));
    }
    return out;
}

std::uint64_t RunConfig::seed() const { return static_cast<std::uint64_t>(get_int("run.seed")); }

std::string RunConfig::to_ini() const {
    std::string out;
    std::string section;
    for (const auto& k : config_schema()) {
        const auto dot = k.key.find('.');
        const auto sec = k.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out += '\n';
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += k.key.substr(dot + 1) + " = " + values_.at(k.key) + "\n";
    }
    return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(to_ini()); }

RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    std::vector<std::string> problems;
    if (file) {
        if (!std::filesystem::exists(*file)) {
            problems.push_back("config file " + file->string() + " does not exist");
        } else {
            problems = cfg.apply_file(*file);
        }
    }
    for (const auto& [k, v] : overrides) {
        if (auto p = cfg.set(k, v)) problems.push_back(*p);
    }
    for (auto& p : cfg.violations()) problems.push_back(std::move(p));
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw UsageError(msg);
    }
    return cfg;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace dlev
