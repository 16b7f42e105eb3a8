#include "dlev/pipeline.hpp"

#include "dlev/errors.hpp"
#include "dlev/seed.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace dlev {

EncoderConfig encoder_config(const RunConfig& cfg, int vocab_size) {
    EncoderConfig e;
    e.vocab_size = vocab_size;
    e.embed_dim = static_cast<int>(cfg.get_int("encoder.embed_dim"));
    e.utterance_hidden = static_cast<int>(cfg.get_int("encoder.utterance_hidden"));
    e.context_hidden = static_cast<int>(cfg.get_int("encoder.context_hidden"));
    e.layer_norm = cfg.get_bool("encoder.layer_norm");
    return e;
}

VhredConfig vhred_config(const RunConfig& cfg, int vocab_size) {
    VhredConfig v;
    v.encoder = encoder_config(cfg, vocab_size);
    v.latent_dim = static_cast<int>(cfg.get_int("vhred.latent_dim"));
    v.net_hidden = static_cast<int>(cfg.get_int("vhred.net_hidden"));
    v.decoder_hidden = static_cast<int>(cfg.get_int("vhred.decoder_hidden"));
    v.word_dropout = cfg.get_real("vhred.word_dropout");
    v.anneal.total_batches = cfg.get_int("vhred.anneal_batches");
    v.batches = cfg.get_int("vhred.batches");
    v.batch_size = static_cast<int>(cfg.get_int("vhred.batch_size"));
    v.learning_rate = cfg.get_real("vhred.learning_rate");
    v.grad_clip = cfg.get_real("vhred.grad_clip");
    return v;
}

AdemFitOptions adem_options(const RunConfig& cfg) {
    AdemFitOptions o;
    o.train.gamma = cfg.get_real("adem.gamma");
    o.train.learning_rate = cfg.get_real("adem.learning_rate");
    o.train.batch_size = static_cast<int>(cfg.get_int("adem.batch_size"));
    o.train.max_epochs = static_cast<int>(cfg.get_int("adem.max_epochs"));
    o.train.patience = static_cast<int>(cfg.get_int("adem.patience"));
    o.train.seed = cfg.seed();
    o.subsample_length = cfg.get_bool("adem.subsample");
    o.bins.lower_edges = cfg.get_int_list("adem.length_bins");
    o.bins.validate();
    return o;
}

SynthConfig synth_config(const RunConfig& cfg) {
    SynthConfig s;
    s.variant = parse_synth_variant(cfg.get_string("synth.variant"));
    s.contexts = static_cast<int>(cfg.get_int("synth.contexts"));
    s.sources = static_cast<int>(cfg.get_int("synth.sources"));
    s.noise_sd = cfg.get_real("synth.noise_sd");
    s.pca_dim = static_cast<int>(cfg.get_int("synth.pca_dim"));
    s.bpe_merges = static_cast<int>(cfg.get_int("synth.bpe_merges"));
    s.vocab_size = static_cast<int>(cfg.get_int("synth.vocab_size"));
    s.length_slope = cfg.get_real("synth.length_slope");
    s.rule_perturbation = cfg.get_real("synth.rule_perturbation");
    s.encoder = encoder_config(cfg, s.vocab_size);
    return s;
}

OverlapConfig overlap_config(const RunConfig& cfg) {
    OverlapConfig o;
    o.bleu.smoothing = cfg.get_string("metrics.bleu_smoothing") == "none" ? BleuSmoothing::None
                                                                           : BleuSmoothing::AddEpsilon;
    o.bleu.epsilon = cfg.get_real("metrics.bleu_epsilon");
    o.rouge.beta = cfg.get_real("metrics.rouge_beta");
    o.meteor.alpha = cfg.get_real("metrics.meteor_alpha");
    o.meteor.gamma = cfg.get_real("metrics.meteor_gamma");
    o.meteor.theta = cfg.get_real("metrics.meteor_theta");
    o.meteor.stages = {MeteorStage::Exact};
    if (cfg.get_bool("metrics.meteor_stem")) o.meteor.stages.push_back(MeteorStage::Stem);
    return o;
}

double overlap_score(const std::string& metric, const EvalExample& ex, const OverlapConfig& cfg) {
    const auto cand = split_words(ex.model_response.text);
    const auto ref = split_words(ex.reference_response.text);
    if (metric == "bleu2" || metric == "bleu4") {
        BleuConfig b = cfg.bleu;
        b.max_order = metric == "bleu2" ? 2 : 4;
        b.weights.clear();
        return bleu_n(cand, ref, b);
    }
    if (metric == "rouge_l") return rouge_l(cand, ref, cfg.rouge);
    if (metric == "meteor") return meteor(cand, ref, cfg.meteor);
    throw UsageError("unknown overlap metric '" + metric + "'");
}

ScoreColumns overlap_scores(const Dataset& ds, const OverlapConfig& cfg) {
    ScoreColumns cols;
    for (const char* m : {"bleu2", "bleu4", "rouge_l", "meteor"}) {
        ScoreColumn c{m, {}};
        c.scores.reserve(ds.size());
        for (const auto& ex : ds) c.scores.push_back(overlap_score(m, ex, cfg));
        cols.push_back(std::move(c));
    }
    return cols;
}

Table scores_table(const Dataset& ds, const ScoreColumns& cols) {
    Table t{{"example_index", "context_id", "metric", "score"}, {}};
    for (const auto& c : cols) {
        if (c.scores.size() != ds.size()) throw ValidationError("score column " + c.metric + " is not aligned");
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (const auto& c : cols) {
            t.add_row({format_number(i), ds[i].context.context_id, c.metric, format_number(c.scores[i])});
        }
    }
    return t;
}

ScoreColumns parse_scores_table(const Table& t, const Dataset& ds) {
    const auto ci = t.column("example_index");
    const auto cc = t.column("context_id");
    const auto cm = t.column("metric");
    const auto cs = t.column("score");
    ScoreColumns cols;
    std::map<std::string, std::size_t> pos;
    std::vector<std::vector<bool>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = "scores row " + std::to_string(r + 2);
        const double idx_d = parse_number(row[ci], where);
        if (!(idx_d >= 0) || idx_d != std::floor(idx_d) || idx_d >= static_cast<double>(ds.size())) {
            throw ValidationError(where + ": example_index " + row[ci] + " is outside the dataset of " +
                                  std::to_string(ds.size()) + " examples");
        }
        const auto idx = static_cast<std::size_t>(idx_d);
        if (row[cc] != ds[idx].context.context_id) {
            throw ValidationError(where + ": context_id " + row[cc] + " does not match example " + row[ci] + " (" +
                                  ds[idx].context.context_id + ")");
        }
        auto [it, fresh] = pos.emplace(row[cm], cols.size());
        if (fresh) {
            cols.push_back({row[cm], std::vector<double>(ds.size(), std::nan(""))});
            seen.emplace_back(ds.size(), false);
        }
        if (seen[it->second][idx]) throw ValidationError(where + ": duplicate score for " + row[cm]);
        seen[it->second][idx] = true;
        cols[it->second].scores[idx] = parse_number(row[cs], where);
    }
    for (std::size_t k = 0; k < cols.size(); ++k) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (!seen[k][i]) {
                throw ValidationError("metric " + cols[k].metric + " has no score for example " + std::to_string(i));
            }
        }
    }
    if (cols.empty()) throw ValidationError("scores table is empty");
    return cols;
}

AnalyticsSettings analytics_settings(const RunConfig& cfg) {
    AnalyticsSettings s;
    s.delta_w = static_cast<int>(cfg.get_int("analytics.delta_w"));
    s.thresholds.high = cfg.get_real("analytics.high_threshold");
    s.thresholds.low = cfg.get_real("analytics.low_threshold");
    s.jitter_sd = cfg.get_real("analytics.jitter_sd");
    s.seed = cfg.seed();
    return s;
}

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num_or_nan(const std::optional<CorrelationResult>& c, bool p) {
    if (!c) return "nan";
    return format_number(p ? c->p_value : c->coefficient);
}

const ScoreColumn* find_column(const ScoreColumns& cols, const std::string& name) {
    for (const auto& c : cols) {
        if (c.metric == name) return &c;
    }
    return nullptr;
}

std::optional<NormalizedScores> try_normalize(const std::vector<double>& metric, const std::vector<double>& human) {
    try {
        return normalize_scores(metric, human);
    } catch (const Error&) {
        return std::nullopt;
    }
}

} // namespace

std::vector<std::pair<std::string, Table>> eval_tables(const Dataset& ds, const ScoreColumns& cols,
                                                       const AnalyticsSettings& s) {
    if (ds.empty()) throw ValidationError("cannot evaluate an empty dataset");
    std::vector<double> human;
    std::vector<SourceModel> sources;
    std::vector<int> dw;
    for (const auto& ex : ds) {
        human.push_back(ex.human_score);
        sources.push_back(ex.source_model);
        dw.push_back(delta_words(ex));
    }
    std::vector<std::optional<NormalizedScores>> norm;
    for (const auto& c : cols) {
        if (c.scores.size() != ds.size()) throw ValidationError("score column " + c.metric + " is not aligned");
        norm.push_back(try_normalize(c.scores, human));
    }

    std::vector<std::pair<std::string, Table>> out;

    Table utt{{"metric", "n", "spearman", "spearman_p", "pearson", "pearson_p"}, {}};
    for (const auto& c : cols) {
        const auto r = correlate(c.scores, human);
        utt.add_row({c.metric, format_number(ds.size()), num_or_nan(r.spearman, false), num_or_nan(r.spearman, true),
                     num_or_nan(r.pearson, false), num_or_nan(r.pearson, true)});
    }
    out.emplace_back("utterance_correlation.csv", std::move(utt));

    Table sys{{"metric", "models", "pearson", "pearson_p"}, {}};
    Table summary{{"metric", "source_model", "count", "mean_human", "mean_metric"}, {}};
    for (const auto& c : cols) {
        const auto models = summarize_by_model(human, c.scores, sources);
        std::optional<CorrelationResult> r;
        try {
            r = system_level_correlation(human, c.scores, sources).correlation;
        } catch (const Error&) {
        }
        sys.add_row({c.metric, format_number(models.size()), num_or_nan(r, false), num_or_nan(r, true)});
        for (const auto& m : models) {
            summary.add_row({c.metric, std::string(to_string(m.source)), format_number(m.count),
                             format_number(m.mean_human), format_number(m.mean_metric)});
        }
    }
    out.emplace_back("system_correlation.csv", std::move(sys));
    out.emplace_back("system_summary.csv", std::move(summary));

    Table bias{{"metric", "threshold", "n_small", "mean_small", "n_large", "mean_large", "t", "dof", "p_value",
                "length_biased"},
               {}};
    auto bias_row = [&](const std::string& name, const std::vector<double>& scores) {
        try {
            const auto r = length_bias_report(dw, scores, s.delta_w);
            bias.add_row({name, format_number(s.delta_w), format_number(r.test.n_a), format_number(r.test.mean_a),
                          format_number(r.test.n_b), format_number(r.test.mean_b), format_number(r.test.t),
                          format_number(r.test.dof), format_number(r.test.p_value), r.length_biased ? "yes" : "no"});
        } catch (const Error&) {
            bias.add_row({name, format_number(s.delta_w), "0", "nan", "0", "nan", "nan", "nan", "nan", "no"});
        }
    };
    bias_row("human", human);
    for (std::size_t k = 0; k < cols.size(); ++k) bias_row(cols[k].metric, norm[k] ? norm[k]->normalized : cols[k].scores);
    out.emplace_back("length_bias.csv", std::move(bias));

    const auto* bleu2 = find_column(cols, "bleu2");
    const auto* rouge = find_column(cols, "rouge_l");
    const auto* adem = find_column(cols, "adem");
    if (bleu2 && rouge && adem) {
        auto normalized = [&](const ScoreColumn* c) {
            const auto k = static_cast<std::size_t>(c - cols.data());
            if (!norm[k]) throw NumericalError("metric " + c->metric + " is constant and cannot be normalized");
            return norm[k]->normalized;
        };
        const auto nb = normalized(bleu2);
        const auto nr = normalized(rouge);
        const auto na = normalized(adem);
        const auto slices = failure_slice(human, nb, nr, na, s.thresholds);
        Table counts{{"slice", "description", "count", "total"}, {}};
        Table examples{{"slice", "example_index", "context_id", "source_model", "human", "bleu2", "rouge_l", "adem",
                        "model_response", "reference_response"},
                       {}};
        for (int k = 0; k < kNumFailureSlices; ++k) {
            const auto& members = slices.members[k];
            counts.add_row({format_number(k + 1), std::string(describe(static_cast<FailureSlice>(k))),
                            format_number(members.size()), format_number(slices.total)});
            for (auto i : members) {
                examples.add_row({format_number(k + 1), format_number(i), ds[i].context.context_id,
                                  std::string(to_string(ds[i].source_model)), format_number(human[i]),
                                  format_number(nb[i]), format_number(nr[i]), format_number(na[i]),
                                  ds[i].model_response.text, ds[i].reference_response.text});
            }
        }
        out.emplace_back("failure_slices.csv", std::move(counts));
        out.emplace_back("failure_examples.csv", std::move(examples));
    }

    Table scatter{{"example_index", "metric", "human", "score", "normalized", "human_jitter"}, {}};
    std::mt19937_64 rng(mix_seed(s.seed, 11));
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (std::size_t k = 0; k < cols.size(); ++k) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            scatter.add_row({format_number(i), cols[k].metric, format_number(human[i]),
                             format_number(cols[k].scores[i]),
                             format_number(norm[k] ? norm[k]->normalized[i] : kNaN),
                             format_number(human[i] + s.jitter_sd * jitter(rng))});
        }
    }
    out.emplace_back("scatter.csv", std::move(scatter));
    return out;
}

Table sweep_table(const std::vector<SweepRow>& rows) {
    Table t{{"fraction", "train_contexts", "train_examples", "spearman", "spearman_p", "pearson", "pearson_p"}, {}};
    for (const auto& r : rows) {
        t.add_row({format_number(r.fraction), format_number(r.train_contexts), format_number(r.train_examples),
                   format_number(r.spearman), format_number(r.spearman_p), format_number(r.pearson),
                   format_number(r.pearson_p)});
    }
    return t;
}

Table leave_one_out_table(const LeaveOneOutResult& r) {
    Table t{{"run", "held_out", "train_examples", "spearman", "spearman_p", "pearson", "pearson_p", "held_out_n",
             "held_out_spearman", "held_out_spearman_p", "held_out_pearson", "held_out_pearson_p"},
            {}};
    for (const auto& row : r.rows) {
        t.add_row({row.label, row.held_out ? std::string(to_string(*row.held_out)) : "-",
                   format_number(row.train_indices.size()), num_or_nan(row.full_test.spearman, false),
                   num_or_nan(row.full_test.spearman, true), num_or_nan(row.full_test.pearson, false),
                   num_or_nan(row.full_test.pearson, true), format_number(row.held_out_test_count),
                   num_or_nan(row.held_out_test.spearman, false), num_or_nan(row.held_out_test.spearman, true),
                   num_or_nan(row.held_out_test.pearson, false), num_or_nan(row.held_out_test.pearson, true)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Report

const std::vector<std::string>& required_report_tables() {
    static const std::vector<std::string> names{"utterance_correlation.csv", "system_correlation.csv",
                                                "system_summary.csv",        "length_bias.csv",
                                                "failure_slices.csv",        "timing.csv"};
    return names;
}

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// "0.436 (0.0012)"
std::string coef_p(const std::string& coef, const std::string& p) {
    const double c = parse_number(coef, "report");
    const double pv = parse_number(p, "report");
    if (std::isnan(c)) return "n/a";
    return fmt("%.3f", c) + " (" + fmt("%.2g", pv) + ")";
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' '); }

void heading(std::ostringstream& os, const std::string& title) {
    os << "\n" << title << "\n" << std::string(title.size(), '-') << "\n";
}

} // namespace

std::string render_report(const std::filesystem::path& results_dir) {
    std::vector<std::string> missing;
    for (const auto& name : required_report_tables()) {
        if (!std::filesystem::is_regular_file(results_dir / name)) missing.push_back(name);
    }
    if (!missing.empty()) {
        std::string msg = "results directory " + results_dir.string() + " is missing tables:";
        for (const auto& m : missing) msg += " " + m;
        throw ValidationError(msg);
    }
    auto read = [&](const std::string& name) { return read_csv(results_dir / name); };

    std::ostringstream os;
    os << "Dialogue response evaluation report\n";
    os << "===================================\n";

    {
        const auto t = read("utterance_correlation.csv");
        heading(os, "Utterance-level correlation with human scores, coefficient (p-value)");
        os << pad("metric", 12) << pad("n", 8) << pad("Spearman", 20) << "Pearson\n";
        for (const auto& r : t.rows) {
            os << pad(r[t.column("metric")], 12) << pad(r[t.column("n")], 8)
               << pad(coef_p(r[t.column("spearman")], r[t.column("spearman_p")]), 20)
               << coef_p(r[t.column("pearson")], r[t.column("pearson_p")]) << "\n";
        }
    }
    {
        const auto t = read("system_correlation.csv");
        heading(os, "System-level correlation, Pearson (p-value)");
        os << pad("metric", 12) << pad("models", 8) << "Pearson\n";
        for (const auto& r : t.rows) {
            os << pad(r[t.column("metric")], 12) << pad(r[t.column("models")], 8)
               << coef_p(r[t.column("pearson")], r[t.column("pearson_p")]) << "\n";
        }
        const auto s = read("system_summary.csv");
        os << "\n" << pad("metric", 12) << pad("model", 8) << pad("count", 8) << pad("mean human", 12)
           << "mean metric\n";
        for (const auto& r : s.rows) {
            os << pad(r[s.column("metric")], 12) << pad(r[s.column("source_model")], 8)
               << pad(r[s.column("count")], 8)
               << pad(fmt("%.3f", parse_number(r[s.column("mean_human")], "report")), 12)
               << fmt("%.4f", parse_number(r[s.column("mean_metric")], "report")) << "\n";
        }
    }
    {
        const auto t = read("length_bias.csv");
        std::string th = t.rows.empty() ? "6" : t.rows.front()[t.column("threshold")];
        heading(os, "Mean normalized score by length difference (delta_w <= " + th + " vs > " + th + ")");
        os << pad("metric", 12) << pad("delta_w small", 22) << pad("delta_w large", 22) << pad("p-value", 10)
           << "length-biased\n";
        for (const auto& r : t.rows) {
            auto cell = [&](const char* m, const char* n) {
                return fmt("%.3f", parse_number(r[t.column(m)], "report")) + " (n=" + r[t.column(n)] + ")";
            };
            os << pad(r[t.column("metric")], 12) << pad(cell("mean_small", "n_small"), 22)
               << pad(cell("mean_large", "n_large"), 22)
               << pad(fmt("%.2g", parse_number(r[t.column("p_value")], "report")), 10) << r[t.column("length_biased")]
               << "\n";
        }
    }
    {
        const auto t = read("failure_slices.csv");
        heading(os, "Failure slices on normalized scores");
        for (const auto& r : t.rows) {
            os << pad(r[t.column("slice")], 4) << pad(r[t.column("description")], 56) << r[t.column("count")]
               << " of " << r[t.column("total")] << "\n";
        }
    }
    if (std::filesystem::is_regular_file(results_dir / "data_efficiency.csv")) {
        const auto t = read("data_efficiency.csv");
        heading(os, "ADEM trained on fractions of the training data, coefficient (p-value)");
        os << pad("fraction", 10) << pad("examples", 10) << pad("Spearman", 20) << "Pearson\n";
        for (const auto& r : t.rows) {
            os << pad(fmt("%g%%", 100.0 * parse_number(r[t.column("fraction")], "report")), 10)
               << pad(r[t.column("train_examples")], 10)
               << pad(coef_p(r[t.column("spearman")], r[t.column("spearman_p")]), 20)
               << coef_p(r[t.column("pearson")], r[t.column("pearson_p")]) << "\n";
        }
    }
    if (std::filesystem::is_regular_file(results_dir / "leave_one_out.csv")) {
        const auto t = read("leave_one_out.csv");
        heading(os, "Leave-one-out generalization, coefficient (p-value)");
        os << pad("run", 16) << pad("examples", 10) << pad("test Spearman", 20) << pad("test Pearson", 20)
           << pad("held-out Spearman", 20) << "held-out Pearson\n";
        for (const auto& r : t.rows) {
            os << pad(r[t.column("run")], 16) << pad(r[t.column("train_examples")], 10)
               << pad(coef_p(r[t.column("spearman")], r[t.column("spearman_p")]), 20)
               << pad(coef_p(r[t.column("pearson")], r[t.column("pearson_p")]), 20)
               << pad(coef_p(r[t.column("held_out_spearman")], r[t.column("held_out_spearman_p")]), 20)
               << coef_p(r[t.column("held_out_pearson")], r[t.column("held_out_pearson_p")]) << "\n";
        }
    }
    {
        const auto t = read("timing.csv");
        heading(os, "Evaluation time on the test set");
        os << pad("metric", 12) << pad("examples", 10) << "seconds\n";
        for (const auto& r : t.rows) {
            os << pad(r[t.column("metric")], 12) << pad(r[t.column("examples")], 10)
               << fmt("%.4f", parse_number(r[t.column("seconds")], "report")) << "\n";
        }
    }
    return os.str();
}

} // namespace dlev
