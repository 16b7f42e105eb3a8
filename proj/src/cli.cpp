#include "dlev/pipeline.hpp"

#include "dlev/errors.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace dlev {

namespace fs = std::filesystem;

namespace {

struct Alias {
    std::string flag;
    std::string key;
    std::string help;
};

struct PathOpt {
    std::string flag;
    std::string help;
    bool required = true;
    std::string fallback;
};

struct Sub {
    CLI::App* app = nullptr;
    std::optional<std::string> config_file;
    std::vector<std::string> sets;
    std::optional<std::string> seed;
    std::vector<Alias> aliases;
    std::map<std::string, std::string> alias_values;
    std::map<std::string, std::string> paths;
};

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return "fnv1a64:" + hex64(fnv1a64(bytes));
}

class Manifest {
  public:
    Manifest(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

    void input(const std::string& role, const fs::path& p) {
        inputs_.push_back(role + " " + p.filename().string() + " " + file_hash(p));
    }
    void output(const std::string& name) { outputs_.push_back(name); }

    void write(const fs::path& dir) const {
        std::ofstream ini(dir / "config.ini", std::ios::binary);
        ini << cfg_.to_ini();
        std::ofstream out(dir / "manifest.txt", std::ios::binary);
        out << "command = " << command_ << "\n";
        out << "seed = " << cfg_.seed() << "\n";
        out << "config_hash = fnv1a64:" << hex64(cfg_.hash()) << "\n";
        for (const auto& i : inputs_) out << "input = " << i << "\n";
        for (const auto& o : outputs_) out << "output = " << o << "\n";
        out << "output = config.ini\n";
    }

  private:
    std::string command_;
    const RunConfig& cfg_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

fs::path require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw ValidationError("missing " + what + ": " + p.string());
    return p;
}

fs::path make_out_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw ValidationError("cannot create output directory " + dir);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << text;
}

Dataset load_split(const fs::path& data_dir, const std::string& split, Manifest& m) {
    const auto p = require_file(data_dir / (split + ".jsonl"), split + " split (run `dlev prepare` first)");
    m.input(split, p);
    return load_dataset(p);
}

Tokenizer load_tokenizer(const fs::path& data_dir, Manifest& m) {
    const auto bpe = require_file(data_dir / "bpe.txt", "BPE merges (run `dlev prepare` first)");
    const auto vocab = require_file(data_dir / "vocab.txt", "vocabulary (run `dlev prepare` first)");
    m.input("bpe", bpe);
    m.input("vocab", vocab);
    return Tokenizer(load_merges(bpe), load_vocab(vocab));
}

Dataset load_tokenized(const fs::path& data_dir, const std::string& split, const Tokenizer& tok, Manifest& m) {
    auto ds = load_split(data_dir, split, m);
    tokenize_dataset(ds, tok);
    return ds;
}

HierEncoderParams load_encoder(const fs::path& p, const Tokenizer& tok, Manifest& m) {
    require_file(p, "encoder checkpoint (run `dlev pretrain` first)");
    m.input("encoder", p);
    auto enc = HierEncoderParams::load(Checkpoint::load(p));
    if (enc.vocab_size() != tok.vocab().size()) {
        throw ValidationError("encoder vocabulary size " + std::to_string(enc.vocab_size()) +
                              " does not match the prepared vocabulary (" + std::to_string(tok.vocab().size()) + ")");
    }
    return enc;
}

// Rounds through the checkpoint's float32 storage, so in-memory use matches a reload.
PcaProjection stored_pca(const PcaProjection& pca) {
    Checkpoint ck;
    save_pca(ck, pca);
    return load_pca(ck);
}

PcaProjection pca_for(const RunConfig& cfg, const std::map<std::string, std::string>& paths, const Dataset& train,
                      const HierEncoderParams& enc, Manifest& m, std::ostream& out) {
    const auto dim = static_cast<int>(cfg.get_int("adem.pca_dim"));
    auto it = paths.find("pca");
    if (it != paths.end() && !it->second.empty()) {
        const auto p = require_file(it->second, "PCA checkpoint (run `dlev fit-pca` first)");
        m.input("pca", p);
        auto pca = load_pca(Checkpoint::load(p));
        if (pca.output_dim() != dim) {
            throw UsageError("PCA checkpoint has dimension " + std::to_string(pca.output_dim()) +
                             " but adem.pca_dim is " + std::to_string(dim));
        }
        if (pca.input_dim() != enc.output_dim()) {
            throw ValidationError("PCA checkpoint input dimension does not match the encoder output");
        }
        return pca;
    }
    out << "fitting PCA to " << dim << " dimensions on the training split\n";
    return stored_pca(fit_pca_on_dataset(train, enc, dim));
}

void write_tables(const fs::path& dir, const std::vector<std::pair<std::string, Table>>& tables, Manifest& m) {
    for (const auto& [name, t] : tables) {
        write_csv(dir / name, t);
        m.output(name);
    }
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_synth(const RunConfig& cfg, const Sub& s, std::ostream& out) {
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("synth", cfg);
    const auto sc = synth_config(cfg);
    const auto res = generate_synth(sc, cfg.seed());
    save_dataset(dir / "dataset.jsonl", res.dataset);
    m.output("dataset.jsonl");
    if (res.merges) {
        save_merges(dir / "bpe.txt", *res.merges);
        save_vocab(dir / "vocab.txt", *res.vocab);
        Checkpoint ck;
        res.encoder->save(ck);
        ck.save(dir / "encoder.ckpt");
        m.output("bpe.txt");
        m.output("vocab.txt");
        m.output("encoder.ckpt");
    }
    if (res.pca) {
        Checkpoint ck;
        save_pca(ck, *res.pca);
        ck.save(dir / "pca.ckpt");
        m.output("pca.ckpt");
    }
    m.write(dir);
    out << "wrote " << res.dataset.size() << " examples (" << sc.contexts << " contexts, " << sc.sources
        << " sources, variant " << to_string(sc.variant) << ") to " << dir.string() << "\n";
}

void cmd_prepare(const RunConfig& cfg, const Sub& s, std::ostream& out) {
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("prepare", cfg);
    const auto data = require_file(s.paths.at("data"), "dataset");
    m.input("dataset", data);
    auto ds = load_dataset(data);
    if (cfg.get_bool("corpus.strip_speaker_tokens")) {
        for (auto& ex : ds) {
            for (auto& u : ex.context.utterances) u.text = strip_speaker_tokens(u.text);
            ex.model_response.text = strip_speaker_tokens(ex.model_response.text);
            ex.reference_response.text = strip_speaker_tokens(ex.reference_response.text);
        }
    }
    const auto split = split_by_context(ds,
                                        {cfg.get_real("corpus.train_ratio"), cfg.get_real("corpus.validation_ratio"),
                                         cfg.get_real("corpus.test_ratio")},
                                        cfg.seed());
    const auto texts = dataset_texts(split.train);
    BpeMerges merges;
    if (!s.paths.at("bpe").empty()) {
        const auto p = require_file(s.paths.at("bpe"), "BPE merges file");
        m.input("bpe", p);
        merges = load_merges(p);
    } else {
        merges = learn_bpe(texts, static_cast<int>(cfg.get_int("corpus.bpe_merges")));
    }
    Vocabulary vocab;
    if (!s.paths.at("vocab").empty()) {
        const auto p = require_file(s.paths.at("vocab"), "vocabulary file");
        m.input("vocab", p);
        vocab = load_vocab(p);
    } else {
        vocab = build_vocab(texts, merges, static_cast<int>(cfg.get_int("corpus.vocab_size")));
    }
    save_dataset(dir / "train.jsonl", split.train);
    save_dataset(dir / "validation.jsonl", split.validation);
    save_dataset(dir / "test.jsonl", split.test);
    save_merges(dir / "bpe.txt", merges);
    save_vocab(dir / "vocab.txt", vocab);
    for (const char* o : {"train.jsonl", "validation.jsonl", "test.jsonl", "bpe.txt", "vocab.txt"}) m.output(o);
    m.write(dir);
    out << "split " << ds.size() << " examples into " << split.train.size() << " / " << split.validation.size()
        << " / " << split.test.size() << "; " << merges.size() << " merges, vocabulary " << vocab.size() << "\n";
}

void cmd_pretrain(const RunConfig& cfg, const Sub& s, std::ostream& out) {
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("pretrain", cfg);
    const fs::path data_dir = s.paths.at("data-dir");
    const auto tok = load_tokenizer(data_dir, m);
    const auto train = load_tokenized(data_dir, "train", tok, m);
    const auto dialogues = dialogues_from_dataset(train);
    const auto vcfg = vhred_config(cfg, tok.vocab().size());

    Table log{{"batch", "recon", "kl", "anneal_w", "objective"}, {}};
    const auto res = pretrain_vhred(dialogues, vcfg, cfg.seed(), [&](const PretrainLogRow& r) {
        log.add_row({format_number(static_cast<long long>(r.batch)), format_number(r.reconstruction),
                     format_number(r.kl), format_number(r.anneal_w), format_number(r.objective)});
    });
    Checkpoint ck;
    res.params.encoder.save(ck);
    ck.save(dir / "encoder.ckpt");
    write_csv(dir / "pretrain_log.csv", log);
    m.output("encoder.ckpt");
    m.output("pretrain_log.csv");
    m.write(dir);
    if (!res.log.empty()) {
        const auto& last = res.log.back();
        out << "batch " << last.batch << ": recon " << last.reconstruction << ", kl " << last.kl << ", anneal "
            << last.anneal_w << "\n";
    }
}

void cmd_fit_pca(const RunConfig& cfg, const Sub& s, std::ostream& out) {
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("fit-pca", cfg);
    const fs::path data_dir = s.paths.at("data-dir");
    const auto tok = load_tokenizer(data_dir, m);
    const auto train = load_tokenized(data_dir, "train", tok, m);
    const auto enc = load_encoder(s.paths.at("encoder"), tok, m);
    const auto dim = static_cast<int>(cfg.get_int("adem.pca_dim"));
    const auto pca = fit_pca_on_dataset(train, enc, dim);
    Checkpoint ck;
    save_pca(ck, pca);
    ck.save(dir / "pca.ckpt");
    m.output("pca.ckpt");
    m.write(dir);
    out << "PCA " << pca.input_dim() << " -> " << pca.output_dim() << ", leading eigenvalue " << pca.eigenvalues[0]
        << "\n";
}

void cmd_train(const RunConfig& cfg, const Sub& s, std::ostream& out) {
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("train", cfg);
    const fs::path data_dir = s.paths.at("data-dir");
    const auto tok = load_tokenizer(data_dir, m);
    const auto train = load_tokenized(data_dir, "train", tok, m);
    const auto val = load_tokenized(data_dir, "validation", tok, m);
    const auto enc = load_encoder(s.paths.at("encoder"), tok, m);
    const auto pca = pca_for(cfg, s.paths, train, enc, m, out);
    const auto opts = adem_options(cfg);

    const auto tr = encode_examples(train, enc, &pca);
    const auto va = encode_examples(val, enc, &pca);
    const auto res = fit_adem(tr, va, opts);

    save_adem(dir / "adem.ckpt", AdemModel{res.params, pca, opts.train});
    Table log{{"epoch", "train_loss", "val_pearson", "val_spearman"}, {}};
    for (const auto& r : res.log) {
        log.add_row({format_number(r.epoch), format_number(r.train_loss), format_number(r.val_pearson),
                     format_number(r.val_spearman)});
    }
    write_csv(dir / "train_log.csv", log);
    m.output("adem.ckpt");
    m.output("train_log.csv");
    m.write(dir);
    const auto& best = res.log[static_cast<std::size_t>(res.best_epoch)];
    out << "best epoch " << res.best_epoch << " of " << res.log.size() - 1 << ": validation Pearson "
        << best.val_pearson << ", Spearman " << best.val_spearman << "\n";
}

void cmd_score(const RunConfig& cfg, const Sub& s, std::ostream& out) {
    using clock = std::chrono::steady_clock;
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("score", cfg);
    const fs::path data_dir = s.paths.at("data-dir");
    const auto tok = load_tokenizer(data_dir, m);
    const auto ds = load_tokenized(data_dir, s.paths.at("split"), tok, m);
    const auto enc = load_encoder(s.paths.at("encoder"), tok, m);
    const auto adem_path = require_file(s.paths.at("adem"), "ADEM checkpoint (run `dlev train` first)");
    m.input("adem", adem_path);
    const auto model = load_adem(adem_path);
    const auto ocfg = overlap_config(cfg);

    ScoreColumns cols;
    Table timing{{"metric", "examples", "seconds"}, {}};
    auto t0 = clock::now();
    ScoreColumn adem{"adem", {}};
    for (const auto& [id, score] : predict(model.params, model.pca, enc, ds)) adem.scores.push_back(score);
    auto t1 = clock::now();
    timing.add_row({"adem", format_number(ds.size()), format_number(std::chrono::duration<double>(t1 - t0).count())});
    cols.push_back(std::move(adem));
    for (const char* metric : {"bleu2", "bleu4", "rouge_l", "meteor"}) {
        t0 = clock::now();
        ScoreColumn c{metric, {}};
        for (const auto& ex : ds) c.scores.push_back(overlap_score(metric, ex, ocfg));
        t1 = clock::now();
        timing.add_row(
            {metric, format_number(ds.size()), format_number(std::chrono::duration<double>(t1 - t0).count())});
        cols.push_back(std::move(c));
    }
    write_csv(dir / "scores.csv", scores_table(ds, cols));
    write_csv(dir / "timing.csv", timing);
    m.output("scores.csv");
    m.output("timing.csv");
    m.write(dir);
    out << "scored " << ds.size() << " examples with " << cols.size() << " metrics\n";
}

void cmd_eval(const RunConfig& cfg, const Sub& s, std::ostream& out) {
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("eval", cfg);
    const auto ds = load_split(s.paths.at("data-dir"), s.paths.at("split"), m);
    const fs::path scores = require_file(s.paths.at("scores"), "scores file (run `dlev score` first)");
    m.input("scores", scores);
    const auto cols = parse_scores_table(read_csv(scores), ds);
    const auto tables = eval_tables(ds, cols, analytics_settings(cfg));
    write_tables(dir, tables, m);
    const auto timing = scores.parent_path() / "timing.csv";
    if (fs::is_regular_file(timing) && !fs::equivalent(timing, dir / "timing.csv")) {
        m.input("timing", timing);
        fs::copy_file(timing, dir / "timing.csv", fs::copy_options::overwrite_existing);
        m.output("timing.csv");
    }
    m.write(dir);
    const auto& utt = tables.front().second;
    for (const auto& r : utt.rows) {
        out << r[0] << ": Spearman " << r[2] << " (p " << r[3] << "), Pearson " << r[4] << " (p " << r[5] << ")\n";
    }
}

void cmd_sweep(const RunConfig& cfg, const Sub& s, std::ostream& out, std::ostream& err) {
    const auto dir = make_out_dir(s.paths.at("out"));
    Manifest m("sweep", cfg);
    const fs::path data_dir = s.paths.at("data-dir");
    const auto tok = load_tokenizer(data_dir, m);
    const auto train = load_tokenized(data_dir, "train", tok, m);
    const auto val = load_tokenized(data_dir, "validation", tok, m);
    const auto test = load_tokenized(data_dir, "test", tok, m);
    const auto enc = load_encoder(s.paths.at("encoder"), tok, m);
    const auto pca = pca_for(cfg, s.paths, train, enc, m, out);
    const auto tr = encode_examples(train, enc, &pca);
    const auto va = encode_examples(val, enc, &pca);
    const auto te = encode_examples(test, enc, &pca);

    SweepConfig sc;
    sc.fit = adem_options(cfg);
    sc.fractions = cfg.get_real_list("analytics.sweep_fractions");
    sc.seeds = static_cast<int>(cfg.get_int("analytics.sweep_seeds"));
    const auto rows = data_efficiency_sweep(tr, va, te, sc);
    write_csv(dir / "data_efficiency.csv", sweep_table(rows));
    m.output("data_efficiency.csv");

    const auto loo = leave_one_out_eval(tr, va, te, sc.fit);
    for (const auto& w : loo.warnings) err << "warning: " << w << "\n";
    write_csv(dir / "leave_one_out.csv", leave_one_out_table(loo));
    m.output("leave_one_out.csv");
    m.write(dir);
    for (const auto& r : rows) out << "fraction " << r.fraction << ": test Pearson " << r.pearson << "\n";
    for (const auto& r : loo.rows) {
        out << r.label << ": " << r.train_indices.size() << " training examples, test Pearson "
            << (r.full_test.pearson ? r.full_test.pearson->coefficient : std::nan("")) << "\n";
    }
}

void cmd_report(const Sub& s, std::ostream& out) {
    const fs::path results = s.paths.at("results");
    if (!fs::is_directory(results)) throw ValidationError("results directory " + results.string() + " does not exist");
    const auto text = render_report(results);
    const fs::path target = s.paths.at("out").empty() ? results / "report.txt" : fs::path(s.paths.at("out"));
    write_text(target, text);
    out << "wrote " << target.string() << "\n";
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dialogue response evaluation toolkit"};
    app.name("dlev");
    app.require_subcommand(1, 1);

    std::map<std::string, Sub> subs;
    auto add = [&](const std::string& name, const std::string& help, std::vector<PathOpt> paths,
                   std::vector<Alias> aliases) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, help);
        s.app->add_option("--config", s.config_file, "INI config file");
        s.app->add_option("--set", s.sets, "override a config key, section.key=value (repeatable)");
        s.app->add_option("--seed", s.seed, "global seed (run.seed)");
        for (const auto& p : paths) {
            s.paths[p.flag] = p.fallback;
            auto* opt = s.app->add_option("--" + p.flag, s.paths[p.flag], p.help);
            if (p.required) opt->required();
        }
        s.aliases = aliases;
        for (const auto& a : s.aliases) {
            s.alias_values[a.flag];
            s.app->add_option("--" + a.flag, s.alias_values[a.flag], a.help + " (" + a.key + ")");
        }
    };

    const PathOpt out_dir{"out", "output directory"};
    const PathOpt data_dir{"data-dir", "directory written by prepare"};
    const PathOpt encoder{"encoder", "encoder checkpoint"};
    const PathOpt pca{"pca", "PCA checkpoint; fitted on the training split when omitted", false};

    add("synth", "generate a synthetic scored dataset", {out_dir},
        {{"variant", "synth.variant", "realizable, noisy or length-biased"},
         {"contexts", "synth.contexts", "number of contexts"},
         {"sources", "synth.sources", "responses per context"},
         {"noise-sd", "synth.noise_sd", "score noise"},
         {"pca-dim", "synth.pca_dim", "PCA dimension of the realizable rule"}});
    add("prepare", "split by context, learn BPE and vocabulary",
        {{"data", "dataset JSONL"}, out_dir, {"bpe", "reuse this BPE merges file", false},
         {"vocab", "reuse this vocabulary file", false}},
        {{"merges", "corpus.bpe_merges", "BPE merges"}, {"vocab-size", "corpus.vocab_size", "vocabulary size"}});
    add("pretrain", "pre-train the hierarchical encoder as a VHRED model", {data_dir, out_dir},
        {{"batches", "vhred.batches", "training batches"},
         {"batch-size", "vhred.batch_size", "dialogues per batch"},
         {"lr", "vhred.learning_rate", "learning rate"},
         {"anneal-batches", "vhred.anneal_batches", "KL annealing length"}});
    add("fit-pca", "fit the PCA projection of encoder embeddings", {data_dir, encoder, out_dir},
        {{"pca-dim", "adem.pca_dim", "PCA dimension"}});
    add("train", "train ADEM", {data_dir, encoder, pca, out_dir},
        {{"gamma", "adem.gamma", "L2 penalty"},
         {"lr", "adem.learning_rate", "learning rate"},
         {"batch-size", "adem.batch_size", "minibatch size"},
         {"pca-dim", "adem.pca_dim", "PCA dimension"},
         {"max-epochs", "adem.max_epochs", "epoch limit"},
         {"patience", "adem.patience", "early-stopping patience"}});
    add("score", "score a split with ADEM and the word-overlap metrics",
        {data_dir, {"split", "split name", false, "test"}, encoder, {"adem", "ADEM checkpoint"}, out_dir}, {});
    add("eval", "correlation, bias and failure-slice tables",
        {data_dir, {"split", "split name", false, "test"}, {"scores", "scores.csv from score"}, out_dir},
        {{"delta-w", "analytics.delta_w", "length-difference threshold"}});
    add("sweep", "data-efficiency and leave-one-out tables", {data_dir, encoder, pca, out_dir},
        {{"fractions", "analytics.sweep_fractions", "training fractions"},
         {"sweep-seeds", "analytics.sweep_seeds", "seeds per fraction"}});
    add("report", "consolidated text report of a results directory",
        {{"results", "directory with eval (and optionally sweep) tables"},
         {"out", "report file (default <results>/report.txt)", false}},
        {});

    std::vector<const char*> argv{"dlev"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    std::string name;
    Sub* sub = nullptr;
    for (auto& [n, s] : subs) {
        if (s.app->parsed()) {
            name = n;
            sub = &s;
        }
    }

    try {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& kv : sub->sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + kv + "'");
            overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (sub->seed) overrides.emplace_back("run.seed", *sub->seed);
        for (const auto& a : sub->aliases) {
            if (sub->app->count("--" + a.flag) > 0) overrides.emplace_back(a.key, sub->alias_values.at(a.flag));
        }
        std::optional<fs::path> file;
        if (sub->config_file) file = *sub->config_file;
        const auto cfg = resolve_config(file, overrides);

        out << "dlev " << name << "\nseed: " << cfg.seed() << "\nconfig hash: fnv1a64:" << hex64(cfg.hash())
            << "\n--- resolved config ---\n"
            << cfg.to_ini() << "-----------------------\n";

        if (name == "synth") cmd_synth(cfg, *sub, out);
        else if (name == "prepare") cmd_prepare(cfg, *sub, out);
        else if (name == "pretrain") cmd_pretrain(cfg, *sub, out);
        else if (name == "fit-pca") cmd_fit_pca(cfg, *sub, out);
        else if (name == "train") cmd_train(cfg, *sub, out);
        else if (name == "score") cmd_score(cfg, *sub, out);
        else if (name == "eval") cmd_eval(cfg, *sub, out);
        else if (name == "sweep") cmd_sweep(cfg, *sub, out, err);
        else if (name == "report") cmd_report(*sub, out);
        return 0;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace dlev
