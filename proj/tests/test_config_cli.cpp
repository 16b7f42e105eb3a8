#include "dlev/config.hpp"
#include "dlev/errors.hpp"
#include "dlev/pipeline.hpp"

#include "helpers.hpp"
#include "pipeline_fixture.hpp"

#include <doctest.h>

#include <sstream>

using namespace dlev;
using testing_util::run_dlev;

TEST_CASE("config precedence") {
    testing_util::TempDir tmp("cfg");
    const auto ini = tmp / "c.ini";
    testing_util::write_file(ini, "[adem]\ngamma = 0.1\nlearning_rate = 0.5\n");

    CHECK(RunConfig().get_real("adem.gamma") == 0.075);
    const auto from_file = resolve_config(ini, {});
    CHECK(from_file.get_real("adem.gamma") == 0.1);
    const auto both = resolve_config(ini, {{"adem.gamma", "0.2"}});
    CHECK(both.get_real("adem.gamma") == 0.2);
    CHECK(both.get_real("adem.learning_rate") == 0.5);
    CHECK(both.hash() != from_file.hash());
    CHECK(both.hash() == resolve_config(ini, {{"adem.gamma", "0.2"}}).hash());
}

TEST_CASE("config errors list every problem") {
    testing_util::TempDir tmp("cfg");
    const auto ini = tmp / "c.ini";
    testing_util::write_file(ini, "[adem]\nfoo = 1\n");
    try {
        resolve_config(ini, {{"bar.baz", "2"}, {"adem.batch_size", "zero"}});
        FAIL("expected a usage error");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("adem.foo") != std::string::npos);
        CHECK(msg.find("bar.baz") != std::string::npos);
        CHECK(msg.find("adem.batch_size") != std::string::npos);
    }
    CHECK_THROWS_AS(resolve_config(tmp / "missing.ini", {}), Error);
}

TEST_CASE("config text round-trips") {
    testing_util::TempDir tmp("cfg");
    RunConfig c;
    c.set("adem.gamma", "0.3");
    testing_util::write_file(tmp / "echo.ini", c.to_ini());
    const auto back = resolve_config(tmp / "echo.ini", {});
    CHECK(back.to_ini() == c.to_ini());
    CHECK(back.hash() == c.hash());
}

TEST_CASE("exit codes") {
    testing_util::TempDir tmp("exit");
    CHECK(run_dlev({"bogus"}).code == 1);
    CHECK(run_dlev({}).code == 1);
    CHECK(run_dlev({"train", "--out", tmp.str()}).code == 1);
    CHECK(run_dlev({"synth", "--out", (tmp / "s").string(), "--set", "adem.gamma=-1"}).code == 1);
    CHECK(run_dlev({"synth", "--out", (tmp / "s").string(), "--set", "nosuch.key=1"}).code == 1);

    const auto missing = run_dlev({"prepare", "--data", (tmp / "none.jsonl").string(), "--out", (tmp / "p").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("none.jsonl") != std::string::npos);

    testing_util::write_file(tmp / "bad.jsonl", "{\"context_id\": 1}\n");
    CHECK(run_dlev({"prepare", "--data", (tmp / "bad.jsonl").string(), "--out", (tmp / "q").string()}).code == 2);
}

TEST_CASE("published training settings are accepted") {
    testing_util::TempDir tmp("preset");
    const auto r = run_dlev({"synth", "--out", (tmp / "s").string(), "--contexts", "5", "--pca-dim", "4", "--set",
                             "synth.bpe_merges=10", "--set", "encoder.embed_dim=4", "--set",
                             "encoder.utterance_hidden=4", "--set", "encoder.context_hidden=4"});
    REQUIRE(r.code == 0);
    // only validates the options; no data is touched before parsing succeeds
    const auto t = run_dlev({"train", "--gamma", "0.075", "--lr", "0.01", "--batch-size", "32", "--pca-dim", "50",
                             "--data-dir", (tmp / "nodata").string(), "--encoder", (tmp / "x.ckpt").string(), "--out",
                             (tmp / "t").string()});
    CHECK(t.code == 2); // missing data, not a usage problem
    CHECK(t.out.find("gamma = 0.075") != std::string::npos);
    CHECK(t.out.find("pca_dim = 50") != std::string::npos);
}

TEST_CASE("full pipeline") {
    testing_util::TempDir tmp("pipe");
    const auto steps = testing_util::run_pipeline(tmp.path(), "7");
    for (const auto& [name, r] : steps) {
        CAPTURE(name);
        CAPTURE(r.err);
        CHECK(r.code == 0);
    }
    REQUIRE(steps.size() == 9);

    SUBCASE("manifests and config echo") {
        for (const char* d : {"synth", "data", "encoder", "pca", "adem", "scores", "eval", "sweep"}) {
            CAPTURE(d);
            const auto manifest = testing_util::slurp(tmp / d / "manifest.txt");
            CHECK(manifest.find("seed = 7") != std::string::npos);
            CHECK(manifest.find("config_hash = fnv1a64:") != std::string::npos);
            CHECK(std::filesystem::is_regular_file(tmp / d / "config.ini"));
        }
        CHECK(testing_util::slurp(tmp / "adem" / "manifest.txt").find("input = encoder encoder.ckpt fnv1a64:") !=
              std::string::npos);
    }

    SUBCASE("eval tables equal the in-process computation") {
        const auto ds = load_dataset(tmp / "data" / "test.jsonl");
        const auto cols = parse_scores_table(read_csv(tmp / "scores" / "scores.csv"), ds);
        const auto cfg = resolve_config(tmp / "small.ini", {{"run.seed", "7"}});
        for (const auto& [name, table] : eval_tables(ds, cols, analytics_settings(cfg))) {
            CAPTURE(name);
            std::ostringstream buf;
            write_csv(buf, table);
            CHECK(buf.str() == testing_util::slurp(tmp / "eval" / name));
        }
        CHECK(testing_util::slurp(tmp / "eval" / "timing.csv") == testing_util::slurp(tmp / "scores" / "timing.csv"));
    }

    SUBCASE("metric equal to human") {
        const auto ds = load_dataset(tmp / "data" / "test.jsonl");
        ScoreColumns cols;
        for (const char* m : {"adem", "bleu2", "rouge_l"}) {
            ScoreColumn c{m, {}};
            for (const auto& ex : ds) c.scores.push_back(ex.human_score);
            cols.push_back(std::move(c));
        }
        write_csv(tmp / "human.csv", scores_table(ds, cols));
        const auto r = run_dlev({"eval", "--data-dir", (tmp / "data").string(), "--scores",
                                 (tmp / "human.csv").string(), "--out", (tmp / "heval").string()});
        REQUIRE(r.code == 0);
        const auto t = read_csv(tmp / "heval" / "utterance_correlation.csv");
        for (const auto& row : t.rows) CHECK(std::stod(row[t.column("pearson")]) == doctest::Approx(1.0));
        const auto s = read_csv(tmp / "heval" / "system_correlation.csv");
        for (const auto& row : s.rows) CHECK(std::stod(row[s.column("pearson")]) == doctest::Approx(1.0));
        const auto f = read_csv(tmp / "heval" / "failure_slices.csv");
        CHECK(f.rows[1][f.column("count")] == "0");
    }

    SUBCASE("report") {
        const auto text = testing_util::slurp(tmp / "eval" / "report.txt");
        CHECK_FALSE(text.empty());
        CHECK(run_dlev({"report", "--results", (tmp / "eval").string(), "--out", (tmp / "again.txt").string()}).code ==
              0);
        CHECK(testing_util::slurp(tmp / "again.txt") == text);

        std::filesystem::create_directories(tmp / "empty");
        const auto r = run_dlev({"report", "--results", (tmp / "empty").string()});
        CHECK(r.code == 2);
        for (const auto& name : required_report_tables()) CHECK(r.err.find(name) != std::string::npos);
    }
}
