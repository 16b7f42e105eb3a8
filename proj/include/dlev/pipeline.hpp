#pragma once

#include "dlev/adem.hpp"
#include "dlev/analytics.hpp"
#include "dlev/config.hpp"
#include "dlev/corpus.hpp"
#include "dlev/metrics.hpp"
#include "dlev/synth.hpp"
#include "dlev/table.hpp"
#include "dlev/vhred.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dlev {

// Runs one subcommand (args excludes the program name). Returns the exit code:
// 0 ok, 1 usage, 2 data validation, 3 numerical failure.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

EncoderConfig encoder_config(const RunConfig& cfg, int vocab_size);
VhredConfig vhred_config(const RunConfig& cfg, int vocab_size);
AdemFitOptions adem_options(const RunConfig& cfg);
SynthConfig synth_config(const RunConfig& cfg);

struct OverlapConfig {
    BleuConfig bleu;
    RougeConfig rouge;
    MeteorConfig meteor;
};
OverlapConfig overlap_config(const RunConfig& cfg);

struct ScoreColumn {
    std::string metric;
    std::vector<double> scores; // aligned with the dataset
};
using ScoreColumns = std::vector<ScoreColumn>;

// bleu2, bleu4, rouge_l, meteor of every model response against its reference.
ScoreColumns overlap_scores(const Dataset& ds, const OverlapConfig& cfg);
double overlap_score(const std::string& metric, const EvalExample& ex, const OverlapConfig& cfg);

// Long format: example_index, context_id, metric, score.
Table scores_table(const Dataset& ds, const ScoreColumns& cols);
ScoreColumns parse_scores_table(const Table& t, const Dataset& ds);

struct AnalyticsSettings {
    int delta_w = 6;
    FailureThresholds thresholds;
    double jitter_sd = 0.3;
    std::uint64_t seed = 0;
};
AnalyticsSettings analytics_settings(const RunConfig& cfg);

// Every eval table as (file name, table), in a fixed order.
std::vector<std::pair<std::string, Table>> eval_tables(const Dataset& ds, const ScoreColumns& cols,
                                                       const AnalyticsSettings& s);

Table sweep_table(const std::vector<SweepRow>& rows);
Table leave_one_out_table(const LeaveOneOutResult& r);

// Tables the report cannot do without.
const std::vector<std::string>& required_report_tables();
// Throws ValidationError naming every missing table.
std::string render_report(const std::filesystem::path& results_dir);

} // namespace dlev
