#include "dlev/adem.hpp"
#include "dlev/analytics.hpp"
#include "dlev/errors.hpp"
#include "dlev/metrics.hpp"
#include "dlev/pipeline.hpp"
#include "dlev/stats.hpp"
#include "dlev/vhred.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace dlev;

namespace {

std::vector<std::string> tokens(const std::string& s) { return split_words(s); }

BleuConfig bleu_config(int n, const std::string& smoothing) {
    BleuConfig c;
    c.max_order = n;
    if (smoothing == "none") c.smoothing = BleuSmoothing::None;
    else if (smoothing == "epsilon") c.smoothing = BleuSmoothing::AddEpsilon;
    else throw UsageError("smoothing must be 'none' or 'epsilon'");
    c.validate();
    return c;
}

py::tuple as_tuple(const CorrelationResult& r) { return py::make_tuple(r.coefficient, r.p_value); }

} // namespace

PYBIND11_MODULE(dlev, m) {
    m.doc() = "Dialogue response evaluation toolkit";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    m.def(
        "bleu",
        [](const std::string& candidate, const std::vector<std::string>& references, int n,
           const std::string& smoothing) {
            std::vector<TokenSeq> refs;
            for (const auto& r : references) refs.push_back(tokens(r));
            return bleu_n(tokens(candidate), refs, bleu_config(n, smoothing));
        },
        py::arg("candidate"), py::arg("references"), py::arg("n") = 4, py::arg("smoothing") = "epsilon",
        "Sentence BLEU-n of a whitespace-tokenized candidate against one or more references.");
    m.def(
        "rouge_l",
        [](const std::string& candidate, const std::vector<std::string>& references, double beta) {
            std::vector<TokenSeq> refs;
            for (const auto& r : references) refs.push_back(tokens(r));
            return dlev::rouge_l(tokens(candidate), refs, RougeConfig{beta});
        },
        py::arg("candidate"), py::arg("references"), py::arg("beta") = 1.2);
    m.def(
        "meteor",
        [](const std::string& candidate, const std::string& reference, double alpha, double gamma, double theta,
           bool stem) {
            MeteorConfig c;
            c.alpha = alpha;
            c.gamma = gamma;
            c.theta = theta;
            if (!stem) c.stages = {MeteorStage::Exact};
            c.validate();
            return dlev::meteor(tokens(candidate), tokens(reference), c);
        },
        py::arg("candidate"), py::arg("reference"), py::arg("alpha") = 0.9, py::arg("gamma") = 0.5,
        py::arg("theta") = 3.0, py::arg("stem") = true);

    m.def(
        "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return as_tuple(pearson(x, y)); },
        "(coefficient, two-tailed p-value)");
    m.def(
        "spearman",
        [](const std::vector<double>& x, const std::vector<double>& y) { return as_tuple(spearman(x, y)); },
        "(coefficient, two-tailed p-value)");
    m.def(
        "normalize_scores",
        [](const std::vector<double>& metric, const std::vector<double>& human) {
            const auto n = dlev::normalize_scores(metric, human);
            return py::make_tuple(n.normalized, n.pre_clip);
        },
        py::arg("metric"), py::arg("human"), "(normalized, pre_clip)");
    m.def(
        "system_level_correlation",
        [](const std::vector<double>& human, const std::vector<double>& metric,
           const std::vector<std::string>& sources) {
            std::vector<SourceModel> src;
            for (const auto& s : sources) src.push_back(parse_source_model(s));
            return as_tuple(dlev::system_level_correlation(human, metric, src).correlation);
        },
        py::arg("human"), py::arg("metric"), py::arg("sources"));

    m.def(
        "kl_diag_gaussian",
        [](const VectorXd& mean_q, const VectorXd& var_q, const VectorXd& mean_p, const VectorXd& var_p) {
            return dlev::kl_diag_gaussian(DiagGaussian{mean_q, var_q}, DiagGaussian{mean_p, var_p});
        },
        py::arg("mean_q"), py::arg("var_q"), py::arg("mean_p"), py::arg("var_p"));
    m.def(
        "anneal_weight", [](long batch, long total) { return dlev::anneal_weight(batch, AnnealSchedule{total}); },
        py::arg("batch"), py::arg("total_batches"));

    m.def(
        "adem_score",
        [](const MatrixXd& M, const MatrixXd& N, double alpha, double beta, const VectorXd& context,
           const VectorXd& reference, const VectorXd& response) {
            AdemParams p{M, N, alpha, beta};
            p.validate();
            return dlev::adem_score(p, EmbeddingTriple{context, reference, response});
        },
        py::arg("M"), py::arg("N"), py::arg("alpha"), py::arg("beta"), py::arg("context"), py::arg("reference"),
        py::arg("response"));

    m.def(
        "run_command",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = dlev::run_command(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a dlev subcommand; returns (exit_code, stdout, stderr).");
}
