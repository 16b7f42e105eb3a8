#include "dlev/errors.hpp"
#include "dlev/vhred.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dlev;

namespace {

VhredConfig toy_config(int vocab) {
    VhredConfig c;
    c.encoder = EncoderConfig{vocab, 3, 4, 5, true};
    c.latent_dim = 2;
    c.net_hidden = 3;
    c.decoder_hidden = 4;
    return c;
}

// Moves every parameter away from its initial value so no tensor sits at a special point.
void jitter(VhredParams& p, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto& t : p.tensors())
        for (auto& v : t.values) v += d(rng);
}

double log_softmax_at(const VectorXd& logits, int k) {
    double z = 0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) z += std::exp(logits[i]);
    return logits[k] - std::log(z);
}

} // namespace

TEST_CASE("closed-form KL") {
    DiagGaussian q{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 1.0)};
    DiagGaussian p{VectorXd::Zero(1), VectorXd::Constant(1, 1.0)};
    CHECK(kl_diag_gaussian(q, p) == 0.5);
    CHECK(kl_diag_gaussian(q, q) == 0.0);

    SUBCASE("non-negative on random pairs") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> n(0, 1);
        for (int t = 0; t < 1000; ++t) {
            DiagGaussian a{VectorXd(4), VectorXd(4)}, b{VectorXd(4), VectorXd(4)};
            for (int i = 0; i < 4; ++i) {
                a.mean[i] = n(rng);
                b.mean[i] = n(rng);
                a.var[i] = std::exp(n(rng));
                b.var[i] = std::exp(n(rng));
            }
            CHECK(kl_diag_gaussian(a, b) >= 0.0);
        }
    }
    SUBCASE("invalid inputs") {
        DiagGaussian bad{VectorXd::Zero(1), VectorXd::Zero(1)};
        CHECK_THROWS_AS(kl_diag_gaussian(bad, p), ValidationError);
        DiagGaussian two{VectorXd::Zero(2), VectorXd::Ones(2)};
        CHECK_THROWS_AS(kl_diag_gaussian(two, p), ValidationError);
    }
}

TEST_CASE("annealing schedule") {
    const AnnealSchedule long_run{60000};
    CHECK(anneal_weight(0, long_run) == 0.0);
    CHECK(anneal_weight(30000, long_run) == 0.5);
    CHECK(anneal_weight(90000, long_run) == 1.0);
    CHECK(anneal_weight(500, AnnealSchedule{2000}) == 0.25);
}

TEST_CASE("reparameterized sampling") {
    DiagGaussian g{VectorXd::Constant(3, 0.25), VectorXd::Constant(3, 1e-12)};
    CHECK(sample_latent(g, VectorXd::Zero(3)) == g.mean);
    const VectorXd s = sample_latent(g, VectorXd::Ones(3));
    for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(0.25 + 1e-6).epsilon(1e-14));
    CHECK_THROWS_AS(sample_latent(g, VectorXd::Zero(2)), ValidationError);

    SUBCASE("sample mean converges") {
        DiagGaussian h{(VectorXd(2) << 1.5, -0.5).finished(), (VectorXd(2) << 0.5, 2.0).finished()};
        std::mt19937_64 rng(8);
        std::normal_distribution<double> n(0, 1);
        const int draws = 100000;
        VectorXd sum = VectorXd::Zero(2);
        for (int k = 0; k < draws; ++k) sum += sample_latent(h, (VectorXd(2) << n(rng), n(rng)).finished());
        for (int i = 0; i < 2; ++i) CHECK(std::abs(sum[i] / draws - h.mean[i]) < 3 * std::sqrt(h.var[i] / draws));
    }
}

TEST_CASE("ELBO composition") {
    const auto cfg = toy_config(8);
    auto p = VhredParams::init(cfg, 5);
    jitter(p, 6, 0.3);
    const std::vector<Dialogue> batch{{{4, 5, 2}, {6, 2}}};

    BatchNoise noise(1);
    noise[0].push_back(TurnNoise{(VectorXd(2) << 0.3, -1.1).finished(), {false, true}});

    const auto terms = elbo_batch(batch, p, 0.7, noise);

    // The same quantity assembled from the individual pieces.
    const auto& enc = p.encoder;
    const VectorXd u0 = encode_utterance(batch[0][0], enc);
    const VectorXd u1 = encode_utterance(batch[0][1], enc);
    const VectorXd ctx = encode_context(std::span<const VectorXd>(&u0, 1), enc);
    const auto pf = p.prior.forward(ctx);
    VectorXd post_in(ctx.size() + u1.size());
    post_in << ctx, u1;
    const auto qf = p.posterior.forward(post_in);
    const auto q = DiagGaussian::from_log_var(qf.mean, qf.log_var);
    const auto pr = DiagGaussian::from_log_var(pf.mean, pf.log_var);
    const VectorXd z = sample_latent(q, noise[0][0].epsilon);
    auto dec_input = [&](int token) {
        VectorXd x(3 + 2 + 5);
        x << enc.embedding.row(token).transpose(), z, ctx;
        return x;
    };
    // position 1 is dropped, so the decoder sees UNK instead of token 6
    const std::vector<VectorXd> inputs{dec_input(Vocabulary::kEndOfUtterance), dec_input(Vocabulary::kUnk)};
    const auto hs = run_lstm(p.decoder, inputs);
    const double recon = log_softmax_at(p.out_W * hs[0] + p.out_b, 6) + log_softmax_at(p.out_W * hs[1] + p.out_b, 2);
    const double kl = kl_diag_gaussian(q, pr);

    CHECK(terms.reconstruction == doctest::Approx(recon).epsilon(1e-12));
    CHECK(terms.kl == doctest::Approx(kl).epsilon(1e-12));
    CHECK(terms.objective == doctest::Approx(recon - 0.7 * kl).epsilon(1e-12));
    CHECK(terms.tokens == 2);
}

TEST_CASE("ELBO special cases") {
    const auto cfg = toy_config(9);
    auto p = VhredParams::init(cfg, 2);
    const std::vector<Dialogue> batch{{{4, 5, 2}, {6, 7, 2}, {8, 2}}, {{5, 2}, {4, 4, 2}}};

    SUBCASE("annealing off gives the reconstruction term") {
        const auto t = elbo_batch(batch, p, 0.0, 0.25, 3);
        CHECK(t.objective == t.reconstruction);
        CHECK(t.kl > 0.0);
        CHECK(t.objective <= t.reconstruction);
    }
    SUBCASE("posterior equal to prior has no KL") {
        for (auto* net : {&p.prior, &p.posterior}) {
            net->W1.setZero();
            net->W_mean.setZero();
            net->W_log_var.setZero();
            net->b_mean.setConstant(0.4);
            net->b_log_var.setConstant(-0.3);
        }
        CHECK(elbo_batch(batch, p, 1.0, 0.25, 3).kl == 0.0);
    }
    SUBCASE("dropout rate zero is the plain decoder") {
        const auto noise = draw_noise(batch, p.latent_dim(), 0.0, 11);
        auto kept = draw_noise(batch, p.latent_dim(), 0.9, 11);
        for (auto& d : kept)
            for (auto& t : d) std::fill(t.dropped.begin(), t.dropped.end(), false);
        const auto a = elbo_batch(batch, p, 0.5, noise);
        const auto b = elbo_batch(batch, p, 0.5, kept);
        CHECK(a.objective == b.objective);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(elbo_batch(std::vector<Dialogue>{}, p, 0.0, 0.0, 1), ValidationError);
        CHECK_THROWS_AS(elbo_batch(std::vector<Dialogue>{{{4, 2}}}, p, 0.0, 0.0, 1), ValidationError);
    }
}

TEST_CASE("ELBO gradients with fixed noise") {
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
        CAPTURE(seed);
        const auto cfg = toy_config(7);
        auto p = VhredParams::init(cfg, seed);
        jitter(p, seed + 10, 0.3);
        const std::vector<Dialogue> batch{{{4, 5, 2}, {6, 2}, {5, 5, 4, 2}}, {{6, 2}, {4, 2}}};
        const auto noise = draw_noise(batch, p.latent_dim(), 0.25, seed);

        auto grads = p.zeros_like();
        elbo_batch(batch, p, 0.6, noise, &grads);
        auto loss = [&] { return -elbo_batch(batch, p, 0.6, noise).objective; };
        const auto res = oracle::check_gradients(p.tensors(), grads.tensors(), loss, 1e-4);
        CAPTURE(res.tensor);
        CHECK(res.worst < 1e-4);
    }
}

TEST_CASE("pre-training") {
    auto cfg = toy_config(10);
    cfg.batches = 12;
    cfg.batch_size = 2;
    cfg.anneal.total_batches = 5;
    const std::vector<Dialogue> corpus{{{4, 5, 2}, {6, 7, 2}}, {{8, 2}, {9, 4, 2}}, {{5, 2}, {6, 2}, {7, 2}}};

    const auto a = pretrain_vhred(corpus, cfg, 77);
    const auto b = pretrain_vhred(corpus, cfg, 77);
    REQUIRE(a.log.size() == 12);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].reconstruction == b.log[i].reconstruction);
        CHECK(a.log[i].kl == b.log[i].kl);
        CHECK(a.log[i].anneal_w == anneal_weight(static_cast<long>(i), cfg.anneal));
        CHECK(a.log[i].objective <= a.log[i].reconstruction);
    }
    CHECK(a.params.encoder.embedding == b.params.encoder.embedding);

    const std::vector<Dialogue> singles{{{4, 2}}, {{5, 2}}};
    CHECK_THROWS_AS(pretrain_vhred(singles, cfg, 1), ValidationError);
}
