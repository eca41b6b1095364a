#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <arpclust/autoencoder.hpp>

#include "support/oracles.hpp"

using namespace arpclust;

namespace {

std::vector<double> random_input(std::mt19937_64 &rng, std::size_t width) {
    std::vector<double> x(width);
    for (double &v : x) {
        v = detail::uniform_unit(rng);
    }
    return x;
}

std::vector<FeatureVector> random_corpus(std::uint64_t seed, std::size_t n,
                                         std::size_t width) {
    std::mt19937_64 rng(seed);
    std::vector<FeatureVector> features(n);
    for (std::size_t i = 0; i < n; ++i) {
        features[i].event_id = "ev" + std::to_string(i);
        features[i].values = random_input(rng, width);
    }
    return features;
}

} // namespace

TEST_CASE("initialization draws weights inside the layer bounds") {
    const AutoencoderParams params = init_params(3);
    const double bound1 = std::sqrt(6.0 / (120.0 + 50.0));
    const double bound2 = std::sqrt(6.0 / (50.0 + 3.0));
    const double bound3 = std::sqrt(6.0 / (3.0 + 120.0));
    for (const double w : params.w1()) {
        CHECK(std::fabs(w) <= bound1);
    }
    for (const double w : params.w2()) {
        CHECK(std::fabs(w) <= bound2);
    }
    for (const double w : params.w3()) {
        CHECK(std::fabs(w) <= bound3);
    }
    for (const double b : params.b1()) {
        CHECK(b == 0.0);
    }
    for (const double b : params.b2()) {
        CHECK(b == 0.0);
    }
    for (const double b : params.b3()) {
        CHECK(b == 0.0);
    }
    // the draw actually fills the range instead of clustering at zero
    double max_abs = 0.0;
    for (const double w : params.w1()) {
        max_abs = std::max(max_abs, std::fabs(w));
    }
    CHECK(max_abs > 0.9 * bound1);
}

TEST_CASE("initialization is a pure function of seed and dims") {
    CHECK(init_params(5).data == init_params(5).data);
    CHECK(init_params(5).data != init_params(6).data);
}

TEST_CASE("parameter layout covers the buffer exactly") {
    AutoencoderParams params;
    CHECK(params.data.size() == params.dims.parameter_count());
    CHECK(params.data.size() == 120 * 50 + 50 + 3 * 50 + 3 + 120 * 3 + 120);
    CHECK(params.w1().size() == 6000);
    CHECK(params.b3().data() + params.b3().size() ==
          params.data.data() + params.data.size());
}

TEST_CASE("forward keeps activations in their codomains") {
    std::mt19937_64 rng(9);
    const AutoencoderParams params = init_params(11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_input(rng, 120);
        const Activations act = forward(params, x);
        REQUIRE(act.h.size() == 50);
        REQUIRE(act.z.size() == 3);
        REQUIRE(act.xhat.size() == 120);
        for (const double h : act.h) {
            CHECK(h >= 0.0);
        }
        for (const double z : act.z) {
            CHECK(z >= 0.0);
        }
        for (const double p : act.xhat) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
    CHECK_THROWS_AS(forward(params, std::vector<double>(119, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("zero parameters reconstruct one half and cost exactly ln 2") {
    AutoencoderParams params; // zeroed
    std::mt19937_64 rng(1);
    const auto x = random_input(rng, 120);
    const Activations act = forward(params, x);
    for (const double p : act.xhat) {
        CHECK(p == 0.5);
    }
    CHECK(bce_loss(x, act.xhat) ==
          Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("binary cross-entropy matches a hand-computed mixed case") {
    std::vector<double> x(120, 0.0), xhat(120, 0.5);
    x[0] = 1.0;
    x[1] = 1.0;
    xhat[0] = 0.9;
    xhat[1] = 0.9;
    const double expected =
        (2.0 * -std::log(0.9) + 118.0 * std::log(2.0)) / 120.0;
    CHECK(bce_loss(x, xhat) == Catch::Approx(expected).margin(1e-12));
    CHECK(bce_loss(x, xhat) ==
          Catch::Approx(0.6833507361449100).margin(1e-9));
    CHECK_THROWS_AS(bce_loss(x, std::vector<double>(119, 0.5)),
                    std::invalid_argument);
}

TEST_CASE("analytic gradients agree with central differences") {
    std::mt19937_64 rng(21);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const AutoencoderDims dims{10, 6, 3};
        const AutoencoderParams params = init_params(seed, dims);
        const auto x = random_input(rng, dims.input);
        const Activations act = forward(params, x);
        AutoencoderParams analytic(dims);
        backward(params, x, act, analytic);
        const AutoencoderParams numeric =
            testsupport::numeric_gradient(params, x);
        CHECK(testsupport::max_rel_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("backward accumulates across calls") {
    const AutoencoderDims dims{8, 4, 3};
    const AutoencoderParams params = init_params(2, dims);
    std::mt19937_64 rng(4);
    const auto x = random_input(rng, dims.input);
    const Activations act = forward(params, x);
    AutoencoderParams once(dims), twice(dims);
    backward(params, x, act, once);
    backward(params, x, act, twice);
    backward(params, x, act, twice);
    for (std::size_t i = 0; i < once.data.size(); ++i) {
        CHECK(twice.data[i] == Catch::Approx(2.0 * once.data[i]).margin(1e-15));
    }
}

TEST_CASE("the first adam step moves by almost the learning rate") {
    const AutoencoderDims dims{4, 3, 3};
    AutoencoderParams params(dims);
    AutoencoderParams grad(dims);
    std::mt19937_64 rng(8);
    for (double &g : grad.data) {
        g = (detail::uniform_unit(rng) - 0.5) * 10.0;
    }
    AdamState state(params.data.size());
    const double lr = 1e-4;
    adam_step(params, grad, state, lr);
    CHECK(state.step == 1);
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        if (std::fabs(grad.data[i]) < 1e-6) {
            continue;
        }
        const double delta = std::fabs(params.data[i]);
        CHECK(delta <= lr);
        CHECK(delta >= 0.99 * lr);
        // step direction opposes the gradient
        CHECK(params.data[i] * grad.data[i] < 0.0);
    }
}

TEST_CASE("training rejects corpora smaller than the fold count") {
    const auto features = random_corpus(1, 4, 120);
    CHECK_THROWS_AS(train(features), std::invalid_argument);
}

TEST_CASE("training rejects inconsistent feature widths") {
    auto features = random_corpus(1, 8, 120);
    features[3].values.resize(60);
    CHECK_THROWS_AS(train(features), std::invalid_argument);
}

TEST_CASE("the training report covers every fold and epoch") {
    const auto features = random_corpus(2, 20, 120);
    TrainOptions opts;
    opts.epochs = 3;
    const auto [params, report] = train(features, opts);
    REQUIRE(report.folds.size() == 5);
    for (const auto &fold : report.folds) {
        REQUIRE(fold.size() == 3);
        for (const FoldEpoch &fe : fold) {
            CHECK(fe.train_loss > 0.0);
            CHECK(fe.val_loss > 0.0);
        }
    }
    REQUIRE(report.final_train.size() == 3);
    CHECK_FALSE(report.restarted);
    CHECK(report.seed_used == opts.seed);
    CHECK(params.dims == AutoencoderDims{120, 50, 3});
}

TEST_CASE("training twice from the same options is bit identical") {
    const auto features = random_corpus(3, 25, 120);
    TrainOptions opts;
    opts.epochs = 2;
    opts.seed = 7;
    const auto [p1, r1] = train(features, opts);
    const auto [p2, r2] = train(features, opts);
    CHECK(p1.data == p2.data);
    REQUIRE(r1.folds.size() == r2.folds.size());
    for (std::size_t f = 0; f < r1.folds.size(); ++f) {
        for (std::size_t e = 0; e < r1.folds[f].size(); ++e) {
            CHECK(r1.folds[f][e].train_loss == r2.folds[f][e].train_loss);
            CHECK(r1.folds[f][e].val_loss == r2.folds[f][e].val_loss);
        }
    }
    CHECK(r1.final_train == r2.final_train);
}

TEST_CASE("a collapsed latent layer triggers one reseeded retry") {
    // All-zero inputs keep every hidden and latent unit at exactly zero,
    // so no gradient ever reaches the encoder and the latent stays dead.
    std::vector<FeatureVector> features(10);
    for (std::size_t i = 0; i < features.size(); ++i) {
        features[i].event_id = "z" + std::to_string(i);
        features[i].values.assign(120, 0.0);
    }
    TrainOptions opts;
    opts.epochs = 1;
    opts.seed = 5;
    const auto [params, report] = train(features, opts);
    CHECK(report.restarted);
    CHECK(report.seed_used == 6);
}

TEST_CASE("encode_all emits one latent point per feature") {
    const auto features = random_corpus(4, 12, 120);
    const AutoencoderParams params = init_params(1);
    const auto points = encode_all(params, features);
    REQUIRE(points.size() == features.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(points[i].event_id == features[i].event_id);
        const Activations act = forward(params, features[i].values);
        CHECK(points[i].z[0] == act.z[0]);
        CHECK(points[i].z[1] == act.z[1]);
        CHECK(points[i].z[2] == act.z[2]);
    }

    AutoencoderParams wide(AutoencoderDims{120, 50, 4});
    CHECK_THROWS_AS(encode_all(wide, features), std::invalid_argument);
}

TEST_CASE("model json round trips parameters exactly") {
    const AutoencoderParams params = init_params(13);
    const nlohmann::json j = params_to_json(params, 13);
    CHECK(j.at("format") == "arpclust-autoencoder");
    CHECK(j.at("seed") == 13);
    const AutoencoderParams back = params_from_json(j);
    CHECK(back.dims == params.dims);
    CHECK(back.data == params.data);

    nlohmann::json wrong = j;
    wrong["format"] = "something-else";
    CHECK_THROWS_AS(params_from_json(wrong), std::runtime_error);
    nlohmann::json short_w1 = j;
    short_w1["w1"] = std::vector<double>{1.0};
    CHECK_THROWS_AS(params_from_json(short_w1), std::runtime_error);
}

TEST_CASE("train report csv has fold rows then final rows") {
    TrainReport report;
    report.folds = {{FoldEpoch{0.5, 0.25}, FoldEpoch{0.125, 0.0625}}};
    report.final_train = {0.75};
    CHECK(write_train_report_csv(report) == "fold,epoch,train_loss,val_loss\n"
                                            "0,1,0.5,0.25\n"
                                            "0,2,0.125,0.0625\n"
                                            "final,1,0.75,\n");
}

TEST_CASE("latents csv round trips") {
    std::vector<LatentPoint> points = {{"a", {1.5, 0.25, 0.0}},
                                       {"b", {0.0, 2.0, 0.125}}};
    const std::string csv = write_latents_csv(points);
    CHECK(csv == "event_id,z0,z1,z2\n"
                 "a,1.5,0.25,0\n"
                 "b,0,2,0.125\n");
    CHECK(parse_latents_csv(csv) == points);

    CHECK_THROWS_AS(parse_latents_csv("event_id,z0,z1,z2\na,1,2\n"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_latents_csv("event_id,z0,z1,z2\na,1,2,3,4\n"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_latents_csv("event_id,z0,z1,z2\na,1,x,3\n"),
                    std::runtime_error);
}
