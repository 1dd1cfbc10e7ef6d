#include "doctest.h"

#include "morphoreg/nn/spec.hpp"
#include "morphoreg/optim/optim.hpp"
#include "morphoreg/optim/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace morphoreg;
using namespace morphoreg::optim;
using nn::Tensor;

namespace {

auto scalar_param(double w) -> std::vector<Parameter> {
    return {{"w", Tensor({1}, {static_cast<float>(w)})}};
}

auto tiny_data() -> const TrainingData& {
    static const TrainingData data = [] {
        const auto dir = std::filesystem::temp_directory_path() / "morphoreg_optim_data";
        std::filesystem::remove_all(dir);
        phantom::DatasetConfig cfg;
        cfg.subjects = 8;
        cfg.dims = {16, 16, 16};
        cfg.supersample = 2;
        cfg.seed = 3;
        const auto m = phantom::generate_dataset(cfg, dir);
        auto d = load_training_data(m);
        std::filesystem::remove_all(dir);
        return d;
    }();
    return data;
}

auto tiny_config() -> TrainConfig {
    TrainConfig c;
    c.batch_size = 3;
    c.main_epochs = 3;
    c.swa_cycles = 2;
    c.swa_epochs_per_cycle = 1;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("Adam with zero gradients leaves parameters unchanged") {
    std::mt19937_64 rng(1);
    std::normal_distribution<float> g;
    std::vector<Parameter> p{{"a", Tensor({2, 3}, {g(rng), g(rng), g(rng), g(rng), g(rng), g(rng)})},
                             {"b", Tensor({1}, {g(rng)})}};
    const auto before = p;
    AdamState s;
    for (int i = 0; i < 50; ++i) {
        adam_step(s, p, {std::vector<float>(6, 0.0f), std::vector<float>(1, 0.0f)});
    }
    CHECK(s.t == 50);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i].value.values() == before[i].value.values());
}

TEST_CASE("Adam first step is about lr against the gradient sign") {
    for (float grad : {0.3f, -7.0f, 1e-3f}) {
        auto p = scalar_param(1.0);
        AdamState s;
        adam_step(s, p, {{grad}});
        CHECK(p[0].value[0] - 1.0 == doctest::Approx(-1e-4 * (grad > 0 ? 1 : -1)).epsilon(1e-3));
    }
}

TEST_CASE("Adam on a quadratic follows the scalar recursion") {
    auto p = scalar_param(0.0);
    AdamState s;
    s.config.lr = 0.1;
    // Reference recursion in double.
    double w = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
        const float grad = 2.0f * (p[0].value[0] - 3.0f);
        adam_step(s, p, {{grad}});
        const double g = 2.0 * (w - 3.0);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        w -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        CHECK(p[0].value[0] == doctest::Approx(w).epsilon(1e-4));
    }
    CHECK(std::abs(p[0].value[0] - 3.0) < 0.1);
    CHECK(std::abs(w - 3.0) < 0.1);
}

TEST_CASE("non-finite gradients are rejected by name") {
    std::vector<Parameter> p{{"stem.0.kernel", Tensor({2}, {1.0f, 2.0f})}, {"head0.bias", Tensor({1}, {0.5f})}};
    AdamState s;
    try {
        adam_step(s, p, {{0.1f, 0.2f}, {NAN}});
        FAIL("expected rejection");
    } catch (const NonFiniteError& e) {
        CHECK(e.parameter() == "head0.bias");
        CHECK(std::string(e.what()).find("head0.bias") != std::string::npos);
    }
    CHECK(s.t == 0);
    CHECK(p[0].value[0] == 1.0f);
    CHECK_THROWS_AS(sgd_step(0.1, p, {{INFINITY, 0.0f}, {0.0f}}), NonFiniteError);
    CHECK_THROWS_AS(adam_step(s, p, {{0.1f}, {0.0f}}), std::invalid_argument);
    CHECK_THROWS_AS(adam_step(s, p, {{0.1f, 0.1f}}), std::invalid_argument);
}

TEST_CASE("SGD step") {
    auto p = scalar_param(2.0);
    sgd_step(0.5, p, {{4.0f}});
    CHECK(p[0].value[0] == 0.0f);
}

TEST_CASE("cyclic learning rate") {
    const CyclicSchedule s{1e-2, 1e-6, 40, 5};
    CHECK(cyclic_lr(0, s) == 1e-2);
    CHECK(cyclic_lr(39, s) == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(cyclic_lr(40, s) == 1e-2);
    CHECK(cyclic_lr(20, s) == doctest::Approx(1e-2 - (1e-2 - 1e-6) * 20.0 / 39.0));
    CHECK(at_cycle_end(39, s));
    CHECK_FALSE(at_cycle_end(40, s));
    for (std::uint64_t step = 0; step < 2000; ++step) {
        const double lr = cyclic_lr(step, s);
        CHECK(lr >= s.lr_min - 1e-18);
        CHECK(lr <= s.lr_max);
        CHECK(lr == cyclic_lr(step + s.cycle_len, s));
        if (step % s.cycle_len != 0) CHECK(lr < cyclic_lr(step - 1, s));
    }
    CHECK_THROWS_AS((void)cyclic_lr(0, CyclicSchedule{1e-2, 1e-6, 1, 5}), std::invalid_argument);
}

TEST_CASE("SWA running mean") {
    SwaAccumulator one;
    const std::vector<float> a{1.5f, -2.0f, 3.25f};
    swa_absorb(one, a);
    CHECK(swa_mean(one) == a);

    SwaAccumulator two;
    swa_absorb(two, std::vector<float>(4, 0.0f));
    swa_absorb(two, std::vector<float>(4, 2.0f));
    CHECK(swa_mean(two) == std::vector<float>(4, 1.0f));
    CHECK_THROWS_AS(swa_absorb(two, std::vector<float>(3, 0.0f)), std::invalid_argument);

    std::mt19937_64 rng(6);
    std::normal_distribution<float> g(0.0f, 3.0f);
    for (std::size_t count = 1; count <= 20; ++count) {
        std::vector<std::vector<float>> snaps(count, std::vector<float>(50));
        SwaAccumulator acc;
        for (auto& s : snaps) {
            for (auto& x : s) x = g(rng);
            swa_absorb(acc, s);
        }
        CHECK(acc.count == count);
        const auto mean = swa_mean(acc);
        for (std::size_t j = 0; j < 50; ++j) {
            double sum = 0.0;
            for (const auto& s : snaps) sum += s[j];
            const double want = sum / static_cast<double>(count);
            CHECK(std::abs(mean[j] - want) <= 1e-6 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("model selection keeps the strictly best epoch") {
    const auto model = nn::build_model(nn::desk_spec(12, 1, 16), 1);
    auto run = [&](std::vector<double> seq) {
        SelectionState s;
        for (std::size_t e = 0; e < seq.size(); ++e) select_best(s, static_cast<int>(e), seq[e], model);
        return s;
    };
    CHECK(run({0.5, 0.7, 0.6}).epoch_of_best == 1);
    CHECK(run({0.5, 0.7, 0.6}).best_mean_icc == 0.7);
    CHECK(run({0.4, 0.4, 0.4}).epoch_of_best == 0);
    CHECK(run({0.1, 0.2, 0.3, 0.4}).epoch_of_best == 3);
    CHECK(run({-0.3}).epoch_of_best == 0);
    SelectionState s;
    CHECK_THROWS_AS(select_best(s, 0, NAN, model), std::invalid_argument);
}

TEST_CASE("trainer follows the recipe order") {
    const auto& data = tiny_data();
    auto cfg = tiny_config();
    cfg.adam_only_branch = true;
    std::vector<std::string> checkpoints;
    TrainHooks hooks;
    hooks.checkpoint = [&](const std::string& tag, const nn::ModelState&) { checkpoints.push_back(tag); };
    std::size_t streamed = 0;
    hooks.log = [&](const LogRow&) { ++streamed; };
    const auto model = nn::build_model(nn::desk_spec(12, 4, 16), 5);
    const auto r = train(model, data, cfg, hooks);

    const std::vector<std::string> expected_prefix{"adam_epoch:0", "eval:0", "adam_epoch:1", "eval:1",
                                                   "adam_epoch:2", "eval:2"};
    REQUIRE(r.trace.size() >= expected_prefix.size() + 6);
    for (std::size_t i = 0; i < expected_prefix.size(); ++i) CHECK(r.trace[i] == expected_prefix[i]);
    CHECK(r.trace[6] == "restore_best:" + std::to_string(r.epoch_of_best));
    CHECK(r.trace[7] == "swa_cycle_start:0");
    CHECK(r.trace[8] == "swa_snapshot:0");
    CHECK(r.trace[9] == "swa_cycle_start:1");
    CHECK(r.trace[10] == "swa_snapshot:1");
    CHECK(r.trace[11] == "swa_average:2");
    CHECK(r.trace[12] == "adam_only_start");
    CHECK(r.trace[13] == "adam_only_end");
    CHECK(streamed == r.log.size());
    CHECK(checkpoints.back() == "adam_only_final");
    CHECK(std::find(checkpoints.begin(), checkpoints.end(), "swa_final") != checkpoints.end());
    CHECK(std::find(checkpoints.begin(), checkpoints.end(), "best_adam") != checkpoints.end());

    // Schedule: four training scans at batch 3 -> 2 steps per epoch.
    const auto spe = (data.train.size() + 2) / 3;
    CHECK(r.schedule.cycle_len == spe);
    std::size_t swa_rows = 0, adam_rows = 0, branch_rows = 0;
    for (const auto& row : r.log) {
        if (row.phase == "swa") {
            CHECK(row.lr == cyclic_lr(row.step, r.schedule));
            ++swa_rows;
        } else if (row.phase == "adam") {
            CHECK(row.lr == cfg.adam.lr);
            ++adam_rows;
        } else {
            CHECK(row.phase == "adam_only");
            ++branch_rows;
        }
    }
    CHECK(adam_rows == cfg.main_epochs * spe);
    CHECK(swa_rows == cfg.swa_cycles * r.schedule.cycle_len);
    CHECK(branch_rows == swa_rows);

    // The final model is the mean of the snapshots.
    REQUIRE(r.swa_snapshots.size() == 2);
    const auto flat = r.swa_final.flatten();
    for (std::size_t j = 0; j < flat.size(); ++j) {
        const double want = 0.5 * (static_cast<double>(r.swa_snapshots[0][j]) + r.swa_snapshots[1][j]);
        REQUIRE(std::abs(flat[j] - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    }
    CHECK(r.best_adam.flatten() != flat);
    REQUIRE(r.adam_only_final.has_value());
}

TEST_CASE("training is deterministic") {
    const auto& data = tiny_data();
    const auto cfg = tiny_config();
    const auto model = nn::build_model(nn::desk_spec(12, 4, 16), 9);
    const auto a = train(model, data, cfg);
    const auto b = train(model, data, cfg);
    CHECK(a.swa_final.flatten() == b.swa_final.flatten());
    auto other = cfg;
    other.seed = 12;
    CHECK(train(model, data, other).swa_final.flatten() != a.swa_final.flatten());
}

TEST_CASE("diverging training aborts and hands back the last good model") {
    const auto& data = tiny_data();
    auto cfg = tiny_config();
    cfg.adam.lr = 1e30;
    bool saved = false;
    TrainHooks hooks;
    hooks.checkpoint = [&](const std::string& tag, const nn::ModelState& m) {
        if (tag == "last_good") {
            saved = true;
            for (auto v : m.flatten()) REQUIRE(std::isfinite(v));
        }
    };
    CHECK_THROWS_AS(train(nn::build_model(nn::desk_spec(12, 4, 16), 1), data, cfg, hooks), NonFiniteError);
    CHECK(saved);
}

TEST_CASE("trainer input validation") {
    const auto& data = tiny_data();
    CHECK_THROWS_AS(train(nn::build_model(nn::desk_spec(5, 4, 16), 1), data, tiny_config()), std::invalid_argument);
    auto cfg = tiny_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(nn::build_model(nn::desk_spec(12, 4, 16), 1), data, cfg), std::invalid_argument);
}

TEST_CASE("evaluation against the reference itself is perfect") {
    const auto& data = tiny_data();
    std::vector<std::vector<float>> truth;
    for (const auto& s : data.train) truth.push_back(s.scaled);
    const auto report = report_from_predictions(data, data.train, truth);
    CHECK(report.entries.size() == 12);
    for (const auto& e : report.entries) {
        CHECK(e.result.icc == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(e.result.band == metrics::Band::Excellent);
    }
    const auto model = nn::build_model(nn::desk_spec(12, 4, 16), 1);
    const auto pred = predict(model, data.train, 4);
    CHECK(pred.size() == data.train.size());
    CHECK(scaled_mse(truth, data.train) == 0.0);
    CHECK(scaled_mse(pred, data.train) > 0.0);
}
