#include "morphoreg/optim/trainer.hpp"

#include "morphoreg/common/csv.hpp"
#include "morphoreg/tensor/ops.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace morphoreg::optim {

namespace ops = tensor;
using nn::ModelState;
using nn::Tensor;

auto TrainingData::split(phantom::Split s) const -> const std::vector<Sample>& {
    switch (s) {
        case phantom::Split::Train: return train;
        case phantom::Split::Validation: return validation;
        case phantom::Split::Test: return test;
    }
    return train;
}

auto load_training_data(const phantom::Manifest& manifest, const phantom::Scaler* stored) -> TrainingData {
    TrainingData d;
    d.names = manifest.names;
    d.kinds = manifest.kinds();
    if (stored) {
        if (stored->names() != manifest.names) {
            throw phantom::PhantomError("stored scaler measurements differ from the manifest's");
        }
        d.scaler = *stored;
    } else {
        d.scaler = phantom::fit_scaler(manifest);
    }
    std::optional<phantom::Dims> dims;
    for (const auto& row : manifest.rows) {
        Sample s;
        s.subject = row.subject_id;
        s.scan = row.scan_id;
        s.volume = phantom::load_volume(manifest.volume_file(row));
        if (dims && *dims != s.volume.dims()) {
            throw phantom::PhantomError("volume '" + row.volume_path + "' has different dims from the others");
        }
        dims = s.volume.dims();
        s.target = row.targets;
        const auto scaled = d.scaler.apply(row.targets);
        s.scaled.assign(scaled.begin(), scaled.end());
        switch (row.split) {
            case phantom::Split::Train: d.train.push_back(std::move(s)); break;
            case phantom::Split::Validation: d.validation.push_back(std::move(s)); break;
            case phantom::Split::Test: d.test.push_back(std::move(s)); break;
        }
    }
    if (!stored && d.train.empty()) {
        throw phantom::PhantomError("manifest has no training rows");
    }
    return d;
}

auto selection_samples(const TrainingData& data) -> const std::vector<Sample>& {
    return data.validation.size() >= kMinIccRows ? data.validation : data.train;
}

auto format_log_row(const LogRow& r) -> std::string {
    std::string out = r.phase + "," + std::to_string(r.epoch) + "," + std::to_string(r.step) + "," +
                      csv::format_double(r.lr) + "," + csv::format_double(r.train_mse) + ",";
    if (r.val_mean_icc) out += csv::format_double(*r.val_mean_icc);
    out += "," + csv::format_fixed(r.wall_time_s, 3);
    return out;
}

namespace {

auto batch_tensor(const std::vector<const phantom::Volume3D*>& vols) -> Tensor {
    const auto& d = vols.front()->dims();
    std::vector<float> data;
    data.reserve(vols.size() * vols.front()->size());
    for (const auto* v : vols) {
        data.insert(data.end(), v->voxels().begin(), v->voxels().end());
    }
    return Tensor({vols.size(), 1, d[0], d[1], d[2]}, std::move(data));
}

class Loop {
public:
    Loop(const TrainingData& data, const TrainConfig& cfg, const TrainHooks& hooks, TrainResult& result)
        : data_(data), cfg_(cfg), hooks_(hooks), result_(result), rng_(cfg.seed),
          start_(std::chrono::steady_clock::now()) {}

    [[nodiscard]] auto steps_per_epoch() const -> std::size_t {
        return (data_.train.size() + cfg_.batch_size - 1) / cfg_.batch_size;
    }

    // One pass over the shuffled training split; `step` is called per batch with the
    // batch-local loss gradient and returns the learning rate it applied.
    template <typename StepFn>
    void run_epoch(ModelState& model, const std::string& phase, std::size_t epoch, std::uint64_t& step,
                   StepFn&& apply, std::mt19937_64& rng) {
        std::vector<std::size_t> order(data_.train.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t b = 0; b < order.size(); b += cfg_.batch_size) {
            const auto end = std::min(order.size(), b + cfg_.batch_size);
            std::vector<phantom::Volume3D> augmented;
            augmented.reserve(end - b);
            std::vector<float> target;
            for (std::size_t i = b; i < end; ++i) {
                const auto& s = data_.train[order[i]];
                augmented.push_back(phantom::augment(s.volume, cfg_.augment, rng));
                target.insert(target.end(), s.scaled.begin(), s.scaled.end());
            }
            std::vector<const phantom::Volume3D*> ptrs;
            for (const auto& v : augmented) ptrs.push_back(&v);
            const auto x = batch_tensor(ptrs);
            const Tensor y({end - b, data_.names.size()}, std::move(target));

            nn::Tape tape;
            const auto bound = nn::bind(model, tape);
            const auto out = nn::forward(model, bound, x);
            const auto loss = ops::mse_loss(out.combined, y);
            const double loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                abort(model, "non-finite training loss in " + phase + " epoch " + std::to_string(epoch));
            }
            const auto grads_raw = tape.backward(loss);
            Grads grads;
            grads.reserve(bound.size());
            for (const auto& p : bound) grads.push_back(grads_raw.of(p));
            double lr = 0.0;
            try {
                lr = apply(model, grads, step);
            } catch (const NonFiniteError& e) {
                abort(model, e.what(), e.parameter());
            }
            log({phase, epoch, step, lr, loss_value, std::nullopt, elapsed()});
            ++step;
        }
    }

    auto validate(const ModelState& model) -> double {
        return evaluate(model, data_, selection_samples(data_), cfg_.batch_size).overall.mean;
    }

    void attach_icc(double icc) {
        result_.log.back().val_mean_icc = icc;
    }

    void flush_log() {
        for (; emitted_ < result_.log.size(); ++emitted_) {
            if (hooks_.log) hooks_.log(result_.log[emitted_]);
        }
    }

    void checkpoint(const std::string& tag, const ModelState& m) const {
        if (hooks_.checkpoint) hooks_.checkpoint(tag, m);
    }

    std::mt19937_64& rng() { return rng_; }

private:
    void log(LogRow row) {
        // Rows are emitted one step late so an evaluation can still be attached.
        flush_log();
        result_.log.push_back(std::move(row));
    }

    [[noreturn]] void abort(const ModelState& model, const std::string& what, const std::string& parameter = "loss") {
        flush_log();
        checkpoint("last_good", model);
        throw NonFiniteError(parameter, what);
    }

    auto elapsed() const -> double {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    const TrainingData& data_;
    const TrainConfig& cfg_;
    const TrainHooks& hooks_;
    TrainResult& result_;
    std::mt19937_64 rng_;
    std::chrono::steady_clock::time_point start_;
    std::size_t emitted_ = 0;
};

}  // namespace

auto train(ModelState model, const TrainingData& data, const TrainConfig& cfg, const TrainHooks& hooks)
    -> TrainResult {
    if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (cfg.eval_interval == 0) throw std::invalid_argument("evaluation interval must be positive");
    if (model.spec().measurements != data.names.size()) {
        throw std::invalid_argument("network predicts " + std::to_string(model.spec().measurements) +
                                    " measurements, dataset has " + std::to_string(data.names.size()));
    }
    TrainResult result;
    Loop loop(data, cfg, hooks, result);
    const auto spe = loop.steps_per_epoch();

    // Adam phase.
    AdamState adam{cfg.adam, {}, {}, 0};
    SelectionState selection;
    std::uint64_t step = 0;
    auto adam_apply = [&adam](ModelState& m, const Grads& g, std::uint64_t) {
        adam_step(adam, m, g);
        return adam.config.lr;
    };
    for (std::size_t epoch = 0; epoch < cfg.main_epochs; ++epoch) {
        result.trace.push_back("adam_epoch:" + std::to_string(epoch));
        loop.run_epoch(model, "adam", epoch, step, adam_apply, loop.rng());
        if ((epoch + 1) % cfg.eval_interval == 0 || epoch + 1 == cfg.main_epochs) {
            const double icc = loop.validate(model);
            loop.attach_icc(icc);
            result.trace.push_back("eval:" + std::to_string(epoch));
            if (select_best(selection, static_cast<int>(epoch), icc, model)) {
                loop.checkpoint("best_adam", model);
            }
        }
    }
    loop.flush_log();

    // Branch point for the Adam-only comparison.
    const ModelState end_of_main = model;
    const AdamState adam_at_end = adam;
    const std::mt19937_64 rng_at_end = loop.rng();

    if (selection.has_best()) {
        model = selection.best_params;
        result.epoch_of_best = selection.epoch_of_best;
        result.best_val_icc = selection.best_mean_icc;
    }
    result.best_adam = model;
    result.trace.push_back("restore_best:" + std::to_string(result.epoch_of_best));

    // SWA phase.
    result.schedule = CyclicSchedule{cfg.swa_lr_max, cfg.swa_lr_min, cfg.swa_epochs_per_cycle * spe, cfg.swa_cycles};
    const auto& sched = result.schedule;
    SwaAccumulator acc;
    std::mt19937_64 swa_rng = rng_at_end;
    if (cfg.swa_cycles > 0) {
        step = 0;
        auto sgd_apply = [&sched](ModelState& m, const Grads& g, std::uint64_t s) {
            const double lr = cyclic_lr(s, sched);
            sgd_step(lr, m, g);
            return lr;
        };
        const std::size_t swa_epochs = cfg.swa_cycles * cfg.swa_epochs_per_cycle;
        for (std::size_t e = 0; e < swa_epochs; ++e) {
            const auto cycle = e / cfg.swa_epochs_per_cycle;
            if (e % cfg.swa_epochs_per_cycle == 0) {
                result.trace.push_back("swa_cycle_start:" + std::to_string(cycle));
            }
            loop.run_epoch(model, "swa", cfg.main_epochs + e, step, sgd_apply, swa_rng);
            if (at_cycle_end(step - 1, sched)) {
                auto flat = model.flatten();
                swa_absorb(acc, flat);
                result.swa_snapshots.push_back(std::move(flat));
                result.trace.push_back("swa_snapshot:" + std::to_string(cycle));
                loop.attach_icc(loop.validate(model));
                loop.checkpoint("swa_snapshot_" + std::to_string(cycle), model);
            }
        }
        loop.flush_log();
        model.unflatten(swa_mean(acc));
        result.trace.push_back("swa_average:" + std::to_string(acc.count));
    }
    result.swa_final = model;
    loop.checkpoint("swa_final", model);

    if (cfg.adam_only_branch) {
        result.trace.push_back("adam_only_start");
        ModelState branch = end_of_main;
        AdamState branch_adam = adam_at_end;
        std::mt19937_64 branch_rng = rng_at_end;
        auto apply = [&branch_adam](ModelState& m, const Grads& g, std::uint64_t) {
            adam_step(branch_adam, m, g);
            return branch_adam.config.lr;
        };
        step = 0;
        const std::size_t extra = cfg.swa_cycles * cfg.swa_epochs_per_cycle;
        for (std::size_t e = 0; e < extra; ++e) {
            loop.run_epoch(branch, "adam_only", cfg.main_epochs + e, step, apply, branch_rng);
        }
        loop.attach_icc(loop.validate(branch));
        loop.flush_log();
        result.adam_only_final = branch;
        result.trace.push_back("adam_only_end");
        loop.checkpoint("adam_only_final", branch);
    }
    return result;
}

auto predict(const ModelState& model, const std::vector<Sample>& samples, std::size_t batch_size)
    -> std::vector<std::vector<float>> {
    std::vector<std::vector<float>> out;
    out.reserve(samples.size());
    const auto M = model.spec().measurements;
    for (std::size_t b = 0; b < samples.size(); b += batch_size) {
        const auto end = std::min(samples.size(), b + batch_size);
        std::vector<const phantom::Volume3D*> vols;
        for (std::size_t i = b; i < end; ++i) vols.push_back(&samples[i].volume);
        const auto y = nn::forward(model, batch_tensor(vols)).combined;
        for (std::size_t i = 0; i < end - b; ++i) {
            out.emplace_back(y.data().begin() + static_cast<std::ptrdiff_t>(i * M),
                             y.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * M));
        }
    }
    return out;
}

auto scaled_mse(const std::vector<std::vector<float>>& predictions, const std::vector<Sample>& samples) -> double {
    if (predictions.size() != samples.size() || samples.empty()) {
        throw std::invalid_argument("predictions and samples must be non-empty and aligned");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = 0; j < samples[i].scaled.size(); ++j, ++n) {
            const double d = static_cast<double>(predictions[i][j]) - samples[i].scaled[j];
            sum += d * d;
        }
    }
    return sum / static_cast<double>(n);
}

auto report_from_predictions(const TrainingData& data, const std::vector<Sample>& samples,
                             const std::vector<std::vector<float>>& scaled_predictions) -> metrics::EvaluationReport {
    if (scaled_predictions.size() != samples.size()) {
        throw std::invalid_argument("one prediction row per sample is required");
    }
    const auto M = data.names.size();
    std::vector<std::vector<double>> physical;
    physical.reserve(samples.size());
    for (const auto& p : scaled_predictions) {
        const std::vector<double> scaled(p.begin(), p.end());
        physical.push_back(data.scaler.invert(scaled));
    }
    std::vector<metrics::ReportEntry> entries;
    for (std::size_t j = 0; j < M; ++j) {
        std::vector<double> ref, pred;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            ref.push_back(samples[i].target[j]);
            pred.push_back(physical[i][j]);
        }
        metrics::ReportEntry e;
        e.measurement = data.names[j];
        e.kind = data.kinds[j];
        e.result = metrics::icc_2_1(metrics::PairedSamples::from_columns(ref, pred));
        e.n = samples.size();
        entries.push_back(std::move(e));
    }
    return metrics::make_report(std::move(entries));
}

auto evaluate(const ModelState& model, const TrainingData& data, const std::vector<Sample>& samples,
              std::size_t batch_size) -> metrics::EvaluationReport {
    return report_from_predictions(data, samples, predict(model, samples, batch_size));
}

}  // namespace morphoreg::optim
