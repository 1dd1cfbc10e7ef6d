#include "morphoreg/cli/commands.hpp"

#include "morphoreg/common/csv.hpp"

#include <cstdio>
#include <numeric>
#include <fstream>
#include <ostream>

namespace morphoreg::cli {

void prepare_out_dir(const fs::path& dir, bool force) {
    if (dir.empty()) {
        throw ValidationError("no output directory given (use --out)");
    }
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) {
            throw ValidationError("output path '" + dir.string() + "' is not a directory");
        }
        if (!fs::is_empty(dir) && !force) {
            throw ValidationError("output directory '" + dir.string() + "' is not empty (use --force)");
        }
    }
    fs::create_directories(dir);
}

auto out_dir_of(const RunConfig& config) -> fs::path { return config.get<std::string>("out"); }

auto cmd_gen_data(const RunConfig& config, bool force) -> phantom::Manifest {
    config.validate();
    const auto cfg = config.dataset_config();
    // Checked before touching the disk.
    std::vector<std::uint64_t> ids(cfg.subjects);
    std::iota(ids.begin(), ids.end(), 0);
    try {
        (void)phantom::split_subjects(ids, cfg.ratios, 0);
    } catch (const phantom::PhantomError& e) {
        throw ValidationError(e.what());
    }
    const auto dir = out_dir_of(config);
    prepare_out_dir(dir, force);
    if (fs::is_directory(dir / "volumes")) {
        for (const auto& entry : fs::directory_iterator(dir / "volumes")) {
            if (entry.path().extension() == ".mvol") fs::remove(entry.path());
        }
    }
    auto manifest = phantom::generate_dataset(cfg, dir);
    std::ofstream(dir / kResolvedConfig) << config.dump();
    return manifest;
}

auto parameter_checksum(const nn::ModelState& model) -> std::string {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : model.params()) {
        const auto data = p.value.data();
        const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
        for (std::size_t i = 0; i < data.size_bytes(); ++i) {
            h = (h ^ bytes[i]) * 1099511628211ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_run_checkpoint(const fs::path& path, const nn::ModelState& model, const phantom::Scaler& scaler,
                         const std::string& tag, const nlohmann::json& config) {
    nn::Checkpoint ck{model, {{"tag", tag}, {"names", scaler.names()}, {"scaler", scaler.to_json()}, {"config", config}}};
    nn::save_checkpoint(path, ck);
}

auto cmd_train(const RunConfig& config, bool force, std::ostream* progress) -> TrainArtifacts {
    config.validate();
    const fs::path manifest_path = config.get<std::string>("manifest");
    if (manifest_path.empty()) {
        throw ValidationError("train needs a dataset manifest (config key 'manifest')");
    }
    if (!fs::exists(manifest_path)) {
        throw ValidationError("manifest '" + manifest_path.string() + "' does not exist");
    }
    phantom::Manifest manifest;
    try {
        manifest = phantom::read_manifest(manifest_path);
    } catch (const phantom::PhantomError& e) {
        throw ValidationError("invalid manifest: " + std::string(e.what()));
    }
    const auto data = optim::load_training_data(manifest);
    const auto dims = data.train.front().volume.dims();
    if (dims[0] != dims[1] || dims[1] != dims[2]) {
        throw ValidationError("training volumes must be cubic");
    }
    const auto spec = config.network_spec(data.names.size(), dims[0]);
    const auto tcfg = config.train_config();

    const auto dir = out_dir_of(config);
    prepare_out_dir(dir, force);
    fs::create_directories(dir / "checkpoints");
    auto resolved = config.json();
    resolved["manifest"] = fs::absolute(manifest_path).lexically_normal().string();
    resolved["out"] = fs::absolute(dir).lexically_normal().string();
    std::ofstream(dir / kResolvedConfig) << resolved.dump(2) << '\n';

    std::ofstream log(dir / kTrainLog);
    log << optim::kLogHeader << '\n';
    optim::TrainHooks hooks;
    hooks.checkpoint = [&](const std::string& tag, const nn::ModelState& model) {
        save_run_checkpoint(dir / "checkpoints" / (tag + ".ckpt"), model, data.scaler, tag, resolved);
    };
    hooks.log = [&](const optim::LogRow& row) {
        log << optim::format_log_row(row) << '\n';
        if (progress && row.val_mean_icc) {
            *progress << row.phase << " epoch " << row.epoch << " lr " << row.lr << " mse " << row.train_mse
                      << " val_icc " << *row.val_mean_icc << '\n';
        }
    };

    TrainArtifacts out;
    out.dir = dir;
    auto model = nn::build_model(spec, config.get<std::uint64_t>("seed_model"));
    out.result = optim::train(std::move(model), data, tcfg, hooks);
    log.flush();

    const auto& final_model = out.result.swa_final;
    out.checksum = parameter_checksum(final_model);
    out.validation = optim::evaluate(final_model, data, optim::selection_samples(data), tcfg.batch_size);
    metrics::write_report_csv(dir / "report_validation.csv", out.validation);
    nlohmann::json summary{{"model", "swa_final"},
                           {"checksum", out.checksum},
                           {"epoch_of_best", out.result.epoch_of_best},
                           {"best_val_mean_icc", out.result.best_val_icc},
                           {"validation", metrics::summary_json(out.validation)},
                           {"validation_source", &optim::selection_samples(data) == &data.validation ? "validation"
                                                                                                       : "train"}};
    if (data.test.size() >= optim::kMinIccRows) {
        out.test = optim::evaluate(final_model, data, data.test, tcfg.batch_size);
        metrics::write_report_csv(dir / "report_test.csv", out.test);
        summary["test"] = metrics::summary_json(out.test);
    }
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
    return out;
}

auto cmd_eval(const EvalOptions& o) -> EvalOutput {
    if (!fs::exists(o.checkpoint)) {
        throw ValidationError("checkpoint '" + o.checkpoint.string() + "' does not exist");
    }
    if (!fs::exists(o.manifest)) {
        throw ValidationError("manifest '" + o.manifest.string() + "' does not exist");
    }
    auto ck = nn::load_checkpoint(o.checkpoint);
    if (!ck.extra.contains("scaler")) {
        throw ValidationError("checkpoint '" + o.checkpoint.string() + "' carries no scaler");
    }
    const auto scaler = phantom::Scaler::from_json(ck.extra.at("scaler"));
    phantom::Manifest manifest;
    try {
        manifest = phantom::read_manifest(o.manifest);
    } catch (const phantom::PhantomError& e) {
        throw ValidationError("invalid manifest: " + std::string(e.what()));
    }
    const auto m_ck = ck.model.spec().measurements;
    if (m_ck != manifest.names.size()) {
        throw ValidationError("checkpoint predicts M=" + std::to_string(m_ck) + " measurements but manifest has M=" +
                              std::to_string(manifest.names.size()));
    }
    if (scaler.names() != manifest.names) {
        throw ValidationError("checkpoint measurement names differ from the manifest's");
    }
    std::optional<metrics::EvaluationReport> baseline;
    if (o.compare) {
        try {
            baseline = metrics::read_report_csv(*o.compare);
        } catch (const std::exception& e) {
            throw ValidationError("cannot read baseline report: " + std::string(e.what()));
        }
    }
    const auto data = optim::load_training_data(manifest, &scaler);
    const auto& samples = data.split(o.split);
    if (samples.size() < optim::kMinIccRows) {
        throw ValidationError("split '" + std::string(phantom::split_name(o.split)) + "' has " +
                              std::to_string(samples.size()) + " scans; ICC needs at least 3");
    }

    const auto dir = o.out.empty() ? o.checkpoint.parent_path() : o.out;
    fs::create_directories(dir.empty() ? fs::path(".") : dir);
    const auto name = std::string(phantom::split_name(o.split));
    EvalOutput out;
    out.report_csv = dir / ("report_" + name + ".csv");
    const auto summary_path = dir / ("summary_" + name + ".json");
    if (!o.force && (fs::exists(out.report_csv) || fs::exists(summary_path))) {
        throw ValidationError("'" + out.report_csv.string() + "' already exists (use --force)");
    }
    out.report = optim::evaluate(ck.model, data, samples, o.batch_size);
    try {
        out.summary = metrics::summary_json(out.report, baseline ? &*baseline : nullptr);
    } catch (const metrics::MetricsError& e) {
        throw ValidationError("baseline comparison failed: " + std::string(e.what()));
    }
    out.summary["split"] = name;
    out.summary["checkpoint"] = o.checkpoint.string();
    metrics::write_report_csv(out.report_csv, out.report);
    std::ofstream(summary_path) << out.summary.dump(2) << '\n';
    return out;
}

auto cmd_report(const std::vector<fs::path>& reports, std::vector<std::string> labels, bool markdown) -> std::string {
    if (reports.empty()) {
        throw ValidationError("report needs at least one report CSV");
    }
    if (labels.empty()) {
        for (const auto& p : reports) labels.push_back(p.stem().string());
    }
    if (labels.size() != reports.size()) {
        throw ValidationError("got " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(reports.size()) + " reports");
    }
    std::vector<metrics::EvaluationReport> loaded;
    for (const auto& p : reports) {
        if (!fs::exists(p)) throw ValidationError("report '" + p.string() + "' does not exist");
        try {
            loaded.push_back(metrics::read_report_csv(p));
        } catch (const std::exception& e) {
            throw ValidationError("cannot read '" + p.string() + "': " + e.what());
        }
    }
    try {
        return metrics::comparison_table(labels, loaded, markdown);
    } catch (const metrics::MetricsError& e) {
        throw ValidationError(e.what());
    }
}

}  // namespace morphoreg::cli
