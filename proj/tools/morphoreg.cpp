#include "morphoreg/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace morphoreg;
using cli::ValidationError;

struct Globals {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed_data, seed_model, seed_train;
    std::string out;
    bool force = false;
    bool print_config = false;
    std::vector<std::string> sets;
};

auto parse_value(const std::string& text) -> nlohmann::json {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        return text;  // bare strings need no quotes
    }
}

auto resolve(const Globals& g) -> cli::RunConfig {
    auto c = cli::RunConfig::resolve(g.preset, g.config);
    for (const auto& kv : g.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), parse_value(kv.substr(eq + 1)));
    }
    if (g.seed_data) c.set("seed_data", *g.seed_data);
    if (g.seed_model) c.set("seed_model", *g.seed_model);
    if (g.seed_train) c.set("seed_train", *g.seed_train);
    if (!g.out.empty()) c.set("out", g.out);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-head 3D CNN morphometry regression on synthetic phantoms"};
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "Flat JSON config file");
    app.add_option("--preset", g.preset, "desk | paper | smoke");
    app.add_option("--seed-data", g.seed_data, "Seed for dataset generation and splits");
    app.add_option("--seed-model", g.seed_model, "Seed for weight initialisation");
    app.add_option("--seed-train", g.seed_train, "Seed for shuffling and augmentation");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("--force", g.force, "Allow writing into a non-empty output directory");
    app.add_flag("--print-config", g.print_config, "Print the resolved config and exit");
    app.add_option("--set", g.sets, "Override one config key, key=value (repeatable)");

    auto* gen = app.add_subcommand("gen-data", "Generate a phantom dataset");
    std::optional<std::size_t> subjects;
    gen->add_option("--subjects", subjects, "Number of subjects");

    auto* train = app.add_subcommand("train", "Train a model on a dataset manifest");
    std::string train_manifest;
    train->add_option("--manifest", train_manifest, "Dataset manifest.csv");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    cli::EvalOptions eo;
    std::string split = "test", compare;
    eval->add_option("--checkpoint", eo.checkpoint, "Checkpoint file")->required();
    eval->add_option("--manifest", eo.manifest, "Dataset manifest.csv")->required();
    eval->add_option("--split", split, "train | validation | test");
    eval->add_option("--compare", compare, "Baseline report CSV for improvement percentages");

    auto* report = app.add_subcommand("report", "Compare report CSVs side by side");
    std::vector<std::string> files, labels;
    bool markdown = false;
    report->add_option("reports", files, "Report CSV files")->required();
    report->add_option("--labels", labels, "Column labels, one per report")->delimiter(',');
    report->add_flag("--markdown", markdown, "Emit a markdown table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (subjects) g.sets.push_back("subjects=" + std::to_string(*subjects));
        if (!train_manifest.empty()) g.sets.push_back("manifest=\"" + train_manifest + "\"");
        auto config = resolve(g);
        if (g.print_config) {
            std::cout << config.dump();
            return 0;
        }
        if (gen->parsed()) {
            const auto m = cli::cmd_gen_data(config, g.force);
            std::cout << "wrote " << m.rows.size() << " scans to " << cli::out_dir_of(config).string() << '\n';
        } else if (train->parsed()) {
            const auto a = cli::cmd_train(config, g.force, &std::cout);
            std::cout << "run written to " << a.dir.string() << " (checksum " << a.checksum << ")\n";
        } else if (eval->parsed()) {
            eo.split = morphoreg::phantom::parse_split(split);
            eo.out = g.out;
            eo.force = g.force;
            eo.batch_size = config.get<std::size_t>("batch_size");
            if (!compare.empty()) eo.compare = compare;
            const auto r = cli::cmd_eval(eo);
            std::cout << r.summary.dump(2) << '\n';
        } else if (report->parsed()) {
            std::vector<std::filesystem::path> paths(files.begin(), files.end());
            const auto table = cli::cmd_report(paths, labels, markdown);
            if (!g.out.empty()) {
                std::ofstream(g.out) << table;
            }
            std::cout << table;
        } else {
            std::cerr << app.help();
            return 1;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
