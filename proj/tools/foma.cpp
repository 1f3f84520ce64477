// foma: train, compare, sweep and inspect FOMA experiments.

#include "foma/data.hpp"
#include "foma/dimension.hpp"
#include "foma/errors.hpp"
#include "foma/experiment.hpp"
#include "foma/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 ok, 2 invalid configuration or arguments, 3 missing or unreadable files, "
    "4 numerical failure (divergence, degenerate data).\n"
    "Output directory: --out, else $FOMA_OUT_DIR, else out_dir from the config, else ./out.";

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string output_dir(const std::string& flag, const std::string& from_config) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("FOMA_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return from_config.empty() ? "out" : from_config;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw foma::IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw foma::IoError("failed writing " + path.string());
    }
}

fs::path make_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw foma::IoError("cannot create output directory " + dir + ": " + ec.message());
    }
    return fs::path(dir);
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
};

void apply_overrides(foma::ExperimentConfig& c, const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw foma::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        foma::apply_config_override(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.train.validate();
}

int cmd_train(const TrainArgs& args) {
    foma::ExperimentConfig c = foma::load_experiment_config(args.config);
    apply_overrides(c, args.overrides);
    if (args.seed) {
        c.train.seed = *args.seed;
    }
    const foma::Dataset d = foma::prepare_dataset(c.data, c.train.seed);
    const fs::path out = make_dir(output_dir(args.out, c.out_dir));
    const foma::TrainResult r = foma::train(c.train, foma::materialize(d));
    write_file(out / "run.json", foma::run_record_json(r.record));
    write_file(out / "history.csv", foma::history_csv(r.record));
    foma::save_checkpoint(r.model, (out / "model.ckpt").string());
    if (r.record.diverged) {
        std::cerr << "foma train: diverged: " << r.record.diagnostic << '\n';
        return kExitNumeric;
    }
    std::cout << "test_rmse=" << num(r.record.test_rmse) << " test_mape=" << num(r.record.test_mape)
              << " best_epoch=" << r.record.best_epoch << " out=" << out.string() << '\n';
    return kExitOk;
}

struct CompareArgs {
    std::vector<std::string> configs;
    std::string seeds = "0,1,2";
    std::string out;
    int jobs = 1;
};

int cmd_compare(const CompareArgs& args) {
    std::vector<foma::ExperimentConfig> configs;
    for (const auto& path : args.configs) {
        configs.push_back(foma::load_experiment_config(path));
    }
    std::vector<std::uint64_t> seeds;
    for (const auto& s : split_csv_list(args.seeds)) {
        try {
            const long long v = std::stoll(s);
            if (v < 0) {
                throw std::invalid_argument("negative");
            }
            seeds.push_back(static_cast<std::uint64_t>(v));
        } catch (const std::exception&) {
            throw foma::ConfigError("--seeds: invalid seed '" + s + "'");
        }
    }
    const foma::CompareResult result = foma::run_compare(configs, seeds, args.jobs);
    const fs::path out = make_dir(output_dir(args.out, configs.front().out_dir));
    write_file(out / "compare.csv", foma::compare_csv(result));
    write_file(out / "compare.json", foma::compare_json(result));
    for (const auto& o : result.runs) {
        if (!o.ok) {
            std::cerr << "foma compare: " << configs[o.config_index].name << " seed " << o.seed
                      << " failed: " << o.error << '\n';
        }
    }
    for (const auto& r : result.rows) {
        std::cout << r.name << ": rmse " << num(r.rmse_mean) << " +- " << num(r.rmse_std) << ", mape "
                  << num(r.mape_mean) << " +- " << num(r.mape_std) << (r.best_rmse ? " [best rmse]" : "")
                  << (r.n_failed > 0 ? " (" + std::to_string(r.n_failed) + " failed)" : "") << '\n';
    }
    return kExitOk;
}

struct SweepArgs {
    std::string config;
    std::string checkpoint;
    std::optional<std::uint64_t> init_seed;
    std::optional<std::uint64_t> seed;
    std::string split = "train";
    int grid = 100;
    std::optional<int> k;
    std::optional<double> rho;
    std::string sv_mode;
    std::optional<int> batch_size;
    std::string out;
};

int cmd_sweep_lambda(const SweepArgs& args) {
    const foma::ExperimentConfig c = foma::load_experiment_config(args.config);
    const std::uint64_t seed = args.seed.value_or(c.train.seed);
    const foma::Dataset d = foma::prepare_dataset(c.data, seed);
    const foma::DatasetSplits s = foma::materialize(d);

    foma::MlpModel model;
    if (!args.checkpoint.empty()) {
        model = foma::load_checkpoint(args.checkpoint);
    } else if (args.init_seed) {
        std::vector<int> dims{static_cast<int>(s.x_train.cols())};
        dims.insert(dims.end(), c.train.hidden.begin(), c.train.hidden.end());
        dims.push_back(static_cast<int>(s.y_train.cols()));
        foma::Rng rng = foma::derive_stream(*args.init_seed, {1});
        model = foma::make_mlp(dims, rng);
    } else {
        throw foma::ConfigError("sweep-lambda needs --checkpoint or --init-seed");
    }
    if (model.input_dim() != s.x_train.cols() || model.output_dim() != s.y_train.cols()) {
        throw foma::ConfigError("checkpoint widths do not match the dataset columns");
    }

    const foma::Matrix* x = &s.x_train;
    const foma::Matrix* y = &s.y_train;
    if (args.split == "val") {
        x = &s.x_val;
        y = &s.y_val;
    } else if (args.split == "test") {
        x = &s.x_test;
        y = &s.y_test;
    } else if (args.split != "train") {
        throw foma::ConfigError("--split must be train, val or test");
    }
    if (x->rows() == 0) {
        throw foma::ConfigError("split '" + args.split + "' is empty");
    }

    foma::SweepSpec spec;
    spec.batch_size = args.batch_size.value_or(c.train.batch_size);
    spec.sv_mode = args.sv_mode.empty() ? c.train.policy.sv_mode : foma::parse_sv_mode(args.sv_mode);
    spec.rho = args.rho.value_or(c.train.policy.rho);
    if (args.k) {
        spec.k = *args.k;
        if (*args.k < 1) {
            throw foma::ConfigError("--k must be positive");
        }
    }
    if (!(spec.rho > 0.0 && spec.rho <= 1.0)) {
        throw foma::ConfigError("--rho must lie in (0, 1]");
    }

    const auto curve = foma::lambda_sweep(model, *x, *y, spec, foma::lambda_grid(args.grid));
    const fs::path out = make_dir(output_dir(args.out, c.out_dir));
    std::ostringstream csv;
    csv << "lambda,mse\n";
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        csv << num(curve[i].lambda) << ',' << num(curve[i].mse) << '\n';
        if (curve[i].mse < curve[argmin].mse) {
            argmin = i;
        }
    }
    write_file(out / "sweep.csv", csv.str());

    const std::vector<double> hist_lambdas{0.0, 0.5, 1.0};
    const foma::LabelHistogram h = foma::label_distribution(*x, *y, spec, hist_lambdas);
    std::ostringstream hcsv;
    hcsv << "bin_lo,bin_hi,original,lambda_0,lambda_0.5,lambda_1\n";
    for (std::size_t b = 0; b < h.original.size(); ++b) {
        hcsv << num(h.edges[b]) << ',' << num(h.edges[b + 1]) << ',' << num(h.original[b]);
        for (const auto& series : h.transformed) {
            hcsv << ',' << num(series[b]);
        }
        hcsv << '\n';
    }
    write_file(out / "labels.csv", hcsv.str());

    const double at_one = curve.back().mse;
    const double lmin = curve[argmin].lambda;
    const bool interior = curve[argmin].mse < at_one && lmin > 0.1 && lmin < 0.9;
    nlohmann::ordered_json summary{{"schema_version", foma::kSchemaVersion},
                                   {"split", args.split},
                                   {"grid", args.grid},
                                   {"argmin_lambda", lmin},
                                   {"min_mse", curve[argmin].mse},
                                   {"mse_at_lambda_1", at_one},
                                   {"interior_minimum", interior}};
    write_file(out / "sweep.json", summary.dump(2) + "\n");
    std::cout << "interior_minimum=" << (interior ? "true" : "false") << " argmin_lambda=" << num(lmin)
              << " min_mse=" << num(curve[argmin].mse) << " mse_at_lambda_1=" << num(at_one) << '\n';
    return kExitOk;
}

struct EstimateArgs {
    std::string data;
    bool header = false;
    std::string synthetic;
    double discard = 0.0;
    std::uint64_t seed = 0;
    bool no_rotate = false;
};

int cmd_estimate_id(const EstimateArgs& args) {
    if (args.data.empty() == args.synthetic.empty()) {
        throw foma::ConfigError("estimate-id needs exactly one of --data or --synthetic");
    }
    foma::Matrix points;
    if (!args.data.empty()) {
        points = foma::load_numeric_csv(args.data, args.header);
    } else {
        const auto parts = split_csv_list(args.synthetic);
        if (parts.size() != 3) {
            throw foma::ConfigError("--synthetic expects d,D,n");
        }
        int d = 0;
        int big_d = 0;
        long long n = 0;
        try {
            d = std::stoi(parts[0]);
            big_d = std::stoi(parts[1]);
            n = std::stoll(parts[2]);
        } catch (const std::exception&) {
            throw foma::ConfigError("--synthetic expects three integers d,D,n");
        }
        points = foma::synthetic_manifold(d, big_d, n, args.seed, !args.no_rotate);
    }
    const foma::IdEstimate est = foma::twonn_id(points, args.discard);
    nlohmann::ordered_json line{{"schema_version", foma::kSchemaVersion},
                                {"d_hat", est.d_hat},
                                {"k", est.k},
                                {"n_used", est.n_used},
                                {"n_duplicates", est.n_duplicates}};
    std::cout << line.dump() << '\n';
    return kExitOk;
}

struct ChecksumArgs {
    std::string manifest;
    std::string dir;
};

int cmd_checksum(const ChecksumArgs& args) {
    const std::string dir = args.dir.empty() ? fs::path(args.manifest).parent_path().string() : args.dir;
    const auto results = foma::verify_manifest(args.manifest, dir.empty() ? "." : dir);
    bool all_ok = !results.empty();
    for (const auto& r : results) {
        std::cout << r.file_name << ": " << (r.ok ? "OK" : (r.actual.empty() ? "MISSING" : "MISMATCH")) << '\n';
        all_ok = all_ok && r.ok;
    }
    if (results.empty()) {
        std::cerr << "foma checksum: manifest has no entries\n";
    }
    return all_ok ? kExitOk : kExitIo;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FOMA data augmentation experiments", "foma"};
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train one configuration and write run.json, history.csv, model.ckpt");
    train->add_option("--config", train_args.config, "Experiment config file")->required();
    train->add_option("--seed", train_args.seed, "Seed (overrides the config)");
    train->add_option("--out", train_args.out, "Output directory");
    train->add_option("--set", train_args.overrides, "key=value override applied after the config file");

    CompareArgs compare_args;
    auto* compare = app.add_subcommand("compare", "Run configs x seeds and aggregate mean +- std");
    compare->add_option("--configs", compare_args.configs, "Experiment config files")->required()->expected(1, -1);
    compare->add_option("--seeds", compare_args.seeds, "Comma-separated seeds")->capture_default_str();
    compare->add_option("--out", compare_args.out, "Output directory");
    compare->add_option("--jobs", compare_args.jobs, "Parallel worker slots")->capture_default_str();

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep-lambda", "MSE on spectrum-scaled data over a lambda grid");
    sweep->add_option("--config", sweep_args.config, "Experiment config (dataset, batch size, k/rho, sv_mode)")
        ->required();
    sweep->add_option("--checkpoint", sweep_args.checkpoint, "Model checkpoint");
    sweep->add_option("--init-seed", sweep_args.init_seed, "Use an untrained model initialized with this seed");
    sweep->add_option("--seed", sweep_args.seed, "Split seed (defaults to the config seed)");
    sweep->add_option("--split", sweep_args.split, "train, val or test")->capture_default_str();
    sweep->add_option("--grid", sweep_args.grid, "Number of lambda values in [0, 1]")->capture_default_str();
    sweep->add_option("--k", sweep_args.k, "Fixed k instead of the explained-variance rule");
    sweep->add_option("--rho", sweep_args.rho, "Explained-variance threshold");
    sweep->add_option("--sv-mode", sweep_args.sv_mode, "small or large");
    sweep->add_option("--batch-size", sweep_args.batch_size, "Evaluation batch size");
    sweep->add_option("--out", sweep_args.out, "Output directory");

    EstimateArgs id_args;
    auto* estimate = app.add_subcommand("estimate-id", "TwoNN intrinsic dimension, printed as one JSON line");
    estimate->add_option("--data", id_args.data, "Numeric CSV (all columns are coordinates)");
    estimate->add_flag("--header", id_args.header, "Skip the first row of --data");
    estimate->add_option("--synthetic", id_args.synthetic, "d,D,n uniform affine patch");
    estimate->add_option("--discard", id_args.discard, "Fraction of largest ratios dropped")->capture_default_str();
    estimate->add_option("--seed", id_args.seed, "Seed for --synthetic")->capture_default_str();
    estimate->add_flag("--no-rotate", id_args.no_rotate, "Embed --synthetic by zero padding");

    ChecksumArgs sum_args;
    auto* checksum = app.add_subcommand("checksum", "Verify a sha256 manifest");
    checksum->add_option("--manifest", sum_args.manifest, "Manifest of '<sha256>  <file>' lines")->required();
    checksum->add_option("--dir", sum_args.dir, "Directory holding the files (default: manifest directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*train) {
            return cmd_train(train_args);
        }
        if (*compare) {
            return cmd_compare(compare_args);
        }
        if (*sweep) {
            return cmd_sweep_lambda(sweep_args);
        }
        if (*estimate) {
            return cmd_estimate_id(id_args);
        }
        if (*checksum) {
            return cmd_checksum(sum_args);
        }
    } catch (const foma::ConfigError& e) {
        std::cerr << "foma: configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const foma::IoError& e) {
        std::cerr << "foma: io error: " << e.what() << '\n';
        return kExitIo;
    } catch (const foma::Error& e) {
        std::cerr << "foma: numerical error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitConfig;
}
