#include "foma/experiment.hpp"

#include "foma/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace foma {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

long long to_integer(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

int to_int(const std::string& key, const std::string& v) {
    const long long out = to_integer(key, v);
    if (out < std::numeric_limits<int>::min() || out > std::numeric_limits<int>::max()) {
        throw ConfigError(key + ": value out of range");
    }
    return static_cast<int>(out);
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
    const long long out = to_integer(key, v);
    if (out < 0) {
        throw ConfigError(key + ": seed must be non-negative");
    }
    return static_cast<std::uint64_t>(out);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(trim(item));
    }
    return out;
}

// ConfigError from the enum parsers carries no key; prefix it.
template <typename F>
auto with_key(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"name", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.name = v; }},
        {"out_dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
        {"dataset",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             if (v == "csv") {
                 c.data.dataset = v;
                 return;
             }
             const DatasetPreset* preset = find_preset(v);
             if (preset == nullptr) {
                 throw ConfigError(k + ": unknown dataset '" + v + "' (expected airfoil, no2 or csv)");
             }
             c.data.dataset = v;
             c.data.n_features = preset->n_features;
             c.data.n_labels = preset->n_labels;
             c.data.sizes = preset->sizes;
         }},
        {"data_path", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.data_path = v; }},
        {"n_features",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.n_features = to_int(k, v); }},
        {"n_labels",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.n_labels = to_int(k, v); }},
        {"header", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.header = to_bool(k, v); }},
        {"split_sizes",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             const auto parts = split_list(v);
             if (parts.size() != 3) {
                 throw ConfigError(k + ": expected train,val,test");
             }
             c.data.sizes = SplitSizes{to_int(k, parts[0]), to_int(k, parts[1]), to_int(k, parts[2])};
         }},
        {"split_file", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.split_file = v; }},
        {"split_seed",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.split_seed = to_seed(k, v); }},
        {"normalize",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.normalize = to_bool(k, v); }},
        {"learning_rate",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.learning_rate = to_double(k, v);
         }},
        {"epochs", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_int(k, v); }},
        {"batch_size",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_int(k, v); }},
        {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.seed = to_seed(k, v); }},
        {"batch_strategy",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.batch_strategy = with_key(k, [&] { return parse_batch_strategy(v); });
         }},
        {"optimizer",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.optimizer = with_key(k, [&] { return parse_optimizer(v); });
         }},
        {"hidden",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.hidden.clear();
             for (const auto& part : split_list(v)) {
                 c.train.hidden.push_back(to_int(k, part));
             }
         }},
        {"latent_layer",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.latent_layer = to_int(k, v); }},
        {"latent_detached",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.latent_detached = to_bool(k, v);
         }},
        {"weight_decay",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.weight_decay = to_double(k, v);
         }},
        {"grad_clip",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.grad_clip = to_double(k, v); }},
        {"id_discard",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.id_discard = to_double(k, v); }},
        {"min_batch_rows",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.min_batch_rows = to_int(k, v);
         }},
        {"method",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.policy.method = with_key(k, [&] { return parse_method(v); });
         }},
        {"alpha",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.policy.alpha = to_double(k, v); }},
        {"rho",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.policy.rho = to_double(k, v); }},
        {"k_strategy",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.policy.k_strategy = with_key(k, [&] { return parse_k_strategy(v); });
         }},
        {"sv_mode",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.policy.sv_mode = with_key(k, [&] { return parse_sv_mode(v); });
         }},
        {"apply_site",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.policy.apply_site = with_key(k, [&] { return parse_apply_site(v); });
         }},
        {"mu_profile",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.policy.mu_profile = with_key(k, [&] { return parse_mu_profile(v); });
         }},
        {"noise_sigma",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.policy.noise_sigma = to_double(k, v);
         }},
        {"lambda_dist",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.train.policy.lambda_dist = with_key(k, [&] { return parse_lambda_dist(v); });
         }},
        {"fixed_lambda",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             if (v == "none") {
                 c.train.policy.fixed_lambda.reset();
             } else {
                 c.train.policy.fixed_lambda = to_double(k, v);
             }
         }},
    };
    return table;
}

void validate_experiment(const ExperimentConfig& c) {
    c.train.validate();
    const DataSource& d = c.data;
    if (d.dataset == "csv" && d.data_path.empty()) {
        throw ConfigError("data_path is required for dataset csv");
    }
    if (d.n_features < 1 || d.n_labels < 1) {
        throw ConfigError("n_features and n_labels must be positive");
    }
    if (d.sizes.train < 1 || d.sizes.val < 0 || d.sizes.test < 0) {
        throw ConfigError("split_sizes needs a positive training size (train,val,test)");
    }
    if (c.train.batch_size > d.sizes.train) {
        throw ConfigError("batch_size exceeds the training split size");
    }
}

} // namespace

std::string DataSource::resolved_path() const {
    if (!data_path.empty()) {
        return data_path;
    }
    const DatasetPreset* preset = find_preset(dataset);
    if (preset == nullptr) {
        return {};
    }
    const char* env = std::getenv("FOMA_DATA_DIR");
    const std::string dir = (env != nullptr && *env != '\0') ? env : "data";
    return dir + "/" + std::string(preset->file_name);
}

void apply_config_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    it->second(config, key, value);
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (setters().count(key) == 0) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
        }
        if (const auto prev = seen.find(key); prev != seen.end()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + key + "' already set on line " +
                              std::to_string(prev->second));
        }
        seen[key] = line_no;
        entries.emplace_back(key, value);
    }
    // The dataset preset fills layout defaults that later keys may refine.
    std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first == "dataset"; });
    ExperimentConfig config;
    for (const auto& [key, value] : entries) {
        try {
            apply_config_override(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ": " + e.what());
        }
    }
    if (config.name.empty()) {
        config.name = config.data.dataset + "_" + std::string(to_string(config.train.policy.method));
    }
    try {
        validate_experiment(config);
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    ExperimentConfig c = parse_experiment_config(buffer.str(), path);
    if (c.name.empty()) {
        c.name = std::filesystem::path(path).stem().string();
    }
    return c;
}

Dataset prepare_dataset(const DataSource& source, std::uint64_t seed) {
    const std::string path = source.resolved_path();
    if (path.empty()) {
        throw ConfigError("no data path for dataset '" + source.dataset + "'");
    }
    if (!std::filesystem::exists(path)) {
        throw IoError("data file not found: " + path);
    }
    RawTable raw = load_csv(path, source.n_features, source.n_labels, source.header);
    Dataset d;
    d.x = std::move(raw.x);
    d.y = std::move(raw.y);
    const Index n = d.x.rows();
    if (!source.split_file.empty()) {
        d.splits = load_split_file(source.split_file, n);
    } else {
        d.splits = make_splits(n, source.sizes, source.split_seed.value_or(seed));
    }
    if (source.normalize) {
        d = normalize_minmax(d);
    }
    return d;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) {
        return {std::nan(""), std::nan("")};
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    if (values.size() == 1) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

CompareResult run_compare(const std::vector<ExperimentConfig>& configs, const std::vector<std::uint64_t>& seeds,
                          int jobs) {
    if (configs.empty()) {
        throw ConfigError("compare: at least one config is required");
    }
    if (seeds.empty()) {
        throw ConfigError("compare: at least one seed is required");
    }
    CompareResult result;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        for (std::uint64_t s : seeds) {
            RunOutcome o;
            o.config_index = c;
            o.seed = s;
            result.runs.push_back(std::move(o));
        }
    }

    const auto execute = [&](RunOutcome& o) {
        try {
            TrainConfig tc = configs[o.config_index].train;
            tc.seed = o.seed;
            const Dataset d = prepare_dataset(configs[o.config_index].data, o.seed);
            o.record = train(tc, materialize(d)).record;
            o.ok = !o.record.diverged;
            if (o.record.diverged) {
                o.error = o.record.diagnostic;
            }
        } catch (const std::exception& e) {
            o.ok = false;
            o.error = e.what();
        }
    };

    std::size_t next = 0;
    std::mutex mutex;
    const auto worker = [&] {
        for (;;) {
            std::size_t i = 0;
            {
                std::lock_guard<std::mutex> lock(mutex);
                if (next >= result.runs.size()) {
                    return;
                }
                i = next++;
            }
            execute(result.runs[i]);
        }
    };
    const int n_workers = std::clamp(jobs, 1, static_cast<int>(result.runs.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    for (std::size_t c = 0; c < configs.size(); ++c) {
        CompareRow row;
        row.name = configs[c].name;
        row.dataset = configs[c].data.dataset;
        row.method = std::string(to_string(configs[c].train.policy.method));
        std::vector<double> rmse;
        std::vector<double> mape;
        std::vector<double> gap;
        for (const auto& o : result.runs) {
            if (o.config_index != c) {
                continue;
            }
            ++row.n_runs;
            if (!o.ok) {
                ++row.n_failed;
                continue;
            }
            rmse.push_back(o.record.test_rmse);
            mape.push_back(o.record.test_mape);
            gap.push_back(o.record.final_gap());
        }
        std::tie(row.rmse_mean, row.rmse_std) = mean_std(rmse);
        std::tie(row.mape_mean, row.mape_std) = mean_std(mape);
        std::tie(row.gap_mean, row.gap_std) = mean_std(gap);
        result.rows.push_back(std::move(row));
    }

    std::map<std::string, std::pair<std::size_t, std::size_t>> best;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& r = result.rows[i];
        auto [it, inserted] = best.try_emplace(r.dataset, i, i);
        if (inserted) {
            continue;
        }
        const auto& br = result.rows[it->second.first];
        if (std::isnan(br.rmse_mean) || r.rmse_mean < br.rmse_mean) {
            it->second.first = i;
        }
        const auto& bm = result.rows[it->second.second];
        if (std::isnan(bm.mape_mean) || r.mape_mean < bm.mape_mean) {
            it->second.second = i;
        }
    }
    for (const auto& [dataset, idx] : best) {
        if (!std::isnan(result.rows[idx.first].rmse_mean)) {
            result.rows[idx.first].best_rmse = true;
        }
        if (!std::isnan(result.rows[idx.second].mape_mean)) {
            result.rows[idx.second].best_mape = true;
        }
    }
    return result;
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string compare_csv(const CompareResult& result) {
    std::ostringstream out;
    out << "name,dataset,method,n_runs,n_failed,rmse_mean,rmse_std,mape_mean,mape_std,gap_mean,gap_std,best_rmse,"
           "best_mape\n";
    for (const auto& r : result.rows) {
        out << r.name << ',' << r.dataset << ',' << r.method << ',' << r.n_runs << ',' << r.n_failed << ','
            << num(r.rmse_mean) << ',' << num(r.rmse_std) << ',' << num(r.mape_mean) << ',' << num(r.mape_std) << ','
            << num(r.gap_mean) << ',' << num(r.gap_std) << ',' << (r.best_rmse ? 1 : 0) << ','
            << (r.best_mape ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string compare_json(const CompareResult& result) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : result.rows) {
        rows.push_back({{"name", r.name},
                        {"dataset", r.dataset},
                        {"method", r.method},
                        {"n_runs", r.n_runs},
                        {"n_failed", r.n_failed},
                        {"rmse_mean", r.rmse_mean},
                        {"rmse_std", r.rmse_std},
                        {"mape_mean", r.mape_mean},
                        {"mape_std", r.mape_std},
                        {"gap_mean", r.gap_mean},
                        {"gap_std", r.gap_std},
                        {"best_rmse", r.best_rmse},
                        {"best_mape", r.best_mape}});
    }
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& o : result.runs) {
        runs.push_back({{"config", result.rows[o.config_index].name},
                        {"seed", o.seed},
                        {"ok", o.ok},
                        {"error", o.error},
                        {"test_rmse", o.ok ? nlohmann::ordered_json(o.record.test_rmse) : nlohmann::ordered_json()},
                        {"test_mape", o.ok ? nlohmann::ordered_json(o.record.test_mape) : nlohmann::ordered_json()},
                        {"best_epoch", o.record.best_epoch},
                        {"final_gap", o.ok ? nlohmann::ordered_json(o.record.final_gap()) : nlohmann::ordered_json()}});
    }
    nlohmann::ordered_json doc{{"schema_version", kSchemaVersion}, {"rows", rows}, {"runs", runs}};
    return doc.dump(2) + "\n";
}

} // namespace foma
