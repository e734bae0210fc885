#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "drpl/io.hpp"
#include "drpl/noise.hpp"
#include "drpl/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace drpl;

namespace {

struct NoiseSpec {
    std::string type = "uniform-id";
    double rate = 0.0;
    std::string transition_path;
    std::string pool_path;
    std::string flip_map_path;
};

struct DataSpec {
    std::string data_dir;   // empty -> synthetic
    std::string test_dir;
    int classes = 4;
    int per_class = 500;
    int test_per_class = 250;
    int dims = 16;
    double separation = 6.0;
    int ood_classes = 0;
    int ood_per_class = 0;
};

Dataset apply_noise(const Dataset& ds, const NoiseSpec& spec, std::uint64_t seed,
                    const OodPool* pool) {
    Rng rng = make_rng(seed, "noise");
    if (spec.rate == 0.0) return ds;
    if (spec.type == "uniform-id") return inject_uniform_id(ds, spec.rate, rng);
    if (spec.type == "nonuniform-id") {
        if (spec.transition_path.empty())
            throw std::runtime_error("nonuniform-id noise needs --transition");
        return inject_nonuniform_id(ds, load_transition(spec.transition_path),
                                    spec.rate, rng);
    }
    if (spec.type == "uniform-ood") {
        if (!pool) throw std::runtime_error("uniform-ood noise needs an OOD pool");
        return inject_uniform_ood(ds, *pool, spec.rate, rng);
    }
    if (spec.type == "nonuniform-ood") {
        if (!pool) throw std::runtime_error("nonuniform-ood noise needs an OOD pool");
        if (spec.transition_path.empty())
            throw std::runtime_error("nonuniform-ood noise needs --transition");
        return inject_nonuniform_ood(ds, *pool, load_transition(spec.transition_path),
                                     spec.rate, rng);
    }
    if (spec.type == "pairwise") {
        if (spec.flip_map_path.empty())
            throw std::runtime_error("pairwise noise needs --flip-map");
        return inject_pairwise(ds, load_flip_map(spec.flip_map_path), spec.rate, rng);
    }
    throw std::runtime_error("unknown noise type: " + spec.type);
}

// Ground-truth corruption matrix for the forward-correction oracle.
TransitionMatrix true_transition(const NoiseSpec& spec, int classes) {
    TransitionMatrix t;
    t.rows = Matrix::Identity(classes, classes) * (1.0 - spec.rate);
    if (spec.type == "uniform-id") {
        double off = spec.rate / (classes - 1);
        for (int r = 0; r < classes; ++r)
            for (int c = 0; c < classes; ++c)
                if (r != c) t.rows(r, c) = off;
    } else if (spec.type == "nonuniform-id") {
        TransitionMatrix flip = load_transition(spec.transition_path);
        t.rows += spec.rate * flip.rows;
    } else if (spec.type == "pairwise") {
        auto flips = load_flip_map(spec.flip_map_path);
        t.rows = Matrix::Identity(classes, classes);
        for (auto [from, to] : flips) {
            t.rows(from, from) = 1.0 - spec.rate;
            t.rows(from, to) = spec.rate;
        }
    } else {
        throw std::runtime_error(
            "forward-oracle supports ID noise types only (content replacement has "
            "no label transition matrix)");
    }
    t.validate();
    return t;
}

struct LoadedData {
    Dataset train;
    Dataset test;
    OodPool pool;
    bool has_pool = false;
};

LoadedData prepare_data(const DataSpec& data, const NoiseSpec& noise,
                        std::uint64_t seed) {
    LoadedData out;
    if (!data.data_dir.empty()) {
        out.train = load_dataset(data.data_dir);
        out.test = data.test_dir.empty() ? out.train : load_dataset(data.test_dir);
        if (!noise.pool_path.empty()) {
            out.pool = load_pool(noise.pool_path);
            out.has_pool = true;
        }
    } else {
        SyntheticSpec spec{data.classes, data.per_class, data.dims, data.separation,
                           data.ood_classes, data.ood_per_class};
        bool needs_pool = noise.type == "uniform-ood" || noise.type == "nonuniform-ood";
        if (needs_pool && spec.ood_classes == 0) {
            spec.ood_classes = 5;
            spec.ood_per_class = data.per_class;
        }
        SyntheticData gen = generate_synthetic(spec, seed);
        out.train = std::move(gen.dataset);
        out.pool = std::move(gen.pool);
        out.has_pool = spec.ood_classes > 0;
        SyntheticSpec test_spec = spec;
        test_spec.per_class = data.test_per_class;
        test_spec.ood_classes = 0;
        test_spec.ood_per_class = 0;
        // shared means seed -> same class geometry, fresh sample stream
        out.test =
            generate_synthetic(test_spec, derive_seed(seed, "test-split"), seed).dataset;
    }
    out.train = apply_noise(out.train, noise, seed, out.has_pool ? &out.pool : nullptr);
    return out;
}

int run_one(const DataSpec& data, NoiseSpec noise, RunConfig cfg, const fs::path& out) {
    LoadedData loaded = prepare_data(data, noise, cfg.seed);
    if (cfg.mode == RunMode::ForwardOracle && !cfg.oracle_transition)
        cfg.oracle_transition = true_transition(noise, loaded.train.num_classes);
    RunResult result = run_pipeline(loaded.train, loaded.test, cfg);
    write_report(out, result.report, loaded.train);
    return 0;
}

void emit_roc_csv(const fs::path& file, const RocResult& r) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "threshold,fpr,tpr\n";
    for (const auto& p : r.points) csv << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
    std::ofstream(file) << csv.str();
}

int eval_report(const fs::path& report_dir) {
    std::ifstream in(report_dir / "report.json");
    if (!in) throw std::runtime_error("missing report.json in " + report_dir.string());
    json report = json::parse(in);

    // ground truth comes from the samples table
    std::ifstream samples(report_dir / "samples.csv");
    if (!samples) throw std::runtime_error("missing samples.csv");
    std::string line;
    std::getline(samples, line);  // header
    std::vector<std::uint8_t> noisy;
    while (std::getline(samples, line)) {
        std::stringstream row(line);
        std::string field;
        for (int i = 0; i < 4; ++i) std::getline(row, field, ',');
        noisy.push_back(field == "0");
    }

    std::ostringstream metrics;
    metrics.precision(17);
    metrics << "stage,auc,tpr,fpr,labeled,unlabeled\n";
    for (const std::string stage : {"stage1", "stage2"}) {
        if (!report.contains(stage)) continue;
        auto posts = report[stage]["posteriors"].get<std::vector<double>>();
        DetectionOutcome outcome;
        outcome.scores = Eigen::Map<Vector>(posts.data(), posts.size());
        outcome.is_noisy = noisy;
        outcome.threshold = report[stage]["gamma"].get<double>();
        RocResult r = roc(outcome);
        emit_roc_csv(report_dir / ("roc_" + stage + ".csv"), r);
        metrics << stage << ',' << r.auc << ',' << r.operating_tpr << ','
                << r.operating_fpr << ',' << report[stage]["labeled_size"].get<long>()
                << ',' << report[stage]["unlabeled_size"].get<long>() << '\n';
    }
    std::ofstream(report_dir / "metrics.csv") << metrics.str();
    std::cout << metrics.str();
    return 0;
}

// --config file values are applied before parsing, so explicit flags win.
void preload_config(int argc, char** argv, RunConfig& cfg, NoiseSpec& noise) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) != "--config") continue;
        std::ifstream in(argv[i + 1]);
        if (!in) throw std::runtime_error(std::string("cannot read config ") + argv[i + 1]);
        json j = json::parse(in);
        if (j.contains("mode")) cfg.mode = parse_run_mode(j["mode"]);
        if (j.contains("warmup_epochs")) cfg.warmup_epochs = j["warmup_epochs"];
        if (j.contains("stage1_epochs")) cfg.stage1_epochs = j["stage1_epochs"];
        if (j.contains("stage2_epochs")) cfg.stage2_epochs = j["stage2_epochs"];
        if (j.contains("final_epochs")) cfg.final_epochs = j["final_epochs"];
        if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"];
        if (j.contains("momentum")) cfg.momentum = j["momentum"];
        if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"];
        if (j.contains("lambda1")) cfg.lambda_entropy = j["lambda1"];
        if (j.contains("lambda2")) cfg.lambda_balance = j["lambda2"];
        if (j.contains("gamma1")) cfg.gamma1 = j["gamma1"];
        if (j.contains("gamma2")) cfg.gamma2 = j["gamma2"];
        if (j.contains("mixup_alpha")) cfg.mixup_alpha = j["mixup_alpha"];
        if (j.contains("batch_size")) cfg.batch_size = j["batch_size"];
        if (j.contains("seed")) cfg.seed = j["seed"];
        if (j.contains("noise")) noise.type = j["noise"];
        if (j.contains("rate")) noise.rate = j["rate"];
    }
}

void add_pipeline_flags(CLI::App* cmd, RunConfig& cfg, std::string& mode,
                        NoiseSpec& noise, DataSpec& data, std::string& out,
                        std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file (flags override it)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--mode", mode, "drpl|ce-baseline|mixup-baseline|oracle-ssl|forward-oracle");
    cmd->add_option("--noise", noise.type,
                    "uniform-id|nonuniform-id|uniform-ood|nonuniform-ood|pairwise");
    cmd->add_option("--rate", noise.rate, "noise rate in [0,1)");
    cmd->add_option("--transition", noise.transition_path, "transition matrix JSON");
    cmd->add_option("--ood-pool", noise.pool_path, "OOD pool directory");
    cmd->add_option("--flip-map", noise.flip_map_path, "pairwise flip map JSON");
    cmd->add_option("--gamma1", cfg.gamma1);
    cmd->add_option("--gamma2", cfg.gamma2);
    cmd->add_option("--warmup", cfg.warmup_epochs);
    cmd->add_option("--epochs-stage1", cfg.stage1_epochs);
    cmd->add_option("--epochs-stage2", cfg.stage2_epochs);
    cmd->add_option("--epochs-stage3", cfg.final_epochs);
    cmd->add_option("--lambda1", cfg.lambda_entropy);
    cmd->add_option("--lambda2", cfg.lambda_balance);
    cmd->add_option("--mixup-alpha", cfg.mixup_alpha);
    cmd->add_option("--lr", cfg.learning_rate);
    cmd->add_option("--momentum", cfg.momentum);
    cmd->add_option("--weight-decay", cfg.weight_decay);
    cmd->add_option("--batch", cfg.batch_size);
    cmd->add_option("--seed", cfg.seed);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->add_option("--data", data.data_dir, "dataset directory (default: synthetic)");
    cmd->add_option("--test", data.test_dir, "test dataset directory");
    cmd->add_option("--classes", data.classes);
    cmd->add_option("--per-class", data.per_class);
    cmd->add_option("--test-per-class", data.test_per_class);
    cmd->add_option("--dims", data.dims);
    cmd->add_option("--separation", data.separation);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DRPL: label-noise detection and robust learning pipeline"};
    app.require_subcommand(1);

    RunConfig cfg;
    NoiseSpec noise;
    DataSpec data;
    // empty mode = not given on the command line; the config file (or the
    // RunConfig default) then decides
    std::string out, mode, config_path;

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic blob dataset");
    SyntheticSpec gen_spec;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    bool gen_no_truth = false;
    gen->add_option("--classes", gen_spec.classes);
    gen->add_option("--per-class", gen_spec.per_class);
    gen->add_option("--dims", gen_spec.dims);
    gen->add_option("--separation", gen_spec.separation);
    gen->add_option("--ood-classes", gen_spec.ood_classes);
    gen->add_option("--ood-per-class", gen_spec.ood_per_class);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out)->required();
    gen->add_flag("--no-truth", gen_no_truth, "skip the ground-truth manifest");

    // corrupt
    auto* corrupt = app.add_subcommand("corrupt", "apply a noise spec to a dataset");
    std::string corrupt_in;
    std::uint64_t corrupt_seed = 0;
    corrupt->add_option("--in", corrupt_in)->required()->check(CLI::ExistingDirectory);
    corrupt->add_option("--noise", noise.type);
    corrupt->add_option("--rate", noise.rate);
    corrupt->add_option("--transition", noise.transition_path);
    corrupt->add_option("--ood-pool", noise.pool_path);
    corrupt->add_option("--flip-map", noise.flip_map_path);
    corrupt->add_option("--seed", corrupt_seed);
    corrupt->add_option("--out", out)->required();

    // run
    auto* run = app.add_subcommand("run", "execute one pipeline run");
    add_pipeline_flags(run, cfg, mode, noise, data, out, config_path);

    // eval
    auto* eval = app.add_subcommand("eval", "recompute metrics from a run report");
    std::string eval_dir;
    eval->add_option("--report", eval_dir)->required()->check(CLI::ExistingDirectory);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "grid of runs over rates and seeds");
    std::vector<double> sweep_rates{0.2, 0.4};
    std::vector<std::uint64_t> sweep_seeds{0, 1};
    add_pipeline_flags(sweep, cfg, mode, noise, data, out, config_path);
    sweep->add_option("--rates", sweep_rates, "noise rates to sweep");
    sweep->add_option("--seeds", sweep_seeds, "seeds to sweep");

    try {
        preload_config(argc, argv, cfg, noise);
        app.parse(argc, argv);

        if (*gen) {
            SyntheticData generated = generate_synthetic(gen_spec, gen_seed);
            save_dataset(gen_out, generated.dataset, !gen_no_truth);
            if (gen_spec.ood_classes > 0)
                save_pool(fs::path(gen_out) / "ood_pool", generated.pool);
            return 0;
        }
        if (*corrupt) {
            Dataset ds = load_dataset(corrupt_in);
            OodPool pool;
            bool has_pool = !noise.pool_path.empty();
            if (has_pool) pool = load_pool(noise.pool_path);
            Dataset corrupted =
                apply_noise(ds, noise, corrupt_seed, has_pool ? &pool : nullptr);
            // truth goes to the manifest only, never into the training payload
            save_dataset(out, corrupted, true);
            return 0;
        }
        if (*run) {
            if (!mode.empty()) cfg.mode = parse_run_mode(mode);
            return run_one(data, noise, cfg, out);
        }
        if (*eval) return eval_report(eval_dir);
        if (*sweep) {
            if (!mode.empty()) cfg.mode = parse_run_mode(mode);
            int workers = 1;
            if (const char* env = std::getenv("DRPL_THREADS"))
                workers = std::max(1, std::atoi(env));

            struct Job {
                double rate;
                std::uint64_t seed;
            };
            std::vector<Job> jobs;
            for (double r : sweep_rates)
                for (std::uint64_t s : sweep_seeds) jobs.push_back({r, s});

            std::atomic<std::size_t> next{0};
            std::atomic<int> failures{0};
            auto worker = [&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) {
                    RunConfig job_cfg = cfg;
                    NoiseSpec job_noise = noise;
                    job_cfg.seed = jobs[i].seed;
                    job_noise.rate = jobs[i].rate;
                    std::ostringstream dir;
                    dir << noise.type << "_r" << jobs[i].rate << "_seed" << jobs[i].seed;
                    try {
                        run_one(data, job_noise, job_cfg, fs::path(out) / dir.str());
                    } catch (const std::exception& e) {
                        std::cerr << dir.str() << ": " << e.what() << '\n';
                        ++failures;
                    }
                }
            };
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
            return failures == 0 ? 0 : 1;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
