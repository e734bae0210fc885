#include "drpl/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace drpl {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary payloads assume a little-endian host");

namespace {

void write_bytes(const fs::path& file, const void* data, std::size_t bytes) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

std::vector<char> read_bytes(const fs::path& file, std::size_t expected) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("missing file: " + file.string());
    auto size = static_cast<std::size_t>(in.tellg());
    if (size != expected)
        throw std::runtime_error(file.string() + ": payload is " + std::to_string(size) +
                                 " bytes, header declares " + std::to_string(expected));
    std::vector<char> buf(size);
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(size));
    return buf;
}

json load_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("missing file: " + file.string());
    return json::parse(in);
}

void dump_json(const fs::path& file, const json& j) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << j.dump(2) << '\n';
}

void save_payload(const fs::path& dir, const Matrix& features,
                  const std::vector<int>& labels, int classes) {
    fs::create_directories(dir);
    json meta = {{"n", features.rows()},
                 {"d", features.cols()},
                 {"c", classes},
                 {"dtype", "f32"}};
    dump_json(dir / "meta.json", meta);

    std::vector<float> f32(features.size());
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        for (Eigen::Index j = 0; j < features.cols(); ++j)
            f32[i * features.cols() + j] = static_cast<float>(features(i, j));
    write_bytes(dir / "features.bin", f32.data(), f32.size() * sizeof(float));

    std::vector<std::uint32_t> u32(labels.begin(), labels.end());
    write_bytes(dir / "labels.bin", u32.data(), u32.size() * sizeof(std::uint32_t));
}

struct Payload {
    Matrix features;
    std::vector<int> labels;
    int classes;
};

Payload load_payload(const fs::path& dir) {
    json meta = load_json(dir / "meta.json");
    const auto n = meta.at("n").get<Eigen::Index>();
    const auto d = meta.at("d").get<Eigen::Index>();
    const int c = meta.at("c").get<int>();
    if (meta.at("dtype").get<std::string>() != "f32")
        throw std::runtime_error(dir.string() + ": unsupported dtype");

    auto fbytes = read_bytes(dir / "features.bin",
                             static_cast<std::size_t>(n) * d * sizeof(float));
    Payload p;
    p.classes = c;
    p.features = Matrix(n, d);
    const float* f32 = reinterpret_cast<const float*>(fbytes.data());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) p.features(i, j) = f32[i * d + j];

    auto lbytes = read_bytes(dir / "labels.bin",
                             static_cast<std::size_t>(n) * sizeof(std::uint32_t));
    const std::uint32_t* u32 = reinterpret_cast<const std::uint32_t*>(lbytes.data());
    p.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (u32[i] >= static_cast<std::uint32_t>(c))
            throw std::runtime_error(dir.string() + ": label " + std::to_string(u32[i]) +
                                     " >= declared class count " + std::to_string(c));
        p.labels[i] = static_cast<int>(u32[i]);
    }
    return p;
}

}  // namespace

void save_dataset(const fs::path& dir, const Dataset& ds, bool write_truth) {
    ds.validate();
    save_payload(dir, ds.features, ds.observed, ds.num_classes);
    if (write_truth) {
        json truth = {{"true_labels", ds.true_labels},
                      {"clean", std::vector<int>(ds.clean.begin(), ds.clean.end())}};
        dump_json(dir / "truth.json", truth);
    }
}

Dataset load_dataset(const fs::path& dir) {
    Payload p = load_payload(dir);
    Dataset ds;
    ds.features = std::move(p.features);
    ds.observed = p.labels;
    ds.num_classes = p.classes;
    ds.ids.resize(ds.size());
    for (Eigen::Index i = 0; i < ds.size(); ++i) ds.ids[i] = i;

    if (fs::exists(dir / "truth.json")) {
        json truth = load_json(dir / "truth.json");
        ds.true_labels = truth.at("true_labels").get<std::vector<int>>();
        auto clean = truth.at("clean").get<std::vector<int>>();
        ds.clean.assign(clean.begin(), clean.end());
    } else {
        // no ground truth available; treat observations as the truth
        ds.true_labels = ds.observed;
        ds.clean.assign(ds.size(), 1);
    }
    ds.validate();
    return ds;
}

void save_pool(const fs::path& dir, const OodPool& pool) {
    pool.validate();
    save_payload(dir, pool.features, pool.source_class, pool.num_classes);
}

OodPool load_pool(const fs::path& dir) {
    Payload p = load_payload(dir);
    OodPool pool;
    pool.features = std::move(p.features);
    pool.source_class = std::move(p.labels);
    pool.num_classes = p.classes;
    pool.validate();
    return pool;
}

TransitionMatrix load_transition(const fs::path& file) {
    json j = load_json(file);
    auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::runtime_error(file.string() + ": no rows");
    TransitionMatrix t;
    t.rows = Matrix(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size())
            throw std::runtime_error(file.string() + ": ragged rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c) t.rows(r, c) = rows[r][c];
    }
    t.validate();
    return t;
}

void save_transition(const fs::path& file, const TransitionMatrix& t,
                     const std::vector<int>& classes) {
    std::vector<std::vector<double>> rows(t.row_count());
    for (int r = 0; r < t.row_count(); ++r)
        for (int c = 0; c < t.col_count(); ++c) rows[r].push_back(t.rows(r, c));
    std::vector<int> cls = classes;
    if (cls.empty()) {
        cls.resize(t.row_count());
        std::iota(cls.begin(), cls.end(), 0);
    }
    json j = {{"rows", rows}, {"classes", cls}};
    dump_json(file, j);
}

std::map<int, int> load_flip_map(const fs::path& file) {
    json j = load_json(file);
    std::map<int, int> flips;
    for (auto& [from, to] : j.at("flips").items())
        flips[std::stoi(from)] = to.get<int>();
    return flips;
}

std::string mixture_to_json(const BetaMixture& bmm) {
    json j = {{"weights", {bmm.weight1, bmm.weight2}},
              {"alphas", {bmm.alpha1, bmm.alpha2}},
              {"betas", {bmm.beta1, bmm.beta2}},
              {"iterations", bmm.iterations},
              {"log_likelihood", bmm.log_likelihood},
              {"degenerate", bmm.degenerate}};
    return j.dump();
}

namespace {

json config_to_json(const RunConfig& cfg) {
    return {{"mode", to_string(cfg.mode)},
            {"warmup_epochs", cfg.warmup_epochs},
            {"stage1_epochs", cfg.stage1_epochs},
            {"stage2_epochs", cfg.stage2_epochs},
            {"final_epochs", cfg.final_epochs},
            {"learning_rate", cfg.learning_rate},
            {"momentum", cfg.momentum},
            {"weight_decay", cfg.weight_decay},
            {"lambda1", cfg.lambda_entropy},
            {"lambda2", cfg.lambda_balance},
            {"gamma1", cfg.gamma1},
            {"gamma2", cfg.gamma2},
            {"mixup_alpha", cfg.mixup_alpha},
            {"batch_size", cfg.batch_size},
            {"hidden_sizes", cfg.hidden_sizes},
            {"seed", cfg.seed}};
}

json stage_to_json(const StageDetection& det) {
    auto vec = [](const Vector& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    return {{"gamma", det.gamma},
            {"mixture", json::parse(mixture_to_json(det.mixture))},
            {"losses", vec(det.raw_losses)},
            {"posteriors", vec(det.noisy_posterior)},
            {"labeled_size", det.sets.labeled_ids.size()},
            {"unlabeled_size", det.sets.unlabeled_ids.size()},
            {"tpr", det.tpr},
            {"fpr", det.fpr}};
}

}  // namespace

std::string report_to_json(const RunReport& report) {
    json j;
    j["config"] = config_to_json(report.config);
    j["dataset_size"] = report.dataset_size;
    j["best_test_accuracy"] = report.best_test_accuracy;
    j["last_test_accuracy"] = report.last_test_accuracy;
    j["best_epoch"] = report.best_epoch;
    json epochs = json::array();
    for (const auto& e : report.epochs)
        epochs.push_back({{"stage", e.stage},
                          {"epoch", e.epoch},
                          {"lr", e.learning_rate},
                          {"train_loss", e.train_loss},
                          {"test_accuracy", e.test_accuracy}});
    j["epochs"] = epochs;
    if (report.stage1) j["stage1"] = stage_to_json(*report.stage1);
    if (report.stage2) j["stage2"] = stage_to_json(*report.stage2);
    j["final_labeled_mask"] = std::vector<int>(report.final_labeled_mask.begin(),
                                               report.final_labeled_mask.end());
    return j.dump(2);
}

void write_report(const fs::path& dir, const RunReport& report, const Dataset& ds) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        out << report_to_json(report) << '\n';
    }

    std::ostringstream epochs;
    epochs << "stage,epoch,lr,train_loss,test_accuracy\n";
    epochs.precision(17);
    for (const auto& e : report.epochs)
        epochs << e.stage << ',' << e.epoch << ',' << e.learning_rate << ','
               << e.train_loss << ',' << e.test_accuracy << '\n';
    write_bytes(dir / "epochs.csv", epochs.str().data(), epochs.str().size());

    std::ostringstream samples;
    samples.precision(17);
    samples << "id,true_label,observed_label,clean,loss_stage1,post_stage1,"
               "loss_stage2,post_stage2,final_set\n";
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        samples << ds.ids[i] << ',' << ds.true_labels[i] << ',' << ds.observed[i] << ','
                << int(ds.clean[i]) << ',';
        if (report.stage1)
            samples << report.stage1->raw_losses[i] << ','
                    << report.stage1->noisy_posterior[i] << ',';
        else
            samples << ",,";
        if (report.stage2)
            samples << report.stage2->raw_losses[i] << ','
                    << report.stage2->noisy_posterior[i] << ',';
        else
            samples << ",,";
        samples << (report.final_labeled_mask[i] ? "labeled" : "unlabeled") << '\n';
    }
    write_bytes(dir / "samples.csv", samples.str().data(), samples.str().size());
}

}  // namespace drpl
