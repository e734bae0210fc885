#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "drpl/io.hpp"
#include "drpl/synthetic.hpp"

using namespace drpl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() /
                     ("drpl_test_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

}  // namespace

TEST_CASE("dataset save/load round trip is the identity") {
    TempDir tmp;
    SyntheticData data = generate_synthetic({3, 20, 5, 6.0, 0, 0}, 42);
    Dataset& ds = data.dataset;
    ds.observed[7] = 2;  // make observed differ from truth somewhere
    ds.clean[7] = 0;
    save_dataset(tmp.path, ds, true);
    Dataset loaded = load_dataset(tmp.path);

    CHECK(loaded.num_classes == 3);
    CHECK(loaded.observed == ds.observed);
    CHECK(loaded.true_labels == ds.true_labels);
    CHECK(loaded.clean == ds.clean);
    // payload is f32: values survive exactly after one save/load cycle
    TempDir tmp2;
    save_dataset(tmp2.path, loaded, true);
    Dataset again = load_dataset(tmp2.path);
    CHECK(again.features == loaded.features);
}

TEST_CASE("load_dataset without a truth manifest treats observations as truth") {
    TempDir tmp;
    SyntheticData data = generate_synthetic({2, 10, 3, 6.0, 0, 0}, 1);
    save_dataset(tmp.path, data.dataset, false);
    CHECK_FALSE(fs::exists(tmp.path / "truth.json"));
    Dataset loaded = load_dataset(tmp.path);
    CHECK(loaded.true_labels == loaded.observed);
    CHECK(std::count(loaded.clean.begin(), loaded.clean.end(), 1) == loaded.size());
}

TEST_CASE("load_dataset: truncated payload is a length-mismatch error") {
    TempDir tmp;
    SyntheticData data = generate_synthetic({2, 10, 3, 6.0, 0, 0}, 2);
    save_dataset(tmp.path, data.dataset, false);
    fs::resize_file(tmp.path / "features.bin", 10);
    CHECK_THROWS_WITH_AS((void)load_dataset(tmp.path),
                         doctest::Contains("header declares"), std::runtime_error);
}

TEST_CASE("load_dataset: label exceeding the declared class count is rejected") {
    TempDir tmp;
    SyntheticData data = generate_synthetic({3, 10, 3, 6.0, 0, 0}, 3);
    save_dataset(tmp.path, data.dataset, false);
    // shrink the declared class count below the max label
    std::ofstream(tmp.path / "meta.json")
        << R"({"n": 30, "d": 3, "c": 2, "dtype": "f32"})";
    CHECK_THROWS_AS((void)load_dataset(tmp.path), std::runtime_error);
}

TEST_CASE("ood pool round trip") {
    TempDir tmp;
    SyntheticData data = generate_synthetic({2, 10, 4, 6.0, 3, 5}, 4);
    save_pool(tmp.path, data.pool);
    OodPool loaded = load_pool(tmp.path);
    CHECK(loaded.num_classes == 3);
    CHECK(loaded.source_class == data.pool.source_class);
}

TEST_CASE("transition matrix JSON round trip and validation") {
    TempDir tmp;
    TransitionMatrix t;
    t.rows = Matrix(2, 2);
    t.rows << 0.25, 0.75, 0.5, 0.5;
    save_transition(tmp.path / "t.json", t);
    TransitionMatrix loaded = load_transition(tmp.path / "t.json");
    CHECK(loaded.rows == t.rows);

    std::ofstream(tmp.path / "bad.json") << R"({"rows": [[0.5, 0.2]], "classes": [0]})";
    CHECK_THROWS_AS((void)load_transition(tmp.path / "bad.json"), std::invalid_argument);
}

TEST_CASE("flip map JSON loading") {
    TempDir tmp;
    std::ofstream(tmp.path / "flips.json") << R"({"flips": {"9": 1, "2": 0}})";
    auto flips = load_flip_map(tmp.path / "flips.json");
    CHECK(flips.size() == 2);
    CHECK(flips.at(9) == 1);
    CHECK(flips.at(2) == 0);
}

TEST_CASE("mixture serialization carries the fitted parameters") {
    BetaMixture bmm;
    bmm.alpha1 = 2.0;
    bmm.beta1 = 8.0;
    bmm.iterations = 10;
    std::string json = mixture_to_json(bmm);
    CHECK(json.find("\"alphas\"") != std::string::npos);
    CHECK(json.find("\"iterations\":10") != std::string::npos);
}

TEST_CASE("write_report emits report.json plus CSV side files") {
    TempDir tmp;
    SyntheticData train = generate_synthetic({3, 30, 4, 8.0, 0, 0}, 7);
    RunConfig cfg;
    cfg.warmup_epochs = 2;
    cfg.stage1_epochs = 5;
    cfg.stage2_epochs = 4;
    cfg.final_epochs = 4;
    cfg.gamma1 = 0.3;
    cfg.batch_size = 32;
    cfg.hidden_sizes = {16, 8};
    RunResult res = run_pipeline(train.dataset, train.dataset, cfg);
    write_report(tmp.path, res.report, train.dataset);

    CHECK(fs::exists(tmp.path / "report.json"));
    CHECK(fs::exists(tmp.path / "epochs.csv"));
    CHECK(fs::exists(tmp.path / "samples.csv"));

    std::ifstream samples(tmp.path / "samples.csv");
    std::string header;
    std::getline(samples, header);
    CHECK(header ==
          "id,true_label,observed_label,clean,loss_stage1,post_stage1,"
          "loss_stage2,post_stage2,final_set");
    int rows = 0;
    for (std::string line; std::getline(samples, line);) ++rows;
    CHECK(rows == train.dataset.size());
}
