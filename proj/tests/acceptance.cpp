// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier end-to-end runs share results across criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "drpl/io.hpp"
#include "drpl/noise.hpp"
#include "drpl/synthetic.hpp"

using namespace drpl;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.c_str());
    if (!pass) ++failures;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// Shared benchmark setup: 4-class blobs, 2000 train samples, 16 dims,
// separation 6, held-out test split from the same class means.
struct Bench {
    Dataset train_clean;
    Dataset test;
};

Bench make_bench(std::uint64_t seed) {
    SyntheticSpec spec{4, 500, 16, 6.0, 0, 0};
    Bench b;
    b.train_clean = generate_synthetic(spec, seed).dataset;
    SyntheticSpec test_spec = spec;
    test_spec.per_class = 250;
    // shared means seed: the held-out split sees the same class geometry
    b.test = generate_synthetic(test_spec, derive_seed(seed, "test-split"), seed).dataset;
    return b;
}

TransitionMatrix dominant_flip_transition(int classes) {
    TransitionMatrix t;
    t.rows = Matrix::Zero(classes, classes);
    for (int c = 0; c < classes; ++c) {
        t.rows(c, (c + 1) % classes) = 0.7;
        t.rows(c, (c + 2) % classes) = 0.3;
    }
    return t;
}

TransitionMatrix uniform_true_transition(int classes, double rate) {
    TransitionMatrix t;
    t.rows = Matrix::Constant(classes, classes, rate / (classes - 1));
    t.rows.diagonal().setConstant(1.0 - rate);
    return t;
}

RunConfig desk_config(std::uint64_t seed, RunMode mode) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.mode = mode;
    return cfg;  // spec defaults: 40 (q=15) / 60 / 80, lr 0.1, gamma1 0.05
}

struct CachedRun {
    RunReport report;
    Classifier model;
    double seconds = 0.0;
};

std::map<std::string, CachedRun> run_cache;

const CachedRun& cached_run(RunMode mode, const std::string& noise_tag, double rate,
                            std::uint64_t seed) {
    std::string key = to_string(mode) + "/" + noise_tag + "/" + std::to_string(rate) +
                      "/" + std::to_string(seed);
    auto it = run_cache.find(key);
    if (it != run_cache.end()) return it->second;

    Bench bench = make_bench(seed);
    Rng noise_rng = make_rng(seed, "noise");
    Dataset noisy =
        noise_tag == "nonuniform-id"
            ? inject_nonuniform_id(bench.train_clean, dominant_flip_transition(4), rate,
                                   noise_rng)
            : inject_uniform_id(bench.train_clean, rate, noise_rng);

    RunConfig cfg = desk_config(seed, mode);
    if (mode == RunMode::ForwardOracle)
        cfg.oracle_transition = uniform_true_transition(4, rate);

    auto start = Clock::now();
    RunResult res = run_pipeline(noisy, bench.test, cfg);
    CachedRun entry{std::move(res.report), std::move(res.model),
                    std::chrono::duration<double>(Clock::now() - start).count()};
    return run_cache.emplace(key, std::move(entry)).first->second;
}

RocResult stage_roc(const StageDetection& det, const Dataset& noisy) {
    DetectionOutcome outcome;
    outcome.scores = det.noisy_posterior;
    outcome.is_noisy.resize(noisy.size());
    for (Eigen::Index i = 0; i < noisy.size(); ++i) outcome.is_noisy[i] = !noisy.clean[i];
    outcome.threshold = det.gamma;
    return roc(outcome);
}

void criterion1_bmm_recovery() {
    Rng rng = make_rng(1234, "bmm");
    Vector samples(5000);
    for (Eigen::Index i = 0; i < 5000; ++i) {
        double draw =
            i % 2 == 0 ? beta_sample(rng, 2.0, 8.0) : beta_sample(rng, 8.0, 2.0);
        samples[i] = std::clamp(draw, 1e-4, 1.0 - 1e-4);
    }
    auto start = Clock::now();
    BetaMixture bmm = fit_beta_mixture(samples, 10);
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    bool pass = std::abs(bmm.mean1() - 0.2) <= 0.05 &&
                std::abs(bmm.mean2() - 0.8) <= 0.05 &&
                std::abs(bmm.weight1 - 0.5) <= 0.05 &&
                std::abs(bmm.weight2 - 0.5) <= 0.05 && secs < 1.0;
    report(1, "BMM recovery", pass,
           "means " + fmt(bmm.mean1()) + "/" + fmt(bmm.mean2()) + ", weights " +
               fmt(bmm.weight1) + "/" + fmt(bmm.weight2) + ", " + fmt(secs) + "s");
}

void criterion2_gradients() {
    Rng rng = make_rng(77, "init");
    Classifier m = make_classifier(6, {10, 8}, 4, rng);
    std::normal_distribution<double> n;
    Batch b;
    b.features = Matrix::NullaryExpr(16, 6, [&] { return n(rng); });
    b.targets = Matrix::Zero(16, 4);
    for (int i = 0; i < 16; ++i) b.targets(i, i % 4) = 1.0;
    b.sample_ids.resize(16);
    LossSpec spec{1.0, 1.0, {}};

    Classifier stepped = m;
    OptState opt = OptState::for_model(stepped, 1.0, 0.0, 0.0);
    backward_and_step(stepped, opt, b, spec);

    std::vector<double*> slots, stepped_slots;
    for (auto& l : m.layers) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) slots.push_back(l.weight.data() + i);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) slots.push_back(l.bias.data() + i);
    }
    for (auto& l : stepped.layers) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i)
            stepped_slots.push_back(l.weight.data() + i);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i)
            stepped_slots.push_back(l.bias.data() + i);
    }

    const double h = 1e-5;
    double worst = 0.0;
    Rng pick = make_rng(7, "pick");
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t k = uniform_index(pick, slots.size());
        double analytic = *slots[k] - *stepped_slots[k];
        double saved = *slots[k];
        *slots[k] = saved + h;
        double up = training_loss(m, b, spec);
        *slots[k] = saved - h;
        double down = training_loss(m, b, spec);
        *slots[k] = saved;
        double numeric = (up - down) / (2.0 * h);
        double rel = std::abs(analytic - numeric) /
                     std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
    }
    report(2, "gradient vs finite differences", worst <= 1e-4,
           "worst relative error " + fmt(worst));
}

void criterion3_injection_exactness() {
    Dataset ds = generate_synthetic({5, 123, 4, 6.0, 0, 0}, 3).dataset;
    OodPool pool;
    pool.features = Matrix::Constant(40, 4, -2.0);
    pool.num_classes = 4;
    for (int i = 0; i < 40; ++i) pool.source_class.push_back(i / 10);
    TransitionMatrix t_id = dominant_flip_transition(5);
    TransitionMatrix t_ood;
    t_ood.rows = Matrix::Constant(5, 4, 0.25);
    std::map<int, int> flips{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}};

    long checks = 0, bad = 0;
    for (double rate : {0.1, 0.3, 0.5, 0.8}) {
        int expected = static_cast<int>(std::lround(rate * 123));
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng = make_rng(seed, "noise");
            Dataset outs[] = {inject_uniform_id(ds, rate, rng),
                              inject_nonuniform_id(ds, t_id, rate, rng),
                              inject_uniform_ood(ds, pool, rate, rng),
                              inject_nonuniform_ood(ds, pool, t_ood, rate, rng),
                              inject_pairwise(ds, flips, rate, rng)};
            for (const Dataset& out : outs) {
                std::vector<int> noisy_per_class(5, 0);
                for (Eigen::Index i = 0; i < out.size(); ++i) {
                    if (!out.clean[i]) noisy_per_class[out.true_labels[i]]++;
                    ++checks;
                    if (out.observed[i] != ds.observed[i] &&
                        out.observed[i] == out.true_labels[i])
                        ++bad;  // an ID flip landed on the true class
                }
                for (int c = 0; c < 5; ++c)
                    if (noisy_per_class[c] != expected) ++bad;
            }
        }
    }
    report(3, "noise-injection exactness", bad == 0,
           std::to_string(checks) + " checks, " + std::to_string(bad) + " violations");
}

void criterion4_detection() {
    const auto& run = cached_run(RunMode::Drpl, "uniform-id", 0.4, 0);
    Bench bench = make_bench(0);
    Rng noise_rng = make_rng(0, "noise");
    Dataset noisy = inject_uniform_id(bench.train_clean, 0.4, noise_rng);
    RocResult r = stage_roc(*run.report.stage2, noisy);
    bool pass = r.auc >= 0.95 && r.operating_tpr >= 0.85 && r.operating_fpr <= 0.15 &&
                run.seconds < 120.0;
    report(4, "end-to-end stage-2 detection", pass,
           "AUC " + fmt(r.auc) + ", TPR " + fmt(r.operating_tpr) + ", FPR " +
               fmt(r.operating_fpr) + ", " + fmt(run.seconds) + "s");
}

void criterion5_relabeling_separation() {
    Bench bench = make_bench(0);
    TransitionMatrix t = dominant_flip_transition(4);
    Rng noise_rng = make_rng(0, "noise");
    Dataset noisy = inject_nonuniform_id(bench.train_clean, t, 0.5, noise_rng);

    RunConfig cfg = desk_config(0, RunMode::Drpl);
    Stage1Result s1 = stage1_relabel(noisy, cfg);

    DetectionOutcome relabel;
    relabel.scores = s1.detection.raw_losses;
    relabel.is_noisy.resize(noisy.size());
    for (Eigen::Index i = 0; i < noisy.size(); ++i) relabel.is_noisy[i] = !noisy.clean[i];
    double relabel_auc = roc(relabel).auc;

    // plain CE run: score by its final-epoch per-sample training loss
    const auto& ce = cached_run(RunMode::CeBaseline, "nonuniform-id", 0.5, 0);
    Matrix probs = forward(ce.model, noisy.features);
    Matrix onehot = Matrix::Zero(noisy.size(), 4);
    for (Eigen::Index i = 0; i < noisy.size(); ++i) onehot(i, noisy.observed[i]) = 1.0;
    DetectionOutcome plain = relabel;
    plain.scores = cross_entropy(probs, onehot).per_sample;
    double plain_auc = roc(plain).auc;

    bool pass = relabel_auc >= plain_auc + 0.05;
    report(5, "relabeling reveals separation", pass,
           "relabel AUC " + fmt(relabel_auc) + " vs plain CE AUC " + fmt(plain_auc));
}

void criterion6_beats_baselines() {
    std::vector<double> drpl, ce, mix;
    for (std::uint64_t seed : {0, 1, 2}) {
        drpl.push_back(cached_run(RunMode::Drpl, "uniform-id", 0.4, seed)
                           .report.last_test_accuracy);
        ce.push_back(cached_run(RunMode::CeBaseline, "uniform-id", 0.4, seed)
                         .report.last_test_accuracy);
        mix.push_back(cached_run(RunMode::MixupBaseline, "uniform-id", 0.4, seed)
                          .report.last_test_accuracy);
    }
    double d = median3(drpl), c = median3(ce), m = median3(mix);
    bool pass = d >= c + 0.05 && d >= m;
    report(6, "pipeline beats baselines", pass,
           "drpl " + fmt(d) + ", ce " + fmt(c) + ", mixup " + fmt(m));
}

void criterion7_oracle_ordering() {
    std::vector<double> oracle, fwd;
    for (std::uint64_t seed : {0, 1, 2}) {
        oracle.push_back(cached_run(RunMode::OracleSsl, "uniform-id", 0.8, seed)
                             .report.last_test_accuracy);
        fwd.push_back(cached_run(RunMode::ForwardOracle, "uniform-id", 0.8, seed)
                          .report.last_test_accuracy);
    }
    double o = median3(oracle), f = median3(fwd);
    report(7, "oracle-ssl beats forward-oracle", o >= f,
           "oracle-ssl " + fmt(o) + ", forward-oracle " + fmt(f));
}

void criterion8_stability() {
    const auto& drpl = cached_run(RunMode::Drpl, "uniform-id", 0.4, 0).report;
    const auto& ce = cached_run(RunMode::CeBaseline, "uniform-id", 0.4, 0).report;
    double drpl_gap = drpl.best_test_accuracy - drpl.last_test_accuracy;
    double ce_gap = ce.best_test_accuracy - ce.last_test_accuracy;
    bool pass = drpl_gap <= 0.02 && ce_gap > drpl_gap;
    report(8, "best-vs-last stability", pass,
           "drpl gap " + fmt(drpl_gap) + ", ce gap " + fmt(ce_gap));
}

void criterion9_determinism() {
    Bench bench = make_bench(5);
    Rng noise_rng = make_rng(5, "noise");
    Dataset noisy = inject_uniform_id(bench.train_clean, 0.3, noise_rng);

    bool pass = true;
    std::string detail;
    for (RunMode mode : {RunMode::Drpl, RunMode::CeBaseline, RunMode::MixupBaseline,
                         RunMode::OracleSsl, RunMode::ForwardOracle}) {
        RunConfig cfg = desk_config(5, mode);
        // reduced schedule: the property under test is bitwise reproducibility
        cfg.warmup_epochs = 4;
        cfg.stage1_epochs = 10;
        cfg.stage2_epochs = 8;
        cfg.final_epochs = 8;
        cfg.gamma1 = 0.2;
        if (mode == RunMode::ForwardOracle)
            cfg.oracle_transition = uniform_true_transition(4, 0.3);
        std::string a = report_to_json(run_pipeline(noisy, bench.test, cfg).report);
        std::string b = report_to_json(run_pipeline(noisy, bench.test, cfg).report);
        if (a != b) {
            pass = false;
            detail += to_string(mode) + " differs; ";
        }
    }
    report(9, "byte-identical reports per mode", pass,
           pass ? "all 5 modes reproduce" : detail);
}

void criterion10_linear_probe() {
    std::vector<double> drpl_probe, mixup_probe;
    for (std::uint64_t seed : {0, 1, 2}) {
        // fresh target task: blob classes from an unrelated means seed, with
        // train and test sharing that geometry
        Dataset target_train =
            generate_synthetic({4, 120, 16, 6.0, 0, 0}, 9000 + seed).dataset;
        Dataset target_test =
            generate_synthetic({4, 120, 16, 6.0, 0, 0}, 9500 + seed, 9000 + seed).dataset;
        const auto& drpl = cached_run(RunMode::Drpl, "uniform-id", 0.8, seed);
        const auto& mix = cached_run(RunMode::MixupBaseline, "uniform-id", 0.8, seed);
        int depth = drpl.model.hidden_count() - 1;
        drpl_probe.push_back(
            linear_probe(drpl.model, depth, target_train, target_test, {}));
        mixup_probe.push_back(
            linear_probe(mix.model, depth, target_train, target_test, {}));
    }
    double d = median3(drpl_probe), m = median3(mixup_probe);
    report(10, "probe quality under heavy noise", d >= m,
           "drpl probe " + fmt(d) + ", mixup probe " + fmt(m));
}

}  // namespace

int main() {
    criterion1_bmm_recovery();
    criterion2_gradients();
    criterion3_injection_exactness();
    try {
        criterion4_detection();
    } catch (const std::exception& e) {
        report(4, "end-to-end stage-2 detection", false, e.what());
    }
    try {
        criterion5_relabeling_separation();
    } catch (const std::exception& e) {
        report(5, "relabeling reveals separation", false, e.what());
    }
    try {
        criterion6_beats_baselines();
    } catch (const std::exception& e) {
        report(6, "pipeline beats baselines", false, e.what());
    }
    try {
        criterion7_oracle_ordering();
    } catch (const std::exception& e) {
        report(7, "oracle-ssl beats forward-oracle", false, e.what());
    }
    try {
        criterion8_stability();
    } catch (const std::exception& e) {
        report(8, "best-vs-last stability", false, e.what());
    }
    try {
        criterion9_determinism();
    } catch (const std::exception& e) {
        report(9, "byte-identical reports per mode", false, e.what());
    }
    try {
        criterion10_linear_probe();
    } catch (const std::exception& e) {
        report(10, "probe quality under heavy noise", false, e.what());
    }
    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
