#include "drpl/bmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drpl {

namespace {

constexpr double kShapeMin = 0.5, kShapeMax = 300.0;
constexpr double kWeightFloor = 1e-3;
constexpr double kLossClamp = 1e-4;

double log_beta_pdf(double x, double a, double b) {
    double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log(1.0 - x) - lbeta;
}

// Weighted method-of-moments estimate, clamped for stability.
struct Moments {
    double alpha, beta;
    bool valid;
};

Moments shapes_from_moments(const Vector& x, const Vector& w) {
    double wsum = w.sum();
    if (wsum <= 0.0) return {1.0, 1.0, false};
    double m = w.dot(x) / wsum;
    double v = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double d = x[i] - m;
        v += w[i] * d * d;
    }
    v /= wsum;
    if (m <= 0.0 || m >= 1.0) return {1.0, 1.0, false};
    // a zero-spread cluster (all values at one clamp point) still yields a
    // sharply concentrated component instead of an invalid fit
    v = std::max(v, 1e-6);
    double common = m * (1.0 - m) / v - 1.0;
    if (common <= 0.0) return {1.0, 1.0, false};
    double a = std::clamp(m * common, kShapeMin, kShapeMax);
    double b = std::clamp((1.0 - m) * common, kShapeMin, kShapeMax);
    return {a, b, true};
}

}  // namespace

Vector normalize_losses(const Vector& raw) {
    if (raw.size() < 2) throw std::invalid_argument("normalize_losses: need >= 2 values");
    if (!raw.allFinite()) throw std::invalid_argument("normalize_losses: non-finite input");
    double lo = raw.minCoeff(), hi = raw.maxCoeff();
    Vector out(raw.size());
    if (hi - lo < 1e-12) {
        out.setConstant(0.5);
        return out;
    }
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        double v = (raw[i] - lo) / (hi - lo);
        out[i] = std::clamp(v, kLossClamp, 1.0 - kLossClamp);
    }
    return out;
}

BetaMixture fit_beta_mixture(const Vector& losses, int iterations) {
    const Eigen::Index n = losses.size();
    if (n < 10) throw std::invalid_argument("fit_beta_mixture: need >= 10 samples");
    for (Eigen::Index i = 0; i < n; ++i)
        if (losses[i] <= 0.0 || losses[i] >= 1.0)
            throw std::invalid_argument("fit_beta_mixture: losses must lie in (0,1)");

    // Median-split initialization: below median -> component 1 (clean).
    std::vector<double> sorted(losses.data(), losses.data() + n);
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    double median = sorted[n / 2];
    Vector resp2(n);
    for (Eigen::Index i = 0; i < n; ++i) resp2[i] = losses[i] > median ? 1.0 : 0.0;

    BetaMixture bmm;
    // The MoM M-step only approximates the MLE, so the likelihood can fall
    // after an early peak; keep the best iterate seen.
    BetaMixture best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < iterations; ++it) {
        // M-step
        Vector resp1 = Vector::Ones(n) - resp2;
        bmm.weight1 = std::max(resp1.mean(), kWeightFloor);
        bmm.weight2 = std::max(resp2.mean(), kWeightFloor);
        if (resp1.mean() < kWeightFloor || resp2.mean() < kWeightFloor)
            bmm.degenerate = true;
        double wsum = bmm.weight1 + bmm.weight2;
        bmm.weight1 /= wsum;
        bmm.weight2 /= wsum;

        Moments m1 = shapes_from_moments(losses, resp1);
        Moments m2 = shapes_from_moments(losses, resp2);
        if (!m1.valid || !m2.valid) bmm.degenerate = true;
        if (m1.valid) { bmm.alpha1 = m1.alpha; bmm.beta1 = m1.beta; }
        if (m2.valid) { bmm.alpha2 = m2.alpha; bmm.beta2 = m2.beta; }

        // E-step
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double l1 = std::log(bmm.weight1) + log_beta_pdf(losses[i], bmm.alpha1, bmm.beta1);
            double l2 = std::log(bmm.weight2) + log_beta_pdf(losses[i], bmm.alpha2, bmm.beta2);
            double mx = std::max(l1, l2);
            double z = std::exp(l1 - mx) + std::exp(l2 - mx);
            resp2[i] = std::exp(l2 - mx) / z;
            ll += mx + std::log(z);
        }
        bmm.log_likelihood = ll;
        bmm.iterations = it + 1;
        if (ll > best_ll) {
            best_ll = ll;
            best = bmm;
        }
    }
    best.iterations = bmm.iterations;
    best.degenerate = best.degenerate || bmm.degenerate;
    bmm = best;

    if (bmm.mean1() > bmm.mean2()) {
        std::swap(bmm.weight1, bmm.weight2);
        std::swap(bmm.alpha1, bmm.alpha2);
        std::swap(bmm.beta1, bmm.beta2);
    }
    if (std::abs(bmm.mean1() - bmm.mean2()) < 1e-2) bmm.degenerate = true;
    return bmm;
}

PosteriorVector posterior(const BetaMixture& bmm, const Vector& losses) {
    PosteriorVector out;
    out.losses = losses;
    out.noisy_probability = Vector(losses.size());
    for (Eigen::Index i = 0; i < losses.size(); ++i) {
        double x = std::clamp(losses[i], kLossClamp, 1.0 - kLossClamp);
        out.losses[i] = x;
        double l1 = std::log(bmm.weight1) + log_beta_pdf(x, bmm.alpha1, bmm.beta1);
        double l2 = std::log(bmm.weight2) + log_beta_pdf(x, bmm.alpha2, bmm.beta2);
        double mx = std::max(l1, l2);
        out.noisy_probability[i] =
            std::exp(l2 - mx) / (std::exp(l1 - mx) + std::exp(l2 - mx));
    }
    return out;
}

SplitResult split(const Dataset& ds, const PosteriorVector& post, double gamma) {
    if (post.noisy_probability.size() != ds.size())
        throw std::invalid_argument("split: posterior length != dataset size");
    if (gamma <= 0.0 || gamma >= 1.0)
        throw std::invalid_argument("split: gamma must be in (0,1)");
    SplitResult res;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        if (post.noisy_probability[i] <= gamma) {
            res.labeled_ids.push_back(static_cast<int>(i));
            res.labeled_labels.push_back(ds.observed[i]);
        } else {
            res.unlabeled_ids.push_back(static_cast<int>(i));
        }
    }
    return res;
}

}  // namespace drpl
