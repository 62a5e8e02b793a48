#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/error.hpp"
#include "hser/features.hpp"
#include "hser/label.hpp"
#include "hser/random.hpp"
#include "hser/text.hpp"

namespace hser {

struct Scaler {
    std::array<double, kFeatureDim> mean{};
    std::array<double, kFeatureDim> std{};
    std::array<bool, kFeatureDim> zero_variance{};

    static constexpr double kMinStd = 1e-8;

    bool any_zero_variance() const {
        return std::any_of(zero_variance.begin(), zero_variance.end(), [](bool b) { return b; });
    }
    FeatureVector transform(const FeatureVector& v) const {
        FeatureVector out;
        for (std::size_t d = 0; d < kFeatureDim; ++d) out[d] = (v[d] - mean[d]) / std[d];
        return out;
    }
    FeatureVector inverse_transform(const FeatureVector& v) const {
        FeatureVector out;
        for (std::size_t d = 0; d < kFeatureDim; ++d) out[d] = v[d] * std[d] + mean[d];
        return out;
    }
};

inline Scaler fit_scaler(const std::vector<FeatureVector>& X) {
    if (X.size() < 2) throw Error(ErrorKind::TooFewSamples, "fit_scaler needs at least 2 vectors");
    Scaler s;
    const auto n = static_cast<double>(X.size());
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        double sum = 0.0;
        for (const auto& v : X) sum += v[d];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& v : X) ss += (v[d] - mean) * (v[d] - mean);
        s.mean[d] = mean;
        const double sd = std::sqrt(ss / n);
        s.zero_variance[d] = !(sd >= Scaler::kMinStd);
        s.std[d] = s.zero_variance[d] ? Scaler::kMinStd : sd;
    }
    return s;
}

/// Linear binary SVM on the dual, solved by SMO with maximal-violating-pair
/// working set selection. Labels are +1/-1.
struct SmoOptions {
    double C = 1.0;
    double tol = 1e-3;
    int max_passes = 100;  // iteration cap = max_passes * n
    std::uint64_t seed = 0;
};

struct SmoResult {
    std::array<double, kFeatureDim> w{};
    double b = 0.0;
    std::vector<double> alpha;  // in input order
    long iterations = 0;
    bool converged = false;
};

namespace smo_detail {

inline double dot(const FeatureVector& a, const std::array<double, kFeatureDim>& b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < kFeatureDim; ++d) acc += a[d] * b[d];
    return acc;
}

}  // namespace smo_detail

inline SmoResult train_binary_smo(const std::vector<FeatureVector>& X, const std::vector<int>& y,
                                  const SmoOptions& opts) {
    const std::size_t n = X.size();
    // Visiting order is a seeded permutation; it decides ties in the pair
    // selection and nothing else.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(opts.seed);
    rng.shuffle(order);

    std::vector<double> alpha(n, 0.0), G(n, -1.0), qd(n);
    std::vector<double> yy(n);
    for (std::size_t t = 0; t < n; ++t) {
        yy[t] = y[order[t]];
        qd[t] = smo_detail::dot(X[order[t]], X[order[t]].values);
    }
    std::array<double, kFeatureDim> w{};
    const double C = opts.C;
    constexpr double kTau = 1e-12;
    auto in_up = [&](std::size_t t) { return (yy[t] > 0 && alpha[t] < C) || (yy[t] < 0 && alpha[t] > 0); };
    auto in_low = [&](std::size_t t) { return (yy[t] > 0 && alpha[t] > 0) || (yy[t] < 0 && alpha[t] < C); };

    SmoResult result;
    const long max_iter = static_cast<long>(std::max(1, opts.max_passes)) * static_cast<long>(std::max<std::size_t>(n, 1));
    long iter = 0;
    for (; iter < max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -yy[t] * G[t];
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i == n || j == n || gmax - gmin < opts.tol) {
            result.converged = true;
            break;
        }
        const FeatureVector& xi = X[order[i]];
        const FeatureVector& xj = X[order[j]];
        double kij = 0.0;
        for (std::size_t d = 0; d < kFeatureDim; ++d) kij += xi[d] * xj[d];
        const double qij = yy[i] * yy[j] * kij;
        const double old_i = alpha[i], old_j = alpha[j];

        if (yy[i] != yy[j]) {
            double quad = qd[i] + qd[j] + 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
            } else {
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
            }
            if (diff > 0) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
            } else {
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
            }
        } else {
            double quad = qd[i] + qd[j] - 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
            } else {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
            }
            if (sum > C) {
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
            } else {
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
            }
        }

        const double di = (alpha[i] - old_i) * yy[i];
        const double dj = (alpha[j] - old_j) * yy[j];
        for (std::size_t d = 0; d < kFeatureDim; ++d) w[d] += di * xi[d] + dj * xj[d];
        for (std::size_t t = 0; t < n; ++t) G[t] = yy[t] * smo_detail::dot(X[order[t]], w) - 1.0;
    }
    result.iterations = iter;

    // Bias from free vectors when there are any, else the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = yy[t] * G[t];
        if (alpha[t] >= C) {
            if (yy[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (yy[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    double rho = 0.0;
    if (n_free > 0) rho = sum_free / n_free;
    else if (std::isfinite(ub) && std::isfinite(lb)) rho = (ub + lb) / 2.0;
    else if (std::isfinite(ub)) rho = ub;
    else if (std::isfinite(lb)) rho = lb;

    result.w = w;
    result.b = -rho;
    result.alpha.assign(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) result.alpha[order[t]] = alpha[t];
    return result;
}

/// Largest KKT violation of a trained binary head, measured on y*f(x).
inline double max_kkt_violation(const std::vector<FeatureVector>& X, const std::vector<int>& y, const SmoResult& r,
                                double C) {
    double worst = 0.0;
    for (std::size_t t = 0; t < X.size(); ++t) {
        const double yf = y[t] * (smo_detail::dot(X[t], r.w) + r.b);
        double v = 0.0;
        if (r.alpha[t] <= 0.0) v = std::max(0.0, 1.0 - yf);
        else if (r.alpha[t] >= C) v = std::max(0.0, yf - 1.0);
        else v = std::abs(yf - 1.0);
        worst = std::max(worst, v);
    }
    return worst;
}

struct PlattParams {
    double a = 0.0;
    double b = 0.0;
};

/// Sigmoid fit P(y=1|f) = 1 / (1 + exp(a*f + b)) by Newton's method with
/// backtracking and smoothed targets.
inline PlattParams fit_platt(const std::vector<double>& decision, const std::vector<int>& y) {
    const std::size_t n = decision.size();
    double prior1 = 0, prior0 = 0;
    for (int v : y) (v > 0 ? prior1 : prior0) += 1;
    const int max_iter = 100;
    const double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;
    const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo_target = 1.0 / (prior0 + 2.0);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = y[i] > 0 ? hi_target : lo_target;

    double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
    auto objective = [&](double a, double b) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fApB = decision[i] * a + b;
            if (fApB >= 0) f += t[i] * fApB + std::log1p(std::exp(-fApB));
            else f += (t[i] - 1) * fApB + std::log1p(std::exp(fApB));
        }
        return f;
    };
    double fval = objective(A, B);
    for (int iter = 0; iter < max_iter; ++iter) {
        double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fApB = decision[i] * A + B;
            double p, q;
            if (fApB >= 0) {
                p = std::exp(-fApB) / (1.0 + std::exp(-fApB));
                q = 1.0 / (1.0 + std::exp(-fApB));
            } else {
                p = 1.0 / (1.0 + std::exp(fApB));
                q = std::exp(fApB) / (1.0 + std::exp(fApB));
            }
            const double d2 = p * q;
            h11 += decision[i] * decision[i] * d2;
            h22 += d2;
            h21 += decision[i] * d2;
            const double d1 = t[i] - p;
            g1 += decision[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < eps && std::abs(g2) < eps) break;
        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;
        double step = 1.0;
        while (step >= min_step) {
            const double newA = A + step * dA, newB = B + step * dB;
            const double newf = objective(newA, newB);
            if (newf < fval + 0.0001 * step * gd) {
                A = newA;
                B = newB;
                fval = newf;
                break;
            }
            step /= 2.0;
        }
        if (step < min_step) break;
    }
    return {A, B};
}

struct SvmHead {
    EmotionLabel label = EmotionLabel::calm;
    std::array<double, kFeatureDim> w{};
    double b = 0.0;
    PlattParams platt;
    long iterations = 0;
    bool converged = false;
};

struct TrainOptions {
    double C = 1.0;
    double tol = 1e-3;
    int max_passes = 100;
    std::uint64_t seed = 0;
};

struct SvmModel {
    std::array<SvmHead, kNumClasses> heads;  // canonical class order
    Scaler scaler;
    TrainOptions training;
    std::size_t n_train = 0;
};

struct MlEvidence {
    EmotionLabel label = EmotionLabel::calm;
    double confidence = 0.0;
    std::array<double, kNumClasses> probs{};
    std::array<double, kNumClasses> margins{};
};

inline void require_finite(const FeatureVector& v, const std::string& what) {
    if (!v.all_finite()) throw Error(ErrorKind::NonFinite, what + " contains a non-finite value");
}

/// One-vs-rest linear SVM on standardized features with per-head Platt calibration.
inline SvmModel train(const std::vector<FeatureVector>& X, const std::vector<EmotionLabel>& y,
                      const TrainOptions& opts = {}) {
    if (X.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "train: X and y differ in length");
    for (const auto& v : X) require_finite(v, "training vector");
    std::array<std::size_t, kNumClasses> counts{};
    for (auto l : y) ++counts[index_of(l)];
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    if (present < 2) throw Error(ErrorKind::DegenerateLabels, "train: fewer than two classes present");
    if (present < 3) throw Error(ErrorKind::DegenerateLabels, "train: a 3-class model needs every class present");

    SvmModel model;
    model.training = opts;
    model.n_train = X.size();
    model.scaler = fit_scaler(X);
    std::vector<FeatureVector> Z;
    Z.reserve(X.size());
    for (const auto& v : X) Z.push_back(model.scaler.transform(v));

    for (auto label : kAllLabels) {
        std::vector<int> yb(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) yb[i] = y[i] == label ? 1 : -1;
        const auto r = train_binary_smo(Z, yb, {opts.C, opts.tol, opts.max_passes, opts.seed + index_of(label)});
        SvmHead head;
        head.label = label;
        head.w = r.w;
        head.b = r.b;
        head.iterations = r.iterations;
        head.converged = r.converged;
        std::vector<double> decision(Z.size());
        for (std::size_t i = 0; i < Z.size(); ++i) decision[i] = smo_detail::dot(Z[i], r.w) + r.b;
        head.platt = fit_platt(decision, yb);
        model.heads[index_of(label)] = head;
    }
    return model;
}

/// Turns per-head margins into calibrated class probabilities. Each head's
/// sigmoid is evaluated in the log domain and the three are renormalized.
inline MlEvidence evidence_from_margins(const SvmModel& model, const std::array<double, kNumClasses>& margins) {
    MlEvidence ev;
    ev.margins = margins;
    std::array<double, kNumClasses> logp{};
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        const double z = model.heads[k].platt.a * margins[k] + model.heads[k].platt.b;
        // log(1 / (1 + e^z)) = -softplus(z)
        logp[k] = -(z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
    }
    const double top = *std::max_element(logp.begin(), logp.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        ev.probs[k] = std::exp(logp[k] - top);
        sum += ev.probs[k];
    }
    for (auto& p : ev.probs) p /= sum;
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumClasses; ++k)
        if (ev.probs[k] > ev.probs[best]) best = k;
    ev.label = kAllLabels[best];
    ev.confidence = ev.probs[best];
    return ev;
}

inline MlEvidence predict(const SvmModel& model, const FeatureVector& v) {
    require_finite(v, "predict input");
    const auto z = model.scaler.transform(v);
    std::array<double, kNumClasses> margins{};
    for (std::size_t k = 0; k < kNumClasses; ++k) margins[k] = smo_detail::dot(z, model.heads[k].w) + model.heads[k].b;
    return evidence_from_margins(model, margins);
}

inline constexpr std::string_view kModelSchema = "hser.svm/1";

inline nlohmann::json to_json(const SvmModel& m) {
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["feature_names"] = feature_names();
    j["scaler"] = {{"mean", m.scaler.mean}, {"std", m.scaler.std}, {"zero_variance", m.scaler.zero_variance}};
    auto& heads = j["heads"] = nlohmann::json::array();
    for (const auto& h : m.heads)
        heads.push_back({{"label", to_string(h.label)},
                         {"weights", h.w},
                         {"bias", h.b},
                         {"platt_a", h.platt.a},
                         {"platt_b", h.platt.b},
                         {"iterations", h.iterations},
                         {"converged", h.converged}});
    j["training"] = {{"C", m.training.C},
                     {"tol", m.training.tol},
                     {"max_passes", m.training.max_passes},
                     {"seed", m.training.seed},
                     {"n_train", m.n_train}};
    return j;
}

inline SvmModel svm_model_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema", "") != kModelSchema)
            throw Error(ErrorKind::SchemaError, "model: expected schema " + std::string(kModelSchema));
        if (j.at("feature_names").get<std::vector<std::string>>() !=
            std::vector<std::string>(feature_names().begin(), feature_names().end()))
            throw Error(ErrorKind::SchemaError, "model: feature layout differs from this build");
        SvmModel m;
        m.scaler.mean = j.at("scaler").at("mean").get<std::array<double, kFeatureDim>>();
        m.scaler.std = j.at("scaler").at("std").get<std::array<double, kFeatureDim>>();
        m.scaler.zero_variance = j.at("scaler").at("zero_variance").get<std::array<bool, kFeatureDim>>();
        const auto& heads = j.at("heads");
        if (heads.size() != kNumClasses) throw Error(ErrorKind::SchemaError, "model: expected 3 heads");
        for (std::size_t k = 0; k < kNumClasses; ++k) {
            const auto& h = heads[k];
            SvmHead head;
            head.label = parse_label_or_throw(h.at("label").get<std::string>(), "model.heads");
            if (head.label != kAllLabels[k]) throw Error(ErrorKind::SchemaError, "model: heads out of class order");
            head.w = h.at("weights").get<std::array<double, kFeatureDim>>();
            head.b = h.at("bias").get<double>();
            head.platt = {h.at("platt_a").get<double>(), h.at("platt_b").get<double>()};
            head.iterations = h.value("iterations", 0L);
            head.converged = h.value("converged", false);
            m.heads[k] = head;
        }
        const auto& t = j.at("training");
        m.training = {t.at("C").get<double>(), t.at("tol").get<double>(), t.at("max_passes").get<int>(),
                      t.at("seed").get<std::uint64_t>()};
        m.n_train = t.value("n_train", std::size_t{0});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("model: ") + e.what());
    }
}

inline void save_model(const std::filesystem::path& path, const SvmModel& m) {
    text::write_file(path, to_json(m).dump(2) + "\n");
}

inline SvmModel load_model(const std::filesystem::path& path) {
    try {
        return svm_model_from_json(nlohmann::json::parse(text::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
    }
}

}  // namespace hser
