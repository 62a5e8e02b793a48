#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/error.hpp"
#include "hser/label.hpp"
#include "hser/text.hpp"

namespace hser {

/// Rows are gold, columns are predicted, both in canonical class order.
struct ConfusionMatrix {
    std::array<std::array<long, kNumClasses>, kNumClasses> counts{};

    long& at(EmotionLabel gold, EmotionLabel pred) { return counts[index_of(gold)][index_of(pred)]; }
    long at(EmotionLabel gold, EmotionLabel pred) const { return counts[index_of(gold)][index_of(pred)]; }
    long total() const {
        long t = 0;
        for (const auto& row : counts)
            for (long c : row) t += c;
        return t;
    }
    long trace() const {
        long t = 0;
        for (std::size_t k = 0; k < kNumClasses; ++k) t += counts[k][k];
        return t;
    }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_from_labels(std::span<const EmotionLabel> predicted, std::span<const EmotionLabel> gold) {
    if (predicted.size() != gold.size())
        throw Error(ErrorKind::IdMismatch, "predictions and gold labels differ in length");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < gold.size(); ++i) ++cm.at(gold[i], predicted[i]);
    return cm;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;
    /// Set when the class was never predicted (precision defined as 0).
    bool precision_undefined = false;
    /// Set when the class never occurs in gold (recall defined as 0).
    bool recall_undefined = false;
};

struct MetricsReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::array<ClassMetrics, kNumClasses> per_class{};
    long n = 0;
    ConfusionMatrix confusion;
};

inline double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.confusion = cm;
    r.n = cm.total();
    if (r.n == 0) throw Error(ErrorKind::Empty, "metrics over zero samples");
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.n);
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        long tp = cm.counts[k][k], predicted = 0, actual = 0;
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            predicted += cm.counts[j][k];
            actual += cm.counts[k][j];
        }
        auto& c = r.per_class[k];
        c.support = actual;
        c.precision_undefined = predicted == 0;
        c.recall_undefined = actual == 0;
        c.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        c.recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        c.f1 = f1_score(c.precision, c.recall);
        r.macro_precision += c.precision;
        r.macro_recall += c.recall;
        r.macro_f1 += c.f1;
    }
    r.macro_precision /= kNumClasses;
    r.macro_recall /= kNumClasses;
    r.macro_f1 /= kNumClasses;
    return r;
}

inline MetricsReport metrics(std::span<const EmotionLabel> predicted, std::span<const EmotionLabel> gold) {
    if (gold.empty()) throw Error(ErrorKind::Empty, "metrics over zero samples");
    return metrics_from_confusion(confusion_from_labels(predicted, gold));
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    auto& per = j["per_class"];
    for (auto label : kAllLabels) {
        const auto& c = r.per_class[index_of(label)];
        per[std::string(to_string(label))] = {{"precision", c.precision},
                                              {"recall", c.recall},
                                              {"f1", c.f1},
                                              {"support", c.support},
                                              {"precision_undefined", c.precision_undefined},
                                              {"recall_undefined", c.recall_undefined}};
    }
    auto& cm = j["confusion"] = nlohmann::ordered_json::array();
    for (const auto& row : r.confusion.counts) cm.push_back(row);
    return j;
}

// ---- Agreement statistics -------------------------------------------------

/// Per item, how many raters chose each category.
struct AnnotationTable {
    std::vector<std::array<int, kNumClasses>> counts;
    int n_raters = 3;

    std::size_t items() const { return counts.size(); }
};

inline void validate(const AnnotationTable& t) {
    if (t.n_raters < 2) throw Error(ErrorKind::InvalidTable, "need at least two raters");
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        int sum = 0;
        for (int c : t.counts[i]) {
            if (c < 0) throw Error(ErrorKind::InvalidTable, "negative count in row " + std::to_string(i));
            sum += c;
        }
        if (sum != t.n_raters)
            throw Error(ErrorKind::InvalidTable, "row " + std::to_string(i) + " sums to " + std::to_string(sum) +
                                                     ", expected " + std::to_string(t.n_raters));
    }
}

/// Fleiss' kappa. nullopt when expected agreement is 1 (a single category
/// used by every rater on every item).
inline std::optional<double> fleiss_kappa(const AnnotationTable& t) {
    validate(t);
    if (t.items() < 2) throw Error(ErrorKind::InvalidTable, "need at least two items");
    const double N = static_cast<double>(t.items());
    const double n = t.n_raters;
    std::array<double, kNumClasses> column{};
    double p_bar = 0.0;
    for (const auto& row : t.counts) {
        double sq = 0.0;
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            sq += static_cast<double>(row[j]) * row[j];
            column[j] += row[j];
        }
        p_bar += (sq - n) / (n * (n - 1.0));
    }
    p_bar /= N;
    double p_e = 0.0;
    for (double c : column) {
        const double p = c / (N * n);
        p_e += p * p;
    }
    if (p_e == 1.0) return std::nullopt;
    return (p_bar - p_e) / (1.0 - p_e);
}

/// Cohen's kappa between two raters. nullopt when chance agreement is 1.
inline std::optional<double> cohens_kappa(std::span<const EmotionLabel> a, std::span<const EmotionLabel> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "raters labelled different numbers of items");
    if (a.size() < 2) throw Error(ErrorKind::LengthMismatch, "need at least two items");
    const double N = static_cast<double>(a.size());
    std::array<double, kNumClasses> ma{}, mb{};
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma[index_of(a[i])] += 1.0;
        mb[index_of(b[i])] += 1.0;
        if (a[i] == b[i]) agree += 1.0;
    }
    const double p_o = agree / N;
    double p_e = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) p_e += (ma[k] / N) * (mb[k] / N);
    if (p_e == 1.0) return std::nullopt;
    return (p_o - p_e) / (1.0 - p_e);
}

/// Label chosen by at least two of three annotators; nullopt for a three-way split.
inline std::optional<EmotionLabel> majority_label(const std::array<EmotionLabel, 3>& labels) {
    if (labels[0] == labels[1] || labels[0] == labels[2]) return labels[0];
    if (labels[1] == labels[2]) return labels[1];
    return std::nullopt;
}

struct AnnotatorAccuracy {
    double overall = 0.0;
    std::array<std::optional<double>, kNumClasses> per_class{};  // nullopt: class absent from reference
    long n = 0;
    long excluded = 0;  // items without a majority
};

inline AnnotatorAccuracy annotator_accuracy(std::span<const EmotionLabel> annotator,
                                            std::span<const std::optional<EmotionLabel>> reference) {
    if (annotator.size() != reference.size())
        throw Error(ErrorKind::LengthMismatch, "annotator and reference differ in length");
    AnnotatorAccuracy acc;
    std::array<long, kNumClasses> hit{}, total{};
    long correct = 0;
    for (std::size_t i = 0; i < annotator.size(); ++i) {
        if (!reference[i]) {
            ++acc.excluded;
            continue;
        }
        ++acc.n;
        ++total[index_of(*reference[i])];
        if (annotator[i] == *reference[i]) {
            ++correct;
            ++hit[index_of(*reference[i])];
        }
    }
    if (acc.n == 0) throw Error(ErrorKind::Empty, "no items with a majority reference");
    acc.overall = static_cast<double>(correct) / static_cast<double>(acc.n);
    for (std::size_t k = 0; k < kNumClasses; ++k)
        if (total[k] > 0) acc.per_class[k] = static_cast<double>(hit[k]) / static_cast<double>(total[k]);
    return acc;
}

struct AnnotationRow {
    std::string sample_id;
    std::array<EmotionLabel, 3> labels{};
};

/// CSV with header sample_id,annotator_a,annotator_b,annotator_c.
inline std::vector<AnnotationRow> parse_annotations(const std::string& contents, const std::string& where = "annotations") {
    std::istringstream in(contents);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::SchemaError, where + ": empty file");
    const auto header = text::split_csv_line(text::trim(line));
    const std::vector<std::string> expected{"sample_id", "annotator_a", "annotator_b", "annotator_c"};
    if (header != expected)
        throw Error(ErrorKind::SchemaError, where + ":1: header must be sample_id,annotator_a,annotator_b,annotator_c");
    std::vector<AnnotationRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split_csv_line(text::trim(line));
        const std::string loc = where + ":" + std::to_string(line_no);
        if (f.size() != 4) throw Error(ErrorKind::SchemaError, loc + ": expected 4 columns");
        AnnotationRow row;
        row.sample_id = f[0];
        for (std::size_t k = 0; k < 3; ++k) row.labels[k] = parse_label_or_throw(text::trim(f[k + 1]), loc);
        rows.push_back(row);
    }
    return rows;
}

inline AnnotationTable to_table(const std::vector<AnnotationRow>& rows) {
    AnnotationTable t;
    t.n_raters = 3;
    for (const auto& r : rows) {
        std::array<int, kNumClasses> c{};
        for (auto l : r.labels) ++c[index_of(l)];
        t.counts.push_back(c);
    }
    return t;
}

struct AgreementReport {
    std::optional<double> fleiss;
    std::optional<double> ab, ac, bc;
    std::optional<double> average_pairwise;
    std::array<AnnotatorAccuracy, 3> annotators{};
    long items = 0;
    long no_majority = 0;
};

/// Fleiss' kappa, pairwise Cohen's kappa (and their mean) and per-annotator
/// accuracy against the majority vote.
inline AgreementReport agreement(const std::vector<AnnotationRow>& rows) {
    AgreementReport rep;
    rep.items = static_cast<long>(rows.size());
    rep.fleiss = fleiss_kappa(to_table(rows));
    std::array<std::vector<EmotionLabel>, 3> by_rater;
    std::vector<std::optional<EmotionLabel>> reference;
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < 3; ++k) by_rater[k].push_back(r.labels[k]);
        reference.push_back(majority_label(r.labels));
        if (!reference.back()) ++rep.no_majority;
    }
    rep.ab = cohens_kappa(by_rater[0], by_rater[1]);
    rep.ac = cohens_kappa(by_rater[0], by_rater[2]);
    rep.bc = cohens_kappa(by_rater[1], by_rater[2]);
    if (rep.ab && rep.ac && rep.bc) rep.average_pairwise = (*rep.ab + *rep.ac + *rep.bc) / 3.0;
    for (std::size_t k = 0; k < 3; ++k) rep.annotators[k] = annotator_accuracy(by_rater[k], reference);
    return rep;
}

// ---- Version comparison ---------------------------------------------------

struct RunSummary {
    std::string version;
    MetricsReport metrics;
};

/// Canonical row order; unknown versions sort after the known ones by name.
inline int version_rank(const std::string& v) {
    static const std::array<std::string, 7> order{"ml_only", "v1_basic", "v2_rules", "v3_refined",
                                                  "v4_hybrid", "v5_auto", "text_baseline"};
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i] == v) return static_cast<int>(i);
    return static_cast<int>(order.size());
}

struct ComparisonReport {
    std::string table;
    nlohmann::ordered_json json;
};

/// Version | Acc (%) | Prec | Rec | F1, with accuracy to two decimals,
/// precision/recall to two and F1 to three.
inline ComparisonReport compare_report(std::vector<RunSummary> runs) {
    std::stable_sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
        const int ra = version_rank(a.version), rb = version_rank(b.version);
        return ra != rb ? ra < rb : a.version < b.version;
    });
    ComparisonReport rep;
    rep.table = text::format("%-14s %8s %6s %6s %7s\n", "Version", "Acc (%)", "Prec", "Rec", "F1");
    rep.json = nlohmann::ordered_json::array();
    for (const auto& r : runs) {
        const auto& m = r.metrics;
        rep.table += text::format("%-14s %8.2f %6.2f %6.2f %7.3f\n", r.version.c_str(), 100.0 * m.accuracy,
                                  m.macro_precision, m.macro_recall, m.macro_f1);
        nlohmann::ordered_json row;
        row["version"] = r.version;
        row["metrics"] = to_json(m);
        rep.json.push_back(row);
    }
    return rep;
}

}  // namespace hser
