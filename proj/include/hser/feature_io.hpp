#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/error.hpp"
#include "hser/features.hpp"
#include "hser/text.hpp"

namespace hser {

inline constexpr std::string_view kFeatureSchema = "hser.features/1";

inline nlohmann::json to_json(const FeatureVector& v) {
    nlohmann::ordered_json j;
    j["schema"] = kFeatureSchema;
    for (std::size_t d = 0; d < kFeatureDim; ++d) j[feature_names()[d]] = v[d];
    return nlohmann::json(j);
}

inline FeatureVector feature_vector_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kFeatureSchema)
        throw Error(ErrorKind::SchemaError, "feature vector: expected schema " + std::string(kFeatureSchema));
    FeatureVector v;
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        const auto& name = feature_names()[d];
        if (!j.contains(name) || !j[name].is_number())
            throw Error(ErrorKind::SchemaError, "feature vector: missing numeric field " + name);
        v[d] = j[name].get<double>();
    }
    return v;
}

/// Table of sample_id -> FeatureVector, stored as CSV:
///   #schema=hser.features/1
///   sample_id,pitch_mean,...,mfcc_std_12
/// Values are written with 17 significant digits so they round-trip exactly.
struct FeatureTable {
    std::vector<std::string> ids;
    std::vector<FeatureVector> vectors;

    std::size_t size() const { return ids.size(); }
    void add(std::string id, const FeatureVector& v) {
        ids.push_back(std::move(id));
        vectors.push_back(v);
    }
    std::map<std::string, std::size_t> index() const {
        std::map<std::string, std::size_t> m;
        for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], i);
        return m;
    }
};

inline std::string csv_header() {
    std::string h = "sample_id";
    for (const auto& n : feature_names()) h += "," + n;
    return h;
}

inline std::string to_csv(const FeatureTable& table) {
    std::string out = "#schema=" + std::string(kFeatureSchema) + "\n" + csv_header() + "\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        out += text::csv_escape(table.ids[i]);
        for (double x : table.vectors[i].values) out += text::format(",%.17g", x);
        out += "\n";
    }
    return out;
}

inline FeatureTable feature_table_from_csv(const std::string& contents, const std::string& where = "features") {
    std::istringstream in(contents);
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "#schema=" + std::string(kFeatureSchema))
        throw Error(ErrorKind::SchemaError, where + ": first line must be #schema=" + std::string(kFeatureSchema));
    if (!std::getline(in, line) || text::trim(line) != csv_header())
        throw Error(ErrorKind::SchemaError, where + ": unexpected header");
    FeatureTable table;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split_csv_line(line);
        if (fields.size() != kFeatureDim + 1)
            throw Error(ErrorKind::SchemaError, where + ":" + std::to_string(line_no) + ": expected " +
                                                    std::to_string(kFeatureDim + 1) + " columns");
        FeatureVector v;
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            try {
                std::size_t used = 0;
                v[d] = std::stod(fields[d + 1], &used);
            } catch (const std::exception&) {
                throw Error(ErrorKind::SchemaError,
                            where + ":" + std::to_string(line_no) + ": bad value for " + feature_names()[d]);
            }
        }
        table.add(fields[0], v);
    }
    return table;
}

inline void save_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
    text::write_file(path, to_csv(table));
}

inline FeatureTable load_feature_table(const std::filesystem::path& path) {
    return feature_table_from_csv(text::read_file(path), path.string());
}

}  // namespace hser
