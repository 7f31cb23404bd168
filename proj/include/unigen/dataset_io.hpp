#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "unigen/errors.hpp"
#include "unigen/sample_record.hpp"

namespace unigen {

// Canonical float formatting: 17 significant digits round-trips every double
// bit-exactly and makes write -> read -> write byte-identical.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

namespace detail {

inline std::string provenance_json(const Provenance& p) {
    std::ostringstream os;
    os << "{\"generator_id\":" << json_string(p.generator_id)
       << ",\"template\":" << json_string(p.template_name) << ",\"top_k\":" << p.top_k
       << ",\"top_p\":" << format_double(p.top_p) << ",\"max_new_tokens\":" << p.max_new_tokens
       << ",\"seed\":" << p.seed << "}";
    return os.str();
}

inline std::string record_line(const SampleRecord& r) {
    std::ostringstream os;
    os << "{\"text\":" << json_string(r.text) << ",\"seed_label\":" << r.seed_label
       << ",\"soft_label\":[";
    for (std::size_t i = 0; i < r.soft_label.size(); ++i) {
        if (i) os << ',';
        os << format_double(r.soft_label[i]);
    }
    os << "],\"hard_label\":" << r.hard_label << ",\"weight\":";
    if (r.weight)
        os << format_double(*r.weight);
    else
        os << "null";
    os << ",\"provenance\":" << provenance_json(r.provenance) << "}";
    return os.str();
}

inline std::string header_line(const DatasetManifest& m) {
    std::ostringstream os;
    os << "{\"label_space\":{\"classes\":[";
    const auto ids = m.label_space.class_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) os << ',';
        os << ids[i];
    }
    os << "],\"names\":[";
    for (std::size_t i = 0; i < m.label_space.names().size(); ++i) {
        if (i) os << ',';
        os << json_string(m.label_space.names()[i]);
    }
    os << "],\"verbalizer\":[";
    for (std::size_t i = 0; i < m.label_space.verbalizers().size(); ++i) {
        if (i) os << ',';
        os << json_string(m.label_space.verbalizers()[i]);
    }
    os << "]},\"stage\":\"" << stage_name(m.stage) << "\",\"config_hash\":\""
       << m.config_hash << "\"}";
    return os.str();
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
    Provenance p;
    p.generator_id = j.at("generator_id").get<std::string>();
    p.template_name = j.at("template").get<std::string>();
    p.top_k = j.at("top_k").get<int>();
    p.top_p = j.at("top_p").get<double>();
    p.max_new_tokens = j.at("max_new_tokens").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

} // namespace detail

// JSONL: one header object on the first line (label_space, stage,
// config_hash), then one record object per line.
inline void write_dataset(const DatasetManifest& manifest, const std::string& path) {
    manifest.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << detail::header_line(manifest) << '\n';
    for (const auto& r : manifest.records) out << detail::record_line(r) << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

inline DatasetManifest read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing header line in " + path, 1);
    line_no = 1;
    DatasetManifest m;
    try {
        const auto j = nlohmann::json::parse(line);
        const auto& ls = j.at("label_space");
        m.label_space = LabelSpace(ls.at("names").get<std::vector<std::string>>(),
                                   ls.at("verbalizer").get<std::vector<std::string>>());
        const auto classes = ls.at("classes").get<std::vector<int>>();
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] != static_cast<int>(i))
                throw ValidationError("class ids must be consecutive from 0");
        if (static_cast<int>(classes.size()) != m.label_space.num_classes())
            throw ValidationError("classes list does not match names");
        m.stage = stage_from_name(j.at("stage").get<std::string>());
        m.config_hash = j.at("config_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad header: ") + e.what(), line_no);
    }
    const int k = m.label_space.num_classes();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        SampleRecord r;
        try {
            const auto j = nlohmann::json::parse(line);
            r.text = j.at("text").get<std::string>();
            r.seed_label = j.at("seed_label").get<int>();
            r.soft_label = j.at("soft_label").get<std::vector<double>>();
            r.hard_label = j.at("hard_label").get<int>();
            const auto& w = j.at("weight");
            if (!w.is_null()) r.weight = w.get<double>();
            r.provenance = detail::provenance_from_json(j.at("provenance"));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), line_no);
        }
        r.validate(k, static_cast<long>(m.records.size()));
        m.records.push_back(std::move(r));
    }
    return m;
}

} // namespace unigen
