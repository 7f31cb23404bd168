#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "unigen/encoder.hpp"
#include "unigen/errors.hpp"
#include "unigen/label_space.hpp"
#include "unigen/params.hpp"

namespace unigen {

inline nlohmann::ordered_json encoder_spec_to_json(const EncoderSpec& s) {
    nlohmann::ordered_json j;
    j["arch"] = s.arch;
    j["num_classes"] = s.num_classes;
    j["proj_dim"] = s.proj_dim;
    j["feature_dim"] = s.feature_dim;
    j["hidden"] = s.hidden;
    j["vocab"] = s.vocab;
    j["d_model"] = s.d_model;
    j["heads"] = s.heads;
    j["ffn"] = s.ffn;
    j["layers"] = s.layers;
    j["max_len"] = s.max_len;
    return j;
}

inline EncoderSpec encoder_spec_from_json(const nlohmann::json& j) {
    EncoderSpec s;
    s.arch = j.at("arch").get<std::string>();
    s.num_classes = j.at("num_classes").get<int>();
    s.proj_dim = j.at("proj_dim").get<int>();
    s.feature_dim = j.at("feature_dim").get<int>();
    s.hidden = j.at("hidden").get<int>();
    s.vocab = j.at("vocab").get<int>();
    s.d_model = j.at("d_model").get<int>();
    s.heads = j.at("heads").get<int>();
    s.ffn = j.at("ffn").get<int>();
    s.layers = j.at("layers").get<int>();
    s.max_len = j.at("max_len").get<int>();
    s.validate();
    return s;
}

namespace detail {

inline const char* submodule_name(Submodule s) {
    switch (s) {
        case Submodule::kTrunk: return "trunk";
        case Submodule::kClassHead: return "class_head";
        case Submodule::kProjHead: return "proj_head";
    }
    return "trunk";
}

inline Submodule submodule_from_name(const std::string& s) {
    if (s == "trunk") return Submodule::kTrunk;
    if (s == "class_head") return Submodule::kClassHead;
    if (s == "proj_head") return Submodule::kProjHead;
    throw ValidationError("unknown submodule: " + s);
}

inline nlohmann::ordered_json params_to_json(const ParamSet& ps) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : ps.items) {
        nlohmann::ordered_json j;
        j["name"] = p.name;
        j["submodule"] = submodule_name(p.submodule);
        j["rows"] = p.value.rows;
        j["cols"] = p.value.cols;
        j["data"] = p.value.a;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline ParamSet params_from_json(const nlohmann::json& arr) {
    ParamSet ps;
    for (const auto& j : arr) {
        Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
        const auto data = j.at("data").get<std::vector<double>>();
        if (data.size() != m.a.size()) throw ValidationError("checkpoint parameter size mismatch");
        m.a = data;
        ps.add(j.at("name").get<std::string>(),
               submodule_from_name(j.at("submodule").get<std::string>()), std::move(m));
    }
    return ps;
}

} // namespace detail

struct Checkpoint {
    EncoderSpec spec;
    LabelSpace label_space;
    std::string config_hash;
    ParamSet theta_q;
    nlohmann::ordered_json train_config; // free-form settings block
};

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = "unigen-checkpoint";
    j["version"] = 1;
    j["encoder"] = encoder_spec_to_json(ckpt.spec);
    j["label_space"] = {{"names", ckpt.label_space.names()},
                        {"verbalizer", ckpt.label_space.verbalizers()}};
    j["config_hash"] = ckpt.config_hash;
    j["train_config"] = ckpt.train_config;
    j["params"] = detail::params_to_json(ckpt.theta_q);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << j.dump() << '\n';
    if (!out) throw IoError("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "unigen-checkpoint")
        throw ValidationError("not a unigen checkpoint: " + path);
    Checkpoint c;
    c.spec = encoder_spec_from_json(j.at("encoder"));
    c.label_space = LabelSpace(j.at("label_space").at("names").get<std::vector<std::string>>(),
                               j.at("label_space").at("verbalizer").get<std::vector<std::string>>());
    c.config_hash = j.value("config_hash", "");
    c.train_config = j.value("train_config", nlohmann::ordered_json::object());
    c.theta_q = detail::params_from_json(j.at("params"));
    return c;
}

} // namespace unigen
