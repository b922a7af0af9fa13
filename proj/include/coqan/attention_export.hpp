#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/features.hpp"
#include "coqan/model.hpp"
#include "coqan/train.hpp"

namespace coqan {

// Per-layer, per-head attention among the 48 writing fields for one article,
// as used in the forward pass.
template <class T>
WritingAttention<T> capture_attention(const Classifier<T>& clf, const ArticleDocument& doc) {
  if (!clf.model().writing())
    throw ConfigError("model has no writing-characteristics subnetwork; attention export needs WC");
  WritingAttention<T> maps;
  clf.predict(doc, &maps);
  return maps;
}

template <class T>
nn::Matrix<T> head_mean(const std::vector<nn::Matrix<T>>& heads) {
  nn::Matrix<T> m = nn::Matrix<T>::Zero(heads.at(0).rows(), heads.at(0).cols());
  for (const auto& h : heads) m += h;
  return m / static_cast<T>(heads.size());
}

template <class T>
nlohmann::json matrix_json(const nn::Matrix<T>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = static_cast<double>(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Rows and columns are labelled with field numbers 1..n.
template <class T>
std::string matrix_csv(const nn::Matrix<T>& m) {
  std::string out = "field";
  for (Eigen::Index j = 0; j < m.cols(); ++j) out += "," + std::to_string(j + 1);
  out += "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += std::to_string(i + 1);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += "," + format_double(static_cast<double>(m(i, j)));
    out += "\n";
  }
  return out;
}

// {id, maps: [{layer, head, matrix}]}; head is 1-based or "mean".
template <class T>
nlohmann::json attention_json(const std::string& id, const WritingAttention<T>& maps) {
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t l = 0; l < maps.size(); ++l) {
    for (std::size_t h = 0; h < maps[l].size(); ++h)
      list.push_back({{"layer", l + 1}, {"head", h + 1}, {"matrix", matrix_json(maps[l][h])}});
    list.push_back({{"layer", l + 1}, {"head", "mean"}, {"matrix", matrix_json(head_mean(maps[l]))}});
  }
  return {{"id", id}, {"maps", list}};
}

// Writes attn_L{l}_H{h}.csv, attn_L{l}_mean.csv, attention.json and an
// index.json listing them. Returns the index.
template <class T>
nlohmann::json write_attention(const std::filesystem::path& dir, const std::string& id,
                               const WritingAttention<T>& maps, const nlohmann::json& provenance = {}) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    f << body;
  };
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t l = 0; l < maps.size(); ++l) {
    for (std::size_t h = 0; h < maps[l].size(); ++h) {
      const std::string name = "attn_L" + std::to_string(l + 1) + "_H" + std::to_string(h + 1) + ".csv";
      put(name, matrix_csv(maps[l][h]));
      files.push_back({{"layer", l + 1}, {"head", h + 1}, {"file", name}});
    }
    const std::string name = "attn_L" + std::to_string(l + 1) + "_mean.csv";
    put(name, matrix_csv(head_mean(maps[l])));
    files.push_back({{"layer", l + 1}, {"head", "mean"}, {"file", name}});
  }
  std::vector<std::string> fields;
  for (std::size_t i = 1; i <= kNumFeatures; ++i) fields.push_back(feature_name(i));
  nlohmann::json index{{"id", id},
                       {"layers", maps.size()},
                       {"heads", maps.empty() ? 0 : maps[0].size()},
                       {"fields", fields},
                       {"files", files},
                       {"json", "attention.json"}};
  if (!provenance.is_null()) index["provenance"] = provenance;
  put("attention.json", attention_json(id, maps).dump());
  put("index.json", index.dump(2));
  return index;
}

}  // namespace coqan
