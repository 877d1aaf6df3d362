// Copyright 2026 The CBI Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "cbi/anfis.hpp"
#include "cbi/error.hpp"

namespace cbi {

namespace detail {

inline Error parse_error(const std::string& msg) { return Error(ErrorKind::ParseError, msg); }

/// Translates a byte offset in `text` into "line L, column C".
inline std::string text_position(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline nlohmann::json parse_json(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    throw parse_error(what + ": malformed JSON at " + text_position(text, byte));
  }
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw parse_error(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw parse_error((path.empty() ? std::string(key) : path + "." + key) + ": missing field");
  return *it;
}

inline double number(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw parse_error(path + ": expected a number");
  return v.get<double>();
}

inline const nlohmann::json& array(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array()) throw parse_error(path + ": expected an array");
  return v;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

}  // namespace detail

inline nlohmann::json model_to_json(const AnfisModel& model) {
  nlohmann::json doc;
  doc["input_scale"] = 255;
  doc["class_targets"] = model.class_targets;
  auto& rules = doc["rules"] = nlohmann::json::array();
  for (const SugenoRule& rule : model.rules) {
    nlohmann::json premise = nlohmann::json::array();
    for (const MembershipFunction& mf : rule.premise) premise.push_back({{"center", mf.center}, {"width", mf.width}});
    rules.push_back({{"premise", premise}, {"consequent", rule.consequent}});
  }
  return doc;
}

/// Numbers are written with round-trip precision.
inline std::string serialize_model(const AnfisModel& model) { return model_to_json(model).dump(2) + "\n"; }

inline AnfisModel model_from_json(const nlohmann::json& doc) {
  using detail::array;
  using detail::number;
  using detail::require;
  AnfisModel model;
  const double scale = number(require(doc, "input_scale", "model"), "input_scale");
  if (scale != kInputScale) throw detail::parse_error("input_scale: must be 255");

  model.class_targets.clear();
  const auto& targets = array(require(doc, "class_targets", "model"), "class_targets");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    model.class_targets.push_back(number(targets[i], "class_targets[" + std::to_string(i) + "]"));
  }

  const auto& rules = array(require(doc, "rules", "model"), "rules");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string rp = "rules[" + std::to_string(i) + "]";
    SugenoRule rule;
    const auto& premise = array(require(rules[i], "premise", rp), rp + ".premise");
    if (premise.size() != 3) throw detail::parse_error(rp + ".premise: expected exactly 3 membership functions");
    for (std::size_t c = 0; c < 3; ++c) {
      const std::string mp = rp + ".premise[" + std::to_string(c) + "]";
      rule.premise[c].center = number(require(premise[c], "center", mp), mp + ".center");
      rule.premise[c].width = number(require(premise[c], "width", mp), mp + ".width");
      if (!(rule.premise[c].width >= kMinWidth)) throw detail::parse_error(mp + ".width: must be >= 1e-3");
    }
    const auto& consequent = array(require(rules[i], "consequent", rp), rp + ".consequent");
    if (consequent.size() != 4) throw detail::parse_error(rp + ".consequent: expected 4 coefficients");
    for (std::size_t c = 0; c < 4; ++c) {
      rule.consequent[c] = number(consequent[c], rp + ".consequent[" + std::to_string(c) + "]");
    }
    model.rules.push_back(rule);
  }
  try {
    model.validate();
  } catch (const Error& e) {
    throw detail::parse_error("model: " + e.message());
  }
  return model;
}

inline AnfisModel load_model(std::string_view text) {
  return model_from_json(detail::parse_json(text, "model"));
}

inline AnfisModel load_model_file(const std::filesystem::path& path) {
  try {
    return load_model(detail::read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParseError) throw;
    throw e.with_context(path.string());
  }
}

}  // namespace cbi
