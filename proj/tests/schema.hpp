// Copyright 2026 The InnerSelf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal JSON Schema checker for the subset used by docs/openapi.json:
// $ref (local), type (string or list), properties, required,
// additionalProperties, items, minItems, enum, minimum, maximum,
// exclusiveMinimum.

#include <string>
#include <vector>

#include <json.hpp>

namespace innerself::testing {

class SchemaChecker {
 public:
  explicit SchemaChecker(nlohmann::json document) : doc_(std::move(document)) {}

  const nlohmann::json& document() const { return doc_; }

  std::vector<std::string> check(const nlohmann::json& value, const nlohmann::json& schema) const {
    std::vector<std::string> errors;
    visit(value, schema, "$", errors);
    return errors;
  }

  std::vector<std::string> check_named(const nlohmann::json& value, const std::string& name) const {
    return check(value, doc_.at("components").at("schemas").at(name));
  }

  /// Schema of a documented JSON response, or null when the status is undocumented.
  nlohmann::json response_schema(const std::string& path, const std::string& method, int status) const {
    const auto& op = doc_.at("paths").at(path).at(method);
    const auto key = std::to_string(status);
    if (!op.at("responses").contains(key)) return nullptr;
    const auto& content = op.at("responses").at(key).at("content");
    if (!content.contains("application/json")) return nlohmann::json::object();
    return content.at("application/json").at("schema");
  }

 private:
  const nlohmann::json& resolve(const nlohmann::json& schema) const {
    if (!schema.contains("$ref")) return schema;
    const auto ref = schema.at("$ref").get<std::string>();
    return resolve(doc_.at(nlohmann::json::json_pointer(ref.substr(1))));
  }

  static bool has_type(const nlohmann::json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
  }

  void visit(const nlohmann::json& v, const nlohmann::json& raw, const std::string& at,
             std::vector<std::string>& errors) const {
    const auto& s = resolve(raw);
    if (s.contains("type")) {
      bool ok = false;
      if (s.at("type").is_array()) {
        for (const auto& t : s.at("type")) ok = ok || has_type(v, t.get<std::string>());
      } else {
        ok = has_type(v, s.at("type").get<std::string>());
      }
      if (!ok) {
        errors.push_back(at + ": expected type " + s.at("type").dump() + ", got " + v.dump());
        return;
      }
    }
    if (s.contains("enum") && std::find(s.at("enum").begin(), s.at("enum").end(), v) == s.at("enum").end()) {
      errors.push_back(at + ": " + v.dump() + " not in enum");
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s.at("minimum").get<double>()) errors.push_back(at + ": below minimum");
      if (s.contains("maximum") && x > s.at("maximum").get<double>()) errors.push_back(at + ": above maximum");
      if (s.contains("exclusiveMinimum") && x <= s.at("exclusiveMinimum").get<double>()) {
        errors.push_back(at + ": not above exclusiveMinimum");
      }
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>()) {
        errors.push_back(at + ": too few items");
      }
      if (s.contains("items")) {
        for (std::size_t i = 0; i < v.size(); ++i) visit(v[i], s.at("items"), at + "[" + std::to_string(i) + "]", errors);
      }
    }
    if (v.is_object()) {
      const auto props = s.value("properties", nlohmann::json::object());
      for (const auto& r : s.value("required", nlohmann::json::array())) {
        if (!v.contains(r.get<std::string>())) errors.push_back(at + ": missing " + r.get<std::string>());
      }
      for (const auto& [key, child] : v.items()) {
        if (props.contains(key)) {
          visit(child, props.at(key), at + "." + key, errors);
        } else if (s.contains("additionalProperties")) {
          const auto& extra = s.at("additionalProperties");
          if (extra.is_boolean()) {
            if (!extra.get<bool>()) errors.push_back(at + ": unexpected property " + key);
          } else {
            visit(child, extra, at + "." + key, errors);
          }
        }
      }
    }
  }

  nlohmann::json doc_;
};

}  // namespace innerself::testing
