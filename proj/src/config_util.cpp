#include "otmap/config_util.hpp"

#include <algorithm>

namespace otmap {

using nlohmann::json;

JsonFields::JsonFields(const json& obj, std::string where, std::vector<std::string>& errors)
    : obj_(obj), where_(std::move(where)), errors_(errors), is_object_(obj.is_object()) {
  if (!is_object_) errors_.push_back(where_ + ": expected an object");
}

bool JsonFields::has(const std::string& key) const { return is_object_ && obj_.contains(key); }

const json* JsonFields::raw(const std::string& key) {
  allow(key);
  if (!has(key)) return nullptr;
  return &obj_.at(key);
}

void JsonFields::allow(const std::string& key) {
  if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) seen_.push_back(key);
}

void JsonFields::error(const std::string& message) { errors_.push_back(message); }

const json* JsonFields::lookup(const std::string& key, bool required) {
  allow(key);
  if (!is_object_) return nullptr;
  auto it = obj_.find(key);
  if (it == obj_.end()) {
    if (required) errors_.push_back(path(key) + ": required key missing");
    return nullptr;
  }
  return &*it;
}

double JsonFields::number(const std::string& key, double fallback, bool required) {
  const json* v = lookup(key, required);
  if (!v) return fallback;
  if (!v->is_number()) {
    errors_.push_back(path(key) + ": expected a number");
    return fallback;
  }
  return v->get<double>();
}

std::int64_t JsonFields::integer(const std::string& key, std::int64_t fallback, bool required) {
  const json* v = lookup(key, required);
  if (!v) return fallback;
  if (!v->is_number_integer()) {
    errors_.push_back(path(key) + ": expected an integer");
    return fallback;
  }
  return v->get<std::int64_t>();
}

std::uint64_t JsonFields::unsigned_integer(const std::string& key, std::uint64_t fallback,
                                           bool required) {
  const json* v = lookup(key, required);
  if (!v) return fallback;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v->get<std::int64_t>());
  errors_.push_back(path(key) + ": expected a nonnegative integer");
  return fallback;
}

bool JsonFields::boolean(const std::string& key, bool fallback, bool required) {
  const json* v = lookup(key, required);
  if (!v) return fallback;
  if (!v->is_boolean()) {
    errors_.push_back(path(key) + ": expected true or false");
    return fallback;
  }
  return v->get<bool>();
}

std::string JsonFields::string(const std::string& key, const std::string& fallback, bool required,
                               const std::vector<std::string>& choices) {
  const json* v = lookup(key, required);
  if (!v) return fallback;
  if (!v->is_string()) {
    errors_.push_back(path(key) + ": expected a string");
    return fallback;
  }
  auto s = v->get<std::string>();
  if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
    std::string list;
    for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
    errors_.push_back(path(key) + ": '" + s + "' is not one of " + list);
    return fallback;
  }
  return s;
}

std::vector<double> JsonFields::vector(const std::string& key, std::size_t dim, double fallback,
                                       bool required) {
  std::vector<double> out(dim, fallback);
  const json* v = lookup(key, required);
  if (!v) return out;
  if (v->is_number()) {
    std::fill(out.begin(), out.end(), v->get<double>());
    return out;
  }
  if (!v->is_array() || v->size() != dim) {
    errors_.push_back(path(key) + ": expected a number or an array of " + std::to_string(dim) +
                      " numbers");
    return out;
  }
  for (std::size_t k = 0; k < dim; ++k) {
    if (!(*v)[k].is_number()) {
      errors_.push_back(path(key) + "[" + std::to_string(k) + "]: expected a number");
      continue;
    }
    out[k] = (*v)[k].get<double>();
  }
  return out;
}

std::vector<std::int64_t> JsonFields::integer_list(const std::string& key, bool required) {
  std::vector<std::int64_t> out;
  const json* v = lookup(key, required);
  if (!v) return out;
  if (!v->is_array()) {
    errors_.push_back(path(key) + ": expected an array of integers");
    return out;
  }
  for (std::size_t k = 0; k < v->size(); ++k) {
    if (!(*v)[k].is_number_integer()) {
      errors_.push_back(path(key) + "[" + std::to_string(k) + "]: expected an integer");
      continue;
    }
    out.push_back((*v)[k].get<std::int64_t>());
  }
  return out;
}

void JsonFields::reject_unknown() {
  if (!is_object_) return;
  for (auto it = obj_.begin(); it != obj_.end(); ++it)
    if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
      errors_.push_back(path(it.key()) + ": unknown key");
}

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) out += (out.empty() ? "" : "\n") + e;
  return out;
}

}  // namespace otmap
