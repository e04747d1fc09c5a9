#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace otmap {

/// Field-by-field JSON validation that records every problem instead of
/// stopping at the first one.
class JsonFields {
 public:
  JsonFields(const nlohmann::json& obj, std::string where, std::vector<std::string>& errors);

  bool ok() const noexcept { return is_object_; }
  bool has(const std::string& key) const;
  /// Marks the key as known.
  const nlohmann::json* raw(const std::string& key);

  double number(const std::string& key, double fallback, bool required = false);
  std::int64_t integer(const std::string& key, std::int64_t fallback, bool required = false);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback,
                                 bool required = false);
  bool boolean(const std::string& key, bool fallback, bool required = false);
  std::string string(const std::string& key, const std::string& fallback, bool required = false,
                     const std::vector<std::string>& choices = {});
  /// A scalar is broadcast to `dim` entries; an array must have exactly `dim`.
  std::vector<double> vector(const std::string& key, std::size_t dim, double fallback,
                             bool required = false);
  std::vector<std::int64_t> integer_list(const std::string& key, bool required = false);

  /// Reports every key that was never queried through this object.
  void reject_unknown();
  /// Marks a key as known without reading it.
  void allow(const std::string& key);

  void error(const std::string& message);
  std::string path(const std::string& key) const { return where_ + "." + key; }

 private:
  const nlohmann::json& obj_;
  std::string where_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
  bool is_object_ = false;

  const nlohmann::json* lookup(const std::string& key, bool required);
};

std::string join_errors(const std::vector<std::string>& errors);

}  // namespace otmap
