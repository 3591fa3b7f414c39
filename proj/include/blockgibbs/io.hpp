#pragma once

// JSON (de)serialization of pmfs and a deterministic JSON writer that
// prints every floating-point number with 17 significant digits.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "finite_model.hpp"

namespace blockgibbs {

using Json = nlohmann::json;

/// {"dims":[nx,ny,nz], "p":[...]} with p flattened as (x * ny + y) * nz + z.
inline Json pmf_to_json(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  return Json{{"dims", {d.nx, d.ny, d.nz}},
              {"p", std::vector<double>(pmf.values().begin(), pmf.values().end())}};
}

inline JointPmf3 pmf_from_json(const Json& j, std::size_t cap = kDefaultStateCap) {
  if (!j.is_object() || !j.contains("dims") || !j.contains("p"))
    throw std::invalid_argument("pmf JSON needs \"dims\" and \"p\"");
  const Json& dims = j.at("dims");
  if (!dims.is_array() || dims.size() != 3)
    throw std::invalid_argument("pmf JSON \"dims\" must be [nx, ny, nz]");
  for (const auto& v : dims)
    if (!v.is_number_integer() || v.get<long long>() < 1)
      throw std::invalid_argument("pmf JSON \"dims\" entries must be positive integers");
  const Json& p = j.at("p");
  if (!p.is_array()) throw std::invalid_argument("pmf JSON \"p\" must be an array");
  std::vector<double> values;
  values.reserve(p.size());
  for (const auto& v : p) {
    if (!v.is_number()) throw std::invalid_argument("pmf JSON \"p\" entries must be numbers");
    values.push_back(v.get<double>());
  }
  return JointPmf3({dims[0].get<std::size_t>(), dims[1].get<std::size_t>(), dims[2].get<std::size_t>()},
                   std::move(values), cap);
}

inline JointPmf3 load_pmf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pmf file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
  }
  return pmf_from_json(j);
}

inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw std::domain_error("non-finite number in report");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void write_json_value(std::ostream& os, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(it.key()).dump() << ": ";
        write_json_value(os, it.value(), indent, depth + 1);
      }
      os << '\n' << close_pad << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      bool scalars = true;
      for (const auto& v : j) scalars = scalars && !v.is_structured();
      if (scalars) {
        os << '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          write_json_value(os, j[i], indent, depth + 1);
        }
        os << ']';
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write_json_value(os, j[i], indent, depth + 1);
      }
      os << '\n' << close_pad << ']';
      return;
    }
    case Json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

inline void write_json(std::ostream& os, const Json& j, int indent = 2) {
  detail::write_json_value(os, j, indent, 0);
  os << '\n';
}

inline std::string to_json_string(const Json& j, int indent = 2) {
  std::ostringstream os;
  write_json(os, j, indent);
  return os.str();
}

}  // namespace blockgibbs
