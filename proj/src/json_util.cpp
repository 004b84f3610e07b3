// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/json_util.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"

namespace hjbvi {

void require_known_keys(const json& j, std::initializer_list<std::string_view> allowed,
                        std::string_view context) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", context));
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}'", context, item.key()));
    }
  }
}

const json& require_field(const json& j, std::string_view key, std::string_view context) {
  auto it = j.find(std::string(key));
  if (it == j.end()) throw ConfigError(fmt::format("{}: missing '{}'", context, key));
  return *it;
}

double get_double(const json& j, std::string_view key, std::string_view context) {
  const json& v = require_field(j, key, context);
  if (!v.is_number()) throw ConfigError(fmt::format("{}.{}: expected a number", context, key));
  return v.get<double>();
}

double get_double_or(const json& j, std::string_view key, double fallback,
                     std::string_view context) {
  return j.contains(std::string(key)) ? get_double(j, key, context) : fallback;
}

long long get_int(const json& j, std::string_view key, std::string_view context) {
  const json& v = require_field(j, key, context);
  if (!v.is_number_integer()) {
    throw ConfigError(fmt::format("{}.{}: expected an integer", context, key));
  }
  return v.get<long long>();
}

long long get_int_or(const json& j, std::string_view key, long long fallback,
                     std::string_view context) {
  return j.contains(std::string(key)) ? get_int(j, key, context) : fallback;
}

std::string get_string(const json& j, std::string_view key, std::string_view context) {
  const json& v = require_field(j, key, context);
  if (!v.is_string()) throw ConfigError(fmt::format("{}.{}: expected a string", context, key));
  return v.get<std::string>();
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json mat_to_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Vec vec_from_json(const json& j, std::string_view context, int expected_size) {
  Vec v;
  if (j.is_number()) {
    v = Vec::Constant(1, j.get<double>());
  } else if (j.is_array()) {
    v.resize(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ConfigError(fmt::format("{}: expected numbers", context));
      v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
  } else {
    throw ConfigError(fmt::format("{}: expected a number array", context));
  }
  if (expected_size >= 0 && v.size() != expected_size) {
    throw ConfigError(
        fmt::format("{}: expected length {}, got {}", context, expected_size, v.size()));
  }
  return v;
}

Mat mat_from_json(const json& j, std::string_view context, int expected_rows,
                  int expected_cols) {
  Mat m;
  if (j.is_number()) {
    m = Mat::Constant(1, 1, j.get<double>());
  } else if (j.is_array()) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const json& row = j[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
        throw ConfigError(fmt::format("{}: ragged or non-array matrix row", context));
      }
      for (Eigen::Index c = 0; c < cols; ++c) {
        const json& x = row[static_cast<std::size_t>(c)];
        if (!x.is_number()) throw ConfigError(fmt::format("{}: expected numbers", context));
        m(r, c) = x.get<double>();
      }
    }
  } else {
    throw ConfigError(fmt::format("{}: expected a matrix", context));
  }
  if ((expected_rows >= 0 && m.rows() != expected_rows) ||
      (expected_cols >= 0 && m.cols() != expected_cols)) {
    throw ConfigError(fmt::format("{}: expected {}x{} matrix, got {}x{}", context,
                                  expected_rows, expected_cols, m.rows(), m.cols()));
  }
  return m;
}

namespace {

void dump_into(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& item : j.items()) {
        if (!first) out += ',';
        first = false;
        out += json(item.key()).dump();
        out += ':';
        dump_into(item.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_into(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      break;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_canonical(const json& j) {
  std::string out;
  dump_into(j, out);
  return out;
}

}  // namespace hjbvi
