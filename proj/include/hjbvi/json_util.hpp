// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

#include "hjbvi/numerics.hpp"

namespace hjbvi {

using json = nlohmann::ordered_json;

/// Rejects keys outside `allowed`; `context` names the enclosing block.
void require_known_keys(const json& j, std::initializer_list<std::string_view> allowed,
                        std::string_view context);

const json& require_field(const json& j, std::string_view key, std::string_view context);

double get_double(const json& j, std::string_view key, std::string_view context);
double get_double_or(const json& j, std::string_view key, double fallback,
                     std::string_view context);
long long get_int(const json& j, std::string_view key, std::string_view context);
long long get_int_or(const json& j, std::string_view key, long long fallback,
                     std::string_view context);
std::string get_string(const json& j, std::string_view key, std::string_view context);

json vec_to_json(const Vec& v);
json mat_to_json(const Mat& m);
/// A bare number is accepted for length-1 vectors.
Vec vec_from_json(const json& j, std::string_view context, int expected_size = -1);
/// A bare number is accepted for 1x1 matrices; a flat list of length d for a
/// diagonal matrix is not.
Mat mat_from_json(const json& j, std::string_view context, int expected_rows = -1,
                  int expected_cols = -1);

/// Serializes with every number printed at 17 significant digits and keys in
/// insertion order, so equal values always produce equal bytes.
std::string dump_canonical(const json& j);

}  // namespace hjbvi
