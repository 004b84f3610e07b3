// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace hjbvi {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace hjbvi
