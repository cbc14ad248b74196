// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "egiinet/autograd.hpp"

namespace egiinet {

/// Named learnable tensors in a fixed registration order, together with the
/// optimizer's moment estimates. The order defines checkpoint layout.
struct ParamStore {
  struct Entry {
    std::string name;
    ad::Mat value;
    ad::Mat m;  // first moment
    ad::Mat v;  // second moment
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> by_name;

  ad::Mat& add(const std::string& name, int rows, int cols);
  int index_of(const std::string& name) const;  // throws on unknown name
  bool has(const std::string& name) const { return by_name.count(name) > 0; }
  const ad::Mat& value(const std::string& name) const;
  ad::Mat& value(const std::string& name);
  int64_t scalar_count() const;

  /// Deterministic init: each tensor is drawn from its own stream keyed by
  /// (seed, name), so shared tensors are identical across variants. Names
  /// ending in ".g" start at one, names ending in ".b" at zero, everything
  /// else is N(0, weight_std).
  void init_random(uint64_t seed, double weight_std = 0.02);
};

/// Per-tape leaves for every entry of a ParamStore, in entry order.
struct Bound {
  ad::Tape* tape = nullptr;
  const ParamStore* store = nullptr;
  std::vector<ad::Var> vars;

  static Bound bind(ad::Tape& tape, const ParamStore& store);

  ad::Var operator()(const std::string& name) const;
  ad::Var at(int idx) const { return vars[static_cast<size_t>(idx)]; }
};

}  // namespace egiinet
