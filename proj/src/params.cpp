// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/params.hpp"

#include <random>
#include <stdexcept>

#include "egiinet/rng.hpp"

namespace egiinet {

ad::Mat& ParamStore::add(const std::string& name, int rows, int cols) {
  if (by_name.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  Entry e;
  e.name = name;
  e.value = ad::Mat::Zero(rows, cols);
  e.m = ad::Mat::Zero(rows, cols);
  e.v = ad::Mat::Zero(rows, cols);
  entries.push_back(std::move(e));
  by_name[name] = static_cast<int>(entries.size()) - 1;
  return entries.back().value;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
  return it->second;
}

const ad::Mat& ParamStore::value(const std::string& name) const {
  return entries[static_cast<size_t>(index_of(name))].value;
}

ad::Mat& ParamStore::value(const std::string& name) {
  return entries[static_cast<size_t>(index_of(name))].value;
}

int64_t ParamStore::scalar_count() const {
  int64_t n = 0;
  for (const Entry& e : entries) n += e.value.size();
  return n;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void ParamStore::init_random(uint64_t seed, double weight_std) {
  for (Entry& e : entries) {
    e.m.setZero();
    e.v.setZero();
    if (ends_with(e.name, ".g")) {
      e.value.setOnes();
    } else if (ends_with(e.name, ".b")) {
      e.value.setZero();
    } else {
      std::mt19937_64 rng(derive_seed(seed, e.name));
      std::normal_distribution<double> dist(0.0, weight_std);
      for (long r = 0; r < e.value.rows(); ++r) {
        for (long c = 0; c < e.value.cols(); ++c) e.value(r, c) = dist(rng);
      }
    }
  }
}

Bound Bound::bind(ad::Tape& tape, const ParamStore& store) {
  Bound b;
  b.tape = &tape;
  b.store = &store;
  b.vars.reserve(store.entries.size());
  for (const ParamStore::Entry& e : store.entries) b.vars.push_back(tape.leaf(e.value));
  return b;
}

ad::Var Bound::operator()(const std::string& name) const {
  return vars[static_cast<size_t>(store->index_of(name))];
}

}  // namespace egiinet
