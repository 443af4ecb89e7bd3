#include "grids/parameter_store.hpp"

#include <algorithm>

#include "grids/errors.hpp"

namespace grids {

std::size_t shape_numel(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Parameter& ParameterStore::add(std::string name, std::vector<std::size_t> shape, float fill) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  const std::size_t n = shape_numel(shape);
  if (n == 0) throw ConfigError("parameter '" + name + "' has an empty shape");
  index_.emplace(name, entries_.size());
  entries_.push_back(Parameter{std::move(name), std::move(shape), std::vector<float>(n, fill),
                               std::vector<float>(n, 0.0f)});
  return entries_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("missing parameter '" + std::string(name) + "'");
  return entries_[it->second];
}

const Parameter& ParameterStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("missing parameter '" + std::string(name) + "'");
  return entries_[it->second];
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

void ParameterStore::zero_grads() {
  for (auto& p : entries_) std::fill(p.grads.begin(), p.grads.end(), 0.0f);
}

std::size_t ParameterStore::total_numel() const noexcept {
  std::size_t n = 0;
  for (const auto& p : entries_) n += p.numel();
  return n;
}

}  // namespace grids
