#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grids {

struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;
  std::vector<float> grads;  // same length as values

  std::size_t numel() const noexcept { return values.size(); }
};

std::size_t shape_numel(std::span<const std::size_t> shape);

/// Named trainable arrays with paired gradient buffers, iterated in insertion
/// order. Single writer: gradient accumulation and optimizer updates happen
/// on one thread; concurrent read-only forwards are fine between steps.
class ParameterStore {
 public:
  // Throws ConfigError on duplicate names.
  Parameter& add(std::string name, std::vector<std::size_t> shape, float fill = 0.0f);

  // Throws ConfigError naming the missing parameter.
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  void zero_grads();

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_numel() const noexcept;

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

 private:
  std::vector<Parameter> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace grids
