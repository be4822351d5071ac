#pragma once

#include <string>
#include <vector>

#include "contmeas/numerics.hpp"

namespace contmeas {

/// Named residuals with their tolerances; shared by model validation and the
/// engine's consistency checks.
struct CheckReport {
  struct Item {
    std::string name;
    Real residual;
    Real tolerance;
    bool pass;
  };
  std::vector<Item> items;

  void add(std::string name, Real residual, Real tolerance) {
    items.push_back({std::move(name), residual, tolerance, residual <= tolerance});
  }

  const Item* first_failure() const {
    for (const auto& item : items) {
      if (!item.pass) return &item;
    }
    return nullptr;
  }

  bool pass() const { return first_failure() == nullptr; }

  Real max_residual() const {
    Real worst = 0;
    for (const auto& item : items) worst = std::max(worst, item.residual);
    return worst;
  }
};

}  // namespace contmeas
