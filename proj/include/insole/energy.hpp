#pragma once

#include <stdexcept>

namespace insole {

// Steady-state power budget in milliwatts plus the battery rating.
struct PowerBudget {
  double acquisition_mw = 0.848;
  double radio_mw = 1.672;
  double other_mw = 0.0;
  double battery_mah = 240.0;
  double battery_v = 3.7;

  double total_mw() const { return acquisition_mw + radio_mw + other_mw; }
};

// Battery lifetime at constant draw, nominal voltage, no derating.
inline double lifetime_hours(const PowerBudget& budget) {
  if (budget.acquisition_mw < 0 || budget.radio_mw < 0 || budget.other_mw < 0 ||
      budget.battery_mah < 0 || budget.battery_v < 0)
    throw std::invalid_argument("power budget: negative component");
  const double total = budget.total_mw();
  if (total <= 0.0) throw std::invalid_argument("power budget: total power must be positive");
  return budget.battery_mah * budget.battery_v / total;
}

}  // namespace insole
