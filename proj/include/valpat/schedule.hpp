#pragma once

#include <cstdint>

#include "valpat/common.hpp"

namespace valpat {

/// Linear warmup from min_lr to base_lr over warmup_epochs, then linear
/// decay back to min_lr at the final step of training.
template <class S>
S lr_at_step(std::uint64_t step, std::uint64_t steps_per_epoch, std::uint64_t epochs,
             std::uint64_t warmup_epochs, S base_lr, S min_lr) {
  VALPAT_REQUIRE(steps_per_epoch >= 1, "lr_at_step: steps_per_epoch must be >= 1");
  VALPAT_REQUIRE(epochs >= 1, "lr_at_step: epochs must be >= 1");
  VALPAT_REQUIRE(base_lr >= min_lr, "lr_at_step: base_lr < min_lr");

  const std::uint64_t warmup_steps = warmup_epochs * steps_per_epoch;
  const std::uint64_t total_steps = epochs * steps_per_epoch;

  if (step < warmup_steps) {
    return min_lr + (base_lr - min_lr) * static_cast<S>(step) / static_cast<S>(warmup_steps);
  }
  if (step >= total_steps) return min_lr;
  const std::uint64_t last = total_steps - 1;
  if (last <= warmup_steps) return base_lr;
  return base_lr -
         (base_lr - min_lr) * static_cast<S>(step - warmup_steps) / static_cast<S>(last - warmup_steps);
}

}  // namespace valpat
