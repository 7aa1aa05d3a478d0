#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

namespace flowslam {

/// splitmix64 step; the standard 64-bit mixer.
uint64_t splitmix64(uint64_t& state);

/// Mix a master seed with a stage name and item index into an
/// independent stream seed. This is the only seed-derivation rule in the
/// project: every parallel stage seeds item i with
/// derive_seed(master, "stage", i), so results do not depend on thread
/// count or iteration order.
uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index);

/// Run fn(i) for i in [0, count) on up to thread_count workers. Work is
/// sharded by index; fn must only write state owned by item i.
void parallel_for(size_t count, int thread_count,
                  const std::function<void(size_t)>& fn);

}  // namespace flowslam
