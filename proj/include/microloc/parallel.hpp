#pragma once

#include <cstddef>
#include <functional>

namespace microloc {

// min(hardware threads, MICROLOC_THREADS) ; at least 1
int worker_count();
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace microloc
