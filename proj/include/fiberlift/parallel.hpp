#pragma once
#include <cstddef>
#include <functional>

namespace fiberlift {

// Process [0,n) in parallel. Tasks must write only to their own slots; all
// reductions happen sequentially afterwards, so results do not depend on the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

void set_thread_count(int n);
int thread_count();

} // namespace fiberlift
