#include "lyap/parallel.hpp"

#include <cstdlib>
#include <string>

namespace lyap {

std::size_t default_thread_count() {
  if (const char* env = std::getenv("LYAP_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace lyap
