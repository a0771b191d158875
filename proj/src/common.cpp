#include <atomic>
#include <cstdlib>
#include <string>

#include "etklab/caps.hpp"
#include "etklab/errors.hpp"
#include "etklab/parallel.hpp"
#include "etklab/rng.hpp"

namespace etklab {

namespace {
std::atomic<std::size_t> g_threads{0};
thread_local bool t_in_region = false;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

Caps default_caps() {
  Caps caps;
  if (const char* env = std::getenv("ETKLAB_CAP_QUBITS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) caps.statevector_qubits = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ValidationError("ETKLAB_CAP_QUBITS is not an integer: " + std::string(env));
    }
  }
  return caps;
}

void set_thread_count(std::size_t k) { g_threads = k; }

std::size_t thread_count() {
  const std::size_t k = g_threads.load();
  if (k > 0) return k;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

bool in_parallel_region() { return t_in_region; }

void set_parallel_region(bool on) { t_in_region = on; }

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace etklab
