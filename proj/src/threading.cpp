#include "pirl/threading.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace pirl {

namespace {
int g_threads = 1;
}

void set_num_threads(int n) { g_threads = std::max(1, n); }

int num_threads() { return g_threads; }

void parallel_for(std::size_t total, const std::function<void(std::size_t, std::size_t)>& fn) {
  std::size_t nt = static_cast<std::size_t>(g_threads);
  if (nt <= 1 || total <= 1) {
    fn(0, total);
    return;
  }
  nt = std::min(nt, total);
  std::size_t chunk = (total + nt - 1) / nt;
  std::vector<std::thread> workers;
  workers.reserve(nt - 1);
  for (std::size_t w = 1; w < nt; ++w) {
    std::size_t b = w * chunk;
    std::size_t e = std::min(total, b + chunk);
    if (b >= e) break;
    workers.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0, std::min(total, chunk));
  for (auto& t : workers) t.join();
}

}  // namespace pirl
