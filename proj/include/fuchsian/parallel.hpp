#pragma once

// Block-parallel Monte Carlo. Work is cut into fixed-size blocks, each with
// its own generator seeded from (seed, stream, block), and results are
// reduced in block order, so output does not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace fuchsian {

constexpr std::size_t kBlockSize = 4096;

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 block_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0xD1B54A32D192ED03ULL;
  std::uint64_t b = splitmix64(s);
  s ^= block * 0x8CB92BA72F3D8DD7ULL;
  std::uint64_t c = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(block, first, count) for every block of `n` items and returns the
/// per-block results in block order.
template <class R, class F>
std::vector<R> parallel_blocks(std::size_t n, unsigned workers, F&& fn) {
  const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
  std::vector<R> out(blocks);
  workers = std::max(1u, std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        std::size_t first = b * kBlockSize;
        out[b] = fn(b, first, std::min(kBlockSize, n - first));
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        next = blocks;
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace fuchsian
