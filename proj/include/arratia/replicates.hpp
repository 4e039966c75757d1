#pragma once

// Replicate fan-out. Replicates are grouped into fixed-size blocks; block b is
// owned by worker b % threads, and block results are merged in block order,
// so the reduction is identical for any thread count.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "arratia/errors.hpp"

namespace arratia {

struct RunOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  std::size_t block_size = 64;
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// make() -> Acc; body(replicate_id, Acc&); Acc::merge(const Acc&).
template <class Make, class Body>
auto run_replicates(const RunOptions& opts, Make make, Body body) -> decltype(make()) {
  using Acc = decltype(make());
  if (opts.replicates == 0) throw ConfigError("replicate count must be positive");
  const std::size_t block = std::max<std::size_t>(1, opts.block_size);
  const std::size_t n_blocks = (opts.replicates + block - 1) / block;
  const unsigned threads = std::min<std::size_t>(resolve_threads(opts.threads), n_blocks);

  std::vector<std::optional<Acc>> results(n_blocks);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned w) {
    try {
      for (std::size_t b = w; b < n_blocks; b += threads) {
        Acc acc = make();
        const std::size_t lo = b * block;
        const std::size_t hi = std::min(opts.replicates, lo + block);
        for (std::size_t r = lo; r < hi; ++r) body(r, acc);
        results[b].emplace(std::move(acc));
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Acc total = make();
  for (auto& r : results) total.merge(*r);
  return total;
}

// Per-replicate rows kept in replicate order; for statistics that need the
// raw sample (medians, batch means, correlations).
struct ReplicateTable {
  std::vector<std::vector<double>> rows;

  void merge(const ReplicateTable& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }
  std::size_t size() const { return rows.size(); }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

}  // namespace arratia
