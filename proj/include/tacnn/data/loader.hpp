#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "tacnn/data/ntu.hpp"

namespace tacnn {

/// Worker count for data loading: TACNN_THREADS when set (must be a positive
/// integer), otherwise the hardware concurrency.
inline std::size_t data_threads() {
  if (const char* env = std::getenv("TACNN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError(std::string("TACNN_THREADS must be >= 1, got '") + env + "'");
    return std::size_t(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception (lowest index) is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Parses and preprocesses NTU `.skeleton` files in parallel. Labels come
/// from the AXXX action field of each file name; output order follows
/// `paths`.
inline Dataset load_ntu_files(const std::vector<std::filesystem::path>& paths, std::size_t classes,
                              const PreprocessOptions& opt = {}) {
  Dataset out(paths.size());
  parallel_for(paths.size(), data_threads(), [&](std::size_t i) {
    const auto& path = paths[i];
    const auto name = path.filename().string();
    const auto action = ntu_action_from_name(name);
    if (!action) throw FormatError(name + ": file name carries no AXXX action field");
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
      out[i] = preprocess(parse_ntu_skeleton(in), one_hot(*action, classes), path.stem().string(), opt);
    } catch (const FormatError& e) {
      throw FormatError(name + ": " + e.what());
    }
  });
  return out;
}

}  // namespace tacnn
