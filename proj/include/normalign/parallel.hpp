#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace normalign {

/// Either a value or the exception that prevented it.
template <class T>
struct Outcome {
  std::optional<T> value;
  std::exception_ptr error;

  bool ok() const { return value.has_value(); }

  const T& get() const {
    if (error) std::rethrow_exception(error);
    return *value;
  }

  std::string error_message() const {
    if (!error) return {};
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      return e.what();
    } catch (...) {
      return "unknown error";
    }
  }
};

/// Runs fn(0..n-1) with at most `parallelism` calls in flight. Results are
/// positional; a throwing call becomes an error Outcome and the rest go on.
template <class Fn>
auto parallel_map(std::size_t n, std::size_t parallelism, Fn&& fn)
    -> std::vector<Outcome<std::invoke_result_t<Fn&, std::size_t>>> {
  using Result = std::invoke_result_t<Fn&, std::size_t>;
  if (parallelism == 0) throw std::invalid_argument("parallelism must be >= 1");
  std::vector<Outcome<Result>> results(n);
  auto run_one = [&](std::size_t i) {
    try {
      results[i].value.emplace(fn(i));
    } catch (...) {
      results[i].error = std::current_exception();
    }
  };
  const std::size_t workers = std::min(parallelism, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_one(i);
      });
    }
  }
  return results;
}

}  // namespace normalign
