#pragma once

// Line protocol to an external simulator running as a child process.
//
//   request:  x_1,x_2,...,x_d\n   (shortest round-trip decimal floats)
//   response: y\n                  (one float)
//
// The child's stderr is left alone. Closing its stdin (EOF) asks it to
// shut down.

#include <chrono>
#include <mutex>
#include <span>
#include <string>
#include <sys/types.h>

#include "rareyield/testbench.hpp"

namespace rareyield {

/// Formats a request line (including the trailing newline).
std::string format_request(std::span<const double> x);

/// Parses one response line (without its newline). Throws kEvaluation with
/// the raw line when it is not a single finite float.
double parse_response(const std::string& line);

class SubprocessEvaluator final : public Evaluator {
 public:
  /// Spawns `/bin/sh -c command`.
  explicit SubprocessEvaluator(const std::string& command,
                               std::chrono::milliseconds timeout =
                                   std::chrono::seconds(30));
  ~SubprocessEvaluator() override;

  SubprocessEvaluator(const SubprocessEvaluator&) = delete;
  SubprocessEvaluator& operator=(const SubprocessEvaluator&) = delete;

  /// One request/response exchange; calls are serialized per handle.
  double evaluate(std::span<const double> x) override;

  const std::string& command() const noexcept { return command_; }

 private:
  std::string read_line();
  [[noreturn]] void child_gone(const std::string& context);
  void shutdown() noexcept;

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Testbench over an external simulator with the given failure spec.
Testbench make_external_bench(const std::string& command, std::size_t dim,
                              FailureSpec spec,
                              std::chrono::milliseconds timeout =
                                  std::chrono::seconds(30));

}  // namespace rareyield
