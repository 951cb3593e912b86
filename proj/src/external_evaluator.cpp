#include "rareyield/external_evaluator.hpp"

#include <charconv>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "rareyield/error.hpp"

namespace rareyield {
namespace {

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
  return "status " + std::to_string(status);
}

void ignore_sigpipe_once() {
  static const bool done = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace

std::string format_request(std::span<const double> x) {
  std::string line;
  line.reserve(x.size() * 24);
  char buf[32];
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) line.push_back(',');
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x[i]);
    (void)ec;
    line.append(buf, end);
  }
  line.push_back('\n');
  return line;
}

double parse_response(const std::string& line) {
  std::string s = line;
  if (!s.empty() && s.back() == '\r') s.pop_back();
  const auto first = s.find_first_not_of(" \t");
  const auto last = s.find_last_not_of(" \t");
  if (first == std::string::npos) {
    fail(ErrorCode::kEvaluation, "malformed simulator response: '" + line + "'");
  }
  s = s.substr(first, last - first + 1);
  errno = 0;
  char* end = nullptr;
  const double y = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    fail(ErrorCode::kEvaluation, "malformed simulator response: '" + line + "'");
  }
  if (!std::isfinite(y)) {
    fail(ErrorCode::kEvaluation, "non-finite simulator response: '" + line + "'");
  }
  return y;
}

SubprocessEvaluator::SubprocessEvaluator(const std::string& command,
                                         std::chrono::milliseconds timeout)
    : command_(command), timeout_(timeout) {
  ignore_sigpipe_once();
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) fail(ErrorCode::kEvaluation, "pipe() failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    fail(ErrorCode::kEvaluation, "pipe() failed");
  }
  pid_ = fork();
  if (pid_ < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    fail(ErrorCode::kEvaluation, "fork() failed");
  }
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessEvaluator::~SubprocessEvaluator() { shutdown(); }

void SubprocessEvaluator::shutdown() noexcept {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // EOF is the shutdown request; give the child a moment, then insist.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      usleep(2000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void SubprocessEvaluator::child_gone(const std::string& context) {
  std::string status = "still running";
  if (pid_ > 0) {
    int raw = 0;
    // The child may still be flushing; wait briefly for its status.
    for (int i = 0; i < 100; ++i) {
      if (waitpid(pid_, &raw, WNOHANG) == pid_) {
        status = describe_status(raw);
        pid_ = -1;
        break;
      }
      usleep(1000);
    }
  }
  fail(ErrorCode::kEvaluation,
       "simulator '" + command_ + "' " + context + " (" + status + ")");
}

std::string SubprocessEvaluator::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      fail(ErrorCode::kEvaluation, "simulator '" + command_ +
                                       "' timed out; partial response: '" +
                                       buffer_ + "'");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kEvaluation, "poll() failed on simulator pipe");
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      child_gone("read failed");
    }
    if (n == 0) child_gone("closed its output; partial response: '" + buffer_ + "'");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

double SubprocessEvaluator::evaluate(std::span<const double> x) {
  std::lock_guard lock(mutex_);
  if (to_child_ < 0) fail(ErrorCode::kEvaluation, "simulator handle is closed");
  const std::string request = format_request(x);
  std::size_t sent = 0;
  while (sent < request.size()) {
    const ssize_t n = write(to_child_, request.data() + sent, request.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      child_gone("stopped accepting requests");
    }
    sent += static_cast<std::size_t>(n);
  }
  return parse_response(read_line());
}

Testbench make_external_bench(const std::string& command, std::size_t dim,
                              FailureSpec spec,
                              std::chrono::milliseconds timeout) {
  auto eval = std::make_shared<SubprocessEvaluator>(command, timeout);
  return Testbench("external:" + command, dim, std::move(eval), spec);
}

}  // namespace rareyield
