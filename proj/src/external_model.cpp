#include "condsub/error.hpp"
#include "condsub/models.hpp"

#include <algorithm>
#include <charconv>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace condsub {

namespace {

constexpr std::string_view kHandshake = "CONDSUB-PREDICT 1";

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string_view strip(std::string_view v) {
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t' || v.front() == '\r')) v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
  return v;
}

}  // namespace

ExternalModel::ExternalModel(std::string command, std::vector<ColumnInfo> features,
                             std::chrono::milliseconds timeout)
    : PredictiveModel(std::move(features)), command_(std::move(command)), timeout_(timeout) {
  // a child dying mid-write would raise SIGPIPE; report EPIPE instead,
  // unless the host program installed its own handler
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] {
    struct sigaction current {};
    if (sigaction(SIGPIPE, nullptr, &current) == 0 && current.sa_handler == SIG_DFL) signal(SIGPIPE, SIG_IGN);
  });

  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw BridgeError(BridgeErrorKind::spawn, "pipe: " + std::string(std::strerror(errno)));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw BridgeError(BridgeErrorKind::spawn, "pipe: " + std::string(std::strerror(errno)));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw BridgeError(BridgeErrorKind::spawn, "fork: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);

  try {
    const std::string line(strip(read_line()));
    if (line != kHandshake)
      throw BridgeError(BridgeErrorKind::handshake,
                        "expected handshake '" + std::string(kHandshake) + "', got '" + line + "'");
  } catch (const BridgeError& e) {
    shutdown();
    if (e.kind() == BridgeErrorKind::process_exit)
      throw BridgeError(BridgeErrorKind::handshake, "model process exited before handshake: " + command_);
    throw;
  }
}

ExternalModel::~ExternalModel() { shutdown(); }

void ExternalModel::shutdown() noexcept {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // give a well-behaved child a moment to exit on EOF
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

std::string ExternalModel::read_line() const {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw BridgeError(BridgeErrorKind::timeout, "model process timed out: " + command_);
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw BridgeError(BridgeErrorKind::process_exit, "poll: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t got = read(from_child_, chunk, sizeof chunk);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw BridgeError(BridgeErrorKind::process_exit, "read: " + std::string(std::strerror(errno)));
    }
    if (got == 0) throw BridgeError(BridgeErrorKind::process_exit, "model process closed its output: " + command_);
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

void ExternalModel::write_all(const std::string& text) const {
  // drain the child's output while writing so neither side blocks on a full pipe
  std::size_t done = 0;
  while (done < text.size()) {
    pollfd pfd[2] = {{to_child_, POLLOUT, 0}, {from_child_, POLLIN, 0}};
    const int rc = poll(pfd, 2, static_cast<int>(timeout_.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw BridgeError(BridgeErrorKind::process_exit, "poll: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) throw BridgeError(BridgeErrorKind::timeout, "model process stopped reading input: " + command_);
    if (pfd[1].revents & (POLLIN | POLLHUP)) {
      char chunk[4096];
      const ssize_t got = read(from_child_, chunk, sizeof chunk);
      if (got > 0) buffer_.append(chunk, static_cast<std::size_t>(got));
    }
    if (pfd[0].revents & (POLLERR | POLLHUP))
      throw BridgeError(BridgeErrorKind::process_exit, "model process stopped reading input: " + command_);
    if (pfd[0].revents & POLLOUT) {
      const std::size_t chunk = std::min<std::size_t>(text.size() - done, 4096);
      const ssize_t n = write(to_child_, text.data() + done, chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw BridgeError(BridgeErrorKind::process_exit, "model process stopped reading input: " + command_);
      }
      done += static_cast<std::size_t>(n);
    }
  }
}

Eigen::VectorXd ExternalModel::predict(const Dataset& data) const {
  const Eigen::MatrixXd x = feature_matrix(data);
  std::string request = "PREDICT " + std::to_string(x.rows()) + "\n";
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index c = 0; c < x.cols(); ++c) {
      if (c) request += ',';
      const ColumnInfo& info = features_[static_cast<std::size_t>(c)];
      if (info.is_numeric()) {
        request += format_double(x(i, c));
      } else {
        const auto j = data.index_of(info.name);
        request += csv_quote(data.level_name(j, x(i, c)));
      }
    }
    request += '\n';
  }

  std::lock_guard lock(mutex_);
  if (pid_ < 0) throw BridgeError(BridgeErrorKind::process_exit, "model process is not running");
  if (!buffer_.empty())
    throw BridgeError(BridgeErrorKind::count_mismatch, "model process sent output before the request");
  write_all(request);

  Eigen::VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    std::string line;
    try {
      line = read_line();
    } catch (const BridgeError& e) {
      const bool partial = e.kind() == BridgeErrorKind::process_exit || e.kind() == BridgeErrorKind::timeout;
      if (partial && i > 0)
        throw BridgeError(BridgeErrorKind::count_mismatch, "model process returned " + std::to_string(i) +
                                                               " predictions for " + std::to_string(x.rows()) +
                                                               " rows");
      throw;
    }
    const std::string_view v = strip(line);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
      if (v.starts_with("PREDICT") || v == kHandshake)
        throw BridgeError(BridgeErrorKind::count_mismatch, "model process response ended early");
      throw BridgeError(BridgeErrorKind::malformed_line,
                        "malformed prediction line " + std::to_string(i + 1) + ": '" + std::string(v) + "'");
    }
    out(i) = value;
  }
  return out;
}

std::shared_ptr<const ExternalModel> external_model(const std::string& command, std::vector<ColumnInfo> features,
                                                    std::chrono::milliseconds timeout) {
  return std::make_shared<ExternalModel>(command, std::move(features), timeout);
}

}  // namespace condsub
