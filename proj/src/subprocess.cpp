// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <fmt/format.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "ape/errors.hpp"

namespace ape::detail {
namespace {

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

Subprocess::Subprocess(const std::string& command) {
  // The request side is a socket so writes can use MSG_NOSIGNAL instead of
  // raising SIGPIPE when the child dies.
  int in_pair[2];
  int out_pipe[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) {
    throw ProtocolError(fmt::format("socketpair failed: {}", std::strerror(errno)));
  }
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pair[0]);
    ::close(in_pair[1]);
    throw ProtocolError(fmt::format("pipe failed: {}", std::strerror(errno)));
  }

  pid_ = ::fork();
  if (pid_ < 0) {
    ::close(in_pair[0]);
    ::close(in_pair[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw ProtocolError(fmt::format("fork failed: {}", std::strerror(errno)));
  }
  if (pid_ == 0) {
    // Own process group, so a kill also reaches anything the shell forked.
    ::setpgid(0, 0);
    ::dup2(in_pair[1], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid_, pid_);  // also here, in case the child has not run yet
  ::close(in_pair[1]);
  ::close(out_pipe[1]);
  to_child_ = in_pair[0];
  from_child_ = out_pipe[0];
}

Subprocess::~Subprocess() { finish(std::chrono::milliseconds(1000)); }

bool Subprocess::write_line(const std::string& line) {
  if (to_child_ < 0) return false;
  std::string data = line;
  data.push_back('\n');
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(to_child_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

Subprocess::ReadStatus Subprocess::read_line(std::string& line, std::chrono::milliseconds timeout) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + timeout;
  while (true) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return ReadStatus::kLine;
    }
    if (from_child_ < 0) return ReadStatus::kEof;

    int wait_ms = -1;
    if (timeout.count() > 0) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) return ReadStatus::kTimeout;
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      return ReadStatus::kEof;
    }
    if (ready == 0) return ReadStatus::kTimeout;

    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      close_fd(from_child_);
      continue;  // a final unterminated fragment is not a frame
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::optional<int> Subprocess::finish(std::chrono::milliseconds grace) {
  close_fd(to_child_);
  if (pid_ > 0 && !exit_status_) {
    const auto deadline = std::chrono::steady_clock::now() + grace;
    int status = 0;
    while (true) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        break;
      }
      if (r < 0) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        ::kill(-pid_, SIGKILL);
        if (::waitpid(pid_, &status, 0) == pid_) exit_status_ = 128 + SIGKILL;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  if (pid_ > 0) ::kill(-pid_, SIGKILL);  // stragglers left by the shell
  close_fd(from_child_);
  return exit_status_;
}

}  // namespace ape::detail
