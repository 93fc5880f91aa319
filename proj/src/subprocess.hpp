// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Child process with line-oriented stdin/stdout (POSIX only).

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <sys/types.h>

namespace ape::detail {

class Subprocess {
 public:
  /// Runs `command` via /bin/sh -c.
  explicit Subprocess(const std::string& command);
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  /// False when the child's stdin is gone.
  bool write_line(const std::string& line);

  enum class ReadStatus { kLine, kEof, kTimeout };
  /// Zero timeout waits indefinitely.
  ReadStatus read_line(std::string& line, std::chrono::milliseconds timeout);

  /// Closes stdin and waits up to `grace` for exit before killing.
  /// Returns the exit status when known.
  std::optional<int> finish(std::chrono::milliseconds grace);

  pid_t pid() const noexcept { return pid_; }

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::optional<int> exit_status_;
};

}  // namespace ape::detail
