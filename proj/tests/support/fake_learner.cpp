// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scriptable "ape/1" learner for tests. Its model is a single counter of
// accepted train calls: summaries are the first (4 + 2*steps) words of the
// article, so training visibly changes output and snapshots are exact.
//
//   --version V           version announced in the hello reply
//   --logprobs            advertise and serve log-probabilities
//   --die-after N         exit(1) on receiving request N+1 (hello excluded)
//   --malformed-on TYPE   answer the first TYPE request with a broken line
//   --wrong-reply-on TYPE answer the first TYPE request with the wrong type
//   --error-on TYPE       answer the first TYPE request with an error frame
//   --silent-on TYPE      never answer TYPE requests
//   --silent-hello        never answer the handshake
//   --drop-summary ID     omit ID from summaries replies

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using nlohmann::json;

namespace {

struct Options {
  std::string version = "ape/1";
  bool logprobs = false;
  long die_after = -1;
  std::string malformed_on, wrong_reply_on, error_on, silent_on, drop_summary;
  bool silent_hello = false;
};

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

void send(const json& frame) { std::cout << frame.dump() << "\n" << std::flush; }

[[noreturn]] void hang() {
  while (true) std::this_thread::sleep_for(std::chrono::hours(1));
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << "\n";
        std::exit(64);
      }
      return argv[++i];
    };
    if (a == "--version") opt.version = next();
    else if (a == "--logprobs") opt.logprobs = true;
    else if (a == "--die-after") opt.die_after = std::stol(next());
    else if (a == "--malformed-on") opt.malformed_on = next();
    else if (a == "--wrong-reply-on") opt.wrong_reply_on = next();
    else if (a == "--error-on") opt.error_on = next();
    else if (a == "--silent-on") opt.silent_on = next();
    else if (a == "--silent-hello") opt.silent_hello = true;
    else if (a == "--drop-summary") opt.drop_summary = next();
    else {
      std::cerr << "unknown flag " << a << "\n";
      return 64;
    }
  }

  long steps = 0;
  long requests = 0;
  std::map<std::string, long> snapshots;
  std::map<std::string, bool> fired;
  auto once = [&](const std::string& flag_type, const std::string& type) {
    if (flag_type != type || fired[flag_type]) return false;
    fired[flag_type] = true;
    return true;
  };

  std::string line;
  while (std::getline(std::cin, line)) {
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception&) {
      send({{"t", "error"}, {"msg", "unparseable request"}});
      continue;
    }
    const std::string type = req.value("t", "");
    if (type == "hello") {
      if (opt.silent_hello) hang();
      send({{"t", "hello"}, {"version", opt.version}, {"capabilities", {{"logprobs", opt.logprobs}}}});
      continue;
    }
    if (opt.die_after >= 0 && requests >= opt.die_after) return 1;
    ++requests;

    if (type == opt.silent_on) hang();
    if (once(opt.malformed_on, type)) {
      std::cout << "{\"t\": \"ok\", oops\n" << std::flush;
      continue;
    }
    if (once(opt.wrong_reply_on, type)) {
      send({{"t", type == "snapshot" ? "ok" : "snapshot"}, {"token", "x"}});
      continue;
    }
    if (once(opt.error_on, type)) {
      send({{"t", "error"}, {"msg", "injected failure"}});
      continue;
    }

    if (type == "train") {
      ++steps;
      send({{"t", "ok"}});
    } else if (type == "summarize") {
      json items = json::array();
      const std::size_t keep = static_cast<std::size_t>(4 + 2 * steps);
      for (const auto& art : req.at("articles")) {
        const std::string id = art.at("id").get<std::string>();
        if (id == opt.drop_summary) continue;
        const auto w = words(art.at("article").get<std::string>());
        std::string text;
        for (std::size_t i = 0; i < w.size() && i < keep; ++i) text += (i ? " " : "") + w[i];
        items.push_back({{"id", id}, {"text", text}});
      }
      send({{"t", "summaries"}, {"items", items}});
    } else if (type == "logprobs") {
      json items = json::array();
      for (const auto& item : req.at("items")) {
        const auto w = words(item.at("text").get<std::string>());
        std::vector<double> values(std::max<std::size_t>(w.size(), 1), -1.0 / static_cast<double>(1 + steps));
        items.push_back({{"id", item.at("id")}, {"values", values}});
      }
      send({{"t", "logprobs"}, {"items", items}});
    } else if (type == "snapshot") {
      const std::string token = "snap-" + std::to_string(snapshots.size());
      snapshots[token] = steps;
      send({{"t", "snapshot"}, {"token", token}});
    } else if (type == "restore") {
      auto it = snapshots.find(req.value("token", ""));
      if (it == snapshots.end()) {
        send({{"t", "error"}, {"msg", "unknown token"}});
      } else {
        steps = it->second;
        send({{"t", "ok"}});
      }
    } else if (type == "shutdown") {
      send({{"t", "ok"}});
      return 0;
    } else {
      send({{"t", "error"}, {"msg", "unknown request type '" + type + "'"}});
    }
  }
  return 0;
}
