// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "ape/protocol.hpp"

using namespace ape;
using namespace ape::protocol;

namespace {

TranscriptEntry req(json frame) { return {Direction::kRequest, std::move(frame)}; }
TranscriptEntry rep(json frame) { return {Direction::kReply, std::move(frame)}; }

json hello_reply(std::string version = "ape/1") {
  return {{"t", "hello"}, {"version", version}, {"capabilities", {{"logprobs", false}}}};
}

}  // namespace

TEST_CASE("request builders produce valid frames") {
  const std::vector<Example> batch{{"a", "art a", "ref a"}, {"b", "art b", "ref b"}};
  Hyperparams hp;
  hp.label_smoothing = 0.1;
  const std::vector<ArticleRequest> articles{{"a", "art a"}};
  const std::vector<Summary> texts{{"a", "some text"}};

  for (const json& frame : {hello_request(), train_request(batch, hp), summarize_request(articles),
                            logprobs_request(texts), snapshot_request(), restore_request("tok"), shutdown_request()}) {
    CHECK_MESSAGE(!validate_frame(Direction::kRequest, frame), frame.dump());
  }

  CHECK(hello_request() == json::parse(R"({"t":"hello","version":"ape/1"})"));
  const json train = train_request(batch, hp);
  CHECK(train["examples"].size() == 2);
  CHECK(train["examples"][1]["reference"] == "ref b");
  CHECK(train["hyperparams"]["epochs"] == 3);
  CHECK(train["hyperparams"]["learning_rate"] == 3e-6);
  CHECK(train["hyperparams"]["grad_accum_steps"] == 4);
  CHECK(train["hyperparams"]["label_smoothing"] == 0.1);
  CHECK(summarize_request(articles)["articles"][0] == json({{"id", "a"}, {"article", "art a"}}));
  CHECK(logprobs_request(texts)["items"][0]["text"] == "some text");
  CHECK(restore_request("tok")["token"] == "tok");
}

TEST_CASE("reply types per request") {
  CHECK(expected_reply("hello") == "hello");
  CHECK(expected_reply("train") == "ok");
  CHECK(expected_reply("summarize") == "summaries");
  CHECK(expected_reply("logprobs") == "logprobs");
  CHECK(expected_reply("snapshot") == "snapshot");
  CHECK(expected_reply("restore") == "ok");
  CHECK(expected_reply("shutdown") == "ok");
  CHECK(expected_reply("dance").empty());
}

TEST_CASE("reply frame shapes") {
  CHECK(!validate_frame(Direction::kReply, hello_reply()));
  CHECK(!validate_frame(Direction::kReply, json::parse(R"({"t":"ok","extra":1})")));
  CHECK(!validate_frame(Direction::kReply, json::parse(R"({"t":"summaries","items":[{"id":"a","text":"x"}]})")));
  CHECK(!validate_frame(Direction::kReply, json::parse(R"({"t":"logprobs","items":[{"id":"a","values":[-1,-0.5]}]})")));
  CHECK(!validate_frame(Direction::kReply, json::parse(R"({"t":"snapshot","token":"s"})")));
  CHECK(!validate_frame(Direction::kReply, json::parse(R"({"t":"error","msg":"boom"})")));

  CHECK(validate_frame(Direction::kReply, json::array()));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"type":"ok"})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"hello","version":"ape/1"})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"hello","version":"ape/1","capabilities":{"logprobs":1}})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"summaries","items":[{"id":"a"}]})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"summaries","items":[{"id":7,"text":"x"}]})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"logprobs","items":[{"id":"a","values":["x"]}]})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"snapshot"})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"error"})")));
  CHECK(validate_frame(Direction::kReply, json::parse(R"({"t":"maybe"})")));
}

TEST_CASE("request frame shapes") {
  CHECK(validate_frame(Direction::kRequest, json::parse(R"({"t":"hello"})")));
  CHECK(validate_frame(Direction::kRequest, json::parse(R"({"t":"train","examples":[]})")));
  CHECK(validate_frame(Direction::kRequest,
                       json::parse(R"({"t":"train","examples":[],"hyperparams":{"epochs":3}})")));
  CHECK(validate_frame(Direction::kRequest, json::parse(R"({"t":"summarize","articles":[{"id":"a"}]})")));
  CHECK(validate_frame(Direction::kRequest, json::parse(R"({"t":"restore"})")));
  CHECK(validate_frame(Direction::kRequest, json::parse(R"({"t":"ok"})")));
}

TEST_CASE("a well-formed conversation validates") {
  const std::vector<TranscriptEntry> t{
      req(hello_request()),
      rep(hello_reply()),
      req(snapshot_request()),
      rep({{"t", "snapshot"}, {"token", "s0"}}),
      req(restore_request("s0")),
      rep({{"t", "error"}, {"msg", "unknown token"}}),
      req(shutdown_request()),
      rep({{"t", "ok"}}),
  };
  CHECK(validate_transcript(t).empty());
}

TEST_CASE("transcript violations are all reported") {
  SUBCASE("request before hello") {
    const std::vector<TranscriptEntry> t{req(snapshot_request()), rep({{"t", "snapshot"}, {"token", "s"}})};
    const auto problems = validate_transcript(t);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("before hello") != std::string::npos);
  }
  SUBCASE("version mismatch") {
    const std::vector<TranscriptEntry> t{req(hello_request()), rep(hello_reply("ape/0"))};
    const auto problems = validate_transcript(t);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("ape/0") != std::string::npos);
  }
  SUBCASE("two requests in flight and a mismatched reply") {
    const std::vector<TranscriptEntry> t{req(hello_request()), rep(hello_reply()), req(snapshot_request()),
                                         req(shutdown_request()), rep({{"t", "summaries"}, {"items", json::array()}})};
    CHECK(validate_transcript(t).size() == 2);
  }
  SUBCASE("unsolicited reply, malformed frame and traffic after shutdown") {
    const std::vector<TranscriptEntry> t{req(hello_request()),    rep(hello_reply()),  rep({{"t", "ok"}}),
                                         req({{"t", "restore"}}), req(shutdown_request()), rep({{"t", "ok"}}),
                                         req(snapshot_request())};
    const auto problems = validate_transcript(t);
    REQUIRE(problems.size() == 3);
    CHECK(problems[0].find("unsolicited") != std::string::npos);
    CHECK(problems[1].find("token") != std::string::npos);
    CHECK(problems[2].find("after shutdown") != std::string::npos);
  }
}
