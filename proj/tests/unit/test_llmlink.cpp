#include <doctest.h>

#include <atomic>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "hybridrec/errors.hpp"
#include "hybridrec/llmlink.hpp"

using namespace hybridrec;
using nlohmann::json;

namespace {

PromptContext listwise_ctx() {
  PromptContext ctx;
  ctx.instruction = default_instruction(PromptTask::ListwiseRank);
  ctx.history = {{"Toy Story (1995)", 5.0}, {"Heat (1995)", 3.0}};
  ctx.candidates = {"Last Dance (1996)", "Remains of the Day, The (1993)", "Assassins (1995)"};
  return ctx;
}

std::vector<TitledItem> titled(const std::vector<std::string>& titles) {
  std::vector<TitledItem> out;
  for (std::size_t k = 0; k < titles.size(); ++k) out.push_back({ItemId(k), titles[k]});
  return out;
}

RequestMeta meta_for(PromptTask task, UserId u, std::vector<ItemId> items) {
  RequestMeta m;
  m.task = task;
  m.user = u;
  for (auto i : items) m.candidate_titles.push_back("Film " + std::to_string(i.value));
  m.candidates = std::move(items);
  return m;
}

/// Completion endpoint on 127.0.0.1 that fails the first `failures` calls with
/// `fail_status` and then answers "ok".
class FakeEndpoint {
 public:
  FakeEndpoint(int failures, int fail_status) : failures_(failures), fail_status_(fail_status) {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      bodies_.push_back(req.body);
      auth_ = req.get_header_value("Authorization");
      if (calls_++ < failures_) {
        res.status = fail_status_;
        return;
      }
      res.set_content(R"({"choices":[{"text":" ok "}]})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  [[nodiscard]] std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions";
  }
  int calls() {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::string auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  std::mutex mu_;
  int port_ = 0;
  int calls_ = 0;
  int failures_;
  int fail_status_;
  std::vector<std::string> bodies_;
  std::string auth_;
};

LLMClientConfig fast_config(std::string url) {
  LLMClientConfig c;
  c.endpoint = std::move(url);
  c.max_retries = 2;
  c.initial_backoff_ms = 1;
  c.timeout_ms = 2000;
  return c;
}

}  // namespace

TEST_SUITE("prompts") {
  TEST_CASE("sections appear in order and only when present") {
    auto ctx = listwise_ctx();
    const auto plain = build_prompt(PromptTask::ListwiseRank, ctx);
    CHECK(plain.rfind("Instruction: ", 0) == 0);
    CHECK(plain.find("Interaction History: Toy Story (1995); Heat (1995)\n") != std::string::npos);
    CHECK(plain.find("Candidate Items: Last Dance (1996); Remains of the Day, The (1993); "
                     "Assassins (1995)\n") != std::string::npos);
    CHECK(plain.find("Similar User") == std::string::npos);
    CHECK(plain.find("Conventional Model Prediction") == std::string::npos);
    CHECK(plain.size() >= 7);
    CHECK(plain.substr(plain.size() - 7) == "Output:");

    ctx = augment_with_similar_user(ctx, {{"Heat (1995)", std::nullopt}});
    ctx = augment_with_model_prediction(ctx, "Remains of the Day, The (1993); Assassins (1995)");
    const auto full = build_prompt(PromptTask::ListwiseRank, ctx);
    const auto sim = full.find("Similar User Interaction History: Heat (1995)\n");
    const auto conv = full.find("Conventional Model Prediction: Remains of the Day");
    const auto cand = full.find("Candidate Items: ");
    REQUIRE(sim != std::string::npos);
    REQUIRE(conv != std::string::npos);
    CHECK(cand < sim);
    CHECK(sim < conv);
    CHECK(full == build_prompt(PromptTask::ListwiseRank, ctx));
  }

  TEST_CASE("rating layout") {
    PromptContext ctx;
    ctx.instruction = default_instruction(PromptTask::RatingPredict);
    ctx.history = {{"Independence Day (1996)", 3.0}, {"Star Wars (1977)", 4.5}};
    ctx.candidates = {"Pink Floyd - The Wall (1982)"};
    ctx = augment_with_model_prediction(ctx, format_rating(3.2));
    const auto text = render_prompt_input(PromptTask::RatingPredict, ctx);
    CHECK(text ==
          "Rating History: Independence Day (1996): 3; Star Wars (1977): 4.5\n"
          "Candidate Item: Pink Floyd - The Wall (1982)\n"
          "Conventional Model Prediction: 3.2\n");
  }

  TEST_CASE("missing fields") {
    auto ctx = listwise_ctx();
    ctx.history.clear();
    CHECK_THROWS_AS(build_prompt(PromptTask::ListwiseRank, ctx), MissingField);
    ctx = listwise_ctx();
    ctx.candidates.clear();
    CHECK_THROWS_AS(build_prompt(PromptTask::ListwiseRank, ctx), MissingField);
    ctx = listwise_ctx();
    CHECK_THROWS_AS(build_prompt(PromptTask::RatingPredict, ctx), MissingField);
    CHECK_THROWS_AS(augment_with_similar_user(ctx, {}), EmptyHistory);
    CHECK_THROWS_AS(augment_with_model_prediction(ctx, ""), EmptyPrediction);
  }

  TEST_CASE("similar-user truncation and idempotence") {
    std::vector<HistoryEntry> h;
    for (int k = 0; k < 25; ++k) h.push_back({"T" + std::to_string(k), std::nullopt});
    const auto once = augment_with_similar_user(listwise_ctx(), h, 10);
    REQUIRE(once.similar_user_history->size() == 10);
    CHECK(once.similar_user_history->front().title == "T15");
    CHECK(once.similar_user_history->back().title == "T24");
    CHECK(augment_with_similar_user(once, h, 10) == once);
  }

  TEST_CASE("rating text and task names") {
    CHECK(format_rating(3.0) == "3");
    CHECK(format_rating(3.2) == "3.2");
    for (auto t : {PromptTask::ListwiseRank, PromptTask::PointwiseRate, PromptTask::RatingPredict,
                   PromptTask::PairRank, PromptTask::NextItemPick, PromptTask::AttributeElicit}) {
      CHECK(parse_task(task_name(t)) == t);
    }
    CHECK_THROWS_AS(parse_task("summarise"), ArgumentError);
  }
}

TEST_SUITE("parsers") {
  TEST_CASE("ranked list") {
    const auto c = titled({"Remains of the Day, The (1993)", "Addiction, The (1995)",
                           "Fugitive, The (1993)", "Angel Baby (1995)"});
    const std::vector<ItemId> expected = {ItemId(2), ItemId(3), ItemId(0), ItemId(1)};
    CHECK(parse_ranked_list("Fugitive, The (1993); Angel Baby (1995)", c) ==
          std::vector<ItemId>{ItemId(2), ItemId(3), ItemId(0), ItemId(1)});
    CHECK(parse_ranked_list("  fugitive,  THE (1993) ;Angel Baby (1995); Remains of the Day, The "
                            "(1993)",
                            c) == expected);
    CHECK(parse_ranked_list("Angel Baby (1995); Angel Baby (1995); Nope (2000)", c) ==
          std::vector<ItemId>{ItemId(3), ItemId(0), ItemId(1), ItemId(2)});
    CHECK_THROWS_AS(parse_ranked_list("", c), Unparseable);
    CHECK_THROWS_AS(parse_ranked_list("Nothing (1900)", c), Unparseable);
  }

  TEST_CASE("one bogus title among three") {
    const auto c = titled({"A (1990)", "B (1991)", "C (1992)"});
    CHECK(parse_ranked_list("C (1992); Bogus (1999); A (1990)", c) ==
          std::vector<ItemId>{ItemId(2), ItemId(0), ItemId(1)});
  }

  TEST_CASE("output is always a permutation") {
    std::mt19937_64 rng(12);
    std::vector<std::string> titles;
    for (int k = 0; k < 12; ++k) titles.push_back("Film " + std::to_string(k) + " (19" + std::to_string(70 + k) + ")");
    const auto c = titled(titles);
    for (int trial = 0; trial < 200; ++trial) {
      std::string response;
      const int n = 1 + static_cast<int>(rng() % 15);
      for (int k = 0; k < n; ++k) {
        if (k) response += "; ";
        response += rng() % 4 == 0 ? "Noise " + std::to_string(rng() % 100) : titles[rng() % 12];
      }
      std::vector<ItemId> got;
      try {
        got = parse_ranked_list(response, c);
      } catch (const Unparseable&) {
        continue;
      }
      std::sort(got.begin(), got.end());
      std::vector<ItemId> all;
      for (std::size_t k = 0; k < 12; ++k) all.emplace_back(k);
      CHECK(got == all);
    }
  }

  TEST_CASE("ratings") {
    const RatingScale s{1, 5};
    CHECK(parse_rating("3", s) == 3.0);
    CHECK(parse_rating("I would rate it 4.5 stars", s) == 4.5);
    CHECK(parse_rating("7", s) == 5.0);
    CHECK_THROWS_AS(parse_rating("great movie", s), Unparseable);
    CHECK_THROWS_AS(parse_rating("", s), Unparseable);
  }

  TEST_CASE("pair preference") {
    const TitledItem a{ItemId(1), "A (1990)"}, b{ItemId(2), "B (1991)"};
    CHECK(parse_pair_preference("B (1991); A (1990)", a, b) == std::pair{ItemId(2), ItemId(1)});
    CHECK(parse_pair_preference("I prefer A (1990).", a, b) == std::pair{ItemId(1), ItemId(2)});
    CHECK_THROWS_AS(parse_pair_preference("neither", a, b), Unparseable);
  }

  TEST_CASE("attributes") {
    const std::vector<std::string> keys = {"Director", "Star"};
    const auto got = parse_attributes("Director: X\nStar: Y\nBudget: 3\n", keys);
    CHECK(got == AttributeMap{{"Director", "X"}, {"Star", "Y"}});
    CHECK(parse_attributes("Director - X\nStar: Y", keys) == AttributeMap{{"Star", "Y"}});
    CHECK_THROWS_AS(parse_attributes("Director - X", keys), Unparseable);
  }
}

TEST_SUITE("mock oracle") {
  TEST_CASE("pair and rating answers") {
    MockOracle m(RatingScale{1, 5});
    m.set_rating(UserId(0), ItemId(1), 5);
    m.set_rating(UserId(0), ItemId(2), 2);
    const auto pair = m.complete({"", meta_for(PromptTask::PairRank, UserId(0), {ItemId(2), ItemId(1)})});
    CHECK(pair.text.rfind("Film 1", 0) == 0);
    const auto known = m.complete({"", meta_for(PromptTask::RatingPredict, UserId(0), {ItemId(2)})});
    CHECK(known.text == "2");
    const auto unknown = m.complete({"", meta_for(PromptTask::RatingPredict, UserId(0), {ItemId(9)})});
    CHECK(unknown.text == "3.5");
  }

  TEST_CASE("listwise round trip sorts by ground truth") {
    MockOracle m(RatingScale{1, 5});
    const std::vector<double> r = {3, 5, 1, 5, 4};
    for (std::size_t i = 0; i < r.size(); ++i) m.set_rating(UserId(0), ItemId(i), r[i]);
    const auto meta = meta_for(PromptTask::ListwiseRank, UserId(0),
                               {ItemId(0), ItemId(1), ItemId(2), ItemId(3), ItemId(4)});
    const auto text = m.complete({"", meta}).text;
    std::vector<TitledItem> c;
    for (std::size_t k = 0; k < meta.candidates.size(); ++k) c.push_back({meta.candidates[k], meta.candidate_titles[k]});
    CHECK(parse_ranked_list(text, c) ==
          std::vector<ItemId>{ItemId(1), ItemId(3), ItemId(4), ItemId(0), ItemId(2)});

    m.set_held_out(UserId(0), ItemId(2));
    CHECK(parse_ranked_list(m.complete({"", meta}).text, c).front() == ItemId(2));
  }

  TEST_CASE("next item and attributes") {
    MockOracle m(RatingScale{1, 5});
    m.set_rating(UserId(0), ItemId(3), 4);
    auto meta = meta_for(PromptTask::NextItemPick, UserId(0), {ItemId(1), ItemId(3)});
    CHECK(m.complete({"", meta}).text == "Film 3");
    m.set_held_out(UserId(0), ItemId(1));
    CHECK(m.complete({"", meta}).text == "Film 1");

    m.set_attributes(ItemId(1), {{"Director", "X"}, {"Title", "T"}});
    auto attr = meta_for(PromptTask::AttributeElicit, UserId(0), {ItemId(1)});
    attr.attribute_keys = {"Director", "Star"};
    CHECK(m.complete({"", attr}).text == "Director: X\n");
  }

  TEST_CASE("noise is deterministic") {
    MockOracle a(RatingScale{1, 5}, 17, 0.5), b(RatingScale{1, 5}, 17, 0.5);
    int flips = 0;
    for (std::uint32_t u = 0; u < 200; ++u) {
      a.set_rating(UserId(u), ItemId(0), 5);
      b.set_rating(UserId(u), ItemId(0), 5);
      const auto meta = meta_for(PromptTask::PairRank, UserId(u), {ItemId(0), ItemId(1)});
      const auto ta = a.complete({"", meta}).text;
      CHECK(ta == b.complete({"", meta}).text);
      flips += ta.rfind("Film 1", 0) == 0 ? 1 : 0;
    }
    CHECK(flips > 50);
    CHECK(flips < 150);
    CHECK_THROWS_AS(MockOracle(RatingScale{1, 5}, 0, 1.5), DomainError);
  }
}

TEST_SUITE("remote client") {
  TEST_CASE("request body pins temperature to zero") {
    LLMClientConfig c;
    c.model = "m";
    c.max_tokens = 7;
    const auto body = json::parse(completion_request_body(c, "hi"));
    CHECK(body["temperature"] == 0.0);
    CHECK(body["prompt"] == "hi");
    CHECK(body["model"] == "m");
    CHECK(body["max_tokens"] == 7);
    CHECK(completion_text_from_body(R"({"choices":[{"text":" x\n"}]})") == " x\n");
    CHECK_THROWS_AS(completion_text_from_body("{}"), TransportError);
  }

  TEST_CASE("retries server errors then returns the raw text") {
    FakeEndpoint server(2, 503);
    auto cfg = fast_config(server.url());
    cfg.api_key = "secret";
    RemoteLlmClient client(cfg);
    const auto r = client.complete({"prompt text", {}});
    CHECK(r.text == " ok ");
    CHECK(r.attempts == 3);
    CHECK(server.calls() == 3);
    CHECK(server.auth() == "Bearer secret");
    for (const auto& b : server.bodies()) CHECK(json::parse(b)["temperature"] == 0.0);
  }

  TEST_CASE("rate limiting exhausts retries") {
    FakeEndpoint server(100, 429);
    RemoteLlmClient client(fast_config(server.url()));
    try {
      (void)client.complete({"p", {}});
      FAIL("expected RateLimited");
    } catch (const RateLimited& e) {
      CHECK(e.attempts() == 3);
    }
  }

  TEST_CASE("unreachable endpoint is a transport error after retries") {
    // Nothing listens on port 1.
    RemoteLlmClient client(fast_config("http://127.0.0.1:1/v1"));
    try {
      (void)client.complete({"p", {}});
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.attempts() == 3);
    }
  }

  TEST_CASE("batches keep request order") {
    FakeEndpoint server(0, 500);
    auto cfg = fast_config(server.url());
    cfg.max_in_flight = 3;
    RemoteLlmClient client(cfg);
    std::vector<CompletionRequest> reqs(7);
    for (std::size_t k = 0; k < reqs.size(); ++k) reqs[k].prompt = "p" + std::to_string(k);
    const auto out = client.complete_batch(reqs);
    REQUIRE(out.size() == 7);
    for (const auto& r : out) CHECK(r.ok());
    CHECK(server.calls() == 7);
  }

  TEST_CASE("configuration checks") {
    LLMClientConfig c;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c.endpoint = "no-scheme";
    CHECK_THROWS_AS(RemoteLlmClient{c}, ArgumentError);
  }
}
