#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "cli.hpp"
#include "hybridrec/errors.hpp"
#include "run_config.hpp"
#include "synthetic.hpp"

using namespace hybridrec;
namespace fs = std::filesystem;
namespace ht = hybridrec::testing;
using json = nlohmann::ordered_json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Small synthetic dataset written as GenericCSV.
struct Workspace {
  ht::TempDir dir{"hybridrec-cli"};
  std::string csv;

  Workspace() {
    const auto world = ht::make_synthetic({60, 40, 4, 10, 2.0, 17});
    csv = (dir / "data.csv").string();
    write_generic_csv(world.corpus, csv);
  }

  [[nodiscard]] std::string out(const std::string& name) const { return (dir / name).string(); }

  [[nodiscard]] std::vector<std::string> base(const std::string& command) const {
    return {command, "--data", csv, "--format", "csv"};
  }
};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<std::string> kFastTrain = {"--dim", "8", "--epochs", "5"};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("stats and ingest") {
    Workspace w;
    const auto s = run(w.base("stats"));
    REQUIRE(s.code == 0);
    const auto stats = json::parse(s.out);
    CHECK(stats["users"] == 60);
    CHECK(stats["items"] == 40);
    CHECK(stats["interactions"] == 600);

    const auto i = run(w.base("ingest") + std::vector<std::string>{"--out", w.out("ingest")});
    REQUIRE(i.code == 0);
    CHECK(fs::exists(w.dir / "ingest" / "corpus.csv"));
    const auto echo = json::parse(ht::read_file(w.dir / "ingest" / "run_config.json"));
    CHECK(echo["version"] == cli::version_stamp());
    CHECK(echo["command"] == "ingest");
    CHECK(echo["config"]["dataset"]["format"] == "csv");
  }

  TEST_CASE("exit codes") {
    Workspace w;
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    const auto missing = run({"stats", "--data", w.out("nope"), "--format", "ml100k"});
    CHECK(missing.code == cli::kDataError);
    CHECK(missing.err.find("MalformedRecord") != std::string::npos);
    fs::create_directory(w.dir / "empty");
    const auto empty = run({"stats", "--data", w.out("empty"), "--format", "ml100k"});
    CHECK(empty.code == cli::kDataError);
    CHECK(empty.err.find("EmptyCorpus") != std::string::npos);
    CHECK(run(w.base("stats") + std::vector<std::string>{"--format", "parquet"}).code ==
          cli::kUsage);
    CHECK(run(w.base("evaluate") + std::vector<std::string>{"--out", w.out("e")}).code ==
          cli::kUsage);
    CHECK(run(w.base("evaluate") + std::vector<std::string>{"--endpoint", "http://127.0.0.1:1/v1",
                                                            "--max-retries", "0", "--out",
                                                            w.out("dead")} +
              kFastTrain)
              .code == cli::kTransportError);
  }

  TEST_CASE("training is byte-reproducible and epochs=0 saves the initialisation") {
    Workspace w;
    const auto args = w.base("train") + kFastTrain;
    REQUIRE(run(args + std::vector<std::string>{"--out", w.out("t1")}).code == 0);
    REQUIRE(run(args + std::vector<std::string>{"--out", w.out("t2")}).code == 0);
    CHECK(ht::read_file(w.dir / "t1" / "mf_bpr.bin") == ht::read_file(w.dir / "t2" / "mf_bpr.bin"));

    REQUIRE(run(w.base("train") + std::vector<std::string>{"--dim", "8", "--epochs", "0", "--out",
                                                           w.out("t0")})
                .code == 0);
    const auto init = load_mf_model(w.dir / "t0" / "mf_bpr.bin");
    TrainConfig c;
    c.dimension = 8;
    c.epochs = 0;
    const auto corpus = ingest(w.csv, DatasetFormat::GenericCSV);
    CHECK(init == train_mf_bpr(leave_one_out_split(corpus).train, c));

    for (const std::string model : {"rating_mf", "markov"}) {
      CHECK(run(w.base("train") + std::vector<std::string>{"--model", model, "--epochs", "2",
                                                           "--out", w.out("t-" + model)})
                .code == 0);
      CHECK(fs::exists(w.dir / ("t-" + model) / (model + ".bin")));
    }
  }

  TEST_CASE("evaluate: reproducible, alpha1 = 0 matches baseline, corrupt model rejected") {
    Workspace w;
    const auto args = w.base("evaluate") + kFastTrain + std::vector<std::string>{"--mock"};
    REQUIRE(run(args + std::vector<std::string>{"--out", w.out("e1")}).code == 0);
    REQUIRE(run(args + std::vector<std::string>{"--out", w.out("e2")}).code == 0);
    const auto r1 = ht::read_file(w.dir / "e1" / "report.json");
    CHECK(r1 == ht::read_file(w.dir / "e2" / "report.json"));

    REQUIRE(run(args + std::vector<std::string>{"--alpha1", "0", "--out", w.out("e0")}).code == 0);
    const auto zero = json::parse(ht::read_file(w.dir / "e0" / "report.json"));
    CHECK(zero["metrics"] == zero["baseline"]);

    REQUIRE(run(w.base("evaluate") + kFastTrain +
                std::vector<std::string>{"--mock", "--task", "rating", "--out", w.out("er")})
                .code == 0);
    const auto rating = json::parse(ht::read_file(w.dir / "er" / "report.json"));
    CHECK(rating["task"] == "rating");
    CHECK(rating["metrics"].contains("RMSE"));

    ht::write_file(w.dir / "bad.bin", "not a model");
    CHECK(run(args + std::vector<std::string>{"--model-file", w.out("bad.bin"), "--out",
                                              w.out("eb")})
              .code == cli::kDataError);
  }

  TEST_CASE("sweep writes the full grid") {
    Workspace w;
    REQUIRE(run(w.base("sweep") + kFastTrain +
                std::vector<std::string>{"--mock", "--out", w.out("sw")})
                .code == 0);
    std::size_t cells = 0;
    for (const auto& e : fs::directory_iterator(w.dir / "sw" / "sweep")) cells += e.is_regular_file();
    CHECK(cells == 25);
    const auto summary = json::parse(ht::read_file(w.dir / "sw" / "sweep.json"));
    CHECK(summary["cells"].size() == 25);
    CHECK(summary.contains("best"));
  }

  TEST_CASE("augment and instructions") {
    Workspace w;
    REQUIRE(run(w.base("augment") +
                std::vector<std::string>{"--mock", "--pairs-per-user", "0", "--out", w.out("a0")})
                .code == 0);
    // zero pairs: the training split goes out untouched and no triples are produced
    const auto copy = ingest(w.dir / "a0" / "corpus.csv", DatasetFormat::GenericCSV);
    const auto split = leave_one_out_split(ingest(w.csv, DatasetFormat::GenericCSV));
    const auto rows = [](const Corpus& c) {
      std::multiset<std::tuple<std::string, std::string, double, std::int64_t>> out;
      for (const auto& x : c.interactions())
        out.insert({c.user_key(x.user), c.item_key(x.item), x.rating.value_or(0), x.timestamp});
      return out;
    };
    CHECK(rows(copy) == rows(split.train));
    CHECK(ht::read_file(w.dir / "a0" / "triples.csv") == "user,positive,negative\n");

    for (const std::string kind : {"direct", "sequential"}) {
      const auto args = w.base("augment") + std::vector<std::string>{"--mock", "--kind", kind};
      REQUIRE(run(args + std::vector<std::string>{"--out", w.out(kind + "1")}).code == 0);
      REQUIRE(run(args + std::vector<std::string>{"--out", w.out(kind + "2")}).code == 0);
      CHECK(ht::read_file(w.dir / (kind + "1") / "corpus.csv") ==
            ht::read_file(w.dir / (kind + "2") / "corpus.csv"));
      CHECK(fs::exists(w.dir / (kind + "1") / "augment_report.json"));
    }

    const auto ins = w.base("instructions") +
                     std::vector<std::string>{"--per-task", "50", "--tasks", "listwise,rating"};
    REQUIRE(run(ins + std::vector<std::string>{"--out", w.out("i1")}).code == 0);
    REQUIRE(run(ins + std::vector<std::string>{"--out", w.out("i2")}).code == 0);
    const auto lines = ht::read_file(w.dir / "i1" / "instructions.jsonl");
    CHECK(lines == ht::read_file(w.dir / "i2" / "instructions.jsonl"));
    CHECK(std::count(lines.begin(), lines.end(), '\n') <= 100);
  }

  TEST_CASE("config files") {
    Workspace w;
    json cfg = {{"dataset", {{"path", w.csv}, {"format", "csv"}}},
                {"llm", {{"mock", true}, {"api_key", "s3cret"}}},
                {"mf_bpr", {{"dimension", 8}, {"epochs", 3}}}};
    ht::write_file(w.dir / "cfg.json", cfg.dump());
    REQUIRE(run({"evaluate", "--config", w.out("cfg.json"), "--out", w.out("c1")}).code == 0);
    const auto echoed = ht::read_file(w.dir / "c1" / "run_config.json");
    CHECK(echoed.find("s3cret") == std::string::npos);
    CHECK(json::parse(echoed)["config"]["llm"]["api_key"] == "<redacted>");
    CHECK(json::parse(echoed)["config"]["mf_bpr"]["dimension"] == 8);

    // flags override config keys
    REQUIRE(run({"evaluate", "--config", w.out("cfg.json"), "--dim", "4", "--out", w.out("c2")})
                .code == 0);
    CHECK(json::parse(ht::read_file(w.dir / "c2" / "run_config.json"))["config"]["mf_bpr"]
                     ["dimension"] == 4);

    ht::write_file(w.dir / "typo.json", R"({"llm": {"mokc": true}})");
    CHECK(run({"stats", "--config", w.out("typo.json")}).code == cli::kUsage);
    CHECK_THROWS_AS(cli::run_config_from_json(json::parse(R"({"mf_bpr": {"epochs": -1}})")),
                    ArgumentError);
    CHECK_THROWS_AS(cli::run_config_from_json(json::parse(R"({"out": 3})")), ArgumentError);
    const auto back = cli::run_config_from_json(cli::to_json(cli::RunConfig{}));
    CHECK(cli::to_json(back) == cli::to_json(cli::RunConfig{}));
  }

  TEST_CASE("memoizing client") {
    MockOracle oracle(RatingScale{1, 5});
    cli::MemoizingClient memo(std::make_unique<MockOracle>(oracle));
    RequestMeta meta;
    meta.task = PromptTask::RatingPredict;
    meta.user = UserId(0);
    meta.candidates = {ItemId(1)};
    const CompletionRequest req{"same prompt", meta};
    const std::vector<CompletionRequest> batch = {req, req};
    (void)memo.complete(req);
    const auto out = memo.complete_batch(batch);
    CHECK(out[0].value().text == out[1].value().text);
    CHECK(memo.hits() == 2);
    CHECK(memo.size() == 1);
  }
}
