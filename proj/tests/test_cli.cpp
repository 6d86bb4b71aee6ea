#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "test_util.hpp"
#include "vidembed/util/files.hpp"

#include <nlohmann/json.hpp>

using vidembed::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "vidembed");
  std::ostringstream out, err;
  const int code = vidembed::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  if (!fs::exists(root)) return files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = vidembed::read_file(e.path());
  return files;
}

std::vector<std::string> gen_args(const fs::path& out) {
  return {"--seed", "7", "gen", "--out", out.string(), "--classes", "5", "--videos-per-class", "8",
          "--val-per-class", "4", "--frames", "10", "--dim", "16"};
}

nlohmann::json last_json(const std::string& out) {
  auto trimmed = out.substr(0, out.find_last_not_of('\n') + 1);
  return nlohmann::json::parse(trimmed.substr(trimmed.rfind('\n') == std::string::npos ? 0 : trimmed.rfind('\n') + 1));
}

}  // namespace

TEST(Cli, GenIsByteIdenticalAcrossRuns) {
  TempDir a, b;
  ASSERT_EQ(run(gen_args(a / "d")).code, 0);
  ASSERT_EQ(run(gen_args(b / "d")).code, 0);
  const auto sa = snapshot(a.path()), sb = snapshot(b.path());
  EXPECT_EQ(sa.size(), 60u + 2u);
  EXPECT_EQ(sa, sb);
}

TEST(Cli, UsageErrorsExitTwoAndWriteNothing) {
  TempDir dir;
  EXPECT_EQ(run({"bogus", "--out", (dir / "x").string()}).code, 2);
  EXPECT_EQ(run({"gen", "--out", (dir / "x").string(), "--bogus-flag"}).code, 2);
  EXPECT_EQ(run({"gen", "--out", (dir / "x").string(), "--task", "sideways"}).code, 2);
  EXPECT_EQ(run({"--threads", "0", "gen", "--out", (dir / "x").string()}).code, 2);
  EXPECT_EQ(run({"query", "--index", "/nonexistent"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_TRUE(snapshot(dir.path()).empty());
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, RuntimeErrorsExitOne) {
  TempDir dir;
  ASSERT_EQ(run(gen_args(dir / "d")).code, 0);
  const auto manifest = (dir / "d" / "manifest.jsonl").string();
  // lstm eval without parameters, and an odd class count for the order task.
  EXPECT_EQ(run({"eval", "--data", manifest, "--head", "lstm"}).code, 1);
  EXPECT_EQ(run({"gen", "--out", (dir / "o").string(), "--task", "order", "--classes", "3"}).code, 1);
}

TEST(Cli, GenTrainEvalReachesTargetAccuracy) {
  TempDir dir;
  ASSERT_EQ(run(gen_args(dir / "d")).code, 0);
  const auto manifest = (dir / "d" / "manifest.jsonl").string();
  const auto before = snapshot(dir / "d");

  const auto tr = run({"--seed", "1", "train", "--data", manifest, "--head", "lstm", "--out",
                       (dir / "lstm.vemb").string(), "--history", (dir / "h.csv").string(), "--epochs", "30"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(last_json(tr.out)["epochs"], 30);
  std::istringstream hist(vidembed::read_file(dir / "h.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(hist, line)) ++rows;
  EXPECT_EQ(rows, 31u);

  const auto ev = run({"eval", "--data", manifest, "--head", "lstm", "--params", (dir / "lstm.vemb").string(),
                       "--confusion", (dir / "confusion.csv").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto j = last_json(ev.out);
  EXPECT_GE(j["accuracy"].get<double>(), 0.95);
  EXPECT_EQ(j["total"], 20);  // tagged val split
  EXPECT_TRUE(fs::exists(dir / "confusion.csv"));

  for (const char* head : {"mid_frame", "max_pool", "majority_vote"}) {
    const auto b = run({"eval", "--data", manifest, "--head", head, "--split", "all"});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(last_json(b.out)["total"], 60);
  }
  EXPECT_EQ(snapshot(dir / "d"), before);  // inputs untouched
}

TEST(Cli, IndexQueryProjectGradcheck) {
  TempDir dir;
  ASSERT_EQ(run(gen_args(dir / "d")).code, 0);
  const auto manifest = (dir / "d" / "manifest.jsonl").string();
  const auto index = (dir / "idx.vemb").string();

  ASSERT_EQ(run({"index", "--data", manifest, "--head", "max_pool", "--out", index}).code, 0);
  EXPECT_TRUE(fs::exists(index + ".json"));
  const auto enc = run({"encode", "--data", manifest, "--head", "max_pool", "--out", (dir / "emb.vemb").string()});
  ASSERT_EQ(enc.code, 0);
  EXPECT_EQ(vidembed::read_file(index), vidembed::read_file(dir / "emb.vemb"));
  ASSERT_EQ(run({"index", "--embeddings", (dir / "emb.vemb").string(), "--out", (dir / "idx2.vemb").string()}).code, 0);
  EXPECT_EQ(vidembed::read_file(index), vidembed::read_file(dir / "idx2.vemb"));

  const auto q = run({"query", "--index", index, "--class", "class_03", "--data", manifest});
  ASSERT_EQ(q.code, 0) << q.err;
  const auto j = last_json(q.out);
  EXPECT_EQ(j["results"].size(), 6u);
  EXPECT_EQ(j["precision_at_k"], 1.0);

  std::string vec;
  for (int i = 0; i < 16; ++i) vec += (i ? "," : "") + std::string(i == 2 ? "1" : "0");
  EXPECT_EQ(run({"query", "--index", index, "--vector", vec, "-k", "3"}).code, 0);
  EXPECT_EQ(run({"query", "--index", index, "--vector", "1,2"}).code, 1);
  EXPECT_EQ(run({"query", "--index", index, "--vector", "1,x"}).code, 1);

  const auto pf = run({"project", "--data", manifest, "--level", "frames", "--out", (dir / "frames.csv").string()});
  ASSERT_EQ(pf.code, 0) << pf.err;
  EXPECT_LT(last_json(pf.out)["cluster_separation"]["ratio"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(dir / "frames.csv.variance.csv"));
  EXPECT_EQ(run({"project", "--data", manifest, "--out", (dir / "videos.csv").string()}).code, 0);

  const auto gc = run({"gradcheck", "--head", "transformer", "--layers", "1", "--heads", "2"});
  EXPECT_EQ(gc.code, 0) << gc.out;
  EXPECT_TRUE(nlohmann::json::parse(gc.out)["passed"].get<bool>());
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
  TempDir dir;
  {
    std::ofstream cfg(dir / "run.ini");
    cfg << "seed=7\n[gen]\nclasses=3\nvideos-per-class=2\nframes=4\ndim=8\n";
  }
  const auto r = run({"--config", (dir / "run.ini").string(), "gen", "--out", (dir / "d").string(), "--classes", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_json(r.out)["videos"], 8);
  const auto header = nlohmann::json::parse(vidembed::read_file(dir / "d" / "manifest.jsonl").substr(
      0, vidembed::read_file(dir / "d" / "manifest.jsonl").find('\n')));
  EXPECT_EQ(header["seed"], 7);
  EXPECT_EQ(header["dim"], 8);
}
