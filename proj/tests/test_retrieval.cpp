#include <gtest/gtest.h>

#include <thread>

#include "test_util.hpp"
#include "vidembed/data/synthetic.hpp"
#include "vidembed/retrieval/index.hpp"

using namespace vidembed;
using vidembed::testing::expect_errc;
using vidembed::testing::TempDir;

namespace {

struct RandomDb {
  std::vector<std::string> ids;
  Tensor<float> matrix;
};

RandomDb random_db(std::size_t n, std::size_t d, std::uint64_t seed, bool with_duplicates = false) {
  CounterRng rng(seed, 1);
  RandomDb db;
  std::vector<float> data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> row(d);
    if (with_duplicates && i % 3 == 2) {
      // Copy an earlier row so exact score ties occur.
      auto prev = std::span<const float>(data).subspan((i - 1) * d, d);
      row.assign(prev.begin(), prev.end());
    } else {
      for (auto& x : row) x = static_cast<float>(rng.normal());
      row = l2_normalize(row);
    }
    data.insert(data.end(), row.begin(), row.end());
    // Ids deliberately not in row order.
    char id[16];
    std::snprintf(id, sizeof id, "vid%05zu", (i * 7919) % 100003);
    db.ids.emplace_back(id);
  }
  db.matrix = Tensor<float>({n, d}, std::move(data));
  return db;
}

std::vector<float> random_query(std::size_t d, CounterRng& rng) {
  std::vector<float> q(d);
  for (auto& x : q) x = static_cast<float>(rng.normal() * 3.0);
  return q;
}

}  // namespace

TEST(Retrieval, QueryMatchesBruteForceOracle) {
  CounterRng rng(99);
  std::size_t instances = 0;
  for (std::size_t n : {1ul, 2ul, 100ul, 1000ul})
    for (std::size_t k : {1ul, 6ul, n, n + 5})
      for (int rep = 0; rep < 13; ++rep, ++instances) {
        const auto db = random_db(n, 8, instances, rep % 2 == 1);
        const RetrievalIndex index(db.ids, db.matrix, "test", "f");
        const auto q = random_query(8, rng);
        const auto fast = index.query(q, k);
        const auto slow = brute_force_topk(db.matrix, db.ids, q, k);
        ASSERT_EQ(fast.items, slow.items) << "n=" << n << " k=" << k;
        EXPECT_EQ(fast.items.size(), std::min(k, n));
        for (std::size_t i = 1; i < fast.items.size(); ++i) {
          EXPECT_GE(fast.items[i - 1].score, fast.items[i].score);
          if (fast.items[i - 1].score == fast.items[i].score) {
            EXPECT_LT(fast.items[i - 1].video_id, fast.items[i].video_id);
          }
        }
        for (const auto& it : fast.items) EXPECT_LE(std::abs(it.score), 1.0f + 1e-6f);
      }
  EXPECT_GE(instances, 200u);
}

TEST(Retrieval, SelfQueryRanksFirst) {
  const auto db = random_db(50, 16, 4);
  const RetrievalIndex index(db.ids, db.matrix, "test", "f");
  for (std::size_t i = 0; i < 50; i += 7) {
    auto row = db.matrix.row(i);
    const auto r = index.query(std::vector<float>(row.begin(), row.end()));
    EXPECT_EQ(r.items.size(), kDefaultTopK);
    EXPECT_EQ(r.items[0].video_id, db.ids[i]);
    EXPECT_NEAR(r.items[0].score, 1.0f, 1e-6);
  }
}

TEST(Retrieval, SingleRowAndErrors) {
  const auto db = random_db(1, 4, 5);
  const RetrievalIndex index(db.ids, db.matrix, "test", "f");
  auto row = db.matrix.row(0);
  std::vector<float> neg(row.begin(), row.end());
  for (auto& x : neg) x = -x;
  EXPECT_EQ(index.query(neg).items.size(), 1u);
  EXPECT_NEAR(index.query(neg).items[0].score, -1.0f, 1e-6);
  expect_errc(Errc::DimMismatch, [&] { index.query(std::vector<float>{1, 0}); });
  expect_errc(Errc::NormUnderflow, [&] { index.query(std::vector<float>(4, 0.0f)); });
  expect_errc(Errc::ConfigInvalid, [&] { index.query(neg, 0); });
  expect_errc(Errc::ConfigInvalid, [] { RetrievalIndex({"a"}, Tensor<float>::matrix(1, 2, {1, 1}), "h", "f"); });
  expect_errc(Errc::ConfigInvalid,
              [] { RetrievalIndex({"a", "a"}, Tensor<float>::matrix(2, 1, {1, 1}), "h", "f"); });
}

TEST(Retrieval, BuildMatchesIndividualFuseAndPersists) {
  SynthConfig c;
  c.classes = 3;
  c.videos_per_class = 4;
  c.frames = 6;
  c.dim = 8;
  const auto ds = synthesize(c);
  const auto head = init_params<float>(HeadSpec::defaults(HeadKind::Lstm, 8), 2);
  const auto index = RetrievalIndex::build(ds.videos, head, 2);
  ASSERT_EQ(index.size(), ds.videos.size());
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const auto row = index.matrix().row(i);
    EXPECT_EQ(std::vector<float>(row.begin(), row.end()), fuse(ds.videos[i], head).vector);
  }
  EXPECT_EQ(RetrievalIndex::build(ds.videos, head, 1).matrix(), index.matrix());
  EXPECT_EQ(index.fingerprint(), fingerprint(head));

  TempDir dir;
  index.save(dir / "idx.vemb");
  const auto back = RetrievalIndex::load(dir / "idx.vemb");
  EXPECT_EQ(back.matrix(), index.matrix());
  EXPECT_EQ(back.ids(), index.ids());
  EXPECT_EQ(back.labels(), index.labels());
  EXPECT_EQ(back.fingerprint(), index.fingerprint());

  expect_errc(Errc::HeadNotEmbedding,
              [&] { RetrievalIndex::build(ds.videos, baseline_head(HeadKind::MajorityVote, 8)); });
  expect_errc(Errc::EmptyDataset, [&] { RetrievalIndex::build({}, head); });
}

TEST(Retrieval, ConcurrentQueriesMatchSerial) {
  const auto db = random_db(500, 16, 6);
  const RetrievalIndex index(db.ids, db.matrix, "test", "f");
  CounterRng rng(1);
  std::vector<std::vector<float>> queries;
  for (int i = 0; i < 64; ++i) queries.push_back(random_query(16, rng));
  std::vector<RankedResult> serial;
  for (const auto& q : queries) serial.push_back(index.query(q, 10));
  std::vector<RankedResult> parallel(queries.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < queries.size(); i += 4) parallel[i] = index.query(queries[i], 10);
    });
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < queries.size(); ++i) EXPECT_EQ(parallel[i].items, serial[i].items);
}
