#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "ncrel/gradcheck.hpp"
#include "ncrel/pathenc.hpp"
#include "support/synthetic.hpp"

using namespace ncrel;

namespace {

DependencyPath one_node(const std::string& lemma) { return DependencyPath{{{lemma, "NOUN", "nsubj", Direction::kEnd}}}; }

PathEncoder small_encoder(std::uint64_t seed, std::size_t k = 2) {
  EdgeVocabularies vocab;
  vocab.add(parse_path("<X>/NOUN/pobj/UP of/ADP/prep/UP <Y>/NOUN/dobj/END"));
  vocab.add(one_node("a"));
  vocab.add(one_node("b"));
  vocab.add(one_node("c"));
  PathEncoder enc(vocab, EncoderDims{3, 2, 2, 1, 4}, k);
  Rng rng(seed);
  enc.init(rng);
  return enc;
}

// Makes single-node paths "a" and "b" predict (0.8, 0.2) and (0.2, 0.8):
// the projection reads only h[0], with scale and bias solved from the two
// embeddings.
void force_two_distributions(PathEncoder& enc) {
  const double ha = enc.embed(one_node("a"))[0];
  const double hb = enc.embed(one_node("b"))[0];
  ASSERT_GT(std::abs(ha - hb), 1e-6);
  const double target = std::log(4.0);
  const double scale = 2 * target / (ha - hb);
  const double bias = target - scale * ha;
  auto& proj = enc.projection();
  proj.W.value.zero();
  proj.b.value.zero();
  proj.W.value.at(0, 0) = scale;
  proj.b.value.data[0] = bias;
}

}  // namespace

TEST(EncodeEdge, LengthAndUnknownLemma) {
  auto enc = small_encoder(1);
  const PathNode known{"of", "ADP", "prep", Direction::kUp};
  EXPECT_EQ(enc.encode_edge(known).size(), 3u + 2u + 2u + 1u);
  const PathNode unseen{"zebra", "ADP", "prep", Direction::kUp};
  const auto v = enc.encode_edge(unseen);
  const auto unk = enc.lemma_table().value.row(0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(v[i], unk[i]);
}

TEST(EncodeEdge, DefaultDimensionsGiveSixty) {
  EdgeVocabularies vocab;
  vocab.add(one_node("a"));
  PathEncoder enc(vocab, EncoderDims{}, 3);
  Rng rng(2);
  enc.init(rng);
  EXPECT_EQ(enc.encode_edge(one_node("a").nodes[0]).size(), 60u);
  EXPECT_EQ(enc.embed(one_node("a")).size(), 60u);
}

TEST(EncodeEdge, DirectionOnlyChangesTrailingComponents) {
  auto enc = small_encoder(3);
  const PathNode up{"of", "ADP", "prep", Direction::kUp};
  PathNode down = up;
  down.dir = Direction::kDown;
  const auto a = enc.encode_edge(up);
  const auto b = enc.encode_edge(down);
  const std::size_t d_dir = enc.dims().dir;
  for (std::size_t i = 0; i + d_dir < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  bool differs = false;
  for (std::size_t i = a.size() - d_dir; i < a.size(); ++i) differs |= a[i] != b[i];
  EXPECT_TRUE(differs);
}

TEST(Embed, SingleNodeAndZeroedLstm) {
  auto enc = small_encoder(4);
  EXPECT_EQ(enc.embed(one_node("a")).size(), 4u);
  for (auto* p : enc.lstm().params()) p->value.zero();
  for (double h : enc.embed(parse_path("<X>/NOUN/pobj/UP of/ADP/prep/UP <Y>/NOUN/dobj/END"))) EXPECT_EQ(h, 0.0);
  EXPECT_THROW(enc.embed(DependencyPath{}), DataError);
}

TEST(Pooled, SinglePathEqualsItsSoftmax) {
  auto enc = small_encoder(5, 3);
  const auto p = one_node("a");
  const auto r = enc.pooled_prediction({{p, 7}});
  const auto s = enc.path_distribution(p);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(r.distribution[c], s[c], 1e-12);
}

TEST(Pooled, OpposingPathsAverageWithLowestIndexTie) {
  auto enc = small_encoder(6);
  force_two_distributions(enc);
  const auto pa = enc.path_distribution(one_node("a"));
  const auto pb = enc.path_distribution(one_node("b"));
  EXPECT_NEAR(pa[0], 0.8, 1e-9);
  EXPECT_NEAR(pb[0], 0.2, 1e-9);
  const auto r = enc.pooled_prediction({{one_node("a"), 1}, {one_node("b"), 1}});
  EXPECT_NEAR(r.distribution[0], 0.5, 1e-9);
  EXPECT_NEAR(r.distribution[1], 0.5, 1e-9);
  EXPECT_EQ(r.relation, 0u);
}

TEST(Pooled, FrequencyWeightedMean) {
  auto enc = small_encoder(7, 3);
  const std::vector<DependencyPath> ps{one_node("a"), one_node("b"), one_node("c")};
  const double f[] = {1, 2, 3};
  std::vector<WeightedPath> wp;
  Vec expected(3, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    wp.push_back({ps[i], f[i]});
    const auto s = enc.path_distribution(ps[i]);
    for (std::size_t c = 0; c < 3; ++c) expected[c] += f[i] * s[c] / 6.0;
  }
  const auto r = enc.pooled_prediction(wp);
  double sum = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(r.distribution[c], expected[c], 1e-9);
    sum += r.distribution[c];
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(Pooled, InvariantToRescalingAndPermutation) {
  auto enc = small_encoder(8, 3);
  std::vector<WeightedPath> wp{{one_node("a"), 2}, {one_node("b"), 5}, {one_node("c"), 1}};
  const auto base = enc.pooled_prediction(wp).distribution;
  auto scaled = wp;
  for (auto& p : scaled) p.freq *= 3.5;
  std::vector<WeightedPath> perm{wp[2], wp[0], wp[1]};
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(enc.pooled_prediction(scaled).distribution[c], base[c], 1e-12);
    EXPECT_NEAR(enc.pooled_prediction(perm).distribution[c], base[c], 1e-12);
  }
  EXPECT_THROW(enc.pooled_prediction({}), DataError);
  EXPECT_THROW(enc.pooled_prediction({{one_node("a"), 0}}), DataError);
}

TEST(Gradients, EncoderComponentsPassCheck) {
  for (const auto& e : run_gradient_suite(7)) {
    EXPECT_LT(e.result.max_rel_error, 1e-4) << e.name;
  }
}

TEST(TrainEncoder, FirstEpochLowersLossAndIsDeterministic) {
  const auto task = fixtures::make_synthetic_path_task(10, 3);
  const auto split = split_random(task.dataset.instances.size(), 2);
  const auto train = select(task.dataset.instances, split.train);
  const auto val = select(task.dataset.instances, split.validation);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 9;
  EncoderDims dims{8, 2, 2, 1, 10};
  auto a = train_path_encoder(task.store, train, val, task.dataset.inventory, cfg, dims);
  auto b = train_path_encoder(task.store, train, val, task.dataset.inventory, cfg, dims);
  ASSERT_FALSE(a.history.epochs.empty());
  EXPECT_LT(a.history.epochs[0].train_loss, a.history.initial_loss);
  EXPECT_TRUE(a.history == b.history);
  const auto pa = a.encoder.params();
  const auto pb = b.encoder.params();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value.data, pb[i]->value.data) << pa[i]->name;
}

TEST(TrainEncoder, NcWithoutPathsIsListed) {
  auto task = fixtures::make_synthetic_path_task(3, 3);
  auto train = task.dataset.instances;
  train.push_back({"ghost", "town", "CONTAIN"});
  try {
    train_path_encoder(task.store, train, {}, task.dataset.inventory, TrainConfig{}, EncoderDims{4, 2, 2, 1, 4});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("[ghost town]"), std::string::npos) << e.what();
  }
}

TEST(TrainEncoder, LemmaDropoutStillLearns) {
  const auto task = fixtures::make_synthetic_path_task(30, 5);
  TrainConfig cfg;
  cfg.encoder_word_dropout = true;
  const auto res = train_path_encoder(task.store, task.dataset.instances, {}, task.dataset.inventory, cfg);
  EXPECT_GE(res.history.epochs.at(res.history.best_epoch - 1).train_f1, 0.9);
}

TEST(ExportPaths, OneRowPerDistinctPath) {
  PathStore store;
  auto& e = store.mutable_entries();
  const std::string p1 = "<X>/NOUN/pobj/UP of/ADP/prep/UP <Y>/NOUN/dobj/END";
  const std::string p2 = "<X>/NOUN/compound/UP <Y>/NOUN/nsubj/END";
  const std::string p3 = "<X>/NOUN/dobj/UP contain/VERB/ROOT/DOWN <Y>/NOUN/nsubj/END";
  e[{"cup", "coffee"}] = {{p1, 3}, {p2, 1}};
  e[{"tea", "pot"}] = {{p2, 2}, {p3, 1}};
  auto enc = small_encoder(10);
  const auto cache = export_path_embeddings(enc, store);
  EXPECT_EQ(cache.vectors.size(), 3u);
  EXPECT_EQ(cache.dim, 4u);
  EXPECT_EQ(*cache.find(p3), enc.embed(parse_path(p3)));
  EXPECT_EQ(cache.find("nope"), nullptr);
}

TEST(ExportPaths, MatchesFreshEmbeddingAcrossThreads) {
  Rng rng(12);
  auto enc = detail::toy_encoder(rng);
  std::vector<std::string> paths;
  for (int i = 0; i < 100; ++i) paths.push_back(serialize_path(detail::random_path(rng)));
  const auto serial = export_path_embeddings(enc, paths, 1);
  const auto threaded = export_path_embeddings(enc, paths, 4);
  EXPECT_TRUE(serial == threaded);
  for (const auto& p : paths) EXPECT_EQ(*serial.find(p), enc.embed(parse_path(p)));
}

TEST(ExportPaths, CacheFileRoundTripIsBitExact) {
  Rng rng(13);
  auto enc = detail::toy_encoder(rng);
  std::vector<std::string> paths;
  for (int i = 0; i < 40; ++i) paths.push_back(serialize_path(detail::random_path(rng)));
  const auto cache = export_path_embeddings(enc, paths);
  std::ostringstream out;
  write_path_cache(out, cache, "abc123");
  std::istringstream in(out.str());
  std::string hash;
  const auto back = read_path_cache(in, &hash);
  EXPECT_EQ(hash, "abc123");
  EXPECT_TRUE(back == cache);
  std::istringstream truncated("# d_path=4 count=2 encoder=x\n<X>/N/d/END\t1 2 3 4\n");
  EXPECT_THROW(read_path_cache(truncated), DataError);
  std::istringstream wrong_dim("# d_path=4 count=1 encoder=x\n<X>/N/d/END\t1 2 3\n");
  EXPECT_THROW(read_path_cache(wrong_dim), DataError);
}

TEST(EncoderCheckpoint, SaveLoadPreservesPredictions) {
  const auto dir = std::filesystem::temp_directory_path() / "ncrel_test_encoder_ckpt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto enc = small_encoder(14, 3);
  enc.save(dir, {{"seed", "14"}}, {"A", "B", "C"});
  std::vector<std::string> rel;
  const auto back = PathEncoder::load(dir, &rel);
  EXPECT_EQ(rel, (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_TRUE(back.vocab() == enc.vocab());
  const auto path = parse_path("<X>/NOUN/pobj/UP of/ADP/prep/UP <Y>/NOUN/dobj/END");
  const auto a = enc.path_distribution(path);
  const auto b = back.path_distribution(path);
  // stored at float32
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a[c], b[c], 1e-5);
  const auto h1 = encoder_hash(dir);
  EXPECT_EQ(h1, encoder_hash(dir));
  std::filesystem::remove_all(dir);
}
