#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "noisere/encoder.hpp"
#include "noisere/model.hpp"
#include "noisere/rng.hpp"

using namespace noisere;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double range = 0.5) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-range, range);
  return t;
}

// Position table whose row r is filled with the value r, so tests can read
// back which distance index a row used.
Tensor marker_pos_table(int rows, int dim) {
  Tensor t({rows, dim});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < dim; ++c) t.at(r, c) = r;
  return t;
}

}  // namespace

TEST_CASE("build_input_matrix shape and distance encoding", "[encoder]") {
  EncoderConfig cfg;
  cfg.word_dim = 4;
  cfg.pos_dim = 2;
  cfg.max_relative_distance = 2;

  Rng rng(11);
  Tape tape;
  auto word = tape.leaf(random_tensor({6, 4}, rng));
  auto pos_s = tape.leaf(marker_pos_table(cfg.pos_rows(), 2));
  auto pos_o = tape.leaf(marker_pos_table(cfg.pos_rows(), 2));

  SentenceInstance inst;
  inst.token_ids = {2, 3, 4, 2, 3};
  inst.subj_pos = 1;
  inst.obj_pos = 3;

  auto in = build_input_matrix(tape, word, pos_s, pos_o, inst, cfg);
  const Tensor& m = tape.value(in);

  SECTION("shape is L x (word_dim + 2 pos_dim)") {
    CHECK(m.rows() == 5);
    CHECK(m.cols() == 8);
  }
  SECTION("zero distance at the subject position") {
    // column 4 holds the subject-distance marker; index bound encodes 0
    CHECK(m.at(1, 4) == cfg.max_relative_distance);
  }
  SECTION("distances beyond the bound are clipped") {
    // t=4 is distance 3 from subj; bound 2 clips to index 4
    CHECK(m.at(4, 4) == 2 * cfg.max_relative_distance);
    CHECK(m.at(0, 6) == 0.0);  // t=0 vs obj at 3: clipped to -bound -> index 0
  }
  SECTION("out-of-range token ids map to unknown and are counted") {
    SentenceInstance bad = inst;
    bad.token_ids[2] = 99;
    long hits = 0;
    build_input_matrix(tape, word, pos_s, pos_o, bad, cfg, 0, &hits);
    CHECK(hits == 1);
  }
}

TEST_CASE("encode_sentence output width is 3 * kernels", "[encoder]") {
  EncoderConfig cfg;
  cfg.word_dim = 4;
  cfg.pos_dim = 2;
  cfg.kernels = 200;
  cfg.max_relative_distance = 5;

  Rng rng(12);
  Tape tape;
  auto word = tape.leaf(random_tensor({6, 4}, rng));
  auto pos_s = tape.leaf(random_tensor({cfg.pos_rows(), 2}, rng));
  auto pos_o = tape.leaf(random_tensor({cfg.pos_rows(), 2}, rng));
  auto filters = tape.leaf(random_tensor({cfg.kernels, cfg.window * cfg.input_width()}, rng));
  auto cbias = tape.leaf(Tensor({cfg.kernels}));

  SentenceInstance inst;
  inst.token_ids = {2, 3, 4, 2, 3};
  inst.subj_pos = 0;
  inst.obj_pos = 2;

  auto in = build_input_matrix(tape, word, pos_s, pos_o, inst, cfg, cfg.halo());
  auto x = encode_sentence(tape, in, filters, cbias, cfg, 0, 2);
  CHECK(tape.value(x).size() == 600);

  SECTION("tanh keeps every coordinate inside (-1, 1)") {
    const Tensor& v = tape.value(x);
    for (int64_t i = 0; i < v.size(); ++i) {
      CHECK(v[i] > -1.0);
      CHECK(v[i] < 1.0);
    }
  }
  SECTION("all-zero filters yield the zero embedding") {
    auto zf = tape.leaf(Tensor({cfg.kernels, cfg.window * cfg.input_width()}));
    auto x0 = encode_sentence(tape, in, zf, cbias, cfg, 0, 2);
    for (int64_t i = 0; i < tape.value(x0).size(); ++i) CHECK(tape.value(x0)[i] == 0.0);
  }
}

TEST_CASE("permuting tokens strictly inside one segment only moves that segment",
          "[encoder]") {
  EncoderConfig cfg;
  cfg.word_dim = 3;
  cfg.pos_dim = 2;
  cfg.kernels = 1;
  cfg.max_relative_distance = 12;

  Rng rng(13);
  Tensor word_t = random_tensor({8, 3}, rng);
  Tensor pos_s_t = random_tensor({cfg.pos_rows(), 2}, rng);
  Tensor pos_o_t = random_tensor({cfg.pos_rows(), 2}, rng);
  Tensor filt_t = random_tensor({1, cfg.window * cfg.input_width()}, rng);

  SentenceInstance inst;
  inst.token_ids = {2, 3, 4, 5, 6, 7, 2, 3, 4, 5};
  inst.subj_pos = 1;
  inst.obj_pos = 7;

  auto encode = [&](const SentenceInstance& s) {
    Tape tape;
    auto in = build_input_matrix(tape, tape.leaf(word_t), tape.leaf(pos_s_t),
                                 tape.leaf(pos_o_t), s, cfg, cfg.halo());
    auto x = encode_sentence(tape, in, tape.leaf(filt_t), tape.leaf(Tensor({1})), cfg,
                             s.boundaries().first, s.boundaries().second);
    return tape.value(x);
  };

  Tensor base = encode(inst);
  // window-3 features at segment-1/3 positions depend on tokens up to index
  // b1+1 and from b2 respectively, so only tokens 3..6 are free to move.
  SentenceInstance permuted = inst;
  std::swap(permuted.token_ids[3], permuted.token_ids[6]);
  std::swap(permuted.token_ids[4], permuted.token_ids[5]);
  Tensor moved = encode(permuted);

  CHECK(moved[0] == base[0]);
  CHECK(moved[2] == base[2]);
  CHECK(moved[1] != base[1]);
}

TEST_CASE("predict_distribution", "[encoder]") {
  Tape tape;
  SECTION("zero classifier is uniform") {
    auto w = tape.leaf(Tensor({3, 4}));
    auto b = tape.leaf(Tensor({3}));
    auto x = tape.leaf(Tensor({4}, 0.7));
    auto p = predict_distribution(tape, w, b, x);
    for (int i = 0; i < 3; ++i)
      CHECK(tape.value(p)[i] == Catch::Approx(1.0 / 3).epsilon(1e-12));
  }
  SECTION("scalar softmax oracle for logits [ln 3, 0]") {
    auto w = tape.leaf(Tensor({2, 1}, {std::log(3.0), 0.0}));
    auto b = tape.leaf(Tensor({2}));
    auto x = tape.leaf(Tensor({1}, 1.0));
    auto p = predict_distribution(tape, w, b, x);
    CHECK(tape.value(p)[0] == Catch::Approx(0.75).margin(1e-12));
    CHECK(tape.value(p)[1] == Catch::Approx(0.25).margin(1e-12));
  }
  SECTION("adding a constant to all logits leaves p unchanged") {
    Rng rng(5);
    Tensor wt = random_tensor({3, 4}, rng);
    Tensor xt = random_tensor({4}, rng);
    auto w = tape.leaf(wt);
    auto x = tape.leaf(xt);
    auto p0 = predict_distribution(tape, w, tape.leaf(Tensor({3}, 0.0)), x);
    auto p1 = predict_distribution(tape, w, tape.leaf(Tensor({3}, 17.5)), x);
    CHECK(tape.value(p0).max_abs_diff(tape.value(p1)) < 1e-12);
  }
  SECTION("output is a probability vector") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      Tape t2;
      auto p = predict_distribution(t2, t2.leaf(random_tensor({5, 6}, rng, 3.0)),
                                    t2.leaf(random_tensor({5}, rng, 3.0)),
                                    t2.leaf(random_tensor({6}, rng, 3.0)));
      double s = 0.0;
      for (int i = 0; i < 5; ++i) {
        CHECK(t2.value(p)[i] >= 0.0);
        s += t2.value(p)[i];
      }
      CHECK(s == Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("encoding is deterministic given parameters and instance", "[encoder]") {
  ModelConfig cfg;
  cfg.mode = Mode::sentence;
  cfg.noise = NoiseMode::none;
  cfg.relation_count = 3;
  cfg.encoder.word_dim = 6;
  cfg.encoder.pos_dim = 2;
  cfg.encoder.kernels = 4;
  cfg.encoder.max_relative_distance = 8;

  Vocabulary vocab;
  for (int i = 0; i < 10; ++i) vocab.add("tok" + std::to_string(i));

  SentenceInstance inst;
  inst.token_ids = {4, 5, 6, 7, 8, 9};
  inst.subj_pos = 1;
  inst.obj_pos = 4;

  auto run = [&]() {
    Model model(cfg, vocab, 77);
    Tape tape;
    auto b = model.bind(tape);
    auto x = model.embed_sentence(tape, b, inst);
    return tape.value(x);
  };
  Tensor a = run();
  Tensor b = run();
  REQUIRE(a.size() == b.size());
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("embedding file loading", "[encoder]") {
  Vocabulary vocab;
  vocab.add("alpha");
  vocab.add("beta");

  auto write_file = [](const std::string& path, const std::string& body) {
    std::ofstream f(path);
    f << body;
  };
  const std::string path = "test_embeddings.txt";

  SECTION("plain GloVe-style lines") {
    write_file(path, "alpha 1.0 2.0 3.0\nmissing 9 9 9\nbeta -1.5 0.25 4.0\n");
    Tensor table({vocab.size(), 3});
    int n = load_pretrained_embeddings(path, vocab, 3, table);
    CHECK(n == 2);
    CHECK(table.at(vocab.lookup("alpha"), 1) == 2.0);
    CHECK(table.at(vocab.lookup("beta"), 0) == -1.5);
    CHECK(table.at(Vocabulary::kUnk, 0) == 0.0);  // untouched
  }
  SECTION("count dim header is auto-detected") {
    write_file(path, "2 3\nalpha 1 2 3\nbeta 4 5 6\n");
    Tensor table({vocab.size(), 3});
    CHECK(load_pretrained_embeddings(path, vocab, 3, table) == 2);
    CHECK(table.at(vocab.lookup("beta"), 2) == 6.0);
  }
  SECTION("wrong width is a data error") {
    write_file(path, "alpha 1 2\n");
    Tensor table({vocab.size(), 3});
    CHECK_THROWS_AS(load_pretrained_embeddings(path, vocab, 3, table), DataError);
  }
  std::remove(path.c_str());
}

TEST_CASE("vocabulary reserves unknown and padding", "[encoder]") {
  Vocabulary v;
  CHECK(v.size() == 2);
  const int a = v.add("a");
  CHECK(a == 2);
  CHECK(v.add("a") == 2);
  CHECK(v.lookup("zzz") == Vocabulary::kUnk);
  long misses = 0;
  auto ids = v.encode({"a", "zzz", "a"}, &misses);
  CHECK(ids == std::vector<int>{2, 0, 2});
  CHECK(misses == 1);
}
