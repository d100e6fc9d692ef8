#include <cstring>
#include <filesystem>
#include <random>

#include <doctest.h>

#include "gradcheck.hpp"
#include "lglbci/error.hpp"
#include "lglbci/model_io.hpp"
#include "lglbci/network.hpp"
#include "lglbci/stiefel.hpp"
#include "support.hpp"

using namespace lgl;

namespace {

// bimaps (with widths w_0 = M), heads, classifier, spelled out by shape.
std::size_t hand_count(std::size_t M, std::vector<std::size_t> widths, std::size_t F, std::size_t S, std::size_t K,
                       std::size_t m, std::size_t C, std::size_t maps, bool bias) {
  std::size_t n = 0, in = M;
  for (auto w : widths) {
    n += F * w * in;
    in = w;
  }
  if (bias) n += F * in * (in + 1) / 2;
  n += K * in * m;
  const std::size_t hidden = std::max<std::size_t>(1, F / 2);
  n += maps * S * K * m * m + maps;
  n += F * hidden + hidden * F;
  n += C * F * maps + C;
  return n;
}

ModelBundle make(const TrainConfig& c, const DataSchema& s, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  return init_model(c, s, rng);
}

ErrorCode decode_code(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_model(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decoded a corrupt model");
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("parameter count matches shape arithmetic") {
  TrainConfig a;
  a.window_len = 1250;
  a.m = 5;
  CHECK(count_parameters(make(a, {250.0, 8, 1250, 2})) == hand_count(8, {8, 8}, 9, 1, 4, 5, 2, 4, false));
  CHECK(count_parameters(make(a, {250.0, 8, 1250, 2})) == 1862);

  TrainConfig b;
  b.bands.bands = {{4, 8}, {8, 12}, {12, 16}, {16, 20}, {20, 24}};
  b.bimap_layers = 3;
  b.bimap_widths = {12, 10, 6};
  b.m = 4;
  b.heads = 2;
  b.conv_maps = 6;
  b.rbn_bias = true;
  CHECK(count_parameters(make(b, {250.0, 16, 1000, 4})) == hand_count(16, {12, 10, 6}, 5, 4, 2, 4, 4, 6, true));

  const TrainConfig d;
  const auto def = make(d, {250.0, 22, 1000, 4});
  CHECK(def.parameter_count == hand_count(22, {22, 22}, 9, 4, 4, 8, 4, 4, false));
  CHECK(def.parameter_count >= 10000);
  CHECK(def.parameter_count <= 200000);

  // one more head adds M' x m to the heads; the conv kernel grows by its K slice
  TrainConfig more = a;
  more.heads = 5;
  const auto m4 = make(a, {250.0, 8, 1250, 2});
  const auto m5 = make(more, {250.0, 8, 1250, 2});
  const auto heads_part = [](const ModelBundle& b) { return count_parameters(b) - b.classifier.parameter_count(); };
  CHECK(heads_part(m5) - heads_part(m4) == 8 * 5);
  CHECK(m5.classifier.parameter_count() - m4.classifier.parameter_count() == 4 * 25);
}

TEST_CASE("init rejects inconsistent configs") {
  TrainConfig c;
  c.m = 9;
  CHECK_THROWS_AS(make(c, {250.0, 8, 1000, 2}), Error);
  TrainConfig w;
  w.window_len = 1001;
  CHECK_THROWS_AS(make(w, {250.0, 8, 1000, 2}), Error);
  TrainConfig nyq;
  nyq.bands.bands = {{100, 130}};
  CHECK_THROWS_AS(make(nyq, {250.0, 8, 1000, 2}), Error);
}

TEST_CASE("covariance tensor scales shrinkage by the trace") {
  TrialTensor t(1, 1, 2, 4);
  const double v[2][4] = {{1, -1, 1, -1}, {2, 0, -2, 0}};
  for (int c = 0; c < 2; ++c)
    for (int l = 0; l < 4; ++l) t.at(0, 0, c, l) = v[c][l];
  const auto cov = covariance_tensor(t, 0.1);
  // raw covariance diag(1, 2), trace/M = 1.5
  CHECK(cov.at(0, 0)(0, 0) == doctest::Approx(1.15));
  CHECK(cov.at(0, 0)(1, 1) == doctest::Approx(2.15));
  CHECK(cov.at(0, 0)(0, 1) == doctest::Approx(0.0));
  TrialTensor flat(1, 1, 2, 4);
  CHECK_THROWS_AS(covariance_tensor(flat, 0.1), Error);
}

TEST_CASE("mbt block order") {
  std::mt19937_64 rng(2);
  MbtHeads heads;
  for (int k = 0; k < 3; ++k) heads.heads.push_back(stiefel::random_orthonormal(4, 2, rng));
  std::vector<std::vector<Matrix>> tangents(2, std::vector<Matrix>(3));
  for (auto& band : tangents)
    for (auto& v : band) v = test::random_sym(4, rng);
  const auto blocks = mbt_blocks(heads, tangents, 3);
  REQUIRE(blocks.size() == 3 * 2 * 3);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t f = 0; f < 2; ++f)
      for (std::size_t k = 0; k < 3; ++k) {
        const Matrix expect = heads.heads[k].transpose() * tangents[f][s] * heads.heads[k];
        CHECK((blocks[(s * 2 + f) * 3 + k] - expect).norm() == 0.0);
      }
}

TEST_CASE("finite differences through the whole network") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CAPTURE(seed);
    CHECK(test::fd_network(seed) < 1e-4);
  }
}

TEST_CASE("a training step lowers the batch loss and keeps constraints") {
  std::mt19937_64 rng(3);
  TrainConfig c;
  c.bands.bands = {{4, 8}, {8, 12}};
  c.window_len = 250;
  c.m = 3;
  c.heads = 3;
  c.learning_rate = 1e-2;
  auto model = make(c, {250.0, 4, 250, 2});
  std::vector<PreparedTrial> trials(8);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    trials[i].label = static_cast<std::uint32_t>(i % 2);
    trials[i].cov = SpdTensor{1, 2, {}};
    const double scale = trials[i].label ? 2.0 : 1.0;
    for (int f = 0; f < 2; ++f) {
      Matrix x = test::random_spd(4, rng, 0.3);
      x(0, 0) *= scale;
      trials[i].cov.slices.push_back(x);
    }
  }
  std::vector<const PreparedTrial*> batch;
  for (const auto& t : trials) batch.push_back(&t);
  const auto before = model.heads.heads[0];
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 30; ++step) {
    const double loss = train_step(model, batch, c.learning_rate);
    if (step == 0) first = loss;
    last = loss;
  }
  CHECK(last < first);
  CHECK((model.heads.heads[0] - before).norm() == 0.0);
  for (std::size_t k = 1; k < model.heads.size(); ++k) CHECK(stiefel::orthonormality_error(model.heads.heads[k]) < 1e-8);
  for (const auto& st : model.network.stacks)
    for (const auto& bm : st.bimaps)
      CHECK((bm.weight() * bm.weight().transpose() - Matrix::Identity(bm.out_dim(), bm.out_dim())).norm() < 1e-8);

  std::vector<PreparedTrial> wrong(1);
  wrong[0].cov = SpdTensor{2, 2, std::vector<Matrix>(4, Matrix::Identity(4, 4))};
  const std::vector<const PreparedTrial*> wb = {&wrong[0]};
  CHECK_THROWS_AS(train_step(model, wb, 0.1), Error);
}

TEST_CASE("model round trip is bit exact") {
  TrainConfig c;
  c.bands.bands = {{8, 12}, {12, 16}, {16, 20}};
  c.m = 3;
  c.rbn_bias = true;
  auto model = make(c, {250.0, 6, 500, 3}, 7);
  std::mt19937_64 rng(8);
  model.network.band_scale << 0.5, 2.0, 3.0;
  model.network.stacks[1].rbn.set_running_mean(test::random_spd(6, rng));
  model.network.stacks[2].rbn.set_bias(test::random_sym(6, rng));
  model.selection.objective_trace = {1.0, 2.5};
  model.selection.l_matrix = test::random_sym(6, rng);

  const auto bytes = encode_model(model);
  const auto back = decode_model(bytes);
  CHECK(encode_model(back) == bytes);
  CHECK(back.network.stacks[1].rbn.running_mean() == model.network.stacks[1].rbn.running_mean());
  CHECK(back.classifier.kernel == model.classifier.kernel);
  CHECK(back.heads.heads[2] == model.heads.heads[2]);
  CHECK(back.parameter_count == model.parameter_count);
  CHECK(to_text(back.config) == to_text(model.config));

  const auto path = std::filesystem::temp_directory_path() / "lglbci_test_model.lglm";
  save_model(model, path);
  CHECK(model_hash(load_model(path)) == model_hash(model));
  auto nudged = model;
  nudged.classifier.head_bias(0) += 1e-12;
  CHECK(model_hash(nudged) != model_hash(model));
  std::filesystem::remove(path);

  auto version = bytes;
  version[4] = 2;
  CHECK(decode_code(version) == ErrorCode::VersionMismatch);
  auto magic = bytes;
  magic[1] = 'X';
  CHECK(decode_code(magic) == ErrorCode::MalformedHeader);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK(decode_code(flipped) == ErrorCode::ChecksumMismatch);
  auto cut = bytes;
  cut.resize(bytes.size() - 9);
  CHECK(decode_code(cut) == ErrorCode::DimensionMismatch);
  CHECK_THROWS_AS(load_model("/nonexistent/model.lglm"), Error);
}
