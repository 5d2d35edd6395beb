#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "deeprec/checkpoint.hpp"
#include "test_support.hpp"

using namespace deeprec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("deeprec_ckpt_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

template <typename T>
CheckpointRecord<T> sample_record(const std::string& arch, const char* act, bool tied, std::uint64_t seed) {
  auto spec = parse_architecture(arch);
  spec.activation = parse_activation(act);
  spec.tied = tied;
  const std::size_t n = 13;
  Autoencoder<T> model(spec, n, seed);
  Rng rng(seed + 1);
  for (auto& b : model.params().biases)
    for (Index i = 0; i < b.size(); ++i) b(i) = static_cast<T>(rng.normal());
  auto velocity = model.params().zeros_like();
  for (auto& w : velocity.weights)
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.normal() * 1e-3);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("item," + std::to_string(i));
  return CheckpointRecord<T>{7, model, velocity, 0.93, 0.81, tokens, "train.csv"};
}

template <typename T>
bool bit_equal(const Parameters<T>& a, const Parameters<T>& b) {
  const auto fa = deeprec::testing::flatten(a);
  const auto fb = deeprec::testing::flatten(b);
  return fa.size() == fb.size() && std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(T)) == 0;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE_TEMPLATE("save then load is bit-exact", T, float, double) {
  TempDir dir;
  for (bool tied : {false, true}) {
    for (const char* arch : {"n,8,n", "n,8,6,dp(0.4),8,n", "n,10,4,dp(0.2),6,n"}) {
      if (tied && std::string(arch) == "n,10,4,dp(0.2),6,n") continue;
      const auto rec = sample_record<T>(arch, "lrelu", tied, 5);
      const auto path = dir.file("m.ckpt");
      save_checkpoint(rec, path);
      const auto back = load_checkpoint<T>(path, rec.model.spec());
      CHECK(bit_equal(back.model.params(), rec.model.params()));
      CHECK(bit_equal(back.velocity, rec.velocity));
      CHECK(back.epoch == 7);
      CHECK(back.eval_rmse == rec.eval_rmse);
      CHECK(back.train_mmse == rec.train_mmse);
      CHECK(back.item_tokens == rec.item_tokens);
      CHECK(back.train_data == "train.csv");
      CHECK(architecture_signature(back.model.spec()) == architecture_signature(rec.model.spec()));

      Rng rng(3);
      const auto x = deeprec::testing::random_matrix<T>(4, 13, rng, 0.0, 5.0);
      const Matrix<T> ya = rec.model.predict(x);
      const Matrix<T> yb = back.model.predict(x);
      CHECK(std::memcmp(ya.data(), yb.data(), sizeof(T) * static_cast<std::size_t>(ya.size())) == 0);
      CHECK_FALSE(fs::exists(path + ".tmp"));
    }
  }
}

TEST_CASE("NaN metrics survive as NaN") {
  TempDir dir;
  auto rec = sample_record<float>("n,4,n", "selu", false, 1);
  rec.eval_rmse = std::numeric_limits<double>::quiet_NaN();
  save_checkpoint(rec, dir.file("a.ckpt"));
  CHECK(std::isnan(load_checkpoint<float>(dir.file("a.ckpt")).eval_rmse));
}

TEST_CASE("a double checkpoint loads into a float model") {
  TempDir dir;
  const auto rec = sample_record<double>("n,5,n", "elu", false, 2);
  save_checkpoint(rec, dir.file("d.ckpt"));
  const auto back = load_checkpoint<float>(dir.file("d.ckpt"));
  const auto expected = rec.model.cast<float>();
  CHECK(bit_equal(back.model.params(), expected.params()));
}

TEST_CASE("truncated files raise errors at every length") {
  TempDir dir;
  const auto rec = sample_record<float>("n,6,4,dp(0.5),6,n", "selu", true, 3);
  const auto path = dir.file("t.ckpt");
  save_checkpoint(rec, path);
  const auto bytes = slurp(path);
  const auto cut = dir.file("cut.ckpt");
  for (std::size_t len = 0; len < bytes.size(); len += std::max<std::size_t>(1, len / 7)) {
    spit(cut, bytes.substr(0, len));
    CHECK_THROWS_AS(load_checkpoint<float>(cut), CheckpointError);
  }
  spit(cut, bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(load_checkpoint<float>(cut), CheckpointError);
}

TEST_CASE("corruption, version and magic are checked") {
  TempDir dir;
  const auto rec = sample_record<float>("n,6,n", "selu", false, 4);
  const auto path = dir.file("c.ckpt");
  save_checkpoint(rec, path);
  auto bytes = slurp(path);

  auto flipped = bytes;
  flipped[flipped.size() - 40] ^= 0x01;
  spit(dir.file("flip.ckpt"), flipped);
  CHECK_THROWS_WITH_AS(load_checkpoint<float>(dir.file("flip.ckpt")),
                       doctest::Contains("corrupt"), CheckpointError);

  auto versioned = bytes;
  versioned[8] = 2;
  spit(dir.file("v2.ckpt"), versioned);
  CHECK_THROWS_WITH_AS(load_checkpoint<float>(dir.file("v2.ckpt")), doctest::Contains("version 2"),
                       CheckpointError);

  auto magic = bytes;
  magic[0] = 'X';
  spit(dir.file("magic.ckpt"), magic);
  CHECK_THROWS_AS(load_checkpoint<float>(dir.file("magic.ckpt")), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint<float>(dir.file("missing.ckpt")), CheckpointError);
}

TEST_CASE("architecture mismatch is rejected") {
  TempDir dir;
  const auto rec = sample_record<float>("n,8,dp(0.5),8,n", "selu", false, 6);
  const auto path = dir.file("m.ckpt");
  save_checkpoint(rec, path);

  auto other = rec.model.spec();
  other.decoder_dims = {9};
  CHECK_THROWS_WITH_AS(load_checkpoint<float>(path, other), doctest::Contains("does not match"),
                       CheckpointError);
  auto tied = rec.model.spec();
  tied.tied = true;
  CHECK_THROWS_AS(load_checkpoint<float>(path, tied), CheckpointError);
  auto act = rec.model.spec();
  act.activation = parse_activation("elu");
  CHECK_THROWS_AS(load_checkpoint<float>(path, act), CheckpointError);
  CHECK_NOTHROW(load_checkpoint<float>(path, parse_architecture("n, 8, dp(0.5), 8, n")));
}

TEST_CASE("signature format") {
  auto spec = parse_architecture("n,128,n");
  CHECK(architecture_signature(spec) == "n,128,n|selu|untied");
  spec.tied = true;
  spec.activation = parse_activation("relu6");
  CHECK(architecture_signature(spec) == "n,128,n|relu6|tied");
}
