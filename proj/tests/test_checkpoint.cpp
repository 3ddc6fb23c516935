#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hanet/checkpoint.hpp"

using namespace hanet;

namespace {

Vocab tiny_vocab() {
  std::vector<std::vector<std::vector<std::string>>> corpus = {
      {{"aa", "aa", "aa", "aa", "aa", "bb", "bb", "bb", "bb", "bb"}}};
  return build_vocab(corpus, 5);
}

}  // namespace

TEST_CASE("checkpoints round-trip bit-exactly at double precision") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hanet_ckpt_test";
  fs::create_directories(dir);

  Vocab vocab = tiny_vocab();
  ModelConfig cfg;
  cfg.variant = Variant::CahanSum;
  cfg.direction = Direction::BI;
  cfg.gated = true;
  cfg.d = 5;
  cfg.d_s = 3;
  cfg.d_d = 2;
  cfg.vocab_size = vocab.size();
  cfg.n_classes = 4;
  ModelParams params = init_params(cfg, 8123);
  // Perturb with awkward values that stress the serializer.
  params.embeddings.at(0, 0) = 0.1 + 0.2;  // 0.30000000000000004
  params.cls_b.at(0, 0) = -1.0 / 3.0;
  params.sent_att_fwd.u_s.at(0, 0) = 1e-17;

  const std::string path = (dir / "model.ckpt.json").string();
  save_checkpoint(path, cfg, params, vocab);
  Checkpoint ck = load_checkpoint(path);

  CHECK(ck.config.variant == cfg.variant);
  CHECK(ck.config.gated == cfg.gated);
  CHECK(ck.vocab.id_to_token == vocab.id_to_token);
  CHECK(ck.vocab.id("aa") == vocab.id("aa"));

  bool identical = true;
  visit_params(params, cfg, [&](const std::string& name, Tensor& x) {
    visit_params(ck.params, ck.config, [&](const std::string& n2, Tensor& y) {
      if (name == n2) identical = identical && x.bit_equal(y);
    });
  });
  CHECK(identical);

  SECTION("saves are byte-stable across repeated writes") {
    const std::string path2 = (dir / "model2.ckpt.json").string();
    save_checkpoint(path2, cfg, params, vocab);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }

  SECTION("corrupted checkpoints are rejected") {
    const std::string bad = (dir / "bad.json").string();
    std::ofstream(bad) << "{\"format_version\": 1}\n";
    CHECK_THROWS_AS(load_checkpoint(bad), DataError);
    CHECK_THROWS_AS(load_checkpoint((dir / "absent.json").string()), DataError);
  }

  SECTION("unknown config keys are rejected") {
    nlohmann::json j = model_config_to_json(cfg);
    j["mystery"] = 1;
    CHECK_THROWS_AS(model_config_from_json(j), ConfigError);
  }

  fs::remove_all(dir);
}
