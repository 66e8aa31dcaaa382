#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <mvfuse/encoder.hpp>
#include <mvfuse/eval.hpp>
#include <mvfuse/feature_cache.hpp>
#include <mvfuse/synthetic.hpp>
#include <mvfuse/textlib.hpp>

using namespace mvfuse;
namespace fs = std::filesystem;

namespace {

// fixed-output encoder for contract tests
class ConstantEncoder : public EncoderClient {
 public:
  explicit ConstantEncoder(int hot) : hot_(hot) {}
  Eigen::VectorXf encode_image(const Tensor&) override {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(dim());
    v[hot_] = 1.0f;
    return v;
  }
  Eigen::VectorXf encode_text(const std::string&) override { return encode_image(Tensor()); }

 private:
  int hot_;
};

RgbImage flat_image(int a, int size = 32) {
  RgbImage img(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      img.at(r, c, 0) = uint8_t(16 * (a % 15 + 1));
      img.at(r, c, 1) = uint8_t(16 * (a / 15 + 1));
      img.at(r, c, 2) = 128;
    }
  return img;
}

}  // namespace

TEST_CASE("preprocessing yields a 3x224x224 tensor with sane statistics") {
  const Tensor t = preprocess_for_encoder(flat_image(3, 50));
  CHECK(t.n == 1);
  CHECK(t.c == 3);
  CHECK(t.h == 224);
  CHECK(t.w == 224);
  CHECK(t.data.allFinite());
  // non-square input still center-crops to a square
  RgbImage wide(30, 90);
  const Tensor t2 = preprocess_for_encoder(wide);
  CHECK(t2.h == 224);
  CHECK(t2.w == 224);
}

TEST_CASE("representative frame is the middle one") {
  CHECK(select_representative_frame(10) == 5);
  CHECK(select_representative_frame(1) == 0);
  CHECK(select_representative_frame(2) == 1);
  CHECK_THROWS_AS(select_representative_frame(0), ArgError);
}

TEST_CASE("encoding the same frame twice is bit-identical") {
  SignatureMockEncoder enc(false, 0.05f);
  const RgbImage img = flat_image(7);
  const Eigen::VectorXf a = encode_appearance(img, enc);
  const Eigen::VectorXf b = encode_appearance(img, enc);
  CHECK(a.size() == 512);
  CHECK(a.isApprox(b, 0.0f));
  CHECK(std::abs(a.norm() - 1.0f) < 1e-5f);
}

TEST_CASE("constant mock forces f_app regardless of the frame") {
  ConstantEncoder enc(0);
  const Eigen::VectorXf a = encode_appearance(flat_image(1), enc);
  const Eigen::VectorXf b = encode_appearance(flat_image(9), enc);
  CHECK(a.isApprox(b, 0.0f));
  CHECK(a[0] == 1.0f);
}

TEST_CASE("signature mock decodes the appearance id embedded in the image") {
  SignatureMockEncoder enc(true, 0.0f);
  for (int a : {0, 3, 14, 15, 30}) {
    const Eigen::VectorXf v = encode_appearance(flat_image(a), enc);
    CHECK(v[a] == 1.0f);
    CHECK(v.sum() == 1.0f);
  }
  // text side recovers the same id from the class token in a prompt
  CHECK(enc.encode_text("a photo of a person doing a03m01.")[3] == 1.0f);
  CHECK_THROWS_AS(enc.encode_text("a photo of nothing"), ArgError);
}

TEST_CASE("library with an orthonormal mock equals identity rows") {
  SignatureMockEncoder enc(true, 0.0f);
  std::vector<std::string> names;
  for (int c = 0; c < 4; ++c) names.push_back(synthetic_class_name(c, false));
  const auto lib = build_text_library(names, default_templates(), enc);
  REQUIRE(lib.embeddings.rows() == 4);
  for (int c = 0; c < 4; ++c) {
    for (int j = 0; j < 512; ++j)
      CHECK(lib.embeddings(c, j) == doctest::Approx(j == c ? 1.0f : 0.0f).epsilon(1e-6));
  }
}

TEST_CASE("single-template and duplicate-template ensembles coincide") {
  SignatureMockEncoder enc(false, 0.0f);
  const std::vector<std::string> names = {"a00m00", "a01m01"};
  const auto one = build_text_library(names, {"a clip of {}."}, enc);
  const auto dup = build_text_library(names, {"a clip of {}.", "a clip of {}."}, enc);
  CHECK(one.embeddings.isApprox(dup.embeddings, 1e-6f));
  for (int c = 0; c < 2; ++c)
    CHECK(std::abs(one.embeddings.row(c).norm() - 1.0f) < 1e-5f);
}

TEST_CASE("library building validates templates and class lists") {
  SignatureMockEncoder enc(true, 0.0f);
  CHECK_THROWS_AS(build_text_library({}, default_templates(), enc), ArgError);
  CHECK_THROWS_AS(build_text_library({"a00m00"}, {"no placeholder"}, enc), ArgError);
  CHECK_THROWS_AS(build_text_library({"a00m00"}, {"two {} holes {}"}, enc), ArgError);
  CHECK_THROWS_AS(build_text_library({"a00m00"}, {}, enc), ArgError);
}

TEST_CASE("zero-shot classification: exact scores, ties, scale invariance") {
  SignatureMockEncoder enc(true, 0.0f);
  std::vector<std::string> names;
  for (int c = 0; c < 4; ++c) names.push_back(synthetic_class_name(c, false));
  const auto lib = build_text_library(names, default_templates(), enc);

  // row vector itself: score 1 for the true class, 0 elsewhere
  for (int c = 0; c < 4; ++c) {
    const Eigen::VectorXf f = lib.embeddings.row(c).transpose();
    auto [pred, scores] = zero_shot_classify(f, lib);
    CHECK(pred == c);
    for (int j = 0; j < 4; ++j)
      CHECK(scores[j] == doctest::Approx(j == c ? 1.0f : 0.0f).epsilon(1e-6));
  }
  // orthogonal to every row: all zeros, tie resolves to class 0
  Eigen::VectorXf ortho = Eigen::VectorXf::Zero(512);
  ortho[100] = 1.0f;
  auto [pred0, scores0] = zero_shot_classify(ortho, lib);
  CHECK(pred0 == 0);
  CHECK(scores0.cwiseAbs().maxCoeff() < 1e-6f);
  // positive rescaling changes nothing
  const Eigen::VectorXf f = lib.embeddings.row(2).transpose();
  auto [p1, s1] = zero_shot_classify(f, lib);
  auto [p2, s2] = zero_shot_classify((10.0f * f).eval(), lib);
  CHECK(p1 == p2);
  CHECK(s1.isApprox(s2, 1e-5f));
  CHECK_THROWS_AS(zero_shot_classify(Eigen::VectorXf::Zero(512), lib), ArgError);
}

TEST_CASE("library build order is permutation-equivariant") {
  SignatureMockEncoder enc(false, 0.0f);
  const std::vector<std::string> names = {"a00m00", "a01m00", "a02m00"};
  const std::vector<std::string> swapped = {"a02m00", "a01m00", "a00m00"};
  const auto a = build_text_library(names, default_templates(), enc);
  const auto b = build_text_library(swapped, default_templates(), enc);
  CHECK(a.embeddings.row(0).isApprox(b.embeddings.row(2), 1e-6f));
  CHECK(a.embeddings.row(2).isApprox(b.embeddings.row(0), 1e-6f));
}

TEST_CASE("template files load and validate") {
  const fs::path dir = fs::temp_directory_path() / "mvfuse_tmpl";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "ok.txt");
    out << "a photo of {}.\n\na clip of {}.\n";
  }
  const auto ts = load_templates(dir / "ok.txt");
  REQUIRE(ts.size() == 2);
  CHECK(render_prompt(ts[0], "x") == "a photo of x.");
  {
    std::ofstream out(dir / "bad.txt");
    out << "no placeholder here\n";
  }
  CHECK_THROWS_AS(load_templates(dir / "bad.txt"), ArgError);
  CHECK_THROWS_AS(load_templates(dir / "missing.txt"), IoError);
}

TEST_CASE("cache precompute: full coverage, idempotence, atomicity") {
  SyntheticConfig cfg;
  cfg.n_classes = 3;
  cfg.videos_per_class = 1;
  cfg.frames_per_video = 4;
  cfg.height = cfg.width = 24;
  cfg.seed = 5;
  const auto ds = generate_synthetic_dataset(cfg);
  const fs::path dir = fs::temp_directory_path() / "mvfuse_cache";
  fs::remove_all(dir);
  write_synthetic_dataset(ds, dir);

  SignatureMockEncoder enc(false, 0.05f);
  precompute_cache(ds.manifest, dir / "frames", enc, dir / "a.mclf");
  const auto records = read_feature_cache(dir / "a.mclf");
  REQUIRE(records.size() == 3);
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].video_id == ds.manifest.entries[i].video_id);
    CHECK(records[i].vec.size() == 512);
  }

  precompute_cache(ds.manifest, dir / "frames", enc, dir / "b.mclf");
  CHECK(file_checksum(dir / "a.mclf") == file_checksum(dir / "b.mclf"));

  // a missing frame fails the whole run without leaving a file
  fs::remove(dir / "frames" / (ds.manifest.entries[1].video_id + ".ppm"));
  CHECK_THROWS_AS(precompute_cache(ds.manifest, dir / "frames", enc, dir / "c.mclf"),
                  IoError);
  CHECK(!fs::exists(dir / "c.mclf"));
}

TEST_CASE("the pretrained encoder is declared, not silently mocked") {
  CHECK_NOTHROW(make_encoder("mock"));
  CHECK_NOTHROW(make_encoder("mock-orthonormal"));
  CHECK_THROWS_AS(make_encoder("pretrained"), ArgError);
  CHECK_THROWS_AS(make_encoder("nonsense"), ArgError);
}
