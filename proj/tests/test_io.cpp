#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <mvfuse/checkpoint.hpp>
#include <mvfuse/feature_cache.hpp>
#include <mvfuse/manifest.hpp>
#include <mvfuse/mv_clip.hpp>
#include <mvfuse/synthetic.hpp>

using namespace mvfuse;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  const fs::path d = fs::temp_directory_path() / ("mvfuse_io_" + std::to_string(counter++));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

MVClip random_clip(int frames, int h, int w, uint64_t seed) {
  Rng rng(seed);
  MVClip clip;
  clip.video_id = "clip" + std::to_string(seed);
  for (int t = 0; t < frames; ++t) {
    MVFrame f(h, w);
    for (auto& v : f.dx) v = int16_t(int(rng.next_uint(401)) - 200);
    for (auto& v : f.dy) v = int16_t(int(rng.next_uint(401)) - 200);
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("mv clip file round-trips exactly") {
  const auto dir = temp_dir();
  for (uint64_t seed : {1, 2, 3, 4, 5, 6, 7, 8}) {
    const MVClip clip = random_clip(int(1 + seed % 5), 6, 9, seed);
    write_mv_clip(clip, dir / "c.mvt");
    const MVClip back = read_mv_clip(dir / "c.mvt");
    REQUIRE(back.frames.size() == clip.frames.size());
    for (size_t t = 0; t < clip.frames.size(); ++t) {
      CHECK(back.frames[t].dx == clip.frames[t].dx);
      CHECK(back.frames[t].dy == clip.frames[t].dy);
    }
  }
}

TEST_CASE("single 4x4 frame file is exactly 76 bytes") {
  // 4 magic + 2+2 dims + 4 count + 16*2*2 payload
  const auto dir = temp_dir();
  MVClip clip;
  clip.video_id = "tiny";
  clip.frames.emplace_back(4, 4);
  write_mv_clip(clip, dir / "t.mvt");
  CHECK(fs::file_size(dir / "t.mvt") == 76);
}

TEST_CASE("mv clip reader rejects bad magic and truncation") {
  const auto dir = temp_dir();
  const MVClip clip = random_clip(2, 4, 4, 42);
  write_mv_clip(clip, dir / "c.mvt");
  auto bytes = slurp(dir / "c.mvt");

  {
    auto bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "bad.mvt", std::ios::binary)
        .write(bad.data(), std::streamsize(bad.size()));
    CHECK_THROWS_AS(read_mv_clip(dir / "bad.mvt"), FormatError);
  }
  {
    std::ofstream(dir / "trunc.mvt", std::ios::binary)
        .write(bytes.data(), std::streamsize(bytes.size() - 7));
    CHECK_THROWS_AS(read_mv_clip(dir / "trunc.mvt"), FormatError);
  }
  CHECK_THROWS_AS(read_mv_clip(dir / "absent.mvt"), IoError);
}

TEST_CASE("feature cache round-trips bit-exactly and validates") {
  const auto dir = temp_dir();
  Rng rng(7);
  std::vector<FeatureRecord> records;
  for (int i = 0; i < 5; ++i) {
    FeatureRecord r;
    r.video_id = "vid" + std::to_string(i);
    r.label = uint16_t(i % 3);
    r.vec.resize(kAppearanceDim);
    for (int j = 0; j < kAppearanceDim; ++j) r.vec[j] = rng.next_normal();
    records.push_back(std::move(r));
  }
  write_feature_cache(records, dir / "f.mclf");
  const auto back = read_feature_cache(dir / "f.mclf");
  REQUIRE(back.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].video_id == records[i].video_id);
    CHECK(back[i].label == records[i].label);
    CHECK(back[i].vec.isApprox(records[i].vec, 0.0f));  // exact
  }

  SUBCASE("mixed dims rejected") {
    auto bad = records;
    bad[2].vec.resize(kMotionDim);
    CHECK_THROWS_AS(write_feature_cache(bad, dir / "bad.mclf"), ArgError);
    CHECK(!fs::exists(dir / "bad.mclf"));
  }
  SUBCASE("duplicate ids rejected") {
    auto bad = records;
    bad[1].video_id = bad[0].video_id;
    CHECK_THROWS_AS(write_feature_cache(bad, dir / "dup.mclf"), ArgError);
    CHECK(!fs::exists(dir / "dup.mclf"));
  }
  SUBCASE("rewriting the same records is byte-identical") {
    write_feature_cache(records, dir / "f2.mclf");
    CHECK(slurp(dir / "f.mclf") == slurp(dir / "f2.mclf"));
    CHECK(file_checksum(dir / "f.mclf") == file_checksum(dir / "f2.mclf"));
  }
}

TEST_CASE("manifest round-trips") {
  const auto dir = temp_dir();
  SplitManifest m;
  m.split_name = "train";
  m.class_names = {"alpha", "beta"};
  m.xor_mode = true;
  m.entries = {{"v0", 0, "clips/v0.mvt"}, {"v1", 1, "clips/v1.mvt"}};
  write_manifest(m, dir / "train.txt", dir / "classes.txt");
  const SplitManifest back = read_manifest(dir / "train.txt", dir / "classes.txt");
  CHECK(back.class_names == m.class_names);
  CHECK(back.xor_mode == m.xor_mode);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].video_id == "v1");
  CHECK(back.entries[1].label == 1);
}

TEST_CASE("synthetic generation is deterministic and writes a loadable tree") {
  SyntheticConfig cfg;
  cfg.n_classes = 4;
  cfg.videos_per_class = 2;
  cfg.frames_per_video = 6;
  cfg.height = cfg.width = 16;
  cfg.seed = 99;

  const auto a = generate_synthetic_dataset(cfg);
  const auto b = generate_synthetic_dataset(cfg);
  REQUIRE(a.clips.size() == 8);
  for (size_t i = 0; i < a.clips.size(); ++i) {
    CHECK(a.clips[i].frames[0].dx == b.clips[i].frames[0].dx);
    CHECK(a.proxy_frames[i].pixels == b.proxy_frames[i].pixels);
  }

  const auto d1 = temp_dir(), d2 = temp_dir();
  write_synthetic_dataset(a, d1);
  write_synthetic_dataset(b, d2);
  for (const auto& e : a.manifest.entries)
    CHECK(slurp(d1 / "clips" / (e.video_id + ".mvt")) ==
          slurp(d2 / "clips" / (e.video_id + ".mvt")));

  const LoadedDataset loaded = load_dataset(d1, "train");
  CHECK(loaded.manifest.entries.size() == 8);
  CHECK(loaded.clips.size() == 8);
  CHECK(loaded.clips[0].frames.size() == 6);
}

TEST_CASE("xor labels are ambiguous from each single modality") {
  // class = 2*appearance + motion: each appearance id covers exactly two
  // classes, each motion id covers exactly two classes
  for (int c = 0; c < 4; ++c) {
    CHECK(appearance_id(c, true) == c / 2);
    CHECK(motion_id(c, true) == c % 2);
  }
  CHECK(appearance_id(0, true) == appearance_id(1, true));
  CHECK(motion_id(0, true) == motion_id(2, true));
  CHECK(synthetic_class_name(3, true) == "a01m01");
}

TEST_CASE("checkpoint container round-trips bit-exactly") {
  const auto dir = temp_dir();
  Checkpoint ckpt;
  ckpt.meta = {{"stage", "mv-only"}, {"n_classes", 4}, {"epoch", 3}, {"best_metric", 0.75}};
  Rng rng(5);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXf v(17 + i);
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = rng.next_normal();
    ckpt.tensors.emplace_back("tensor" + std::to_string(i), v);
  }
  save_checkpoint(ckpt, dir / "a.ckpt");
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.meta == ckpt.meta);
  REQUIRE(back.tensors.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.tensors[i].first == ckpt.tensors[i].first);
    CHECK(std::memcmp(back.tensors[i].second.data(), ckpt.tensors[i].second.data(),
                      size_t(ckpt.tensors[i].second.size()) * sizeof(float)) == 0);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);

  std::ofstream(dir / "junk.ckpt", std::ios::binary) << "NOPE data";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), FormatError);
}
