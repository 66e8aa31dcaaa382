#include "mvfuse/textlib.hpp"

#include <fstream>

#include "mvfuse/feature_cache.hpp"
#include "mvfuse/image.hpp"

namespace mvfuse {

std::vector<std::string> default_templates() {
  return {
      "a photo of a person doing {}.",
      "a video of a person {}.",
      "a example of a person {}.",
      "a photo of the person performing {}.",
      "a demonstration of a person {}.",
      "a photo of a person practicing {}.",
      "a video of a person performing {}.",
      "a photo of a person during {}.",
  };
}

namespace {

size_t placeholder_count(const std::string& tmpl) {
  size_t n = 0, pos = 0;
  while ((pos = tmpl.find("{}", pos)) != std::string::npos) {
    ++n;
    pos += 2;
  }
  return n;
}

void validate_templates(const std::vector<std::string>& templates) {
  if (templates.empty()) throw ArgError("text library: need at least one template");
  for (const auto& t : templates)
    if (placeholder_count(t) != 1)
      throw ArgError("template must contain exactly one {} placeholder: " + t);
}

}  // namespace

std::vector<std::string> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open template file: " + path.string());
  std::vector<std::string> templates;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    templates.push_back(line);
  }
  validate_templates(templates);
  return templates;
}

std::string render_prompt(const std::string& tmpl, const std::string& class_name) {
  const size_t pos = tmpl.find("{}");
  if (pos == std::string::npos || placeholder_count(tmpl) != 1)
    throw ArgError("template must contain exactly one {} placeholder: " + tmpl);
  std::string out = tmpl;
  out.replace(pos, 2, class_name);
  return out;
}

ClassTextLibrary build_text_library(const std::vector<std::string>& class_names,
                                    const std::vector<std::string>& templates,
                                    EncoderClient& encoder) {
  if (class_names.empty()) throw ArgError("text library: empty class list");
  validate_templates(templates);

  ClassTextLibrary lib;
  lib.class_names = class_names;
  lib.templates = templates;
  lib.embeddings.resize(Eigen::Index(class_names.size()), EncoderClient::dim());
  for (size_t c = 0; c < class_names.size(); ++c) {
    Eigen::VectorXf mean = Eigen::VectorXf::Zero(EncoderClient::dim());
    for (const auto& t : templates) {
      Eigen::VectorXf e = encoder.encode_text(render_prompt(t, class_names[c]));
      const float norm = e.norm();
      if (!(norm > 0.0f)) throw Error("text encoder returned a zero embedding");
      mean += e / norm;
    }
    mean /= float(templates.size());
    const float norm = mean.norm();
    if (!(norm > 0.0f)) throw Error("ensembled text embedding collapsed to zero");
    lib.embeddings.row(Eigen::Index(c)) = (mean / norm).transpose();
  }
  return lib;
}

std::pair<int, Eigen::VectorXf> zero_shot_classify(const Eigen::VectorXf& f_app,
                                                   const ClassTextLibrary& library) {
  if (f_app.size() != EncoderClient::dim())
    throw ArgError("zero_shot_classify: appearance feature must be 512-d");
  if (library.embeddings.rows() == 0) throw ArgError("zero_shot_classify: empty library");
  const float fnorm = f_app.norm();
  if (!(fnorm > 0.0f)) throw ArgError("zero_shot_classify: zero-norm appearance feature");

  Eigen::VectorXf scores(library.embeddings.rows());
  for (Eigen::Index c = 0; c < library.embeddings.rows(); ++c) {
    const float rnorm = library.embeddings.row(c).norm();
    scores[c] = library.embeddings.row(c).dot(f_app) / (fnorm * rnorm);
  }
  int best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = int(c);
  return {best, scores};
}

void precompute_cache(const SplitManifest& manifest, const std::filesystem::path& frames_root,
                      EncoderClient& encoder, const std::filesystem::path& out_path) {
  std::vector<FeatureRecord> records;
  records.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    const auto frame_path = frames_root / (entry.video_id + ".ppm");
    if (!std::filesystem::exists(frame_path))
      throw IoError("precompute_cache: missing representative frame: " + frame_path.string());
    FeatureRecord rec;
    rec.video_id = entry.video_id;
    rec.label = uint16_t(entry.label);
    rec.vec = encode_appearance(read_ppm(frame_path), encoder);
    records.push_back(std::move(rec));
  }
  write_feature_cache(records, out_path);
}

}  // namespace mvfuse
