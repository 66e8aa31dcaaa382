#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mvfuse/encoder.hpp"
#include "mvfuse/manifest.hpp"

namespace mvfuse {

// Per-class prompt-ensembled text embeddings, rows unit L2 norm.
struct ClassTextLibrary {
  std::vector<std::string> class_names;
  Eigen::MatrixXf embeddings;  // C x 512
  std::vector<std::string> templates;
};

std::vector<std::string> default_templates();
// UTF-8, one template per line, `{}` placeholder; blank lines skipped.
std::vector<std::string> load_templates(const std::filesystem::path& path);
std::string render_prompt(const std::string& tmpl, const std::string& class_name);

// For each class: render every template, encode, L2-normalize each
// embedding, average, re-normalize the mean.
ClassTextLibrary build_text_library(const std::vector<std::string>& class_names,
                                    const std::vector<std::string>& templates,
                                    EncoderClient& encoder);

// Cosine of f_app against each library row; argmax with ties to the lowest
// index. Returns (class index, full score vector).
std::pair<int, Eigen::VectorXf> zero_shot_classify(const Eigen::VectorXf& f_app,
                                                   const ClassTextLibrary& library);

// One 512-d appearance record per manifest entry, from the representative
// frame `frames_root/<video_id>.ppm`. All-or-nothing: any missing frame or
// encoder failure aborts before a file is written.
void precompute_cache(const SplitManifest& manifest, const std::filesystem::path& frames_root,
                      EncoderClient& encoder, const std::filesystem::path& out_path);

}  // namespace mvfuse
