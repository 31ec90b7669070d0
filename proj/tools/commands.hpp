#pragma once

#include "drface/synth.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace drface::cli {

// Corpus directory layout written by `synth` and consumed by the other
// subcommands:
//   reference.obj      mean neutral face (DR reference)
//   <i>_<e>.obj        identity i performing expression e
//   mean_<e>.obj       expression e replayed on the mean face
//   manifest.json      spec + seed + identity split
Corpus load_corpus_dir(const std::string& dir);
void save_corpus_dir(const Corpus& corpus, const std::string& dir);

// Resolved-config echo, written beside every artifact-producing run.
void write_run_config(const std::string& out_dir, const std::string& command,
                      const nlohmann::json& resolved);

int cmd_synth(const CorpusSpec& spec, const std::string& out_dir);
int cmd_dr_encode(const std::string& ref_path, const std::string& in_path,
                  const std::string& out_path);
int cmd_dr_decode(const std::string& ref_path, const std::string& in_path,
                  const std::string& out_path);
int cmd_augment(const std::string& corpus_dir, int count, int m, std::uint64_t seed,
                const std::string& out_dir);
int cmd_train(const std::string& corpus_dir, const std::string& aug_dir,
              const nlohmann::json& train_config_json, const std::string& out_dir);
int cmd_decompose(const std::string& model_path, const std::string& ref_path,
                  const std::string& in_path, const std::string& out_dir);
int cmd_transfer(const std::string& model_path, const std::string& ref_path,
                 const std::string& source_path, const std::string& target_path,
                 const std::string& out_path);
int cmd_interp(const std::string& model_path, const std::string& ref_path,
               const std::string& m0_path, const std::string& m1_path, double stride,
               const std::string& out_dir);
int cmd_bilinear_build(const std::string& corpus_dir, int k_id, int k_exp,
                       const std::string& out_path);
int cmd_bilinear_fit(const std::string& core_path, const std::string& in_path,
                     const std::string& out_path);
int cmd_bilinear_transfer(const std::string& core_path, const std::string& source_path,
                          const std::string& target_path, const std::string& out_path);
int cmd_eval(const std::string& orig, const std::string& recon, const std::string& set_dir,
             const std::string& out_csv);

} // namespace drface::cli
