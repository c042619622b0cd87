// Copyright 2026 The ielab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Fine-tuning protocol: window chunking with overlap, token and box
// augmentation, the epoch loop with validation-based model selection, and
// k-fold cross-validation.

#ifndef IELAB_TRAINLOOP_HPP_
#define IELAB_TRAINLOOP_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ielab/checkpoint.hpp"
#include "ielab/docstream.hpp"
#include "ielab/metrics.hpp"
#include "ielab/model.hpp"
#include "ielab/rng.hpp"

namespace ielab {

struct TrainConfig {
  double lr = 2e-5;
  int batch_size = 2;  // documents
  int epochs = 20;
  double token_replace_rate = 0.10;
  int bbox_shift_max = 10;
  std::array<double, 2> bbox_scale_range = {0.95, 1.05};
  int max_seq_len = 512;
  int chunk_overlap = 100;
  double val_fraction = 0.1;
  int folds = 5;
  std::uint64_t seed = 0;

  void validate() const;
  int stride() const { return max_seq_len - chunk_overlap; }
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// ---- Chunking --------------------------------------------------------------

struct ChunkSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // half-open
  bool operator==(const ChunkSpan&) const = default;
};

// Windows of max_len tokens starting every (max_len - overlap) tokens until
// the sequence is covered; the last window is clipped at T.
std::vector<ChunkSpan> plan_chunks(std::size_t length, int max_len, int overlap);

struct Chunk {
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;
  ModelInput input;  // positions re-based to 0
};

std::vector<Chunk> chunk_document(const ModelInput& input, const TrainConfig& cfg,
                                  const std::string& doc_id = {});

// For every token, the index of the chunk in which the token lies farthest
// from the nearer chunk edge; ties go to the earlier chunk. Throws
// ContractError when a token is not covered.
std::vector<std::size_t> chunk_owners(std::span<const ChunkSpan> chunks, std::size_t length);

struct ChunkProbabilities {
  ChunkSpan span;
  Tensor probs;  // (end - start) x label_count
};

// Argmax label per token, read from the owning chunk.
std::vector<int> aggregate_chunk_predictions(std::span<const ChunkProbabilities> chunks,
                                             std::size_t length);

// ---- Augmentation ----------------------------------------------------------

// Replaces each unmasked word id, with probability `rate`, by a uniform id in
// [2, vocab_size) so PAD and UNK are never produced.
ModelInput augment_tokens(const ModelInput& input, double rate, int vocab_size, Rng& rng);

// Scales every box by `s` about the page centre, shifts it by (dx, dy),
// re-quantizes and clamps to [0, 1000], and recomputes width and height.
ModelInput jitter_bboxes(const ModelInput& input, int dx, int dy, double s);

// One document-level draw of (dx, dy, s) followed by jitter_bboxes.
ModelInput augment_bboxes(const ModelInput& input, const TrainConfig& cfg, Rng& rng);

// ---- Training and evaluation ----------------------------------------------

struct PreparedDoc {
  std::string id;
  ModelInput input;
  std::vector<Tensor> rasters;  // one per page; empty unless the model uses images
};

std::vector<int> predict_labels(const TaggerModel& model, const PreparedDoc& doc,
                                const TrainConfig& cfg);

std::vector<std::string> label_names(std::span<const int> ids, const LabelVocabulary& labels);

ClassReport evaluate(const TaggerModel& model, std::span<const PreparedDoc> docs,
                     const LabelVocabulary& labels, const TrainConfig& cfg);

struct FoldTraining {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_trace;   // weighted F1 per epoch
  int best_epoch = 0;              // 0-based
  double best_val_f1 = 0.0;
};

// Index of the maximum, earliest on ties.
int best_epoch_of(std::span<const double> trace);

// Trains `model` in place and leaves it holding the best-epoch parameters.
FoldTraining train_fold(TaggerModel& model, std::span<const PreparedDoc> train,
                        std::span<const PreparedDoc> val, const LabelVocabulary& labels,
                        const TrainConfig& cfg, std::uint64_t seed);

// ---- Cross-validation ------------------------------------------------------

struct FoldSplit {
  std::vector<std::size_t> train, val, test;  // corpus indices
};

struct FoldPlan {
  int k = 0;
  std::vector<FoldSplit> folds;
};

// Seeded shuffle, k contiguous test folds of near-equal size, and a
// validation set of round(val_fraction * |train portion|) documents (at least
// one) carved from each training portion.
FoldPlan plan_folds(std::size_t n_docs, int k, double val_fraction, std::uint64_t seed);

// Page rasters per document id.
using RasterMap = std::map<std::string, std::vector<Tensor>>;

struct FoldOutcome {
  int fold = 0;
  std::vector<std::string> train_ids, val_ids, test_ids;
  FoldTraining training;
  double test_f1 = 0.0;
  ClassReport test_report;
  ModelSpec spec;  // with data-dependent sizes filled in
  Vocabularies vocabs;
  std::vector<NamedTensor> parameters;  // best epoch; empty unless kept
};

struct CvResult {
  std::vector<FoldOutcome> folds;
  std::vector<double> per_fold;
  double mean = 0.0;
  double std = 0.0;    // population
  ClassReport pooled;  // all test predictions together
  std::size_t params = 0;
};

struct CvOptions {
  int threads = 1;
  bool keep_parameters = false;
  const RasterMap* rasters = nullptr;
  std::size_t max_words = 5000;
};

// The fold seed is derived from cfg.seed and the fold index; the encoder
// seed of every fold model is derived from the fold seed, so models that
// differ only in fusion mode start from the same encoder weights.
CvResult cross_validate(std::span<const DocumentRecord> corpus, const ModelSpec& spec,
                        const TrainConfig& cfg, const BucketingConfig& bucketing,
                        const CvOptions& options = {});

// Fills word_vocab and label_count from the vocabularies and the encoder
// max_seq_len from the train config.
ModelSpec resolve_spec(ModelSpec spec, const Vocabularies& vocabs, const TrainConfig& cfg);

std::vector<PreparedDoc> prepare_documents(std::span<const DocumentRecord> docs,
                                           const Vocabularies& vocabs,
                                           const BucketingConfig& bucketing,
                                           const RasterMap* rasters, bool need_rasters);

// Number of worker threads requested through IELAB_THREADS (default 1).
int threads_from_env();

}  // namespace ielab

#endif  // IELAB_TRAINLOOP_HPP_
