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

#include "ielab/trainloop.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "ielab/adam.hpp"
#include "ielab/error.hpp"
#include "ielab/ops.hpp"
#include "ielab/stats.hpp"

namespace ielab {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(token_replace_rate >= 0.0 && token_replace_rate < 1.0)) {
    throw ConfigError("train: token_replace_rate must lie in [0, 1)");
  }
  if (bbox_shift_max < 0) throw ConfigError("train: bbox_shift_max must be >= 0");
  if (!(bbox_scale_range[0] > 0.0 && bbox_scale_range[0] <= bbox_scale_range[1])) {
    throw ConfigError("train: bbox_scale_range must be an increasing positive pair");
  }
  if (max_seq_len < 1) throw ConfigError("train: max_seq_len must be >= 1");
  if (!(chunk_overlap > 0 && chunk_overlap < max_seq_len)) {
    throw ConfigError("train: need 0 < chunk_overlap < max_seq_len");
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("train: val_fraction must lie in [0, 1)");
  }
  if (folds < 2) throw ConfigError("train: folds must be >= 2");
}

json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"token_replace_rate", c.token_replace_rate},
          {"bbox_shift_max", c.bbox_shift_max},
          {"bbox_scale_range", c.bbox_scale_range},
          {"max_seq_len", c.max_seq_len},
          {"chunk_overlap", c.chunk_overlap},
          {"val_fraction", c.val_fraction},
          {"folds", c.folds},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.token_replace_rate = j.value("token_replace_rate", c.token_replace_rate);
  c.bbox_shift_max = j.value("bbox_shift_max", c.bbox_shift_max);
  c.bbox_scale_range = j.value("bbox_scale_range", c.bbox_scale_range);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.chunk_overlap = j.value("chunk_overlap", c.chunk_overlap);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.folds = j.value("folds", c.folds);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---- Chunking --------------------------------------------------------------

std::vector<ChunkSpan> plan_chunks(std::size_t length, int max_len, int overlap) {
  if (max_len < 1 || overlap < 0 || overlap >= max_len) {
    throw ConfigError("plan_chunks: need 0 <= overlap < max_len");
  }
  const auto window = static_cast<std::size_t>(max_len);
  const auto stride = static_cast<std::size_t>(max_len - overlap);
  std::vector<ChunkSpan> out;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(start + window, length);
    out.push_back({start, end});
    if (end >= length) break;
  }
  return out;
}

std::vector<Chunk> chunk_document(const ModelInput& input, const TrainConfig& cfg,
                                  const std::string& doc_id) {
  if (input.size() == 0) throw ContractError("chunk_document: empty document " + doc_id);
  std::vector<Chunk> out;
  for (const ChunkSpan& s : plan_chunks(input.size(), cfg.max_seq_len, cfg.chunk_overlap)) {
    out.push_back({doc_id, s.start, s.end, input.slice(s.start, s.end)});
  }
  return out;
}

std::vector<std::size_t> chunk_owners(std::span<const ChunkSpan> chunks, std::size_t length) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(length, kNone);
  std::vector<std::size_t> best(length, 0);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const ChunkSpan& s = chunks[c];
    for (std::size_t i = s.start; i < std::min(s.end, length); ++i) {
      const std::size_t margin = std::min(i - s.start, s.end - 1 - i);
      if (owner[i] == kNone || margin > best[i]) {
        owner[i] = c;
        best[i] = margin;
      }
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (owner[i] == kNone) {
      throw ContractError("chunk aggregation: token " + std::to_string(i) + " is not covered");
    }
  }
  return owner;
}

std::vector<int> aggregate_chunk_predictions(std::span<const ChunkProbabilities> chunks,
                                             std::size_t length) {
  std::vector<ChunkSpan> spans;
  for (const auto& c : chunks) {
    if (c.probs.rank() != 2 || c.probs.dim(0) != c.span.end - c.span.start) {
      throw DimensionError("chunk aggregation: probability rows do not match the chunk span");
    }
    spans.push_back(c.span);
  }
  const std::vector<std::size_t> owner = chunk_owners(spans, length);
  std::vector<int> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const ChunkProbabilities& c = chunks[owner[i]];
    const std::size_t labels = c.probs.dim(1);
    const double* row = c.probs.data().data() + (i - c.span.start) * labels;
    out[i] = static_cast<int>(std::max_element(row, row + labels) - row);
  }
  return out;
}

// ---- Augmentation ----------------------------------------------------------

ModelInput augment_tokens(const ModelInput& input, double rate, int vocab_size, Rng& rng) {
  if (rate == 0.0) return input;
  if (vocab_size <= 2) throw ConfigError("augment_tokens: vocabulary has no regular words");
  ModelInput out = input;
  std::uniform_int_distribution<int> pick(2, vocab_size - 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Draw both numbers for every token so the stream does not depend on
    // which tokens were replaced.
    const double u = uniform01(rng);
    const int id = pick(rng);
    if (out.mask[i] && u < rate) out.word_ids[i] = id;
  }
  return out;
}

ModelInput jitter_bboxes(const ModelInput& input, int dx, int dy, double s) {
  ModelInput out = input;
  constexpr double kCentre = kCoordMax / 2.0;
  auto move = [&](int v, int d) {
    const long q = std::lround((v - kCentre) * s + kCentre + d);
    return static_cast<int>(std::clamp<long>(q, 0, kCoordMax));
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.x1_ids[i] = move(input.x1_ids[i], dx);
    out.x2_ids[i] = move(input.x2_ids[i], dx);
    out.y1_ids[i] = move(input.y1_ids[i], dy);
    out.y2_ids[i] = move(input.y2_ids[i], dy);
    out.w_ids[i] = out.x2_ids[i] - out.x1_ids[i];
    out.h_ids[i] = out.y2_ids[i] - out.y1_ids[i];
  }
  return out;
}

ModelInput augment_bboxes(const ModelInput& input, const TrainConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<int> shift(-cfg.bbox_shift_max, cfg.bbox_shift_max);
  const int dx = shift(rng);
  const int dy = shift(rng);
  const double u = uniform01(rng);
  const double s = cfg.bbox_scale_range[0] + u * (cfg.bbox_scale_range[1] - cfg.bbox_scale_range[0]);
  return jitter_bboxes(input, dx, dy, s);
}

// ---- Training and evaluation ----------------------------------------------

std::vector<int> predict_labels(const TaggerModel& model, const PreparedDoc& doc,
                                const TrainConfig& cfg) {
  std::vector<ChunkProbabilities> probs;
  for (const Chunk& c : chunk_document(doc.input, cfg, doc.id)) {
    probs.push_back({{c.start, c.end}, model.probabilities(c.input, doc.rasters)});
  }
  return aggregate_chunk_predictions(probs, doc.input.size());
}

std::vector<std::string> label_names(std::span<const int> ids, const LabelVocabulary& labels) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(labels.labels.at(static_cast<std::size_t>(id)));
  return out;
}

namespace {

// Model output tags with the gold label positions; the argmax may produce a
// stray I- tag, which the decoder's repair rule absorbs.
std::vector<std::vector<std::string>> gold_tags(std::span<const PreparedDoc> docs,
                                                const LabelVocabulary& labels) {
  std::vector<std::vector<std::string>> out;
  for (const auto& d : docs) out.push_back(label_names(d.input.label_ids, labels));
  return out;
}

}  // namespace

ClassReport evaluate(const TaggerModel& model, std::span<const PreparedDoc> docs,
                     const LabelVocabulary& labels, const TrainConfig& cfg) {
  std::vector<std::vector<std::string>> pred;
  for (const auto& d : docs) pred.push_back(label_names(predict_labels(model, d, cfg), labels));
  return entity_scores(pred, gold_tags(docs, labels));
}

int best_epoch_of(std::span<const double> trace) {
  if (trace.empty()) throw ContractError("best_epoch_of: empty trace");
  int best = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

FoldTraining train_fold(TaggerModel& model, std::span<const PreparedDoc> train,
                        std::span<const PreparedDoc> val, const LabelVocabulary& labels,
                        const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (train.empty() || val.empty()) throw ConfigError("train_fold: empty train or validation split");
  const int vocab = model.spec().encoder.word_vocab;
  std::vector<Tensor*> params = model.parameters();
  AdamState adam;
  adam.config.lr = cfg.lr;

  FoldTraining out;
  std::vector<NamedTensor> best;
  std::vector<std::size_t> order(train.size());
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = make_rng(seed, "shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size), ++step) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<PreparedDoc const*> docs;
      std::vector<ModelInput> inputs;
      for (std::size_t j = b; j < e; ++j) {
        const PreparedDoc& d = train[order[j]];
        Rng tok_rng = make_rng(seed, "augment.tokens", step * 64 + (j - b));
        Rng box_rng = make_rng(seed, "augment.bbox", step * 64 + (j - b));
        inputs.push_back(augment_tokens(augment_bboxes(d.input, cfg, box_rng),
                                        cfg.token_replace_rate, vocab, tok_rng));
        docs.push_back(&d);
      }
      std::size_t total = 0;
      for (const auto& in : inputs) total += static_cast<std::size_t>(std::count(in.mask.begin(), in.mask.end(), true));
      if (total == 0) continue;

      Tape tape;
      TapeScope scope(tape);
      for (Tensor* p : params) tape.watch(*p);
      Tensor loss;
      bool have_loss = false;
      std::uint64_t chunk_index = 0;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        for (const Chunk& c : chunk_document(inputs[j], cfg, docs[j]->id)) {
          const auto n = static_cast<std::size_t>(std::count(c.input.mask.begin(), c.input.mask.end(), true));
          if (n == 0) continue;
          ForwardNoise noise = ForwardNoise::from_seed(derive_seed(seed, "dropout", step * 4096 + chunk_index++));
          const Tensor logits = model.logits(c.input, docs[j]->rasters, true, noise);
          Tensor term = scale(cross_entropy_masked(logits, c.input.label_ids, c.input.mask),
                              static_cast<double>(n) / static_cast<double>(total));
          loss = have_loss ? add(loss, term) : term;
          have_loss = true;
        }
      }
      const Gradients grads = tape.backward(loss);
      adam_step(params, grads, adam);
      loss_sum += loss.item();
      ++batches;
    }
    out.train_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    const double f1 = evaluate(model, val, labels, cfg).weighted_f1;
    out.val_trace.push_back(f1);
    if (epoch == 0 || f1 > out.best_val_f1) {
      out.best_val_f1 = f1;
      out.best_epoch = epoch;
      best = model.export_parameters();
    }
  }
  model.load_parameters(best);
  return out;
}

// ---- Cross-validation ------------------------------------------------------

FoldPlan plan_folds(std::size_t n_docs, int k, double val_fraction, std::uint64_t seed) {
  if (k < 2) throw ConfigError("plan_folds: k must be >= 2");
  if (n_docs < static_cast<std::size_t>(k)) {
    throw ConfigError("plan_folds: corpus of " + std::to_string(n_docs) +
                      " documents is smaller than k = " + std::to_string(k));
  }
  std::vector<std::size_t> order(n_docs);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "folds");
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.k = k;
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::size_t> bounds(kk + 1);
  for (std::size_t f = 0; f <= kk; ++f) bounds[f] = f * n_docs / kk;
  for (std::size_t f = 0; f < kk; ++f) {
    FoldSplit s;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n_docs; ++i) {
      (i >= bounds[f] && i < bounds[f + 1] ? s.test : rest).push_back(order[i]);
    }
    std::size_t n_val = 0;
    if (val_fraction > 0.0) {
      n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::lround(val_fraction * static_cast<double>(rest.size()))));
      n_val = std::min(n_val, rest.size() - 1);
    }
    s.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    plan.folds.push_back(std::move(s));
  }
  return plan;
}

ModelSpec resolve_spec(ModelSpec spec, const Vocabularies& vocabs, const TrainConfig& cfg) {
  spec.encoder.word_vocab = vocabs.words.size();
  spec.encoder.label_count = vocabs.labels.size();
  spec.encoder.max_seq_len = cfg.max_seq_len;
  return spec;
}

std::vector<PreparedDoc> prepare_documents(std::span<const DocumentRecord> docs,
                                           const Vocabularies& vocabs,
                                           const BucketingConfig& bucketing,
                                           const RasterMap* rasters, bool need_rasters) {
  std::vector<PreparedDoc> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    PreparedDoc p{d.id, encode_document(d, vocabs, bucketing), {}};
    if (need_rasters) {
      const auto it = rasters ? rasters->find(d.id) : RasterMap::const_iterator{};
      if (!rasters || it == rasters->end()) {
        throw ValidationError("document '" + d.id + "' has no page rasters");
      }
      if (it->second.size() < d.pages.size()) {
        throw ValidationError("document '" + d.id + "' has " + std::to_string(d.pages.size()) +
                              " pages but " + std::to_string(it->second.size()) + " rasters");
      }
      p.rasters = it->second;
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

FoldOutcome run_fold(std::span<const DocumentRecord> corpus, const FoldSplit& split, int fold,
                     const ModelSpec& spec, const TrainConfig& cfg,
                     const BucketingConfig& bucketing, const LabelVocabulary& labels,
                     const CvOptions& options) {
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<DocumentRecord> out;
    for (std::size_t i : idx) out.push_back(corpus[i]);
    return out;
  };
  const std::vector<DocumentRecord> train = pick(split.train), val = pick(split.val),
                                    test = pick(split.test);
  FoldOutcome o;
  o.fold = fold;
  for (const auto& d : train) o.train_ids.push_back(d.id);
  for (const auto& d : val) o.val_ids.push_back(d.id);
  for (const auto& d : test) o.test_ids.push_back(d.id);

  o.vocabs = build_vocabularies(train, bucketing, options.max_words);
  o.vocabs.labels = labels;
  const std::uint64_t fold_seed = derive_seed(cfg.seed, "fold", static_cast<std::uint64_t>(fold));
  o.spec = resolve_spec(spec, o.vocabs, cfg);
  o.spec.encoder.seed = derive_seed(fold_seed, "init");

  const bool images = spec.fusion == FusionMode::kImage;
  const auto ptrain = prepare_documents(train, o.vocabs, bucketing, options.rasters, images);
  const auto pval = prepare_documents(val, o.vocabs, bucketing, options.rasters, images);
  const auto ptest = prepare_documents(test, o.vocabs, bucketing, options.rasters, images);

  TaggerModel model(o.spec, o.vocabs.styles.sizes());
  o.training = train_fold(model, ptrain, pval, labels, cfg, fold_seed);
  o.test_report = evaluate(model, ptest, labels, cfg);
  o.test_f1 = o.test_report.weighted_f1;
  if (options.keep_parameters) o.parameters = model.export_parameters();
  return o;
}

}  // namespace

CvResult cross_validate(std::span<const DocumentRecord> corpus, const ModelSpec& spec,
                        const TrainConfig& cfg, const BucketingConfig& bucketing,
                        const CvOptions& options) {
  cfg.validate();
  spec.validate();
  const FoldPlan plan = plan_folds(corpus.size(), cfg.folds, cfg.val_fraction, cfg.seed);
  if (cfg.val_fraction == 0.0) throw ConfigError("cross_validate: val_fraction must be > 0");

  // The label set is a property of the task, so it comes from the whole
  // corpus; words and fonts come from each fold's training documents.
  std::vector<std::string> all_labels;
  std::set<std::string> seen;
  for (const auto& d : corpus) {
    for (const auto& t : d.tokens) {
      if (seen.insert(t.label).second) all_labels.push_back(t.label);
    }
  }
  const LabelVocabulary labels = make_label_vocabulary(all_labels);

  CvResult result;
  result.folds.resize(plan.folds.size());
  const int threads = std::max(1, std::min<int>(options.threads, cfg.folds));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int f = next++; f < cfg.folds; f = next++) {
      try {
        result.folds[static_cast<std::size_t>(f)] =
            run_fold(corpus, plan.folds[static_cast<std::size_t>(f)], f, spec, cfg, bucketing,
                     labels, options);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& f : result.folds) {
    result.per_fold.push_back(f.test_f1);
    for (const auto& [cls, s] : f.test_report.classes) {
      ClassScore& p = result.pooled.classes[cls];
      p.tp += s.tp;
      p.fp += s.fp;
      p.fn += s.fn;
      p.support += s.support;
    }
  }
  finalize_report(result.pooled);
  result.mean = mean(result.per_fold);
  result.std = population_std(result.per_fold);
  result.params = TaggerModel(result.folds.front().spec, result.folds.front().vocabs.styles.sizes())
                      .parameter_count();
  return result;
}

int threads_from_env() {
  const char* v = std::getenv("IELAB_THREADS");
  if (v == nullptr) return 1;
  const int n = std::atoi(v);
  return n >= 1 ? n : 1;
}

}  // namespace ielab
