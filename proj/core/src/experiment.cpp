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

#include "ielab/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "ielab/error.hpp"
#include "ielab/evalsuite.hpp"
#include "ielab/metrics.hpp"

namespace ielab {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (err == nullptr) return kExitFailure;
  switch (err->kind()) {
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kParse:
    case ErrorKind::kValidation:
    case ErrorKind::kConfig: return kExitData;
    case ErrorKind::kMismatch: return kExitMismatch;
    case ErrorKind::kContract: return kExitContract;
    default: return kExitFailure;
  }
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

void require_dir(const fs::path& dir) {
  std::error_code ec;
  if (dir.empty() || !fs::is_directory(dir, ec)) {
    throw IoError("output directory '" + dir.string() + "' does not exist");
  }
}

fs::path resolve(const fs::path& base, const json& paths, const char* key) {
  if (!paths.contains(key)) return {};
  fs::path p = paths.at(key).get<std::string>();
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

ExperimentSpec parse_experiment_spec(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  if (!j.contains("seed")) throw ConfigError("experiment spec: \"seed\" is mandatory");
  ExperimentSpec s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    const json paths = j.value("paths", json::object());
    s.paths.corpus = resolve(base_dir, paths, "corpus");
    s.paths.rasters = resolve(base_dir, paths, "rasters");
    s.paths.out = resolve(base_dir, paths, "out");
    s.paths.checkpoint = resolve(base_dir, paths, "checkpoint");
    if (j.contains("model")) s.model = model_spec_from_json(j.at("model"));
    json train = j.value("train", json::object());
    if (!train.contains("seed")) train["seed"] = s.seed;
    s.train = train_config_from_json(train);
    if (j.contains("bucketing")) s.bucketing = bucketing_from_json(j.at("bucketing"));
    json gen = j.value("generator", json::object());
    if (!gen.contains("seed")) gen["seed"] = s.seed;
    s.generator = generator_config_from_json(gen);
    if (j.contains("eval")) s.eval_subset = j.at("eval").value("subset", s.eval_subset);
    if (j.contains("ablate")) {
      const json& a = j.at("ablate");
      if (a.contains("features")) {
        s.ablate_features.clear();
        for (const auto& f : a.at("features")) s.ablate_features.push_back(parse_feature(f.get<std::string>()));
      }
      s.ablate_repeats = a.value("repeats", s.ablate_repeats);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment spec: ") + e.what());
  }
  if (s.eval_subset != "all" && s.eval_subset != "val" && s.eval_subset != "test") {
    throw ConfigError("experiment spec: eval.subset must be all, val or test");
  }
  s.hash = hex64(fnv1a64(text));
  return s;
}

ExperimentSpec load_experiment_spec(const fs::path& path) {
  return parse_experiment_spec(read_file(path), path.parent_path());
}

json run_manifest(const ExperimentSpec& spec, std::string_view command) {
  return {{"tool", "ielab"},
          {"version", std::string(kToolVersion)},
          {"command", std::string(command)},
          {"spec_fnv1a64", spec.hash},
          {"seed", spec.seed}};
}

RasterMap load_rasters(std::span<const DocumentRecord> docs, const fs::path& dir) {
  RasterMap out;
  for (const auto& d : docs) {
    auto& pages = out[d.id];
    for (std::size_t p = 0; p < d.pages.size(); ++p) {
      pages.push_back(raster_tensor(read_pgm(raster_path(dir, d.id, static_cast<int>(p)))));
    }
  }
  return out;
}

// ---- generate ---------------------------------------------------------------

void cmd_generate(const ExperimentSpec& spec, const fs::path& out, std::ostream& log) {
  require_dir(out);
  const std::vector<DocumentRecord> docs = generate_corpus(spec.generator);
  write_corpus(out / "corpus.jsonl", docs);
  const fs::path raster_dir = out / "rasters";
  fs::create_directories(raster_dir);
  for (const auto& d : docs) {
    const auto pages = render_pages(d, spec.generator.raster_size);
    for (std::size_t p = 0; p < pages.size(); ++p) {
      write_pgm(raster_path(raster_dir, d.id, static_cast<int>(p)), pages[p]);
    }
  }
  json summary = corpus_summary(docs, spec.generator.tmpl).to_json();
  summary["generator"] = to_json(spec.generator);
  summary["manifest"] = run_manifest(spec, "generate");
  write_json(out / "summary.json", summary);
  log << "generated " << docs.size() << " documents into " << out.string() << "\n";
}

// ---- train -----------------------------------------------------------------

Checkpoint make_fold_checkpoint(const FoldOutcome& fold, const ExperimentSpec& spec) {
  Checkpoint c;
  c.config = {{"model", to_json(fold.spec)},
              {"vocabularies", to_json(fold.vocabs)},
              {"bucketing", to_json(spec.bucketing)},
              {"train", to_json(spec.train)}};
  c.metadata = {{"fold", fold.fold},
                {"best_epoch", fold.training.best_epoch},
                {"best_val_f1", fold.training.best_val_f1},
                {"val_trace", fold.training.val_trace},
                {"train_ids", fold.train_ids},
                {"val_ids", fold.val_ids},
                {"test_ids", fold.test_ids},
                {"test_f1", fold.test_f1},
                {"manifest", run_manifest(spec, "train")}};
  c.tensors = fold.parameters;
  return c;
}

void cmd_train(const ExperimentSpec& spec, const fs::path& out, std::ostream& log) {
  require_dir(out);
  if (spec.paths.corpus.empty()) throw ConfigError("train: paths.corpus is required");
  const std::vector<DocumentRecord> docs = read_corpus(spec.paths.corpus);
  RasterMap rasters;
  CvOptions options;
  options.threads = threads_from_env();
  options.keep_parameters = true;
  if (spec.model.fusion == FusionMode::kImage) {
    rasters = load_rasters(docs, spec.paths.rasters);
    options.rasters = &rasters;
  }
  const CvResult cv = cross_validate(docs, spec.model, spec.train, spec.bucketing, options);

  json folds = json::array();
  for (const auto& f : cv.folds) {
    const fs::path ckpt = out / ("fold" + std::to_string(f.fold) + ".ckpt");
    write_checkpoint(ckpt, make_fold_checkpoint(f, spec));
    folds.push_back({{"fold", f.fold},
                     {"best_epoch", f.training.best_epoch},
                     {"best_val_f1", f.training.best_val_f1},
                     {"val_trace", f.training.val_trace},
                     {"train_loss", f.training.train_loss},
                     {"test_f1", f.test_f1},
                     {"checkpoint", ckpt.filename().string()}});
  }
  char pm[64];
  std::snprintf(pm, sizeof pm, "%.2f \xC2\xB1 %.2f", 100.0 * cv.mean, 100.0 * cv.std);
  const json metrics = {{"per_fold", cv.per_fold},
                        {"mean", cv.mean},
                        {"std", cv.std},
                        {"summary", pm},
                        {"per_class", cv.pooled.to_json()},
                        {"params", cv.params},
                        {"fusion", std::string(to_string(spec.model.fusion))},
                        {"folds", folds},
                        {"manifest", run_manifest(spec, "train")}};
  write_json(out / "metrics.json", metrics);
  log << to_string(spec.model.fusion) << ": weighted F1 " << pm << " over " << cv.per_fold.size()
      << " folds, " << cv.params << " parameters\n";
}

// ---- eval / ablate -----------------------------------------------------------

LoadedModel load_model(const Checkpoint& ckpt, const ModelSpec& expected) {
  LoadedModel m;
  try {
    m.spec = model_spec_from_json(ckpt.config.at("model"));
    m.vocabs = vocabularies_from_json(ckpt.config.at("vocabularies"));
    m.bucketing = bucketing_from_json(ckpt.config.at("bucketing"));
    m.train = train_config_from_json(ckpt.config.at("train"));
  } catch (const json::exception& e) {
    throw MismatchError(std::string("checkpoint config is incomplete: ") + e.what());
  }
  auto differs = [&](const char* what, auto a, auto b) {
    if (a != b) {
      throw MismatchError(std::string("checkpoint and spec disagree on ") + what);
    }
  };
  if (m.spec.fusion != expected.fusion) {
    throw MismatchError("checkpoint holds a " + std::string(to_string(m.spec.fusion)) +
                        " model but the spec asks for " + std::string(to_string(expected.fusion)));
  }
  differs("encoder.hidden", m.spec.encoder.hidden, expected.encoder.hidden);
  differs("encoder.layers", m.spec.encoder.layers, expected.encoder.layers);
  differs("encoder.heads", m.spec.encoder.heads, expected.encoder.heads);
  differs("encoder.ff_dim", m.spec.encoder.ff_dim, expected.encoder.ff_dim);
  if (uses_style(expected.fusion)) {
    differs("style features", m.spec.features, expected.features);
    if (expected.fusion == FusionMode::kStyleConcat) {
      differs("style_dim", m.spec.style_dim, expected.style_dim);
    }
  }
  if (expected.fusion == FusionMode::kImage) differs("image path", m.spec.image, expected.image);
  m.model = std::make_unique<TaggerModel>(m.spec, m.vocabs.styles.sizes());
  m.model->load_parameters(ckpt.tensors);
  m.metadata = ckpt.metadata;
  return m;
}

namespace {

std::vector<DocumentRecord> select_subset(const std::vector<DocumentRecord>& docs,
                                          const LoadedModel& m, const std::string& subset) {
  if (subset == "all") return docs;
  const std::string key = subset + "_ids";
  if (!m.metadata.contains(key)) throw MismatchError("checkpoint has no stored " + key);
  std::set<std::string> ids;
  for (const auto& id : m.metadata.at(key)) ids.insert(id.get<std::string>());
  std::vector<DocumentRecord> out;
  for (const auto& d : docs) {
    if (ids.count(d.id)) out.push_back(d);
  }
  if (out.size() != ids.size()) {
    throw MismatchError("corpus lacks " + std::to_string(ids.size() - out.size()) +
                        " documents of the stored " + subset + " split");
  }
  return out;
}

struct EvalInputs {
  LoadedModel model;
  std::vector<DocumentRecord> docs;
  std::vector<PreparedDoc> prepared;
};

EvalInputs load_eval_inputs(const ExperimentSpec& spec, const std::string& subset) {
  if (spec.paths.checkpoint.empty()) throw ConfigError("paths.checkpoint is required");
  if (spec.paths.corpus.empty()) throw ConfigError("paths.corpus is required");
  EvalInputs in;
  in.model = load_model(read_checkpoint(spec.paths.checkpoint), spec.model);
  in.docs = select_subset(read_corpus(spec.paths.corpus), in.model, subset);
  RasterMap rasters;
  const bool images = in.model.spec.fusion == FusionMode::kImage;
  if (images) rasters = load_rasters(in.docs, spec.paths.rasters);
  in.prepared = prepare_documents(in.docs, in.model.vocabs, in.model.bucketing, &rasters, images);
  return in;
}

}  // namespace

void cmd_eval(const ExperimentSpec& spec, const fs::path& out, std::ostream& log) {
  require_dir(out);
  EvalInputs in = load_eval_inputs(spec, spec.eval_subset);
  const LabelVocabulary& labels = in.model.vocabs.labels;
  std::vector<std::vector<std::string>> pred, gold;
  std::string lines;
  for (std::size_t i = 0; i < in.docs.size(); ++i) {
    const auto ids = predict_labels(*in.model.model, in.prepared[i], in.model.train);
    pred.push_back(label_names(ids, labels));
    gold.push_back(label_names(in.prepared[i].input.label_ids, labels));
    json j = document_to_json(in.docs[i]);
    for (std::size_t t = 0; t < pred.back().size(); ++t) j["tokens"][t]["pred_label"] = pred.back()[t];
    json ents = json::array();
    for (const auto& s : decode_iob(pred.back())) {
      ents.push_back({{"start", s.start}, {"end", s.end}, {"class", s.cls}});
    }
    j["pred_entities"] = ents;
    lines += j.dump() + "\n";
  }
  write_file(out / "predictions.jsonl", lines);
  const ClassReport report = entity_scores(pred, gold);
  json r = report.to_json();
  r["subset"] = spec.eval_subset;
  r["documents"] = in.docs.size();
  r["manifest"] = run_manifest(spec, "eval");
  write_json(out / "report.json", r);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", report.weighted_f1);
  log << "weighted F1 " << buf << " on " << in.docs.size() << " documents\n";
}

void cmd_ablate(const ExperimentSpec& spec, const fs::path& out, std::ostream& log) {
  require_dir(out);
  if (!uses_style(spec.model.fusion)) {
    throw ContractError("ablate needs a style model; the spec names " +
                        std::string(to_string(spec.model.fusion)) +
                        ", which has no style input to permute");
  }
  const std::string subset = spec.eval_subset == "all" ? "test" : spec.eval_subset;
  EvalInputs in = load_eval_inputs(spec, subset);
  if (!uses_style(in.model.spec.fusion)) {
    throw ContractError("checkpoint holds a " + std::string(to_string(in.model.spec.fusion)) +
                        " model, which has no style input to permute");
  }
  std::vector<Importance> results;
  json entries = json::array();
  for (StyleFeature f : spec.ablate_features) {
    results.push_back(permutation_importance(*in.model.model, in.prepared, in.model.vocabs.labels,
                                             in.model.train, f, spec.ablate_repeats,
                                             derive_seed(spec.seed, "ablate")));
    entries.push_back(results.back().to_json());
  }
  json ranking = json::array();
  for (StyleFeature f : rank_features(results)) ranking.push_back(std::string(feature_name(f)));
  const json report = {{"subset", subset},
                       {"documents", in.docs.size()},
                       {"features", entries},
                       {"ranking", ranking},
                       {"manifest", run_manifest(spec, "ablate")}};
  write_json(out / "ablation.json", report);
  log << "feature ranking:";
  for (const auto& r : ranking) log << " " << r.get<std::string>();
  log << "\n";
}

// ---- params ----------------------------------------------------------------

void cmd_params(const ExperimentSpec& spec, const std::optional<fs::path>& out, std::ostream& log) {
  if (out) require_dir(*out);
  StyleVocabulary styles;
  styles.font_top_k = spec.bucketing.font_top_k;
  styles.fonts.assign(static_cast<std::size_t>(spec.bucketing.font_top_k), std::string());
  const auto sizes = styles.sizes();

  const auto given = count_all_modes(spec.model, sizes);
  const auto full = count_all_modes(full_scale_spec(), sizes);
  const PublishedCountCheck counts = published_count_check();
  const double base = 113.49e6;
  const double sum_delta = static_cast<double>(full[1].total - full[0].total);

  log << "configured model\n" << format_param_table(given) << "\n";
  log << "full-scale model (hidden 768, 12 layers, d=64, 25 labels)\n"
      << format_param_table(full) << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "style-sum delta over a 113.49M base: %+.0f = %+.3f%%\n",
                sum_delta, percent_of(sum_delta, base));
  log << buf << counts.format();

  if (out) {
    json g = json::array(), f = json::array();
    for (const auto& b : given) g.push_back(b.to_json());
    for (const auto& b : full) f.push_back(b.to_json());
    write_json(*out / "params.json", {{"configured", g},
                                      {"full_scale", f},
                                      {"style_sum_delta_pct_of_113_49M", percent_of(sum_delta, base)},
                                      {"published_counts", counts.to_json()},
                                      {"manifest", run_manifest(spec, "params")}});
  }
}

// ---- dispatch --------------------------------------------------------------

int run_command(std::string_view verb, const fs::path& spec_path, const std::optional<fs::path>& out,
                std::ostream& log, std::ostream& err) {
  try {
    const ExperimentSpec spec = load_experiment_spec(spec_path);
    const fs::path out_dir = out ? *out : spec.paths.out;
    if (verb == "generate") {
      cmd_generate(spec, out_dir, log);
    } else if (verb == "train") {
      cmd_train(spec, out_dir, log);
    } else if (verb == "eval") {
      cmd_eval(spec, out_dir, log);
    } else if (verb == "ablate") {
      cmd_ablate(spec, out_dir, log);
    } else if (verb == "params") {
      cmd_params(spec, out ? out : (spec.paths.out.empty() ? std::nullopt : std::optional(spec.paths.out)), log);
    } else {
      err << "ielab: unknown command '" << verb << "'\n";
      return kExitFailure;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "ielab " << verb << ": ";
    if (const auto* ie = dynamic_cast<const Error*>(&e)) err << to_string(ie->kind()) << ": ";
    err << e.what() << "\n";
    return code;
  }
}

}  // namespace ielab
