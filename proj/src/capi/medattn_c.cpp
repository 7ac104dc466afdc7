// Copyright 2026 The medattn Authors. All Rights Reserved.
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

#include "medattn/medattn.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <optional>
#include <string>

#include "json.hpp"
#include "medattn/checkpoint.hpp"
#include "medattn/config.hpp"
#include "medattn/errors.hpp"
#include "medattn/experiments.hpp"
#include "medattn/metrics.hpp"
#include "medattn/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct ma_config {
  medattn::AppConfig app;
};

struct ma_model {
  medattn::Checkpoint checkpoint;
  medattn::Vocabulary vocab;
  std::vector<std::string> labels;
  medattn::TransformerClassifier classifier;
};

namespace {

thread_local std::string g_last_error;

template <class F>
ma_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MA_OK;
  } catch (const medattn::Error& e) {
    g_last_error = e.what();
    switch (e.kind()) {
      case medattn::ErrorKind::usage: return MA_ERR_USAGE;
      case medattn::ErrorKind::data: return MA_ERR_DATA;
      case medattn::ErrorKind::numeric: return MA_ERR_NUMERIC;
    }
    return MA_ERR_INTERNAL;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return MA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error";
    return MA_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void give(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

void require(const void* p, const char* what) {
  if (!p) throw medattn::UsageError(std::string(what) + " must not be null");
}

std::string required_path(const char* p, const char* what) {
  if (!p || !*p) throw medattn::UsageError(std::string(what) + " is required");
  return p;
}

std::vector<medattn::EncodedExample> all_examples(const medattn::PreprocessedCorpus& corpus) {
  std::vector<medattn::EncodedExample> out;
  out.reserve(corpus.entries.size());
  for (const auto& e : corpus.entries) out.push_back(e.example);
  return out;
}

medattn::EncodedExample encode_note(const ma_model& m, const char* note) {
  const auto tokens = medattn::note_tokens(note);
  if (tokens.empty()) throw medattn::DataError("note contains no tokens");
  return medattn::encode(tokens, m.vocab, m.checkpoint.model.max_len);
}

json metrics_json(const medattn::MetricsReport& r, std::size_t examples) {
  return {{"examples", examples},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1()},
          {"tp", r.counts.tp},
          {"fp", r.counts.fp},
          {"fn", r.counts.fn},
          {"tn", r.counts.tn},
          {"precision_undefined", r.precision_undefined},
          {"recall_undefined", r.recall_undefined}};
}

}  // namespace

extern "C" {

const char* ma_version(void) { return "0.1.0"; }

const char* ma_last_error(void) { return g_last_error.c_str(); }

void ma_string_free(char* s) { std::free(s); }

ma_status ma_config_load(const char* path, const char* const* overrides, size_t n, ma_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    medattn::ConfigOverrides pairs;
    for (size_t i = 0; i < n; ++i) {
      require(overrides, "overrides");
      const std::string kv = overrides[i] ? overrides[i] : "";
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw medattn::UsageError("override '" + kv + "' is not of the form key=value");
      pairs.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    auto cfg = std::make_unique<ma_config>();
    cfg->app = medattn::load_config(path ? fs::path(path) : fs::path(), pairs);
    *out = cfg.release();
  });
}

void ma_config_free(ma_config* config) { delete config; }

ma_status ma_config_render(const ma_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    give(out, medattn::render_config(config->app));
  });
}

ma_status ma_config_get(const ma_config* config, const char* key, char** out) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    give(out, medattn::config_value(config->app, key));
  });
}

ma_status ma_config_reference(char** out) {
  return guarded([&] { give(out, medattn::config_reference()); });
}

ma_status ma_synth(const ma_config* config, const char* out_jsonl) {
  return guarded([&] {
    require(config, "config");
    const auto path = required_path(out_jsonl, "output path");
    medattn::write_jsonl(path, medattn::generate_corpus(config->app.synth_config()));
  });
}

ma_status ma_preprocess(const ma_config* config, const char* in_jsonl, const char* out_dir,
                        char** summary_json) {
  return guarded([&] {
    require(config, "config");
    const auto records = medattn::read_jsonl(required_path(in_jsonl, "input path"));
    const auto corpus = medattn::preprocess_corpus(records, config->app.preprocess_settings());
    medattn::write_corpus(required_path(out_dir, "output directory"), corpus);
    const auto& s = corpus.summary;
    give(summary_json, json{{"input", s.input},
                            {"duplicates", s.duplicates},
                            {"too_short", s.too_short},
                            {"no_labels", s.no_labels},
                            {"retained", s.retained},
                            {"vocab_size", corpus.vocab.size()},
                            {"labels", corpus.label_space.size()},
                            {"max_len", corpus.max_len}}
                           .dump());
  });
}

ma_status ma_train(const ma_config* config, const char* data_dir, const char* out_dir,
                   const char* resume_dir, char** summary_json) {
  return guarded([&] {
    require(config, "config");
    const fs::path data = required_path(data_dir, "data directory");
    const fs::path out = required_path(out_dir, "output directory");
    const auto corpus = medattn::read_corpus(data);
    const auto examples = all_examples(corpus);
    const auto& tc = config->app.train;

    const auto [train_idx, val_idx] = medattn::split_train_validation(examples.size(), tc.seed);
    std::vector<medattn::EncodedExample> train_set, val_set;
    for (auto i : train_idx) train_set.push_back(examples[i]);
    for (auto i : val_idx) val_set.push_back(examples[i]);

    medattn::TrainResult result;
    if (resume_dir && *resume_dir) {
      const auto last = medattn::load_checkpoint(resume_dir);
      if (last.model.vocab_size != corpus.vocab.size() || last.model.n_labels != corpus.label_space.size())
        throw medattn::DataError("checkpoint in " + std::string(resume_dir) +
                                 " does not match the dataset's vocabulary or label space");
      // The best checkpoint of the interrupted run sits next to last/.
      fs::path last_dir = fs::path(resume_dir).lexically_normal();
      if (!last_dir.has_filename()) last_dir = last_dir.parent_path();
      const fs::path best_dir = last_dir.parent_path();
      std::optional<medattn::Checkpoint> best;
      if (!best_dir.empty() && fs::exists(best_dir / "manifest.json")) best = medattn::load_checkpoint(best_dir);
      result = medattn::resume_training(last, train_set, val_set, tc, best ? &*best : nullptr);
    } else {
      medattn::ModelConfig mc = config->app.model;
      mc.vocab_size = corpus.vocab.size();
      mc.n_labels = corpus.label_space.size();
      mc.max_len = corpus.max_len;
      result = medattn::train(train_set, val_set, mc, tc);
    }

    medattn::save_checkpoint(result.best, out);
    medattn::save_checkpoint(result.last, out / "last");
    medattn::write_lines(out / "vocab.txt", corpus.vocab.tokens());
    medattn::write_lines(out / "labels.txt", corpus.label_space);
    medattn::write_history_csv(out / "history.csv", result.history);
    give(summary_json, json{{"train_examples", train_set.size()},
                            {"validation_examples", val_set.size()},
                            {"epochs", result.last.state.epoch},
                            {"best_epoch_val_loss", result.best.state.best_val_loss},
                            {"stopped_early", result.stopped_early},
                            {"parameters", result.best.params.parameter_count()}}
                           .dump());
  });
}

ma_status ma_model_load(const char* checkpoint_dir, ma_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const fs::path dir = required_path(checkpoint_dir, "checkpoint directory");
    auto checkpoint = medattn::load_checkpoint(dir);
    auto vocab = medattn::Vocabulary::from_tokens(medattn::read_lines(dir / "vocab.txt"));
    auto labels = medattn::read_lines(dir / "labels.txt");
    if (vocab.size() != checkpoint.model.vocab_size || labels.size() != checkpoint.model.n_labels)
      throw medattn::DataError("vocab.txt or labels.txt in " + dir.string() +
                               " does not match the checkpoint's model");
    medattn::TransformerClassifier classifier(checkpoint.model, checkpoint.params);
    *out = new ma_model{std::move(checkpoint), std::move(vocab), std::move(labels), std::move(classifier)};
  });
}

void ma_model_free(ma_model* model) { delete model; }

size_t ma_model_label_count(const ma_model* model) { return model ? model->labels.size() : 0; }

ma_status ma_predict_probs(const ma_model* model, const char* note, double* out_probs) {
  return guarded([&] {
    require(model, "model");
    require(note, "note");
    require(out_probs, "out_probs");
    const auto probs = model->classifier.predict(encode_note(*model, note));
    std::copy(probs.begin(), probs.end(), out_probs);
  });
}

ma_status ma_predict_text(const ma_model* model, const char* note, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(note, "note");
    const auto probs = model->classifier.predict(encode_note(*model, note));
    json j = json::object();
    for (std::size_t i = 0; i < probs.size(); ++i) j[model->labels[i]] = probs[i];
    give(out_json, j.dump());
  });
}

ma_status ma_evaluate(const ma_model* model, const char* data_dir, double threshold,
                      const char* probs_jsonl, char** out_json) {
  return guarded([&] {
    require(model, "model");
    const auto corpus = medattn::read_corpus(required_path(data_dir, "data directory"));
    if (!(corpus.vocab == model->vocab) || corpus.label_space != model->labels)
      throw medattn::DataError("dataset was encoded with a different vocabulary or label space than the model");
    const auto examples = all_examples(corpus);
    const auto probs = medattn::predict_all(model->classifier, examples);
    const auto report = medattn::evaluate(probs, medattn::gold_matrix(examples), threshold);
    if (probs_jsonl && *probs_jsonl) {
      std::ofstream f(probs_jsonl, std::ios::binary | std::ios::trunc);
      if (!f) throw medattn::DataError(std::string("cannot write ") + probs_jsonl);
      for (std::size_t i = 0; i < examples.size(); ++i) {
        json row = json::object();
        for (std::size_t j = 0; j < model->labels.size(); ++j) row[model->labels[j]] = probs(i, j);
        f << json{{"id", corpus.entries[i].id}, {"probabilities", row}}.dump() << "\n";
      }
      if (!f) throw medattn::DataError(std::string("write failed: ") + probs_jsonl);
    }
    give(out_json, metrics_json(report, examples.size()).dump());
  });
}

ma_status ma_sweep(const ma_config* config, const char* kind, const char* data_dir, const char* out_csv) {
  return guarded([&] {
    require(config, "config");
    const std::string k = kind ? kind : "";
    if (k != "lr" && k != "samples" && k != "noise")
      throw medattn::UsageError("unknown sweep '" + k + "' (expected lr, samples or noise)");
    const auto& app = config->app;
    auto corpus = medattn::read_corpus(required_path(data_dir, "data directory"));
    const auto data = medattn::prepare_experiment(std::move(corpus), app.test_fraction, app.split_seed);
    const auto cfg = app.experiment_config();
    std::vector<medattn::SweepResult> rows;
    if (k == "lr") rows = medattn::lr_sweep(app.sweep_rates, data, cfg);
    else if (k == "samples") rows = medattn::sample_fraction_sweep(app.sweep_fractions, data, cfg);
    else rows = medattn::noise_sweep(app.sweep_levels, app.noise_kind, data, cfg);
    medattn::emit_results(rows, required_path(out_csv, "output path"));
  });
}

ma_status ma_baseline(const ma_config* config, const char* data_dir, const char* out_csv, char** out_table) {
  return guarded([&] {
    require(config, "config");
    const auto& app = config->app;
    auto corpus = medattn::read_corpus(required_path(data_dir, "data directory"));
    const auto data = medattn::prepare_experiment(std::move(corpus), app.test_fraction, app.split_seed);
    const auto reports = medattn::compare_methods(data, app.experiment_config());
    if (out_csv && *out_csv) medattn::write_metrics_csv(out_csv, reports);
    give(out_table, medattn::format_report(reports));
  });
}

ma_status ma_gradcheck(uint64_t seed, double* max_rel_error, char** out_text) {
  return guarded([&] {
    const auto cfg = medattn::tiny_model_config(seed);
    const auto params = medattn::init_params(cfg);
    const auto example = medattn::random_example(cfg, 7, seed);
    const auto r = medattn::model_grad_check(cfg, params, example, 1e-7);
    if (max_rel_error) *max_rel_error = r.max_rel_error;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "max relative error %.3e over %zu coordinates (worst: %s[%zu], analytic %.10e, "
                  "numeric %.10e)",
                  r.max_rel_error, r.coordinates_checked, params.names().at(r.param_index).c_str(),
                  r.coordinate, r.analytic, r.numeric);
    give(out_text, buf);
  });
}

ma_status ma_format_report(const char* const* names, const double* accuracy, const double* precision,
                           const double* recall, size_t n, char** out) {
  return guarded([&] {
    if (n == 0) throw medattn::UsageError("format_report: no rows");
    require(names, "names");
    require(accuracy, "accuracy");
    require(precision, "precision");
    require(recall, "recall");
    std::vector<medattn::NamedReport> rows;
    for (size_t i = 0; i < n; ++i) {
      require(names[i], "row name");
      for (double v : {accuracy[i], precision[i], recall[i]})
        if (!(v >= 0.0 && v <= 1.0))
          throw medattn::UsageError(std::string("format_report: metric of row '") + names[i] + "' is outside [0, 1]");
      medattn::MetricsReport r;
      r.accuracy = accuracy[i];
      r.precision = precision[i];
      r.recall = recall[i];
      rows.push_back({names[i], r});
    }
    give(out, medattn::format_report(rows));
  });
}

}  // extern "C"
