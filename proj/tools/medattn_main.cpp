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

// medattn command-line tool. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 numeric error, 4 internal error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "medattn/medattn.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInternal = 4;

struct Failure {
  int code;
};

// Owning wrappers for C handles and strings.
struct ConfigDeleter {
  void operator()(ma_config* c) const { ma_config_free(c); }
};
struct ModelDeleter {
  void operator()(ma_model* m) const { ma_model_free(m); }
};
using ConfigPtr = std::unique_ptr<ma_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<ma_model, ModelDeleter>;

void check(ma_status status) {
  if (status == MA_OK) return;
  std::cerr << "medattn: error: " << ma_last_error() << "\n";
  throw Failure{status == MA_ERR_INTERNAL ? kExitInternal : static_cast<int>(status)};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ma_string_free(s);
  return out;
}

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
};

// Builds the configuration from --config, --set and subcommand flags (flags
// win), then echoes it to stderr.
ConfigPtr resolve(const Common& common, std::vector<std::string> extra) {
  std::vector<std::string> overrides = common.sets;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  std::vector<const char*> ptrs;
  for (const auto& o : overrides) ptrs.push_back(o.c_str());
  ma_config* raw = nullptr;
  check(ma_config_load(common.config_path.c_str(), ptrs.data(), ptrs.size(), &raw));
  ConfigPtr cfg(raw);
  char* text = nullptr;
  check(ma_config_render(cfg.get(), &text));
  std::cerr << "# resolved configuration\n" << take(text);
  return cfg;
}

template <class T>
void flag_override(std::vector<std::string>& out, const std::optional<T>& v, const char* key) {
  if (!v) return;
  std::ostringstream s;
  s.precision(17);
  s << key << "=" << *v;
  out.push_back(s.str());
}

std::string read_all(std::istream& in) {
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label diagnosis prediction from clinical notes with a small transformer."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  char* reference = nullptr;
  if (ma_config_reference(&reference) == MA_OK)
    app.footer("Configuration keys (file: `key = value` lines; override with --set key=value):\n" +
               take(reference) + "\nEnvironment: MEDATTN_THREADS bounds worker threads (default: all cores).");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.sets, "Override one configuration key (key=value)");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus as JSONL");
  std::string synth_out;
  std::optional<std::uint64_t> synth_docs, synth_seed, synth_labels;
  synth->add_option("--out", synth_out, "Output JSONL file")->required();
  synth->add_option("--docs", synth_docs, "Notes to generate (synth.n_docs)");
  synth->add_option("--labels", synth_labels, "Number of labels (synth.n_labels)");
  synth->add_option("--seed", synth_seed, "Corpus seed (synth.seed)");
  add_common(synth);

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Clean, tokenize and encode a JSONL corpus");
  std::string prep_in, prep_out;
  prep->add_option("--in", prep_in, "Input JSONL file")->required()->check(CLI::ExistingFile);
  prep->add_option("--out", prep_out, "Output dataset directory")->required();
  add_common(prep);

  // train
  auto* trn = app.add_subcommand("train", "Train the transformer on an encoded dataset");
  std::string trn_data, trn_out, trn_resume;
  std::optional<double> trn_lr;
  std::optional<std::uint64_t> trn_epochs, trn_seed, trn_batch;
  trn->add_option("--data", trn_data, "Encoded dataset directory")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--out", trn_out, "Checkpoint output directory")->required();
  trn->add_option("--resume", trn_resume, "Continue from a previous <out>/last checkpoint")
      ->check(CLI::ExistingDirectory);
  trn->add_option("--lr", trn_lr, "Learning rate (train.learning_rate)");
  trn->add_option("--epochs", trn_epochs, "Epoch limit (train.max_epochs)");
  trn->add_option("--batch-size", trn_batch, "Batch size (train.batch_size)");
  trn->add_option("--seed", trn_seed, "Training seed (train.seed)");
  add_common(trn);

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on an encoded dataset");
  std::string ev_model, ev_data, ev_probs;
  std::optional<double> ev_threshold;
  ev->add_option("--model", ev_model, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--data", ev_data, "Encoded dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--probs", ev_probs, "Write per-example probabilities (JSONL)");
  ev->add_option("--threshold", ev_threshold, "Decision threshold (train.threshold)");
  add_common(ev);

  // predict
  auto* pred = app.add_subcommand("predict", "Label probabilities for one note, as JSON");
  std::string pred_model, pred_text, pred_file;
  pred->add_option("--model", pred_model, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  auto* text_opt = pred->add_option("--text", pred_text, "Note text");
  pred->add_option("--file", pred_file, "Read the note from a file ('-' for stdin)")->excludes(text_opt);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Sensitivity sweeps; writes CSV and SVG");
  sweep->require_subcommand(1);
  std::string sweep_data, sweep_out;
  std::optional<std::string> noise_kind;
  std::vector<CLI::App*> sweeps;
  for (const char* name : {"lr", "samples", "noise"}) {
    const char* what = std::string(name) == "lr"        ? "Learning-rate sweep (sweep.rates)"
                       : std::string(name) == "samples" ? "Training-size sweep (sweep.fractions)"
                                                        : "Test-time noise sweep (sweep.levels)";
    auto* s = sweep->add_subcommand(name, what);
    s->add_option("--data", sweep_data, "Encoded dataset directory")->required()->check(CLI::ExistingDirectory);
    s->add_option("--out", sweep_out, "Output CSV (an .svg is written beside it)")->required();
    if (std::string(name) == "noise")
      s->add_option("--kind", noise_kind, "delete, substitute or typo (sweep.noise_kind)");
    add_common(s);
    sweeps.push_back(s);
  }

  // baseline
  auto* base = app.add_subcommand("baseline", "Transformer vs bag-of-words on one split");
  std::string base_data, base_out;
  base->add_option("--data", base_data, "Encoded dataset directory")->required()->check(CLI::ExistingDirectory);
  base->add_option("--out", base_out, "Also write method,accuracy,precision,recall CSV");
  add_common(base);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full model on a tiny config");
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  gc->add_option("--seed", gc_seed, "Parameter and example seed")->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "Largest acceptable relative error")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Render metrics as a fixed-width table");
  std::string rep_csv;
  std::vector<std::string> rep_rows;
  auto* csv_opt = rep->add_option("--csv", rep_csv, "CSV with header method,accuracy,precision,recall")
                      ->check(CLI::ExistingFile);
  rep->add_option("--row", rep_rows, "name,accuracy,precision,recall with values in [0, 1]")->excludes(csv_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) {
      std::vector<std::string> extra;
      flag_override(extra, synth_docs, "synth.n_docs");
      flag_override(extra, synth_labels, "synth.n_labels");
      flag_override(extra, synth_seed, "synth.seed");
      auto cfg = resolve(common, extra);
      check(ma_synth(cfg.get(), synth_out.c_str()));
      std::cerr << "wrote " << synth_out << "\n";
    } else if (*prep) {
      auto cfg = resolve(common, {});
      char* summary = nullptr;
      check(ma_preprocess(cfg.get(), prep_in.c_str(), prep_out.c_str(), &summary));
      std::cout << take(summary) << "\n";
    } else if (*trn) {
      std::vector<std::string> extra;
      flag_override(extra, trn_lr, "train.learning_rate");
      flag_override(extra, trn_epochs, "train.max_epochs");
      flag_override(extra, trn_batch, "train.batch_size");
      flag_override(extra, trn_seed, "train.seed");
      auto cfg = resolve(common, extra);
      char* summary = nullptr;
      check(ma_train(cfg.get(), trn_data.c_str(), trn_out.c_str(),
                     trn_resume.empty() ? nullptr : trn_resume.c_str(), &summary));
      std::cout << take(summary) << "\n";
    } else if (*ev) {
      std::vector<std::string> extra;
      flag_override(extra, ev_threshold, "train.threshold");
      auto cfg = resolve(common, extra);
      char* value = nullptr;
      check(ma_config_get(cfg.get(), "train.threshold", &value));
      const double threshold = std::stod(take(value));
      ma_model* raw = nullptr;
      check(ma_model_load(ev_model.c_str(), &raw));
      ModelPtr model(raw);
      char* metrics = nullptr;
      check(ma_evaluate(model.get(), ev_data.c_str(), threshold,
                        ev_probs.empty() ? nullptr : ev_probs.c_str(), &metrics));
      std::cout << take(metrics) << "\n";
    } else if (*pred) {
      std::string note = pred_text;
      if (pred_file == "-") {
        note = read_all(std::cin);
      } else if (!pred_file.empty()) {
        std::ifstream f(pred_file);
        if (!f) {
          std::cerr << "medattn: error: cannot read " << pred_file << "\n";
          return 2;
        }
        note = read_all(f);
      } else if (pred_text.empty()) {
        std::cerr << "medattn: error: predict needs --text or --file\n";
        return kExitUsage;
      }
      ma_model* raw = nullptr;
      check(ma_model_load(pred_model.c_str(), &raw));
      ModelPtr model(raw);
      char* out = nullptr;
      check(ma_predict_text(model.get(), note.c_str(), &out));
      std::cout << take(out) << "\n";
    } else if (*sweep) {
      for (auto* s : sweeps) {
        if (!*s) continue;
        std::vector<std::string> extra;
        if (noise_kind) extra.push_back("sweep.noise_kind=" + *noise_kind);
        auto cfg = resolve(common, extra);
        check(ma_sweep(cfg.get(), s->get_name().c_str(), sweep_data.c_str(), sweep_out.c_str()));
        std::cerr << "wrote " << sweep_out << "\n";
      }
    } else if (*base) {
      auto cfg = resolve(common, {});
      char* table = nullptr;
      check(ma_baseline(cfg.get(), base_data.c_str(), base_out.empty() ? nullptr : base_out.c_str(), &table));
      std::cout << take(table);
    } else if (*gc) {
      double err = 0.0;
      char* text = nullptr;
      check(ma_gradcheck(gc_seed, &err, &text));
      std::cout << take(text) << "\n";
      if (!(err < gc_tol)) {
        std::cerr << "medattn: error: gradient check exceeds tolerance " << gc_tol << "\n";
        return 3;
      }
    } else if (*rep) {
      std::vector<std::string> rows = rep_rows;
      if (!rep_csv.empty()) {
        std::ifstream f(rep_csv);
        std::string line;
        if (!std::getline(f, line) || line != "method,accuracy,precision,recall") {
          std::cerr << "medattn: error: " << rep_csv << " lacks the header method,accuracy,precision,recall\n";
          return 2;
        }
        while (std::getline(f, line))
          if (!line.empty()) rows.push_back(line);
      }
      if (rows.empty()) {
        std::cerr << "medattn: error: report needs --csv or at least one --row\n";
        return kExitUsage;
      }
      std::vector<std::string> names;
      std::vector<double> acc, prec, rec;
      for (const auto& row : rows) {
        std::vector<std::string> f;
        std::stringstream ss(row);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        try {
          if (f.size() != 4) throw std::invalid_argument("field count");
          std::size_t used = 0;
          for (int i = 1; i <= 3; ++i) {
            const double v = std::stod(f[i], &used);
            if (used != f[i].size()) throw std::invalid_argument("trailing text");
            (i == 1 ? acc : i == 2 ? prec : rec).push_back(v);
          }
        } catch (const std::exception&) {
          std::cerr << "medattn: error: bad report row '" << row << "'\n";
          return rep_csv.empty() ? kExitUsage : 2;
        }
        names.push_back(f[0]);
      }
      std::vector<const char*> name_ptrs;
      for (const auto& n : names) name_ptrs.push_back(n.c_str());
      char* table = nullptr;
      check(ma_format_report(name_ptrs.data(), acc.data(), prec.data(), rec.data(), names.size(), &table));
      std::cout << take(table);
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
