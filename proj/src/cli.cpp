#include "ddn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"

#include "ddn/checkpoint.hpp"
#include "ddn/data.hpp"
#include "ddn/errors.hpp"
#include "ddn/metrics.hpp"
#include "ddn/model.hpp"
#include "ddn/rng.hpp"
#include "ddn/synth.hpp"
#include "ddn/threading.hpp"
#include "ddn/trainer.hpp"

namespace fs = std::filesystem;

namespace ddn::cli {
namespace {

constexpr std::uint64_t kSplitStream = 101;
constexpr std::uint64_t kTrainStream = 202;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct SynthArgs {
  std::string out_dir;
  std::size_t n = 20;
  std::size_t cycles = 80;
  std::size_t samples = 60;
  std::uint64_t seed = 7;
  bool path_dependent = false;
  bool force = false;
};

struct ModelFlags {
  std::string profile = "mit";
  std::string pooling = "attention";
  std::string head_activation = "none";
  std::size_t history_n = 0;  // 0: profile default
  std::size_t features = 3;
  std::size_t embed_dim = 64;
  std::size_t charge_len = 300;
  std::size_t discharge_len = 300;
  std::size_t head_hidden = 64;
  std::size_t attn_hidden = 128;
  double window_s = 0.0;  // 0: profile default
  bool soh = false;
  bool exclude_reference = false;
};

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;
  ModelFlags model;
  std::uint64_t seed = 0;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  double lr = 0.001;
  double min_delta = 1e-6;
  bool no_early_stopping = false;
  bool force = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out_dir;
  bool force = false;
};

struct PredictArgs {
  std::string checkpoint;
  std::string battery;
  std::string out_file;
  bool force = false;
};

struct InspectArgs {
  std::string checkpoint;
  std::string battery;
  std::string out_dir;
  bool force = false;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

void refuse_overwrite(const fs::path& p, bool force) {
  if (!force && fs::exists(p)) {
    throw std::invalid_argument("refusing to overwrite " + p.string() +
                                " (pass --force to allow)");
  }
}

NormProfile resolve_profile(const std::string& name) {
  for (const char* builtin : {"nasa1", "nasa2", "mit", "oxford"}) {
    if (name == builtin) return NormProfile::builtin(name);
  }
  if (fs::exists(name)) return NormProfile::from_file(name);
  throw DataError("unknown profile '" + name + "' (not a built-in name or readable file)");
}

DdnConfig make_config(const ModelFlags& flags, const NormProfile& profile) {
  if (flags.features < 1 || flags.features > 3) {
    throw std::invalid_argument("--features must be 1, 2, or 3");
  }
  DdnConfig cfg;
  cfg.features = {{1, flags.embed_dim}};
  if (flags.features >= 2) cfg.features.push_back({flags.charge_len, flags.embed_dim});
  if (flags.features >= 3) cfg.features.push_back({flags.discharge_len, flags.embed_dim});
  cfg.history_len = flags.history_n > 0 ? flags.history_n : profile.default_history;
  cfg.head_hidden = flags.head_hidden;
  cfg.attn_hidden = flags.attn_hidden;
  cfg.pooling = flags.pooling == "mean" ? Pooling::Mean : Pooling::Attention;
  cfg.head_activation =
      flags.head_activation == "relu" ? HeadActivation::Relu : HeadActivation::None;
  cfg.validate();
  return cfg;
}

std::vector<MovingFrame> frames_for(const std::vector<BatteryHistory>& fleet,
                                    const std::vector<std::size_t>& batteries,
                                    const DdnConfig& cfg, const NormProfile& profile,
                                    const FrameOptions& fopts) {
  std::vector<MovingFrame> frames;
  for (std::size_t idx : batteries) {
    auto f = build_frames(fleet[idx], cfg, profile, fopts);
    frames.insert(frames.end(), f.begin(), f.end());
  }
  return frames;
}

int cmd_synth(const SynthArgs& a) {
  if (a.n == 0) throw std::invalid_argument("--n must be at least 1");
  ensure_dir(a.out_dir);

  auto base = a.path_dependent ? sample_path_dependent_spec : sample_default_spec;
  SpecSampler sampler = [&](Rng& rng) {
    SynthSpec s = base(rng);
    s.cycles = a.cycles;
    s.samples_per_curve = a.samples;
    return s;
  };
  std::vector<SynthSpec> specs;
  std::vector<BatteryHistory> fleet = synth_fleet(a.n, sampler, a.seed, &specs);

  fs::path manifest = fs::path(a.out_dir) / "manifest.txt";
  refuse_overwrite(manifest, a.force);
  for (const BatteryHistory& b : fleet) {
    refuse_overwrite(fs::path(a.out_dir) / (b.battery_id + ".csv"), a.force);
  }

  for (const BatteryHistory& b : fleet) {
    write_battery_csv_file(b, (fs::path(a.out_dir) / (b.battery_id + ".csv")).string());
  }
  std::ofstream mout(manifest);
  if (!mout) throw DataError("cannot open " + manifest.string() + " for writing");
  write_synth_manifest(specs, mout);
  std::cout << "wrote " << fleet.size() << " batteries to " << a.out_dir << "\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a) {
  NormProfile profile = resolve_profile(a.model.profile);
  if (a.model.window_s > 0.0) profile.resample_window_s = a.model.window_s;
  DdnConfig cfg = make_config(a.model, profile);
  FrameOptions fopts;
  fopts.soh_mode = a.model.soh;
  fopts.exclude_reference_from_history = a.model.exclude_reference;

  std::vector<BatteryHistory> fleet = load_fleet(a.data_dir);
  if (fleet.size() < 3) {
    throw DataError("training needs at least 3 batteries, found " +
                    std::to_string(fleet.size()));
  }
  FleetSplit split = split_fleet(fleet.size(), {0.75, 0.10, 0.15}, mix_seed(a.seed, kSplitStream));
  std::vector<MovingFrame> train_frames = frames_for(fleet, split.train, cfg, profile, fopts);
  std::vector<MovingFrame> val_frames = frames_for(fleet, split.val, cfg, profile, fopts);

  TrainConfig tcfg;
  tcfg.learning_rate = a.lr;
  tcfg.max_epochs = a.epochs;
  tcfg.batch_size = a.batch_size;
  tcfg.patience = a.patience;
  tcfg.min_delta = a.min_delta;
  tcfg.early_stopping = !a.no_early_stopping;
  tcfg.rng_seed = mix_seed(a.seed, kTrainStream);
  tcfg.threads = thread_cap();
  if (val_frames.empty() && tcfg.early_stopping) {
    std::cerr << "note: validation split is empty (" << fleet.size()
              << " batteries); early stopping disabled\n";
    tcfg.early_stopping = false;
  }

  ensure_dir(a.out_dir);
  fs::path ckpt_path = fs::path(a.out_dir) / "checkpoint.txt";
  fs::path log_path = fs::path(a.out_dir) / "training_log.csv";
  refuse_overwrite(ckpt_path, a.force);
  refuse_overwrite(log_path, a.force);

  auto [params, log] = train(train_frames, val_frames, cfg, tcfg);

  Checkpoint ckpt{cfg, profile, fopts, std::move(params)};
  save_checkpoint_file(ckpt, ckpt_path.string());
  std::ofstream lout(log_path);
  if (!lout) throw DataError("cannot open " + log_path.string() + " for writing");
  write_training_log(log, lout);

  std::cout << "trained on " << train_frames.size() << " frames from " << split.train.size()
            << " batteries (" << split.val.size() << " val, " << split.test.size()
            << " test held out)\n";
  std::cout << "epochs run: " << log.epochs.size() << ", stop reason: " << log.stop_reason
            << "\n";
  if (log.best_epoch > 0) {
    std::cout << "best epoch: " << log.best_epoch
              << ", val loss: " << format_double(log.best_val_loss) << "\n";
  }
  std::cout << "checkpoint: " << ckpt_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a) {
  Checkpoint ckpt = load_checkpoint_file(a.checkpoint);
  std::vector<BatteryHistory> fleet = load_fleet(a.data_dir);

  ensure_dir(a.out_dir);
  fs::path metrics_path = fs::path(a.out_dir) / "metrics.txt";
  fs::path pred_path = fs::path(a.out_dir) / "predictions.csv";
  fs::path attn_path = fs::path(a.out_dir) / "attention.csv";
  const bool attention = ckpt.config.pooling == Pooling::Attention;
  refuse_overwrite(metrics_path, a.force);
  refuse_overwrite(pred_path, a.force);
  if (attention) refuse_overwrite(attn_path, a.force);

  Vec all_pred, all_actual;
  std::vector<PredictionRow> pred_rows;
  std::vector<AttentionRow> attn_rows;
  for (const BatteryHistory& battery : fleet) {
    auto frames = build_frames(battery, ckpt.config, ckpt.profile, ckpt.frame_options);
    std::vector<AttentionTrace> traces;
    Vec preds = predict_frames(frames, ckpt.config, ckpt.params,
                               attention ? &traces : nullptr);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      double pred = denormalize_capacity(ckpt.profile, preds[i]);
      double actual = denormalize_capacity(ckpt.profile, frames[i].target);
      all_pred.push_back(pred);
      all_actual.push_back(actual);
      pred_rows.push_back({battery.battery_id, frames[i].target_cycle, actual, pred});
    }
    for (const AttentionTrace& tr : traces) {
      for (std::size_t s = 0; s < tr.weights.size(); ++s) {
        attn_rows.push_back({battery.battery_id, tr.frame_start, s, tr.weights[s]});
      }
    }
  }

  Metrics m = compute_metrics(all_pred, all_actual);
  std::ofstream mout(metrics_path);
  if (!mout) throw DataError("cannot open " + metrics_path.string() + " for writing");
  write_metrics_file(m, mout);
  std::ofstream pout(pred_path);
  if (!pout) throw DataError("cannot open " + pred_path.string() + " for writing");
  write_predictions_csv(pred_rows, pout);
  if (attention) {
    std::ofstream aout(attn_path);
    if (!aout) throw DataError("cannot open " + attn_path.string() + " for writing");
    write_attention_csv(attn_rows, aout);
  }
  write_metrics_file(m, std::cout);
  return kExitOk;
}

int cmd_predict(const PredictArgs& a) {
  Checkpoint ckpt = load_checkpoint_file(a.checkpoint);
  BatteryHistory battery = parse_battery_csv_file(a.battery);
  auto frames = build_frames(battery, ckpt.config, ckpt.profile, ckpt.frame_options);
  Vec preds = predict_frames(frames, ckpt.config, ckpt.params);

  refuse_overwrite(a.out_file, a.force);
  std::ofstream out(a.out_file);
  if (!out) throw DataError("cannot open " + a.out_file + " for writing");
  out << "battery_id,cycle,predicted_ah\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out << battery.battery_id << "," << frames[i].target_cycle << ","
        << format_double(denormalize_capacity(ckpt.profile, preds[i])) << "\n";
  }
  std::cout << "wrote " << frames.size() << " predictions to " << a.out_file << "\n";
  return kExitOk;
}

int cmd_inspect_attention(const InspectArgs& a) {
  Checkpoint ckpt = load_checkpoint_file(a.checkpoint);
  if (ckpt.config.pooling != Pooling::Attention) {
    throw std::invalid_argument("checkpoint pools by mean: no attention trace to inspect");
  }
  BatteryHistory battery = parse_battery_csv_file(a.battery);
  auto frames = build_frames(battery, ckpt.config, ckpt.profile, ckpt.frame_options);
  std::vector<AttentionTrace> traces;
  predict_frames(frames, ckpt.config, ckpt.params, &traces);

  Vec capacities;
  capacities.reserve(battery.cycles.size());
  const double q0 = battery.cycles[0].discharge_capacity;
  for (const CycleRecord& c : battery.cycles) {
    capacities.push_back(ckpt.frame_options.soh_mode ? c.discharge_capacity / q0
                                                     : c.discharge_capacity);
  }
  AttentionStudy study = attention_study(traces, capacities, ckpt.config.history_len);

  ensure_dir(a.out_dir);
  fs::path attn_path = fs::path(a.out_dir) / "attention.csv";
  fs::path summary_path = fs::path(a.out_dir) / "attention_summary.txt";
  refuse_overwrite(attn_path, a.force);
  refuse_overwrite(summary_path, a.force);

  std::vector<AttentionRow> rows;
  for (const AttentionTrace& tr : traces) {
    for (std::size_t s = 0; s < tr.weights.size(); ++s) {
      rows.push_back({battery.battery_id, tr.frame_start, s, tr.weights[s]});
    }
  }
  std::ofstream aout(attn_path);
  if (!aout) throw DataError("cannot open " + attn_path.string() + " for writing");
  write_attention_csv(rows, aout);

  std::ostringstream summary;
  summary << "battery_id=" << battery.battery_id << "\n"
          << "frames=" << traces.size() << "\n";
  for (std::size_t s = 0; s < study.corr_abs_diff.size(); ++s) {
    summary << "slot" << s << "_corr_abs_diff="
            << (study.corr_abs_diff[s] ? format_double(*study.corr_abs_diff[s]) : "none")
            << "\n";
    summary << "slot" << s << "_corr_raw_diff="
            << (study.corr_raw_diff[s] ? format_double(*study.corr_raw_diff[s]) : "none")
            << "\n";
  }
  std::ofstream sout(summary_path);
  if (!sout) throw DataError("cannot open " + summary_path.string() + " for writing");
  sout << summary.str();
  std::cout << summary.str();
  return kExitOk;
}

void add_model_flags(CLI::App* cmd, ModelFlags& m) {
  cmd->add_option("--profile", m.profile,
                  "normalization profile: nasa1|nasa2|mit|oxford or a key=value file");
  cmd->add_option("--pooling", m.pooling, "history pooling")
      ->check(CLI::IsMember({"mean", "attention"}));
  cmd->add_option("--head-activation", m.head_activation, "activation after the head's hidden layer")
      ->check(CLI::IsMember({"none", "relu"}));
  cmd->add_option("--history-n", m.history_n, "history cycles per frame (0: profile default)");
  cmd->add_option("--features", m.features,
                  "1: capacity, 2: +charge voltage, 3: +discharge voltage");
  cmd->add_option("--embed-dim", m.embed_dim, "embedding width per feature");
  cmd->add_option("--charge-len", m.charge_len, "resampled charge-curve length");
  cmd->add_option("--discharge-len", m.discharge_len, "resampled discharge-curve length");
  cmd->add_option("--head-hidden", m.head_hidden, "capacity head hidden width");
  cmd->add_option("--attn-hidden", m.attn_hidden, "attention unit hidden width");
  cmd->add_option("--window-s", m.window_s, "resampling window seconds (0: profile default)");
  cmd->add_flag("--soh", m.soh, "predict state of health (capacity / first-cycle capacity)");
  cmd->add_flag("--exclude-reference", m.exclude_reference,
                "start frames at cycle 1 so the reference cycle is never history");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"deep degradation network: battery capacity prediction pipeline"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic battery fleet");
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth->add_option("--n", synth_args.n, "number of batteries");
  synth->add_option("--cycles", synth_args.cycles, "cycles per battery");
  synth->add_option("--samples", synth_args.samples, "voltage samples per curve");
  synth->add_option("--seed", synth_args.seed, "fleet seed");
  synth->add_flag("--path-dependent", synth_args.path_dependent,
                  "piecewise fade rates (attention-vs-mean stress fleet)");
  synth->add_flag("--force", synth_args.force, "overwrite existing files");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model on a fleet directory");
  train->add_option("--data", train_args.data_dir, "directory of battery CSVs")->required();
  train->add_option("--out", train_args.out_dir, "output directory")->required();
  add_model_flags(train, train_args.model);
  train->add_option("--seed", train_args.seed, "split/init/shuffle seed");
  train->add_option("--epochs", train_args.epochs, "maximum epochs");
  train->add_option("--batch-size", train_args.batch_size, "mini-batch size");
  train->add_option("--patience", train_args.patience, "early-stopping patience (epochs)");
  train->add_option("--lr", train_args.lr, "Adam learning rate");
  train->add_option("--min-delta", train_args.min_delta,
                    "minimum validation improvement that resets patience");
  train->add_flag("--no-early-stopping", train_args.no_early_stopping,
                  "always run the full epoch budget");
  train->add_flag("--force", train_args.force, "overwrite existing files");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a fleet directory");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
  eval->add_option("--data", eval_args.data_dir, "directory of battery CSVs")->required();
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();
  eval->add_flag("--force", eval_args.force, "overwrite existing files");

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "per-cycle predictions for one battery");
  predict->add_option("--checkpoint", predict_args.checkpoint, "checkpoint file")->required();
  predict->add_option("--battery", predict_args.battery, "battery CSV")->required();
  predict->add_option("--out", predict_args.out_file, "output CSV file")->required();
  predict->add_flag("--force", predict_args.force, "overwrite existing files");

  InspectArgs inspect_args;
  CLI::App* inspect = app.add_subcommand(
      "inspect-attention", "attention weights and capacity-difference correlations");
  inspect->add_option("--checkpoint", inspect_args.checkpoint, "checkpoint file")->required();
  inspect->add_option("--battery", inspect_args.battery, "battery CSV")->required();
  inspect->add_option("--out", inspect_args.out_dir, "output directory")->required();
  inspect->add_flag("--force", inspect_args.force, "overwrite existing files");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (predict->parsed()) return cmd_predict(predict_args);
    if (inspect->parsed()) return cmd_inspect_attention(inspect_args);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace ddn::cli
