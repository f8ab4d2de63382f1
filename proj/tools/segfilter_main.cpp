// Command-line entry point: synth, predict, eval, mnet and sweep subcommands
// wiring the library into reproducible runs. Exit codes: 0 success, 2 for
// usage or validation problems, 1 for runtime failures.

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "segfilter/error.hpp"
#include "segfilter/filtering.hpp"
#include "segfilter/manifest.hpp"
#include "segfilter/metrics.hpp"
#include "segfilter/parallel.hpp"
#include "segfilter/report_io.hpp"
#include "segfilter/synth.hpp"
#include "segfilter/tensor_io.hpp"

namespace {

using nlohmann::json;
using namespace segfilter;

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return is_validation_error(err.code()) ? 2 : 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buffer[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

double parse_temperature(const std::string& text) {
  if (text == "inf" || text == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  try {
    std::size_t consumed = 0;
    const double value = std::stod(text, &consumed);
    if (consumed != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    raise(ErrorCode::InvalidConfig,
          "temperature \"" + text + "\" is not a number or \"inf\"");
  }
}

std::vector<double> parse_double_list(const std::string& text, const char* flag) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string token =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!token.empty()) {
      try {
        std::size_t consumed = 0;
        values.push_back(std::stod(token, &consumed));
        if (consumed != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        raise(ErrorCode::InvalidConfig,
              std::string(flag) + ": \"" + token + "\" is not a number");
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return values;
}

struct RecordFailure {
  std::string image_id;
  std::string message;
};

json failures_to_json(const std::vector<RecordFailure>& failures) {
  json out = json::array();
  for (const RecordFailure& failure : failures) {
    out.push_back(json{{"image_id", failure.image_id},
                       {"error", failure.message}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string config_path;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& args) {
  return run_guarded([&] {
    const ScenarioConfig config = read_scenario_config(args.config_path);
    generate_scenario(config, args.out_dir);
    std::cout << (std::filesystem::path(args.out_dir) / "manifest.json").string()
              << "\n";
  });
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string manifest_path;
  std::string mode;
  double tau = 0.0;
  std::string temperature = "1";
  double shift = 0.0;
  std::string out_dir;
  int workers = 1;
  bool skip_bad = false;
  bool stamp = false;
};

int cmd_predict(const PredictArgs& args) {
  return run_guarded([&] {
    const DatasetManifest manifest = read_manifest(args.manifest_path);
    const double temperature = parse_temperature(args.temperature);
    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) raise(ErrorCode::IoFailure, "cannot create " + args.out_dir);

    const std::size_t count = manifest.records.size();
    std::vector<std::optional<RecordFailure>> failures(count);

    parallel_for(count, args.workers, [&](std::size_t i) {
      const ManifestRecord& record = manifest.records[i];
      try {
        LabelMap prediction;
        if (args.mode == "baseline") {
          prediction = argmax_predict(load_record(manifest, i).logits);
        } else if (args.mode == "oracle") {
          const LoadedRecord loaded = load_record(manifest, i);
          if (!loaded.gt) {
            raise(ErrorCode::MissingInput,
                  "record " + record.image_id + " has no ground truth");
          }
          prediction = oracle_filter_predict(loaded.logits, *loaded.gt,
                                             manifest.background_class);
        } else if (args.mode == "filter") {
          if (!record.classifier_scores) {
            raise(ErrorCode::MissingInput,
                  "record " + record.image_id + " has no classifier scores");
          }
          FilterConfig config;
          config.tau = args.tau;
          config.always_allow = {manifest.background_class};
          const AllowedClassSet allowed = allowed_set_from_classifier(
              *record.classifier_scores, config, manifest.num_classes,
              manifest.background_class);
          prediction = filtered_predict(load_record(manifest, i).logits, allowed);
        } else {  // soft
          if (!record.classifier_scores) {
            raise(ErrorCode::MissingInput,
                  "record " + record.image_id + " has no classifier scores");
          }
          SoftFilterConfig config;
          config.temperature = temperature;
          config.shift = args.shift;
          prediction =
              soft_filter_predict(load_record(manifest, i).logits,
                                  *record.classifier_scores, config,
                                  manifest.background_class);
        }
        write_label_map(prediction, std::filesystem::path(args.out_dir) /
                                        (record.image_id + ".pgm"));
      } catch (const Error& err) {
        if (!args.skip_bad) throw;
        failures[i] = RecordFailure{record.image_id, err.what()};
      }
    });

    std::vector<RecordFailure> skipped;
    for (const auto& failure : failures) {
      if (failure) skipped.push_back(*failure);
    }

    json summary;
    summary["mode"] = args.mode;
    if (args.mode == "filter") summary["tau"] = args.tau;
    if (args.mode == "soft") {
      summary["temperature"] = std::isinf(temperature)
                                   ? json("inf")
                                   : json(temperature);
      summary["shift"] = args.shift;
    }
    summary["records"] = count;
    summary["written"] = count - skipped.size();
    summary["skipped"] = failures_to_json(skipped);
    if (args.stamp) summary["generated_at"] = utc_timestamp();
    write_json_file(std::filesystem::path(args.out_dir) / "summary.json", summary);
    std::cout << (std::filesystem::path(args.out_dir) / "summary.json").string()
              << "\n";
  });
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string manifest_path;
  std::string pred_dir;
  std::string out_json;
  std::string out_csv;
  std::string confusion_csv;
  std::string subgroup_json;
  bool by_class_count = false;
  std::string size_brackets;
  int workers = 1;
  bool skip_bad = false;
  bool stamp = false;
};

int cmd_eval(const EvalArgs& args) {
  return run_guarded([&] {
    const DatasetManifest manifest = read_manifest(args.manifest_path);

    std::optional<std::vector<std::uint64_t>> size_brackets;
    if (!args.size_brackets.empty()) {
      std::vector<std::uint64_t> edges;
      for (const double value : parse_double_list(args.size_brackets, "--size-brackets")) {
        if (value < 0 || value != std::floor(value)) {
          raise(ErrorCode::InvalidConfig,
                "--size-brackets entries must be non-negative integers");
        }
        edges.push_back(static_cast<std::uint64_t>(value));
      }
      size_brackets = std::move(edges);
    }

    struct Partial {
      std::optional<ConfusionMatrix> confusion;
      std::optional<SubgroupAccumulator> by_count;
      std::optional<SubgroupAccumulator> by_size;
      std::optional<RecordFailure> failure;
      bool no_gt = false;
    };
    const std::size_t count = manifest.records.size();
    std::vector<Partial> partials(count);

    parallel_for(count, args.workers, [&](std::size_t i) {
      const ManifestRecord& record = manifest.records[i];
      Partial& partial = partials[i];
      if (!record.gt_path) {
        partial.no_gt = true;
        return;
      }
      try {
        const std::filesystem::path pred_path =
            std::filesystem::path(args.pred_dir) / (record.image_id + ".pgm");
        if (!std::filesystem::exists(pred_path)) {
          raise(ErrorCode::MissingInput, "record " + record.image_id +
                                             ": no prediction at " +
                                             pred_path.string());
        }
        const LoadedRecord loaded = load_record(manifest, i);
        const LabelMap pred = read_label_map(pred_path);
        ConfusionMatrix confusion(manifest.num_classes);
        confusion.accumulate(*loaded.gt, pred);
        partial.confusion = std::move(confusion);
        if (args.by_class_count) {
          SubgroupAccumulator acc(Grouping::ByClassCount, {},
                                  manifest.num_classes, manifest.background_class);
          acc.accumulate(*loaded.gt, pred);
          partial.by_count = std::move(acc);
        }
        if (size_brackets) {
          SubgroupAccumulator acc(Grouping::ByClassSize, *size_brackets,
                                  manifest.num_classes, manifest.background_class);
          acc.accumulate(*loaded.gt, pred);
          partial.by_size = std::move(acc);
        }
      } catch (const Error& err) {
        if (!args.skip_bad) throw;
        partial.failure = RecordFailure{record.image_id, err.what()};
      }
    });

    ConfusionMatrix confusion(manifest.num_classes);
    std::optional<SubgroupAccumulator> by_count;
    if (args.by_class_count) {
      by_count.emplace(Grouping::ByClassCount, std::vector<std::uint64_t>{},
                       manifest.num_classes, manifest.background_class);
    }
    std::optional<SubgroupAccumulator> by_size;
    if (size_brackets) {
      by_size.emplace(Grouping::ByClassSize, *size_brackets,
                      manifest.num_classes, manifest.background_class);
    }

    std::vector<RecordFailure> skipped;
    std::size_t evaluated = 0;
    std::size_t without_gt = 0;
    for (Partial& partial : partials) {
      if (partial.no_gt) {
        ++without_gt;
        continue;
      }
      if (partial.failure) {
        skipped.push_back(*partial.failure);
        continue;
      }
      confusion.merge(*partial.confusion);
      if (by_count) by_count->merge(*partial.by_count);
      if (by_size) by_size->merge(*partial.by_size);
      ++evaluated;
    }
    if (evaluated == 0) {
      raise(ErrorCode::EmptyReport, "no records were evaluated");
    }

    const IoUReport iou = iou_from_confusion(confusion);

    json report = to_json(iou);
    report["records_evaluated"] = evaluated;
    report["records_without_gt"] = without_gt;
    report["skipped"] = failures_to_json(skipped);
    if (args.stamp) report["generated_at"] = utc_timestamp();
    write_json_file(args.out_json, report);
    if (!args.out_csv.empty()) write_text_file(args.out_csv, iou_csv(iou));
    if (!args.confusion_csv.empty()) {
      write_text_file(args.confusion_csv, confusion_csv(confusion));
    }
    if (!args.subgroup_json.empty()) {
      json subgroups;
      if (by_count) subgroups["by_class_count"] = to_json(by_count->report());
      if (by_size) subgroups["by_class_size"] = to_json(by_size->report());
      if (subgroups.empty()) {
        raise(ErrorCode::InvalidConfig,
              "--subgroup-json needs --by-class-count and/or --size-brackets");
      }
      write_json_file(args.subgroup_json, subgroups);
    }
    std::cout << "miou " << format_double(iou.miou) << "\n";
  });
}

// ---------------------------------------------------------------------------
// mnet

struct MnetArgs {
  std::string manifest_path;
  std::string pred_dir;
  std::string out_json;
  std::string out_csv;
  int workers = 1;
  bool skip_bad = false;
  bool stamp = false;
};

int cmd_mnet(const MnetArgs& args) {
  return run_guarded([&] {
    const DatasetManifest manifest = read_manifest(args.manifest_path);
    const std::size_t count = manifest.records.size();

    struct Partial {
      std::optional<MNetAccumulator> acc;
      std::optional<RecordFailure> failure;
    };
    std::vector<Partial> partials(count);

    parallel_for(count, args.workers, [&](std::size_t i) {
      const ManifestRecord& record = manifest.records[i];
      try {
        if (!record.gt_path) {
          raise(ErrorCode::MissingInput,
                "record " + record.image_id + " has no ground truth");
        }
        if (!record.pseudo_path) {
          raise(ErrorCode::MissingInput,
                "record " + record.image_id + " has no pseudo-labels");
        }
        const std::filesystem::path pred_path =
            std::filesystem::path(args.pred_dir) / (record.image_id + ".pgm");
        if (!std::filesystem::exists(pred_path)) {
          raise(ErrorCode::MissingInput, "record " + record.image_id +
                                             ": no prediction at " +
                                             pred_path.string());
        }
        const LoadedRecord loaded = load_record(manifest, i);
        const LabelMap pred = read_label_map(pred_path);
        MNetAccumulator acc(manifest.num_classes);
        acc.accumulate(*loaded.gt, pred, *loaded.pseudo);
        partials[i].acc = std::move(acc);
      } catch (const Error& err) {
        if (!args.skip_bad) throw;
        partials[i].failure = RecordFailure{record.image_id, err.what()};
      }
    });

    MNetAccumulator merged(manifest.num_classes);
    std::vector<RecordFailure> skipped;
    for (Partial& partial : partials) {
      if (partial.failure) {
        skipped.push_back(*partial.failure);
      } else if (partial.acc) {
        merged.merge(*partial.acc);
      }
    }
    const MNetReport report = merged.report();

    json doc = to_json(report);
    doc["skipped"] = failures_to_json(skipped);
    if (args.stamp) doc["generated_at"] = utc_timestamp();
    write_json_file(args.out_json, doc);
    if (!args.out_csv.empty()) write_text_file(args.out_csv, mnet_csv(report));
    std::cout << "mnet " << format_double(report.mnet) << "\n";
  });
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string manifest_path;
  double tau_min = -5.0;
  double tau_max = 1.0;
  double tau_step = 0.25;
  std::string taus;
  std::string out_csv;
  int workers = 1;
  bool skip_bad = false;
};

int cmd_sweep(const SweepArgs& args) {
  return run_guarded([&] {
    DatasetManifest manifest = read_manifest(args.manifest_path);

    std::vector<double> grid;
    if (!args.taus.empty()) {
      grid = parse_double_list(args.taus, "--taus");
    } else {
      if (args.tau_step <= 0) {
        raise(ErrorCode::InvalidConfig, "--tau-step must be positive");
      }
      for (double tau = args.tau_min; tau <= args.tau_max + 1e-12;
           tau += args.tau_step) {
        grid.push_back(tau);
      }
    }
    if (grid.empty()) {
      raise(ErrorCode::InvalidConfig, "empty threshold grid");
    }

    if (args.skip_bad) {
      std::vector<ManifestRecord> usable;
      for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const ManifestRecord& record = manifest.records[i];
        if (!record.gt_path || !record.classifier_scores) continue;
        try {
          load_record(manifest, i);
        } catch (const Error&) {
          continue;
        }
        usable.push_back(record);
      }
      manifest.records = std::move(usable);
    }

    FilterConfig config;
    config.always_allow = {manifest.background_class};
    const std::vector<SweepPoint> points =
        threshold_sweep(manifest, grid, config, args.workers);
    write_text_file(args.out_csv, sweep_csv(points));
    std::cout << args.out_csv << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prediction filtering and evaluation for semantic segmentation"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a deterministic synthetic dataset");
  synth->add_option("--config", synth_args.config_path, "scenario config JSON")
      ->required();
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();

  PredictArgs predict_args;
  CLI::App* predict =
      app.add_subcommand("predict", "decode predictions for every record");
  predict->add_option("--manifest", predict_args.manifest_path, "dataset manifest")
      ->required();
  predict
      ->add_option("--mode", predict_args.mode,
                   "baseline | oracle | filter | soft")
      ->required()
      ->check(CLI::IsMember({"baseline", "oracle", "filter", "soft"}));
  predict->add_option("--tau", predict_args.tau, "filter threshold");
  predict->add_option("--temperature", predict_args.temperature,
                      "soft-filter temperature (number or \"inf\")");
  predict->add_option("--shift", predict_args.shift, "soft-filter shift");
  predict->add_option("--out", predict_args.out_dir, "output directory")
      ->required();
  predict->add_option("--workers", predict_args.workers, "worker threads")
      ->check(CLI::PositiveNumber);
  predict->add_flag("--skip-bad", predict_args.skip_bad,
                    "skip records that fail instead of aborting");
  predict->add_flag("--stamp", predict_args.stamp, "timestamp the summary");

  EvalArgs eval_args;
  CLI::App* eval =
      app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--manifest", eval_args.manifest_path, "dataset manifest")
      ->required();
  eval->add_option("--pred-dir", eval_args.pred_dir, "directory of predictions")
      ->required();
  eval->add_option("--out-json", eval_args.out_json, "IoU report JSON")
      ->required();
  eval->add_option("--out-csv", eval_args.out_csv, "per-class IoU CSV");
  eval->add_option("--confusion-csv", eval_args.confusion_csv,
                   "confusion matrix CSV");
  eval->add_flag("--by-class-count", eval_args.by_class_count,
                 "bucket images by foreground class count");
  eval->add_option("--size-brackets", eval_args.size_brackets,
                   "comma-separated pixel-count bracket edges (first must be 0)");
  eval->add_option("--subgroup-json", eval_args.subgroup_json,
                   "subgroup report JSON");
  eval->add_option("--workers", eval_args.workers, "worker threads")
      ->check(CLI::PositiveNumber);
  eval->add_flag("--skip-bad", eval_args.skip_bad,
                 "skip records that fail instead of aborting");
  eval->add_flag("--stamp", eval_args.stamp, "timestamp the report");

  MnetArgs mnet_args;
  CLI::App* mnet =
      app.add_subcommand("mnet", "pseudo-label net-correctness report");
  mnet->add_option("--manifest", mnet_args.manifest_path, "dataset manifest")
      ->required();
  mnet->add_option("--pred-dir", mnet_args.pred_dir, "directory of predictions")
      ->required();
  mnet->add_option("--out-json", mnet_args.out_json, "mnet report JSON")
      ->required();
  mnet->add_option("--out-csv", mnet_args.out_csv, "mnet report CSV");
  mnet->add_option("--workers", mnet_args.workers, "worker threads")
      ->check(CLI::PositiveNumber);
  mnet->add_flag("--skip-bad", mnet_args.skip_bad,
                 "skip records that fail instead of aborting");
  mnet->add_flag("--stamp", mnet_args.stamp, "timestamp the report");

  SweepArgs sweep_args;
  CLI::App* sweep =
      app.add_subcommand("sweep", "filtered mIoU across a threshold grid");
  sweep->add_option("--manifest", sweep_args.manifest_path, "dataset manifest")
      ->required();
  sweep->add_option("--tau-min", sweep_args.tau_min, "grid start");
  sweep->add_option("--tau-max", sweep_args.tau_max, "grid end (inclusive)");
  sweep->add_option("--tau-step", sweep_args.tau_step, "grid step");
  sweep->add_option("--taus", sweep_args.taus,
                    "comma-separated thresholds (overrides the grid)");
  sweep->add_option("--out", sweep_args.out_csv, "sweep CSV")->required();
  sweep->add_option("--workers", sweep_args.workers, "worker threads")
      ->check(CLI::PositiveNumber);
  sweep->add_flag("--skip-bad", sweep_args.skip_bad,
                  "skip unusable records instead of aborting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);  // --help
    app.exit(err);
    return 2;
  }

  if (synth->parsed()) return cmd_synth(synth_args);
  if (predict->parsed()) return cmd_predict(predict_args);
  if (eval->parsed()) return cmd_eval(eval_args);
  if (mnet->parsed()) return cmd_mnet(mnet_args);
  if (sweep->parsed()) return cmd_sweep(sweep_args);
  return 2;
}
