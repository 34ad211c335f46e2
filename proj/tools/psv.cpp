// psv: train, evaluate and run point-set-voting models from the command line.
//
// Exit codes: 0 success, 2 invalid input, 3 task/checkpoint mismatch,
// 4 numerical failure, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "psv/error.hpp"
#include "psv/kernels/kernels.hpp"
#include "psv/pipeline.hpp"
#include "psv/runtime.hpp"
#include "psv/seed.hpp"

namespace fs = std::filesystem;
using namespace psv;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size() && !item.empty() && v > 0, "bad vote count '" + item + "'");
    out.push_back(v);
  }
  require(!out.empty(), "empty vote count list");
  return out;
}

std::vector<voting::Aggregation> parse_aggregations(const std::string& text) {
  std::vector<voting::Aggregation> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(voting::parse_aggregation(item));
  require(!out.empty(), "empty aggregation list");
  return out;
}

pipeline::LoadedCheckpoint open_checkpoint(const std::string& path, const std::string& task) {
  auto loaded = pipeline::load_checkpoint(path);
  if (!task.empty() && parse_task(task) != loaded.model->task())
    throw TaskMismatchError("checkpoint " + path + " holds a " + std::string(to_string(loaded.model->task())) +
                            " model, not " + task);
  return loaded;
}

// Head sizes and class names left out of the config come from the dataset.
void fill_from_dataset(pipeline::ParsedConfig& parsed, const pipeline::DatasetSplit& split) {
  auto& c = parsed.config;
  const auto& d = split.train;
  int max_label = -1;
  for (const auto& s : d.samples) max_label = std::max(max_label, s.label);
  const std::size_t classes = std::max<std::size_t>(d.class_names.size(), static_cast<std::size_t>(max_label + 1));
  if (!parsed.keys.count("num_classes")) c.head.num_classes = std::max<std::size_t>(classes, 1);
  if (!parsed.keys.count("num_categories")) c.head.num_categories = std::max<std::size_t>(classes, 1);
  if (!parsed.keys.count("num_parts") && d.num_parts > 0) c.head.num_parts = d.num_parts;
  if (!parsed.keys.count("class_names")) c.class_names = d.class_names;
}

struct TrainArgs {
  std::string task, data, config, out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  auto parsed = pipeline::read_config(a.config);
  pipeline::require_keys(parsed, pipeline::required_config_keys());
  const Task task = parse_task(a.task);
  if (parsed.keys.count("task") && parsed.config.task() != task)
    throw TaskMismatchError("config " + a.config + " is for " + std::string(to_string(parsed.config.task())) +
                            ", --task is " + a.task);
  parsed.config.head.task = task;
  if (a.seed) parsed.config.seed = *a.seed;

  const auto split = pipeline::open_dataset(a.data, task, parsed.config.seed);
  fill_from_dataset(parsed, split);
  parsed.config.validate();

  const fs::path out(a.out);
  fs::create_directories(out);
  pipeline::TrainOptions options;
  options.dump_path = out / "nan_dump.txt";
  if (!a.quiet)
    options.on_epoch = [](std::size_t epoch, double loss) {
      std::printf("epoch %zu loss %.6f\n", epoch, loss);
      std::fflush(stdout);
    };
  auto result = pipeline::train(parsed.config, split.train, options);

  pipeline::CheckpointInfo info;
  info.epoch = parsed.config.epochs;
  info.loss_curve = result.loss_curve;
  if (!split.test.samples.empty()) {
    pipeline::EvalOptions eval;
    eval.seed = parsed.config.seed;
    eval.votes_test = parsed.config.votes_test;
    eval.min_partial_points = parsed.config.min_partial_points;
    auto metrics = pipeline::evaluate(*result.model, split.test, eval);
    metrics.loss_curve = result.loss_curve;
    info.metrics = pipeline::metrics_report(metrics);
    write_text(out / "metrics.csv", pipeline::metrics_csv(metrics));
  }
  pipeline::save_checkpoint(out / "model.ckpt", *result.model, info, result.optimizer.get());
  write_text(out / "loss.csv", pipeline::loss_csv(result.loss_curve));
  write_text(out / "config.cfg", pipeline::to_text(result.model->config()));
  std::printf("final loss %.6f\ncheckpoint %s\n", result.loss_curve.back(), (out / "model.ckpt").string().c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, task, split = "test", out, report, aggregation;
  bool partial = false;
  std::size_t votes_test = 0;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  const auto loaded = open_checkpoint(a.checkpoint, a.task);
  const auto& model = *loaded.model;
  const auto dataset = pipeline::select_split(pipeline::open_dataset(a.data, model.task(), model.config().seed), a.split);

  pipeline::EvalOptions options;
  options.partial = a.partial;
  options.votes_test = a.votes_test;
  options.seed = a.seed;
  options.min_partial_points = model.config().min_partial_points;
  if (!a.aggregation.empty()) options.aggregation = voting::parse_aggregation(a.aggregation);
  const auto metrics = pipeline::evaluate(model, dataset, options);

  const auto csv = pipeline::metrics_csv(metrics);
  std::fputs(csv.c_str(), stdout);
  const fs::path out = a.out.empty() ? fs::path(a.checkpoint).parent_path() / "metrics.csv" : fs::path(a.out);
  write_text(out, csv);
  if (!a.report.empty()) write_text(a.report, pipeline::metrics_report(metrics));
  return 0;
}

struct CompleteArgs {
  std::string checkpoint, input, output;
  std::uint64_t seed = 0;
  std::size_t votes_test = 0, diverse = 0, vote_index = 0;
};

int cmd_complete(const CompleteArgs& a) {
  const auto loaded = open_checkpoint(a.checkpoint, "complete");
  const auto& model = *loaded.model;
  const auto input = geometry::read_xyz(a.input);
  const auto votes = model.votes(input, a.votes_test, a.seed);
  const fs::path output(a.output);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());

  if (a.diverse == 0) {
    geometry::write_xyz(output, model.fold(model.combine(votes)));
    std::printf("%s\n", output.string().c_str());
    return 0;
  }
  require(a.diverse >= 2, "--diverse needs at least 2 steps");
  require(model.config().aggregation == voting::Aggregation::voting, "--diverse needs a voting model");
  const voting::LatentPosterior posterior(votes);
  const auto latents = voting::interpolated_latents(posterior, a.vote_index, a.diverse);
  for (std::size_t s = 0; s < latents.size(); ++s) {
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_t%.2f", static_cast<double>(s) / static_cast<double>(a.diverse - 1));
    const fs::path path = output.parent_path() / (output.stem().string() + suffix + output.extension().string());
    geometry::write_xyz(path, model.fold(latents[s]));
    std::printf("%s\n", path.string().c_str());
  }
  return 0;
}

struct SimulateArgs {
  std::string input, output;
  std::uint64_t seed = 0;
  std::size_t min_points = 32;
};

void simulate_one(const fs::path& in, const fs::path& out, std::uint64_t seed, std::size_t min_points) {
  const auto cut = geometry::simulate_plane_cut(geometry::read_xyz(in), seed, min_points);
  geometry::write_xyz(out, cut.cloud);
  std::ostringstream plane;
  plane.precision(17);
  plane << cut.plane.normal[0] << ' ' << cut.plane.normal[1] << ' ' << cut.plane.normal[2] << '\n';
  write_text(out.string() + ".plane", plane.str());
}

int cmd_simulate(const SimulateArgs& a) {
  const fs::path in(a.input), out(a.output);
  if (!fs::is_directory(in)) {
    simulate_one(in, out, a.seed, a.min_points);
    return 0;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".xyz") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  fs::create_directories(out);
  for (std::size_t i = 0; i < files.size(); ++i)
    simulate_one(files[i], out / files[i].filename(), mix_seed(a.seed, i), a.min_points);
  return 0;
}

struct SweepArgs {
  std::string checkpoint, data, split = "test", votes = "1,2,4,8,16", aggregations, out = "sweep.csv";
  bool partial = false;
  std::uint64_t seed = 0;
};

int cmd_sweep(const SweepArgs& a) {
  const auto loaded = open_checkpoint(a.checkpoint, "");
  const auto& model = *loaded.model;
  const auto dataset = pipeline::select_split(pipeline::open_dataset(a.data, model.task(), model.config().seed), a.split);
  const auto counts = parse_counts(a.votes);
  const bool voting_model = model.config().aggregation == voting::Aggregation::voting;
  const auto aggregations = parse_aggregations(
      !a.aggregations.empty() ? a.aggregations
                              : (voting_model ? "voting,max,mean" : std::string(voting::to_string(model.config().aggregation))));

  pipeline::EvalOptions options;
  options.partial = a.partial;
  options.seed = a.seed;
  options.min_partial_points = model.config().min_partial_points;
  const auto csv = pipeline::sweep_csv(pipeline::sweep_votes(model, dataset, counts, aggregations, options));
  std::fputs(csv.c_str(), stdout);
  write_text(a.out, csv);
  return 0;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out = "report";
};

int cmd_report(const ReportArgs& a) {
  for (const auto& input : a.inputs) {
    const auto curves = pipeline::curves_from_csv(read_text(input), input);
    for (const auto& path : pipeline::write_curves(a.out, fs::path(input).stem().string(), curves))
      std::printf("%s\n", path.string().c_str());
  }
  return 0;
}

void apply_thread_limit() {
  const char* env = std::getenv("PSV_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  require(*end == '\0' && n > 0, "PSV_THREADS must be a positive integer");
  kernels::set_max_threads(static_cast<int>(n));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-set voting for partial point clouds"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--task", train.task, "classify, segment or complete")->required();
  train_cmd->add_option("--data", train.data, "toy:// URI or dataset directory")->required();
  train_cmd->add_option("--config", train.config, "key=value run config")->required();
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--seed", train.seed, "override the config seed");
  train_cmd->add_flag("--quiet", train.quiet, "no per-epoch output");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and write metrics CSV");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--data", eval.data)->required();
  eval_cmd->add_option("--task", eval.task, "expected task");
  eval_cmd->add_option("--split", eval.split, "train, test or all")->capture_default_str();
  eval_cmd->add_flag("--partial", eval.partial, "plane-cut inputs before inference");
  eval_cmd->add_option("--votes-test", eval.votes_test, "votes per cloud (0 = all)");
  eval_cmd->add_option("--seed", eval.seed);
  eval_cmd->add_option("--aggregation", eval.aggregation, "voting, max or mean");
  eval_cmd->add_option("--out", eval.out, "metrics CSV path (default: next to the checkpoint)");
  eval_cmd->add_option("--report", eval.report, "also write a JSON report here");

  CompleteArgs complete;
  auto* complete_cmd = app.add_subcommand("complete", "Complete one partial XYZ cloud");
  complete_cmd->add_option("--checkpoint", complete.checkpoint)->required();
  complete_cmd->add_option("--input", complete.input)->required();
  complete_cmd->add_option("--output", complete.output)->required();
  complete_cmd->add_option("--seed", complete.seed);
  complete_cmd->add_option("--votes-test", complete.votes_test);
  complete_cmd->add_option("--diverse", complete.diverse, "write K completions interpolated toward one vote");
  complete_cmd->add_option("--vote-index", complete.vote_index);

  SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate-partial", "Plane-cut an XYZ file or a directory of them");
  simulate_cmd->add_option("--input", simulate.input)->required();
  simulate_cmd->add_option("--output", simulate.output)->required();
  simulate_cmd->add_option("--seed", simulate.seed);
  simulate_cmd->add_option("--min-points", simulate.min_points)->capture_default_str();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Metric per (vote count, aggregation)");
  sweep_cmd->add_option("--checkpoint", sweep.checkpoint)->required();
  sweep_cmd->add_option("--data", sweep.data)->required();
  sweep_cmd->add_option("--split", sweep.split)->capture_default_str();
  sweep_cmd->add_option("--votes", sweep.votes, "comma-separated vote counts")->capture_default_str();
  sweep_cmd->add_option("--aggregations", sweep.aggregations, "comma-separated: voting,max,mean");
  sweep_cmd->add_flag("--partial", sweep.partial);
  sweep_cmd->add_option("--seed", sweep.seed);
  sweep_cmd->add_option("--out", sweep.out)->capture_default_str();

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Convert metric CSVs into two-column curve files");
  report_cmd->add_option("--input", report.inputs, "CSV files")->required();
  report_cmd->add_option("--out", report.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    configure_allocator();
    apply_thread_limit();
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*complete_cmd) return cmd_complete(complete);
    if (*simulate_cmd) return cmd_simulate(simulate);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*report_cmd) return cmd_report(report);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const TaskMismatchError& e) {
    std::fprintf(stderr, "task mismatch: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
