#include "psv/pipeline/evaluate.hpp"

#include <algorithm>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "psv/error.hpp"
#include "psv/seed.hpp"

namespace psv::pipeline {

namespace {

/// Runs fn(i) for every i, possibly in parallel; rethrows the first failure.
template <typename Fn>
void for_each_sample(std::size_t n, Fn&& fn) {
  std::exception_ptr failure;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      const std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::string class_name(const data::Dataset& dataset, int label) {
  if (label >= 0 && static_cast<std::size_t>(label) < dataset.class_names.size()) return dataset.class_names[label];
  return "class" + std::to_string(label);
}

void require_task(const data::Dataset& dataset, Task task) {
  if (dataset.task != task)
    throw TaskMismatchError("dataset is for " + std::string(to_string(dataset.task)) + ", evaluation expects " +
                            std::string(to_string(task)));
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

geometry::PointCloud evaluation_input(const data::Sample& sample, std::size_t index, const EvalOptions& options) {
  if (!options.partial) return sample.cloud;
  return geometry::simulate_plane_cut(sample.cloud, mix_seed(options.seed, 2 * index + 1), options.min_partial_points)
      .cloud;
}

std::uint64_t evaluation_seed(std::size_t index, const EvalOptions& options) {
  return mix_seed(options.seed, 2 * index);
}

Metrics evaluate_classification(const data::Dataset& dataset, const ClassPredictor& predict,
                                const EvalOptions& options) {
  require_task(dataset, Task::classify);
  const auto& samples = dataset.samples;
  std::vector<int> predicted(samples.size());
  for_each_sample(samples.size(), [&](std::size_t i) {
    predicted[i] = predict(samples[i], evaluation_input(samples[i], i, options), evaluation_seed(i, options));
  });

  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // label -> (correct, total)
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool hit = predicted[i] == samples[i].label;
    auto& [c, t] = per_class[samples[i].label];
    c += hit;
    ++t;
    correct += hit;
  }
  Metrics m;
  m.task = Task::classify;
  for (const auto& [label, counts] : per_class)
    m.classes.push_back({class_name(dataset, label), counts.second,
                         static_cast<double>(counts.first) / static_cast<double>(counts.second)});
  m.overall.count = samples.size();
  m.overall.accuracy = samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
  return m;
}

Metrics evaluate_classification(const Model& model, const data::Dataset& dataset, const EvalOptions& options) {
  if (model.task() != Task::classify) throw TaskMismatchError("checkpoint is not a classification model");
  return evaluate_classification(
      dataset,
      [&](const data::Sample&, const geometry::PointCloud& input, std::uint64_t seed) {
        return model.predict_class(model.latent(input, options.votes_test, seed, options.aggregation));
      },
      options);
}

double shape_part_iou(std::span<const int> predicted, std::span<const int> truth, std::span<const int> parts) {
  require(predicted.size() == truth.size(), "prediction and ground truth differ in length");
  require(!parts.empty(), "no parts to score");
  double total = 0.0;
  for (const int part : parts) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = predicted[i] == part, t = truth[i] == part;
      inter += p && t;
      uni += p || t;
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return total / static_cast<double>(parts.size());
}

Metrics evaluate_segmentation(const data::Dataset& dataset, const PartPredictor& predict, const EvalOptions& options) {
  require_task(dataset, Task::segment);
  const auto& samples = dataset.samples;
  std::map<int, std::set<int>> parts_of;
  for (const auto& s : samples) {
    require(s.cloud.has_labels(), "sample '" + s.name + "' has no part labels");
    parts_of[s.label].insert(s.cloud.labels.begin(), s.cloud.labels.end());
  }

  struct Scored {
    double iou = 0.0;
    std::size_t hits = 0, points = 0;
  };
  std::vector<Scored> scored(samples.size());
  for_each_sample(samples.size(), [&](std::size_t i) {
    const auto input = evaluation_input(samples[i], i, options);
    const auto predicted = predict(samples[i], input, evaluation_seed(i, options));
    require(predicted.size() == input.size(), "predictor returned " + std::to_string(predicted.size()) +
                                                  " labels for " + std::to_string(input.size()) + " points");
    const auto& part_set = parts_of.at(samples[i].label);
    const std::vector<int> parts(part_set.begin(), part_set.end());
    scored[i].iou = shape_part_iou(predicted, input.labels, parts);
    for (std::size_t k = 0; k < predicted.size(); ++k) scored[i].hits += predicted[k] == input.labels[k];
    scored[i].points = predicted.size();
  });

  std::map<int, MetricRow> rows;
  std::map<int, std::size_t> row_points;
  std::size_t hits = 0, points = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& row = rows[samples[i].label];
    ++row.count;
    row.iou += scored[i].iou;
    row.accuracy += static_cast<double>(scored[i].hits);
    row_points[samples[i].label] += scored[i].points;
    hits += scored[i].hits;
    points += scored[i].points;
  }
  Metrics m;
  m.task = Task::segment;
  for (auto& [label, row] : rows) {
    row.name = class_name(dataset, label);
    row.iou /= static_cast<double>(row.count);
    row.accuracy /= static_cast<double>(row_points[label]);
    m.overall.iou += row.iou;
    m.classes.push_back(row);
  }
  m.overall.count = samples.size();
  if (!rows.empty()) m.overall.iou /= static_cast<double>(rows.size());
  m.overall.accuracy = points == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(points);
  return m;
}

Metrics evaluate_completion(const data::Dataset& dataset, const CompletionPredictor& predict,
                            const EvalOptions& options) {
  require_task(dataset, Task::complete);
  const auto& samples = dataset.samples;
  for (const auto& s : samples) require(s.complete.has_value(), "sample '" + s.name + "' has no complete cloud");

  std::vector<std::pair<double, double>> cd(samples.size());
  for_each_sample(samples.size(), [&](std::size_t i) {
    const auto input = evaluation_input(samples[i], i, options);
    const auto output = predict(samples[i], input, evaluation_seed(i, options));
    require(!output.empty(), "predictor returned an empty cloud");
    cd[i] = {1e4 * geometry::chamfer_distance(output, *samples[i].complete),
             1e4 * geometry::chamfer_distance(input, *samples[i].complete)};
  });

  std::map<int, MetricRow> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& row = rows[samples[i].label];
    ++row.count;
    row.chamfer_x1e4 += cd[i].first;
    row.baseline_chamfer_x1e4 += cd[i].second;
  }
  Metrics m;
  m.task = Task::complete;
  for (auto& [label, row] : rows) {
    row.name = class_name(dataset, label);
    m.overall.chamfer_x1e4 += row.chamfer_x1e4;
    m.overall.baseline_chamfer_x1e4 += row.baseline_chamfer_x1e4;
    row.chamfer_x1e4 /= static_cast<double>(row.count);
    row.baseline_chamfer_x1e4 /= static_cast<double>(row.count);
    m.classes.push_back(row);
  }
  m.overall.count = samples.size();
  if (!samples.empty()) {
    m.overall.chamfer_x1e4 /= static_cast<double>(samples.size());
    m.overall.baseline_chamfer_x1e4 /= static_cast<double>(samples.size());
  }
  return m;
}

Metrics evaluate_segmentation(const Model& model, const data::Dataset& dataset, const EvalOptions& options) {
  if (model.task() != Task::segment) throw TaskMismatchError("checkpoint is not a segmentation model");
  return evaluate_segmentation(
      dataset,
      [&](const data::Sample& sample, const geometry::PointCloud& input, std::uint64_t seed) {
        const auto z = model.latent(input, options.votes_test, seed, options.aggregation);
        return model.predict_parts(z, input.points, sample.label);
      },
      options);
}

Metrics evaluate_completion(const Model& model, const data::Dataset& dataset, const EvalOptions& options) {
  if (model.task() != Task::complete) throw TaskMismatchError("checkpoint is not a completion model");
  return evaluate_completion(
      dataset,
      [&](const data::Sample&, const geometry::PointCloud& input, std::uint64_t seed) {
        return model.fold(model.latent(input, options.votes_test, seed, options.aggregation));
      },
      options);
}

Metrics evaluate(const Model& model, const data::Dataset& dataset, const EvalOptions& options) {
  if (model.task() != dataset.task)
    throw TaskMismatchError("checkpoint is a " + std::string(to_string(model.task())) + " model but the dataset is for " +
                            std::string(to_string(dataset.task)));
  switch (model.task()) {
    case Task::classify: return evaluate_classification(model, dataset, options);
    case Task::segment: return evaluate_segmentation(model, dataset, options);
    case Task::complete: return evaluate_completion(model, dataset, options);
  }
  throw ValidationError("unknown task");
}

double headline(const Metrics& metrics) {
  switch (metrics.task) {
    case Task::classify: return metrics.overall.accuracy;
    case Task::segment: return metrics.overall.iou;
    case Task::complete: return metrics.overall.chamfer_x1e4;
  }
  return 0.0;
}

std::string headline_name(Task task) {
  switch (task) {
    case Task::classify: return "accuracy";
    case Task::segment: return "miou";
    case Task::complete: return "chamfer_x1e4";
  }
  return "value";
}

std::string metrics_csv(const Metrics& metrics) {
  std::ostringstream out;
  const auto write_row = [&](const MetricRow& r) {
    out << r.name << ',' << r.count;
    switch (metrics.task) {
      case Task::classify: out << ',' << number(r.accuracy); break;
      case Task::segment: out << ',' << number(r.accuracy) << ',' << number(r.iou); break;
      case Task::complete: out << ',' << number(r.chamfer_x1e4) << ',' << number(r.baseline_chamfer_x1e4); break;
    }
    out << '\n';
  };
  switch (metrics.task) {
    case Task::classify: out << "class,count,accuracy\n"; break;
    case Task::segment: out << "class,count,accuracy,iou\n"; break;
    case Task::complete: out << "class,count,chamfer_x1e4,baseline_chamfer_x1e4\n"; break;
  }
  for (const auto& row : metrics.classes) write_row(row);
  write_row(metrics.overall);
  return out.str();
}

std::string metrics_report(const Metrics& metrics) {
  const auto row_json = [&](const MetricRow& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["count"] = r.count;
    switch (metrics.task) {
      case Task::classify: j["accuracy"] = r.accuracy; break;
      case Task::segment:
        j["accuracy"] = r.accuracy;
        j["iou"] = r.iou;
        break;
      case Task::complete:
        j["chamfer_x1e4"] = r.chamfer_x1e4;
        j["baseline_chamfer_x1e4"] = r.baseline_chamfer_x1e4;
        break;
    }
    return j;
  };
  nlohmann::ordered_json report;
  report["task"] = std::string(to_string(metrics.task));
  report[headline_name(metrics.task)] = headline(metrics);
  report["overall"] = row_json(metrics.overall);
  report["classes"] = nlohmann::ordered_json::array();
  for (const auto& row : metrics.classes) report["classes"].push_back(row_json(row));
  if (!metrics.loss_curve.empty()) report["loss_curve"] = metrics.loss_curve;
  return report.dump(2) + "\n";
}

std::string loss_csv(std::span<const double> losses) {
  std::ostringstream out;
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) out << e << ',' << number(losses[e]) << '\n';
  return out.str();
}

SweepResult sweep_votes(const Model& model, const data::Dataset& dataset, std::span<const std::size_t> vote_counts,
                        std::span<const voting::Aggregation> aggregations, const EvalOptions& options) {
  require(!vote_counts.empty() && !aggregations.empty(), "sweep needs at least one vote count and aggregation");
  SweepResult sweep;
  sweep.metric = headline_name(model.task());
  for (const auto votes : vote_counts) {
    require(votes >= 1, "sweep vote counts must be positive");
    for (const auto aggregation : aggregations) {
      EvalOptions cell = options;
      cell.votes_test = votes;
      cell.aggregation = aggregation;
      sweep.cells.push_back({votes, aggregation, headline(evaluate(model, dataset, cell))});
    }
  }
  return sweep;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "votes,aggregation," << sweep.metric << '\n';
  for (const auto& c : sweep.cells) out << c.votes << ',' << voting::to_string(c.aggregation) << ',' << number(c.value) << '\n';
  return out.str();
}

}  // namespace psv::pipeline
