#pragma once

// Task metrics, sweeps over vote counts, and their CSV / report forms.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psv/data.hpp"
#include "psv/pipeline/model.hpp"

namespace psv::pipeline {

struct EvalOptions {
  /// Votes per cloud; 0 uses all n_sets.
  std::size_t votes_test = 0;
  /// Plane-cut every input cloud before inference.
  bool partial = false;
  std::uint64_t seed = 0;
  std::size_t min_partial_points = 32;
  /// Overrides the model's trained aggregation.
  std::optional<voting::Aggregation> aggregation;
};

/// One row of a metrics table. Unused columns stay zero.
struct MetricRow {
  std::string name;
  std::size_t count = 0;
  /// Classification accuracy, or per-point accuracy for segmentation.
  double accuracy = 0.0;
  /// Mean per-shape part IoU (segmentation).
  double iou = 0.0;
  /// Mean Chamfer distance x 1e4 of the model and of the partial input itself.
  double chamfer_x1e4 = 0.0;
  double baseline_chamfer_x1e4 = 0.0;
};

struct Metrics {
  Task task = Task::classify;
  std::vector<MetricRow> classes;
  /// Classification: accuracy over all samples. Segmentation: iou is the mean
  /// over classes (mIoU), accuracy is over all points. Completion: means over
  /// all samples.
  MetricRow overall{"overall"};
  std::vector<double> loss_curve;
};

// Predictors see the sample, the cloud to run on, and the partition seed for it.
using ClassPredictor =
    std::function<int(const data::Sample& sample, const geometry::PointCloud& input, std::uint64_t seed)>;
using PartPredictor = std::function<std::vector<int>(const data::Sample& sample, const geometry::PointCloud& input,
                                                     std::uint64_t seed)>;
using CompletionPredictor = std::function<geometry::PointCloud(const data::Sample& sample,
                                                               const geometry::PointCloud& input, std::uint64_t seed)>;

/// The cloud a model sees for sample `index`: the sample itself, or its plane
/// cut when options.partial is set (part labels ride along).
geometry::PointCloud evaluation_input(const data::Sample& sample, std::size_t index, const EvalOptions& options);

/// Partition seed used for sample `index`.
std::uint64_t evaluation_seed(std::size_t index, const EvalOptions& options);

Metrics evaluate_classification(const data::Dataset& dataset, const ClassPredictor& predict,
                                const EvalOptions& options);
Metrics evaluate_classification(const Model& model, const data::Dataset& dataset, const EvalOptions& options);

/// Per-shape IoU averaged over `parts`; a part absent from both prediction and
/// ground truth scores 1.
double shape_part_iou(std::span<const int> predicted, std::span<const int> truth, std::span<const int> parts);

/// Per class: mean over its shapes of the per-shape IoU, where a shape's parts
/// are every part label seen for its class in the dataset. mIoU is the mean
/// over classes.
Metrics evaluate_segmentation(const data::Dataset& dataset, const PartPredictor& predict, const EvalOptions& options);
Metrics evaluate_segmentation(const Model& model, const data::Dataset& dataset, const EvalOptions& options);

/// Chamfer x 1e4 of predictions against complete clouds, next to the
/// identity-partial baseline (the input cloud scored as the prediction).
Metrics evaluate_completion(const data::Dataset& dataset, const CompletionPredictor& predict,
                            const EvalOptions& options);
Metrics evaluate_completion(const Model& model, const data::Dataset& dataset, const EvalOptions& options);

/// Dispatches on the model's task; throws TaskMismatchError if the dataset differs.
Metrics evaluate(const Model& model, const data::Dataset& dataset, const EvalOptions& options);

/// Headline value: accuracy, mIoU or Chamfer x 1e4.
double headline(const Metrics& metrics);
std::string headline_name(Task task);

/// Header row, one row per class, then "overall".
std::string metrics_csv(const Metrics& metrics);
/// JSON text with the same content plus the loss curve.
std::string metrics_report(const Metrics& metrics);
/// Two columns: epoch,loss.
std::string loss_csv(std::span<const double> losses);

struct SweepCell {
  std::size_t votes = 0;
  voting::Aggregation aggregation = voting::Aggregation::voting;
  double value = 0.0;
};

struct SweepResult {
  std::string metric;
  std::vector<SweepCell> cells;
};

/// One evaluation per (vote count, aggregation), counts outermost.
SweepResult sweep_votes(const Model& model, const data::Dataset& dataset, std::span<const std::size_t> vote_counts,
                        std::span<const voting::Aggregation> aggregations, const EvalOptions& options);

/// Header "votes,aggregation,<metric>", one row per cell.
std::string sweep_csv(const SweepResult& sweep);

}  // namespace psv::pipeline
