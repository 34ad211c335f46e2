#include "psv/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "psv/error.hpp"
#include "psv/seed.hpp"

namespace psv::pipeline {

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size,
                                                   bool merge_singletons) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // Batch norm cannot normalize a single example.
  if (merge_singletons && batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

void write_dump(const std::filesystem::path& path, const Model& model, std::size_t epoch, std::size_t batch,
                double loss, std::span<const data::Sample* const> samples) {
  if (path.empty()) return;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "epoch=" << epoch << "\nbatch=" << batch << "\nloss=" << loss << "\nsamples=";
  for (std::size_t i = 0; i < samples.size(); ++i) out << (i ? "," : "") << samples[i]->name;
  out << "\n\n# parameter max_abs non_finite\n";
  for (const auto& p : model.store().parameters()) {
    double max_abs = 0.0;
    std::size_t bad = 0;
    for (const double v : p.value.values()) {
      if (!std::isfinite(v)) ++bad;
      else max_abs = std::max(max_abs, std::abs(v));
    }
    out << p.name << ' ' << max_abs << ' ' << bad << '\n';
  }
  out << "\n# config\n" << to_text(model.config());
}

}  // namespace

void check_dataset(const TrainConfig& config, const data::Dataset& dataset) {
  if (dataset.task != config.task())
    throw TaskMismatchError("dataset is for " + std::string(to_string(dataset.task)) + ", config trains " +
                            std::string(to_string(config.task())));
  dataset.validate();
  require(!dataset.samples.empty(), "dataset has no samples");
  for (const auto& s : dataset.samples) {
    switch (config.task()) {
      case Task::classify:
        require(static_cast<std::size_t>(s.label) < config.head.num_classes,
                "sample '" + s.name + "' has class " + std::to_string(s.label) + " but num_classes is " +
                    std::to_string(config.head.num_classes));
        break;
      case Task::segment:
        require(static_cast<std::size_t>(s.label) < config.head.num_categories,
                "sample '" + s.name + "' has category " + std::to_string(s.label) + " but num_categories is " +
                    std::to_string(config.head.num_categories));
        for (const int part : s.cloud.labels)
          require(static_cast<std::size_t>(part) < config.head.num_parts,
                  "sample '" + s.name + "' has part " + std::to_string(part) + " but num_parts is " +
                      std::to_string(config.head.num_parts));
        break;
      case Task::complete: require(s.complete.has_value(), "sample '" + s.name + "' has no complete cloud"); break;
    }
  }
}

nn::Var batch_loss(nn::Graph& g, const Model& model, std::span<const data::Sample* const> batch,
                   std::span<const std::vector<geometry::LocalPointSet>> groups, const nn::ForwardContext& ctx) {
  require(batch.size() == groups.size(), "one set group per example is required");
  const nn::Var z = model.latent(g, groups, ctx);
  switch (model.task()) {
    case Task::classify: {
      std::vector<int> targets;
      for (const auto* s : batch) targets.push_back(s->label);
      return nn::softmax_cross_entropy(g, model.classify(g, z, ctx), targets);
    }
    case Task::segment: {
      std::vector<heads::SegmentationInput> inputs;
      std::vector<int> targets;
      for (const auto* s : batch) {
        inputs.push_back({s->cloud.points, s->label});
        targets.insert(targets.end(), s->cloud.labels.begin(), s->cloud.labels.end());
      }
      return nn::softmax_cross_entropy(g, model.segment(g, z, inputs, ctx), targets);
    }
    case Task::complete: {
      const nn::Var points = model.fold(g, z, ctx);
      const std::size_t m = g.value(points).rows() / batch.size();
      std::vector<std::size_t> offsets;
      std::vector<std::span<const Vec3>> targets;
      for (std::size_t b = 0; b <= batch.size(); ++b) offsets.push_back(b * m);
      for (const auto* s : batch) targets.emplace_back(s->complete->points);
      return nn::chamfer_loss(g, points, offsets, targets);
    }
  }
  throw ValidationError("unknown task");
}

TrainResult train(const TrainConfig& config, const data::Dataset& dataset, const TrainOptions& options) {
  config.validate();
  check_dataset(config, dataset);
  const bool needs_pairs = config.encoder.batch_norm || config.head.batch_norm;
  require(!needs_pairs || dataset.samples.size() >= 2, "batch-norm training needs at least two samples");

  TrainResult result;
  result.model = std::make_unique<Model>(config);
  Model& model = *result.model;
  result.optimizer = std::make_unique<nn::Adam>(model.store(), nn::AdamOptions{config.learning_rate});
  nn::Adam& adam = *result.optimizer;

  const std::size_t n = dataset.samples.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(config.seed, 1000 + epoch));
    adam.set_learning_rate(nn::step_decay(config.learning_rate, epoch, config.lr_decay_every, config.lr_decay_factor));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    const auto batches = make_batches(std::move(order), config.batch_size, needs_pairs);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<const data::Sample*> samples;
      std::vector<std::vector<geometry::LocalPointSet>> groups;
      for (const auto index : batches[b]) {
        const auto& sample = dataset.samples[index];
        samples.push_back(&sample);
        auto sets = model.partition(sample.cloud, 0, rng());
        auto keep = voting::select_training_votes(sets.size(), config.max_votes_train, rng);
        std::vector<geometry::LocalPointSet> chosen;
        chosen.reserve(keep.size());
        for (const auto k : keep) chosen.push_back(std::move(sets[k]));
        groups.push_back(std::move(chosen));
      }

      nn::Graph g;
      const nn::Var loss = batch_loss(g, model, samples, groups, {nn::Mode::train, &rng});
      const double value = g.value(loss)[0];
      const auto fail = [&](const std::string& what) {
        write_dump(options.dump_path, model, epoch, b, value, samples);
        std::ostringstream msg;
        msg << what << " at epoch " << epoch << ", batch " << b;
        if (!options.dump_path.empty()) msg << "; state written to " << options.dump_path.string();
        throw NumericalError(msg.str());
      };
      if (!std::isfinite(value)) fail("non-finite training loss " + std::to_string(value));
      model.store().zero_grad();
      g.backward(loss);
      for (const auto& p : model.store().parameters())
        if (!p.grad.all_finite()) fail("non-finite gradient for '" + p.name + "'");
      adam.step();
      epoch_loss += value * static_cast<double>(samples.size());
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    if (options.on_epoch) options.on_epoch(epoch, result.loss_curve.back());
  }
  model.round_to_float();
  return result;
}

}  // namespace psv::pipeline
