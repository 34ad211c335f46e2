// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Training criteria use the frozen configs in
// configs/ and the procedural toy datasets.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "psv/error.hpp"
#include "psv/geometry.hpp"
#include "psv/pipeline.hpp"
#include "psv/runtime.hpp"
#include "psv/voting.hpp"

#ifndef PSV_CONFIG_DIR
#error "PSV_CONFIG_DIR must point at the configs directory"
#endif

namespace {

using namespace psv;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

pipeline::TrainConfig frozen_config(const std::string& name) {
  return pipeline::read_config(fs::path(PSV_CONFIG_DIR) / name).config;
}

geometry::PointCloud uniform_cloud(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  geometry::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

// -- 1 ----------------------------------------------------------------------

Outcome closed_form_voting() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean_u(-0.3, 0.3), sigma_u(0.02, 0.1);
  std::uniform_int_distribution<int> count_u(1, 10);
  constexpr double step = 1e-3;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<encoder::VoteDistribution> votes(static_cast<std::size_t>(count_u(rng)));
    for (auto& v : votes)
      for (int d = 0; d < 2; ++d) {
        v.mean.push_back(mean_u(rng));
        const double s = sigma_u(rng);
        v.variance.push_back(s * s);
      }
    const voting::LatentPosterior posterior(votes);
    const auto z = voting::optimal_latent(posterior);

    std::array<double, 2> lo{}, hi{};
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::numeric_limits<double>::infinity();
      hi[d] = -lo[d];
      for (const auto& v : votes) {
        const double s = std::sqrt(v.variance[d]);
        lo[d] = std::min(lo[d], v.mean[d] - 3.0 * s);
        hi[d] = std::max(hi[d], v.mean[d] + 3.0 * s);
      }
    }
    const auto nx = static_cast<std::size_t>((hi[0] - lo[0]) / step) + 1;
    const auto ny = static_cast<std::size_t>((hi[1] - lo[1]) / step) + 1;
    double best = -std::numeric_limits<double>::infinity();
    std::array<double, 2> arg{};
    std::array<double, 2> p{};
    for (std::size_t i = 0; i < nx; ++i) {
      p[0] = lo[0] + static_cast<double>(i) * step;
      for (std::size_t j = 0; j < ny; ++j) {
        p[1] = lo[1] + static_cast<double>(j) * step;
        const double v = voting::log_product_density(posterior, p);
        if (v > best) {
          best = v;
          arg = p;
        }
      }
    }
    worst = std::max({worst, std::abs(arg[0] - z[0]), std::abs(arg[1] - z[1])});
  }
  const double secs = seconds_since(start);
  return {worst <= step && secs < 10.0,
          fmt("max |grid - closed form| = %.2e (step %.0e), %.1f s", worst, step, secs)};
}

// -- 2 ----------------------------------------------------------------------

struct GradientCase {
  std::string component;
  std::string prefix;
  Task task;
};

Outcome gradient_correctness() {
  const auto start = Clock::now();
  const std::array<GradientCase, 4> cases{{{"encoder", "encoder.", Task::classify},
                                           {"classify head", "head.classify", Task::classify},
                                           {"segment head", "head.segment", Task::segment},
                                           {"fold head", "head.fold", Task::complete}}};
  constexpr std::size_t kChecked = 60;
  constexpr double kTolerance = 1e-4, kFloor = 1e-6, kStep = 1e-6;

  std::ostringstream detail;
  bool pass = true;
  for (const auto& c : cases) {
    pipeline::TrainConfig config;
    config.head.task = c.task;
    config.encoder.n_sets = 4;
    config.encoder.radius = 0.4;
    config.encoder.latent_dim = 8;
    config.encoder.point_widths = {16, 16};
    config.encoder.vote_hidden = {16};
    config.head.hidden = {16};
    config.head.num_classes = 3;
    config.head.num_parts = 2;
    config.head.num_categories = 1;
    config.head.fold_hidden = {16};
    config.head.output_points = 16;
    config.seed = 31;
    pipeline::Model model(config);

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    std::vector<std::pair<nn::Parameter*, std::size_t>> entries;
    for (auto& p : model.store().parameters()) {
      if (p.name.rfind(c.prefix, 0) != 0) continue;
      // Moves zero biases off ReLU kinks.
      for (auto& v : p.value.values()) v += jitter(rng);
      for (std::size_t i = 0; i < p.value.size(); ++i) entries.emplace_back(&p, i);
    }
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(std::min(entries.size(), kChecked));

    std::vector<data::Sample> samples(3);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      samples[s].name = "s" + std::to_string(s);
      samples[s].cloud = uniform_cloud(40, rng);
      samples[s].label = static_cast<int>(s % 3);
      if (c.task == Task::segment) {
        samples[s].label = 0;
        for (const auto& q : samples[s].cloud.points) samples[s].cloud.labels.push_back(q[2] > 0.0 ? 1 : 0);
      }
      if (c.task == Task::complete) samples[s].complete = uniform_cloud(30, rng);
    }
    std::vector<const data::Sample*> batch;
    std::vector<std::vector<geometry::LocalPointSet>> groups;
    for (const auto& s : samples) {
      batch.push_back(&s);
      groups.push_back(model.partition(s.cloud, 0, 50 + batch.size()));
    }
    // Dropout masks are redrawn from the same seed on every evaluation.
    const auto loss_value = [&](bool backward) {
      nn::Graph g;
      std::mt19937_64 dropout(99);
      const auto l = pipeline::batch_loss(g, model, batch, groups, {nn::Mode::train, &dropout});
      if (backward) g.backward(l);
      return g.value(l)[0];
    };

    model.store().zero_grad();
    (void)loss_value(true);
    double worst = 0.0;
    for (const auto& [p, i] : entries) {
      const double saved = p->value[i];
      p->value[i] = saved + kStep;
      const double up = loss_value(false);
      p->value[i] = saved - kStep;
      const double down = loss_value(false);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      const double analytic = p->grad[i];
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(kFloor, std::abs(numeric) + std::abs(analytic)));
    }
    pass = pass && entries.size() >= 50 && worst < kTolerance;
    detail << c.component << " " << entries.size() << " entries max rel err " << fmt("%.1e", worst) << "; ";
  }
  const double secs = seconds_since(start);
  detail << fmt("%.1f s", secs);
  return {pass && secs < 60.0, detail.str()};
}

// -- 3 ----------------------------------------------------------------------

double naive_chamfer(const geometry::PointCloud& a, const geometry::PointCloud& b) {
  const auto directed = [](const geometry::PointCloud& from, const geometry::PointCloud& to) {
    double total = 0.0;
    for (const auto& p : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to.points) {
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      total += best;
    }
    return total / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

Outcome chamfer_oracle() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  bool self_zero = true;
  for (int i = 0; i < 25; ++i) {
    const auto a = uniform_cloud(50, rng), b = uniform_cloud(50, rng);
    worst = std::max(worst, std::abs(geometry::chamfer_distance(a, b) - naive_chamfer(a, b)));
    self_zero = self_zero && geometry::chamfer_distance(a, a) == 0.0;
  }
  return {worst <= 1e-9 && self_zero,
          fmt("max |library - brute force| = %.1e, chamfer(a,a) == 0: %s", worst, self_zero ? "yes" : "no")};
}

// -- 4 ----------------------------------------------------------------------

Outcome fps_property() {
  std::mt19937_64 rng(4);
  std::size_t violations = 0, steps = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto cloud = uniform_cloud(100, rng);
    const auto order = geometry::farthest_point_sampling(cloud, 100, rng());
    std::vector<double> nearest(cloud.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(cloud.size(), false);
    for (std::size_t step = 0; step < order.size(); ++step) {
      if (step > 0) {
        // Exhaustive: the largest distance to the chosen set among unchosen points.
        double best = -1.0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
          if (chosen[i]) continue;
          double d = std::numeric_limits<double>::infinity();
          for (std::size_t s = 0; s < step; ++s) d = std::min(d, squared_distance(cloud.points[i], cloud.points[order[s]]));
          best = std::max(best, d);
        }
        double mine = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < step; ++s)
          mine = std::min(mine, squared_distance(cloud.points[order[step]], cloud.points[order[s]]));
        if (chosen[order[step]] || mine != best) ++violations;
        ++steps;
      }
      chosen[order[step]] = true;
    }
  }
  return {violations == 0, fmt("%zu steps checked, %zu violations", steps, violations)};
}

// -- shared classification runs (5, 6, 9) -----------------------------------

struct ClassifyRun {
  std::unique_ptr<pipeline::Model> model;
  double seconds = 0.0;
};

class ClassifyRuns {
 public:
  ClassifyRuns() : split_(pipeline::open_dataset("toy://shapes5", Task::classify)) {}

  const pipeline::DatasetSplit& split() const { return split_; }

  ClassifyRun& get(std::uint64_t seed) {
    auto& run = runs_[seed];
    if (!run.model) {
      auto config = frozen_config("toy_classify.cfg");
      config.seed = seed;
      const auto start = Clock::now();
      run.model = std::move(pipeline::train(config, split_.train).model);
      run.seconds = seconds_since(start);
      std::printf("  trained classifier seed %llu in %.1f s\n", static_cast<unsigned long long>(seed), run.seconds);
      std::fflush(stdout);
    }
    return run;
  }

  double accuracy(std::uint64_t seed, pipeline::EvalOptions options) {
    options.seed = seed;
    return pipeline::evaluate(*get(seed).model, split_.test, options).overall.accuracy;
  }

 private:
  pipeline::DatasetSplit split_;
  std::map<std::uint64_t, ClassifyRun> runs_;
};

Outcome toy_classification(ClassifyRuns& runs) {
  double full = 0.0, partial = 0.0, slowest = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    full += runs.accuracy(seed, {}) / 3.0;
    pipeline::EvalOptions o;
    o.partial = true;
    partial += runs.accuracy(seed, o) / 3.0;
    slowest = std::max(slowest, runs.get(seed).seconds);
  }
  const auto& split = runs.split();
  const bool sizes = split.train.samples.size() == 500 && split.test.samples.size() == 150;
  return {sizes && full >= 0.95 && partial >= 0.85 && slowest <= 600.0,
          fmt("%zu/%zu samples; mean accuracy complete %.3f (>= 0.95), partial %.3f (>= 0.85); slowest training %.0f s",
              split.train.samples.size(), split.test.samples.size(), full, partial, slowest)};
}

Outcome vote_trend(ClassifyRuns& runs) {
  double few = 0.0, all = 0.0, mean_pool = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    pipeline::EvalOptions o;
    o.partial = true;
    o.votes_test = 2;
    few += runs.accuracy(seed, o) / 5.0;
    o.votes_test = 16;
    all += runs.accuracy(seed, o) / 5.0;
    o.aggregation = voting::Aggregation::mean;
    mean_pool += runs.accuracy(seed, o) / 5.0;
  }
  return {all >= few + 0.03 && all >= mean_pool,
          fmt("partial accuracy over 5 seeds: 2 votes %.3f, 16 votes %.3f, 16 votes mean-pooled %.3f", few, all,
              mean_pool)};
}

// -- 7, 10 ------------------------------------------------------------------

Outcome toy_completion(std::unique_ptr<pipeline::Model>& trained) {
  const auto split = pipeline::open_dataset("toy://completion2", Task::complete);
  const auto config = frozen_config("toy_complete.cfg");
  pipeline::Model untrained(config);
  untrained.round_to_float();
  const auto before = pipeline::evaluate(untrained, split.test, {}).overall;

  const auto start = Clock::now();
  trained = std::move(pipeline::train(config, split.train).model);
  const double secs = seconds_since(start);
  const auto after = pipeline::evaluate(*trained, split.test, {}).overall;
  const std::size_t pairs = split.train.samples.size() + split.test.samples.size();
  return {pairs == 250 && after.chamfer_x1e4 < after.baseline_chamfer_x1e4 &&
              after.chamfer_x1e4 < 0.5 * before.chamfer_x1e4 && secs <= 900.0,
          fmt("%zu train pairs; test CDx1e4 %.1f vs identity-partial %.1f and untrained %.1f; training %.0f s",
              split.train.samples.size(), after.chamfer_x1e4, after.baseline_chamfer_x1e4, before.chamfer_x1e4, secs)};
}

Outcome diverse_prediction(const pipeline::Model& model) {
  const auto split = pipeline::open_dataset("toy://completion2", Task::complete);
  bool endpoint_exact = true;
  double smallest_gap = std::numeric_limits<double>::infinity();
  const std::size_t checked = std::min<std::size_t>(10, split.test.samples.size());
  for (std::size_t i = 0; i < checked; ++i) {
    const auto votes = model.votes(split.test.samples[i].cloud, 0, i);
    const auto deterministic = model.fold(model.combine(votes));
    const auto latents = voting::interpolated_latents(voting::LatentPosterior(votes), i % votes.size(), 4);
    std::vector<geometry::PointCloud> outputs;
    for (const auto& z : latents) outputs.push_back(model.fold(z));
    endpoint_exact = endpoint_exact && outputs.front().points == deterministic.points;
    for (std::size_t a = 0; a < outputs.size(); ++a)
      for (std::size_t b = a + 1; b < outputs.size(); ++b)
        smallest_gap = std::min(smallest_gap, geometry::chamfer_distance(outputs[a], outputs[b]));
  }
  return {endpoint_exact && smallest_gap > 0.0,
          fmt("%zu clouds; t=0 equals the deterministic completion: %s; smallest chamfer between distinct t %.2e",
              checked, endpoint_exact ? "yes" : "no", smallest_gap)};
}

// -- 8 ----------------------------------------------------------------------

Outcome toy_segmentation() {
  const auto split = pipeline::open_dataset("toy://cylinder_parts", Task::segment);
  const auto start = Clock::now();
  const auto model = std::move(pipeline::train(frozen_config("toy_segment.cfg"), split.train).model);
  const double secs = seconds_since(start);
  const auto m = pipeline::evaluate(*model, split.test, {}).overall;

  const std::size_t parts = split.test.num_parts;
  const auto random = pipeline::evaluate_segmentation(
      split.test,
      [parts](const data::Sample&, const geometry::PointCloud& in, std::uint64_t seed) {
        std::mt19937_64 rng(seed + 7);
        std::uniform_int_distribution<std::size_t> u(0, parts - 1);
        std::vector<int> out(in.size());
        for (auto& l : out) l = static_cast<int>(u(rng));
        return out;
      },
      {});

  // Oracle: expected per-shape IoU of uniform guesses against each test
  // shape's true labels, by direct simulation.
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> u(0, parts - 1);
  double oracle = 0.0;
  constexpr int kTrials = 50;
  for (const auto& s : split.test.samples) {
    double shape = 0.0;
    for (int t = 0; t < kTrials; ++t) {
      std::vector<std::size_t> inter(parts, 0), uni(parts, 0);
      for (const int truth : s.cloud.labels) {
        const auto pred = u(rng);
        for (std::size_t p = 0; p < parts; ++p) {
          const bool in_pred = pred == p, in_truth = static_cast<std::size_t>(truth) == p;
          inter[p] += in_pred && in_truth;
          uni[p] += in_pred || in_truth;
        }
      }
      for (std::size_t p = 0; p < parts; ++p)
        shape += (uni[p] == 0 ? 1.0 : static_cast<double>(inter[p]) / static_cast<double>(uni[p])) /
                 static_cast<double>(parts);
    }
    oracle += shape / kTrials / static_cast<double>(split.test.samples.size());
  }
  return {m.accuracy >= 0.90 && m.iou >= 0.75 && secs <= 600.0 && std::abs(random.overall.iou - oracle) < 0.05,
          fmt("accuracy %.3f (>= 0.90), mIoU %.3f (>= 0.75), training %.0f s; random mIoU %.3f vs Monte Carlo %.3f",
              m.accuracy, m.iou, secs, random.overall.iou, oracle)};
}

// -- 9 ----------------------------------------------------------------------

Outcome determinism(ClassifyRuns& runs) {
  auto config = frozen_config("toy_classify.cfg");
  config.epochs = 5;
  config.seed = 17;
  const auto& split = runs.split();
  pipeline::EvalOptions o;
  o.partial = true;
  o.seed = 17;
  std::string csv[2];
  for (auto& text : csv) text = pipeline::metrics_csv(pipeline::evaluate(*pipeline::train(config, split.train).model, split.test, o));
  const bool same_runs = csv[0] == csv[1];

  auto& model = *runs.get(0).model;
  const auto path = fs::temp_directory_path() / ("psv_acceptance_" + std::to_string(::getpid()) + ".ckpt");
  pipeline::save_checkpoint(path, model, {});
  const auto loaded = pipeline::load_checkpoint(path);
  fs::remove(path);
  const auto in_memory = pipeline::metrics_csv(pipeline::evaluate(model, split.test, o));
  const auto reloaded = pipeline::metrics_csv(pipeline::evaluate(*loaded.model, split.test, o));
  bool same_logits = true;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& cloud = split.test.samples[i].cloud;
    same_logits = same_logits && model.class_logits(model.latent(cloud, 0, i)) ==
                                     loaded.model->class_logits(loaded.model->latent(cloud, 0, i));
  }
  return {same_runs && in_memory == reloaded && same_logits,
          fmt("repeated runs byte-identical: %s; reloaded checkpoint metrics identical: %s, logits identical: %s",
              same_runs ? "yes" : "no", in_memory == reloaded ? "yes" : "no", same_logits ? "yes" : "no")};
}

}  // namespace

// Arguments, if any, select which criteria to run.
int main(int argc, char** argv) {
  configure_allocator();
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  std::map<int, Outcome> results;
  const auto run = [&](int id, const std::function<Outcome()>& check) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
    const auto start = Clock::now();
    try {
      results[id] = check();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s criterion %d: %s [%.0f s]\n", results[id].pass ? "PASS" : "FAIL", id, results[id].detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  };

  ClassifyRuns runs;
  std::unique_ptr<pipeline::Model> completion;
  run(1, closed_form_voting);
  run(2, gradient_correctness);
  run(3, chamfer_oracle);
  run(4, fps_property);
  run(5, [&] { return toy_classification(runs); });
  run(6, [&] { return vote_trend(runs); });
  run(7, [&] { return toy_completion(completion); });
  run(8, toy_segmentation);
  run(9, [&] { return determinism(runs); });
  run(10, [&] {
    if (!completion) return Outcome{false, "no trained completion model"};
    return diverse_prediction(*completion);
  });

  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.second.pass; });
  std::printf("%zu/%zu criteria passed\n", results.size() - static_cast<std::size_t>(failed), results.size());
  return failed == 0 ? 0 : 1;
}
