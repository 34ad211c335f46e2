#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "psv/error.hpp"
#include "psv/pipeline.hpp"

using namespace psv;
using namespace psv::pipeline;

namespace {

constexpr std::string_view kSmallClassify = R"(task=classify
n_sets=8
radius=0.3
latent_dim=16
point_widths=16,32
vote_hidden=32
head_hidden=32
max_votes_train=4
epochs=1
batch_size=4
num_classes=5
)";

TrainConfig small_config(std::string_view extra = {}) {
  return parse_config(std::string(kSmallClassify) + std::string(extra), "small").config;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Segmentation dataset of `n` random clouds whose points are split evenly
/// between parts 0 and 1.
data::Dataset balanced_two_part(std::size_t n, std::size_t points) {
  data::Dataset d;
  d.task = Task::segment;
  d.num_parts = 2;
  d.class_names = {"thing"};
  for (std::size_t i = 0; i < n; ++i) {
    data::Sample s;
    s.name = "s" + std::to_string(i);
    s.cloud = test::random_cloud(points, 500 + i);
    for (std::size_t k = 0; k < points; ++k) s.cloud.labels.push_back(static_cast<int>(k % 2));
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config parsing") {
    const auto parsed = parse_config("# comment\nn_sets = 16\nradius=0.25\nvotes_test=all\npoint_widths=8, 16\n"
                                     "aggregation=max\n\n",
                                     "a.cfg");
    CHECK(parsed.config.encoder.n_sets == 16);
    CHECK(parsed.config.encoder.radius == 0.25);
    CHECK(parsed.config.votes_test == 0);
    CHECK(parsed.config.encoder.point_widths == std::vector<std::size_t>{8, 16});
    CHECK(parsed.config.aggregation == voting::Aggregation::max);
    CHECK_FALSE(parsed.config.encoder.variance_head);
    CHECK(parsed.keys == std::set<std::string>{"n_sets", "radius", "votes_test", "point_widths", "aggregation"});

    CHECK_THROWS_WITH_AS(parse_config("n_sets=4\nbogus=1\n", "b.cfg"), doctest::Contains("b.cfg:2"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_config("n_sets=4\nn_sets=5\n", "c.cfg"), doctest::Contains("duplicate"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_config("radius=wide\n", "d.cfg"), doctest::Contains("d.cfg:1"), ValidationError);
    CHECK_THROWS_AS(parse_config("epochs\n", "e.cfg"), ValidationError);
    CHECK_THROWS_AS(parse_config("epochs=-3\n", "f.cfg"), ValidationError);
  }

  TEST_CASE("required keys") {
    const auto parsed = parse_config("n_sets=16\nradius=0.2\nlatent_dim=64\nepochs=3\n", "r.cfg");
    CHECK_THROWS_WITH_AS(require_keys(parsed, required_config_keys()), doctest::Contains("'max_votes_train'"),
                         ValidationError);
    const auto full = parse_config("n_sets=16\nradius=0.2\nlatent_dim=64\nepochs=3\nmax_votes_train=2\n", "r.cfg");
    CHECK_NOTHROW(require_keys(full, required_config_keys()));
  }

  TEST_CASE("config text round trip and validation") {
    auto c = small_config("class_names=a,b,c,d,e\nseed=99\nlearning_rate=0.0025\n");
    const auto again = parse_config(to_text(c), "text").config;
    CHECK(to_text(again) == to_text(c));
    CHECK(again.class_names.size() == 5);
    CHECK(again.learning_rate == 0.0025);

    c.encoder.variance_head = false;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small_config();
    c.encoder.radius = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }

  TEST_CASE("toy datasets") {
    const auto shapes = open_dataset("toy://shapes5", Task::classify);
    CHECK(shapes.train.samples.size() == 500);
    CHECK(shapes.test.samples.size() == 150);
    CHECK(shapes.train.class_names.size() == 5);

    const auto parts = open_dataset("toy://cylinder_parts?count=20&points=64", Task::segment);
    CHECK(parts.train.samples.size() == 16);
    CHECK(parts.train.num_parts == 2);
    CHECK(parts.train.samples[0].cloud.size() == 64);

    const auto pairs = open_dataset("toy://completion2?count=10", Task::complete);
    CHECK(pairs.train.samples.size() + pairs.test.samples.size() == 20);
    for (const auto& s : pairs.test.samples) CHECK(s.complete.has_value());

    CHECK_THROWS_AS(open_dataset("toy://shapes5", Task::segment), TaskMismatchError);
    CHECK_THROWS_AS(open_dataset("toy://shapes5?colour=3", Task::classify), ValidationError);
    CHECK_THROWS_AS(open_dataset("toy://nothing", Task::classify), ValidationError);
    CHECK_THROWS_AS(open_dataset("/definitely/not/here", Task::classify), ValidationError);

    const auto all = select_split(parts, "all");
    CHECK(all.samples.size() == 20);
    CHECK_THROWS_AS(select_split(parts, "val"), ValidationError);
  }

  TEST_CASE("directory datasets") {
    test::TempDir dir("dataset");
    for (int i = 0; i < 5; ++i) {
      test::write_text(dir.path() / "train" / "cube" / ("c" + std::to_string(i) + ".xyz"), "0 0 0 0\n1 0 0 1\n");
      test::write_text(dir.path() / "train" / "ball" / ("b" + std::to_string(i) + ".xyz"), "0 0 0 2\n0 1 0 0\n");
    }
    test::write_text(dir.path() / "test" / "cube" / "t.xyz", "0 0 0 0\n1 1 0 1\n");
    const auto seg = open_dataset(dir.path().string(), Task::segment);
    CHECK(seg.train.samples.size() == 10);
    CHECK(seg.test.samples.size() == 1);
    CHECK(seg.train.num_parts == 3);
    CHECK(seg.test.samples[0].label == 1);
    CHECK(seg.train.class_names == std::vector<std::string>{"ball", "cube"});
  }

  TEST_CASE("classification harness") {
    const auto split = open_dataset("toy://shapes5?count=6&points=64", Task::classify);
    const auto& d = split.test;
    const auto perfect = evaluate_classification(
        d, [](const data::Sample& s, const geometry::PointCloud&, std::uint64_t) { return s.label; }, {});
    CHECK(perfect.overall.accuracy == 1.0);
    CHECK(perfect.overall.count == d.samples.size());
    const auto wrong = evaluate_classification(
        d, [](const data::Sample& s, const geometry::PointCloud&, std::uint64_t) { return s.label + 1; }, {});
    CHECK(wrong.overall.accuracy == 0.0);

    const auto csv = metrics_csv(perfect);
    CHECK(csv.rfind("class,count,accuracy\n", 0) == 0);
    CHECK(csv.find("\noverall," + std::to_string(d.samples.size()) + ",1\n") != std::string::npos);

    SUBCASE("partial inputs are cut before the predictor sees them") {
      EvalOptions opt;
      opt.partial = true;
      opt.seed = 4;
      std::vector<std::size_t> sizes(d.samples.size());
      evaluate_classification(
          d,
          [&](const data::Sample& s, const geometry::PointCloud& input, std::uint64_t) {
            for (std::size_t i = 0; i < d.samples.size(); ++i)
              if (&d.samples[i] == &s) sizes[i] = input.size();
            return 0;
          },
          opt);
      for (std::size_t i = 0; i < d.samples.size(); ++i) {
        CHECK(sizes[i] < d.samples[i].cloud.size());
        CHECK(sizes[i] == evaluation_input(d.samples[i], i, opt).size());
      }
    }
  }

  TEST_CASE("part IoU") {
    const std::vector<int> truth{0, 0, 1, 1}, comp{1, 1, 0, 0}, parts{0, 1}, three{0, 1, 2};
    CHECK(shape_part_iou(truth, truth, parts) == 1.0);
    CHECK(shape_part_iou(comp, truth, parts) == 0.0);
    CHECK(shape_part_iou(truth, truth, three) == 1.0);
    CHECK(shape_part_iou(std::vector<int>{0, 0, 0, 1}, truth, parts) == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0));
    CHECK_THROWS_AS(shape_part_iou(truth, parts, parts), ValidationError);
  }

  TEST_CASE("segmentation harness") {
    const auto d = balanced_two_part(40, 200);
    const auto exact = evaluate_segmentation(
        d, [](const data::Sample&, const geometry::PointCloud& in, std::uint64_t) { return in.labels; }, {});
    CHECK(exact.overall.iou == 1.0);
    CHECK(exact.overall.accuracy == 1.0);
    const auto complement = evaluate_segmentation(
        d,
        [](const data::Sample&, const geometry::PointCloud& in, std::uint64_t) {
          auto out = in.labels;
          for (auto& l : out) l = 1 - l;
          return out;
        },
        {});
    CHECK(complement.overall.iou == 0.0);

    SUBCASE("random predictions match an independent Monte Carlo estimate") {
      const auto random = evaluate_segmentation(
          d,
          [](const data::Sample&, const geometry::PointCloud& in, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            std::vector<int> out(in.size());
            for (auto& l : out) l = static_cast<int>(rng() % 2);
            return out;
          },
          {});
      // Oracle: IoU of a fair coin against a balanced truth, by direct counting.
      std::mt19937_64 rng(12345);
      double oracle = 0.0;
      const int trials = 2000;
      for (int t = 0; t < trials; ++t) {
        double shape = 0.0;
        std::array<int, 2> inter{}, uni{};
        for (int k = 0; k < 200; ++k) {
          const int truth = k % 2, pred = static_cast<int>(rng() % 2);
          for (int part = 0; part < 2; ++part) {
            inter[part] += (pred == part) && (truth == part);
            uni[part] += (pred == part) || (truth == part);
          }
        }
        for (int part = 0; part < 2; ++part) shape += static_cast<double>(inter[part]) / uni[part] / 2.0;
        oracle += shape / trials;
      }
      CHECK(oracle == doctest::Approx(1.0 / 3.0).epsilon(0.02));
      CHECK(std::abs(random.overall.iou - oracle) < 0.05);
    }
    SUBCASE("wrong length is an error") {
      CHECK_THROWS_AS(evaluate_segmentation(
                          d, [](const data::Sample&, const geometry::PointCloud&, std::uint64_t) { return std::vector<int>{0}; },
                          {}),
                      ValidationError);
    }
  }

  TEST_CASE("completion harness") {
    const auto split = open_dataset("toy://completion2?count=6&points=64", Task::complete);
    const auto& d = split.test;
    const auto truth = evaluate_completion(
        d, [](const data::Sample& s, const geometry::PointCloud&, std::uint64_t) { return *s.complete; }, {});
    CHECK(truth.overall.chamfer_x1e4 == 0.0);
    double baseline = 0.0;
    for (const auto& s : d.samples) baseline += 1e4 * geometry::chamfer_distance(s.cloud, *s.complete);
    CHECK(truth.overall.baseline_chamfer_x1e4 == doctest::Approx(baseline / d.samples.size()).epsilon(1e-12));
    CHECK(metrics_csv(truth).rfind("class,count,chamfer_x1e4,baseline_chamfer_x1e4\n", 0) == 0);

    auto broken = d;
    broken.samples[0].complete.reset();
    CHECK_THROWS_AS(evaluate_completion(
                        broken, [](const data::Sample& s, const geometry::PointCloud&, std::uint64_t) { return s.cloud; },
                        {}),
                    ValidationError);
    auto mislabeled = d;
    mislabeled.task = Task::classify;
    CHECK_THROWS_AS(evaluate_completion(
                        mislabeled,
                        [](const data::Sample& s, const geometry::PointCloud&, std::uint64_t) { return s.cloud; }, {}),
                    TaskMismatchError);
  }

  TEST_CASE("model inference helpers") {
    const Model model(small_config());
    const auto cloud = test::random_cloud(100, 3);
    const auto all = model.partition(cloud, 0, 5);
    const auto few = model.partition(cloud, 3, 5);
    CHECK(all.size() == 8);
    REQUIRE(few.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(few[i].centroid == all[i].centroid);
    CHECK(model.partition(test::random_cloud(5, 4), 0, 1).size() == 5);

    const auto z = model.latent(cloud, 0, 5);
    CHECK(z.size() == 16);
    CHECK(model.latent(cloud, 0, 5) == z);
    CHECK(model.class_logits(z).size() == 5);
    CHECK_THROWS_AS((void)model.fold(z), TaskMismatchError);
    CHECK_THROWS_AS((void)model.predict_parts(z, cloud.points, 0), TaskMismatchError);

    const auto mean_z = model.latent(cloud, 0, 5, voting::Aggregation::mean);
    CHECK(mean_z != z);

    const Model baseline(small_config("aggregation=max\n"));
    CHECK_THROWS_AS((void)baseline.latent(cloud, 0, 5, voting::Aggregation::voting), ValidationError);
  }

  TEST_CASE("training smoke, checkpoint round trip and determinism") {
    const auto split = open_dataset("toy://shapes5?count=2&points=64", Task::classify);
    test::TempDir dir("ckpt");
    auto result = train(small_config(), split.train);
    CHECK(result.loss_curve.size() == 1);
    CHECK(std::isfinite(result.loss_curve[0]));

    const auto path = dir.path() / "m.ckpt";
    save_checkpoint(path, *result.model, {1, "m", result.loss_curve}, result.optimizer.get());
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.info.epoch == 1);
    CHECK(loaded.info.loss_curve == result.loss_curve);
    CHECK(loaded.optimizer.steps == result.optimizer->step_count());
    CHECK(to_text(loaded.model->config()) == to_text(result.model->config()));

    EvalOptions opt;
    opt.partial = true;
    opt.seed = 8;
    CHECK(metrics_csv(evaluate(*loaded.model, split.train, opt)) == metrics_csv(evaluate(*result.model, split.train, opt)));
    for (std::size_t i = 0; i < split.train.samples.size(); ++i) {
      const auto& cloud = split.train.samples[i].cloud;
      CHECK(loaded.model->latent(cloud, 0, i) == result.model->latent(cloud, 0, i));
    }

    const auto again = train(small_config(), split.train);
    CHECK(again.loss_curve == result.loss_curve);
    CHECK(metrics_csv(evaluate(*again.model, split.test, opt)) == metrics_csv(evaluate(*result.model, split.test, opt)));

    CHECK_THROWS_AS(evaluate(*loaded.model, open_dataset("toy://cylinder_parts?count=4", Task::segment).test, opt),
                    TaskMismatchError);
  }

  TEST_CASE("checkpoint errors name the file") {
    test::TempDir dir("badckpt");
    const auto junk = dir.path() / "junk.ckpt";
    test::write_text(junk, "not a checkpoint at all");
    CHECK_THROWS_WITH_AS(load_checkpoint(junk), doctest::Contains("junk.ckpt"), ValidationError);

    Model model(small_config());
    const auto good = dir.path() / "good.ckpt";
    save_checkpoint(good, model, {});
    const auto bytes = read_file(good);
    test::write_text(dir.path() / "cut.ckpt", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.path() / "cut.ckpt"), doctest::Contains("cut.ckpt"), ValidationError);
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.ckpt"), ValidationError);
  }

  TEST_CASE("training rejects mismatched data") {
    const auto seg = open_dataset("toy://cylinder_parts?count=4", Task::segment);
    CHECK_THROWS_AS(train(small_config(), seg.train), TaskMismatchError);
    auto shapes = open_dataset("toy://shapes5?count=2&points=64", Task::classify).train;
    shapes.samples[0].label = 7;
    CHECK_THROWS_AS(train(small_config(), shapes), ValidationError);
  }

  TEST_CASE("divergent training aborts with a dump") {
    const auto data = open_dataset("toy://shapes5?count=4&points=64", Task::classify).train;
    test::TempDir dir("nan");
    const auto dump = dir.path() / "nan_dump.txt";
    TrainOptions opt;
    opt.dump_path = dump;
    // A step of 1e300 sends the weights into overflow on the next batch.
    CHECK_THROWS_WITH_AS(train(small_config("learning_rate=1e300\n"), data, opt),
                         doctest::Contains("non-finite"), NumericalError);
    const auto text = read_file(dump);
    CHECK(text.find("epoch=0") != std::string::npos);
    CHECK(text.find("samples=") != std::string::npos);
    CHECK(text.find("head.classify") != std::string::npos);
    CHECK(text.find("# config") != std::string::npos);
  }

  TEST_CASE("sweep") {
    const auto split = open_dataset("toy://shapes5?count=3&points=64", Task::classify);
    const Model model(small_config());
    const std::vector<std::size_t> counts{1, 2, 8};
    const std::vector<voting::Aggregation> aggs{voting::Aggregation::voting, voting::Aggregation::mean};
    EvalOptions opt;
    opt.seed = 3;
    const auto sweep = sweep_votes(model, split.test, counts, aggs, opt);
    REQUIRE(sweep.cells.size() == 6);
    CHECK(sweep.cells[2].votes == 2);
    CHECK(sweep.cells[3].aggregation == voting::Aggregation::mean);
    EvalOptions single = opt;
    single.votes_test = 2;
    single.aggregation = voting::Aggregation::mean;
    CHECK(sweep.cells[3].value == evaluate(model, split.test, single).overall.accuracy);

    const auto csv = sweep_csv(sweep);
    CHECK(csv.rfind("votes,aggregation,accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK_THROWS_AS(sweep_votes(model, split.test, std::vector<std::size_t>{0}, aggs, opt), ValidationError);
  }

  TEST_CASE("report curves") {
    const auto sweep = curves_from_csv("votes,aggregation,accuracy\n1,voting,0.5\n1,max,0.4\n2,voting,0.7\n", "s.csv");
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0].name == "voting");
    CHECK(sweep[0].points.size() == 2);
    CHECK(sweep[0].points[1] == std::pair<std::string, double>{"2", 0.7});

    const auto loss = curves_from_csv("epoch,loss\n0,2.5\n1,1.5\n", "l.csv");
    REQUIRE(loss.size() == 1);
    CHECK(loss[0].name == "loss");

    const auto metrics = curves_from_csv("class,count,accuracy,iou\na,3,0.5,0.25\noverall,3,0.5,0.25\n", "m.csv");
    REQUIRE(metrics.size() == 2);
    CHECK(metrics[1].name == "iou");

    CHECK_THROWS_WITH_AS(curves_from_csv("epoch,loss\n0,1\n1\n", "r.csv"), doctest::Contains("r.csv:3"), ValidationError);
    CHECK_THROWS_WITH_AS(curves_from_csv("epoch,loss\n0,abc\n", "n.csv"), doctest::Contains("n.csv:2"), ValidationError);
    CHECK_THROWS_WITH_AS(curves_from_csv("a,b\n1,2\n", "h.csv"), doctest::Contains("h.csv:1"), ValidationError);

    test::TempDir dir("report");
    const auto paths = write_curves(dir.path(), "run", loss);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].filename() == "run_loss.dat");
    CHECK(read_file(paths[0]) == "# loss\n0 2.5\n1 1.5\n");
  }

  TEST_CASE("metrics report and loss csv") {
    Metrics m;
    m.task = Task::segment;
    m.classes.push_back({"a", 2, 0.9, 0.8});
    m.overall = {"overall", 2, 0.9, 0.8};
    m.loss_curve = {1.0, 0.5};
    const auto report = metrics_report(m);
    CHECK(report.find("\"miou\": 0.8") != std::string::npos);
    CHECK(report.find("\"loss_curve\"") != std::string::npos);
    CHECK(loss_csv(m.loss_curve) == "epoch,loss\n0,1\n1,0.5\n");
  }
}
