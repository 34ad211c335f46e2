#include "psv/pipeline/config.hpp"

#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "psv/error.hpp"

namespace psv::pipeline {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::size_t to_count(std::string_view v) {
  std::size_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) throw ValidationError("expected a non-negative integer");
  return out;
}

double to_real(std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ValidationError("expected a number");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("expected true or false");
}

std::vector<std::size_t> to_widths(std::string_view v) {
  std::vector<std::size_t> out;
  for (const auto item : split_list(v)) out.push_back(to_count(item));
  return out;
}

std::string real_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string widths_text(const std::vector<std::size_t>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

using Setter = std::function<void(TrainConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"task", [](TrainConfig& c, std::string_view v) { c.head.task = parse_task(v); }},
      {"n_sets", [](TrainConfig& c, std::string_view v) { c.encoder.n_sets = to_count(v); }},
      {"radius", [](TrainConfig& c, std::string_view v) { c.encoder.radius = to_real(v); }},
      {"max_points_per_set", [](TrainConfig& c, std::string_view v) { c.encoder.max_points_per_set = to_count(v); }},
      {"latent_dim", [](TrainConfig& c, std::string_view v) { c.encoder.latent_dim = to_count(v); }},
      {"point_widths", [](TrainConfig& c, std::string_view v) { c.encoder.point_widths = to_widths(v); }},
      {"vote_hidden", [](TrainConfig& c, std::string_view v) { c.encoder.vote_hidden = to_widths(v); }},
      {"head_hidden", [](TrainConfig& c, std::string_view v) { c.head.hidden = to_widths(v); }},
      {"fold_hidden", [](TrainConfig& c, std::string_view v) { c.head.fold_hidden = to_widths(v); }},
      {"num_classes", [](TrainConfig& c, std::string_view v) { c.head.num_classes = to_count(v); }},
      {"num_parts", [](TrainConfig& c, std::string_view v) { c.head.num_parts = to_count(v); }},
      {"num_categories", [](TrainConfig& c, std::string_view v) { c.head.num_categories = to_count(v); }},
      {"category_onehot", [](TrainConfig& c, std::string_view v) { c.head.category_onehot = to_bool(v); }},
      {"output_points", [](TrainConfig& c, std::string_view v) { c.head.output_points = to_count(v); }},
      {"max_votes_train", [](TrainConfig& c, std::string_view v) { c.max_votes_train = to_count(v); }},
      {"votes_test",
       [](TrainConfig& c, std::string_view v) { c.votes_test = (v == "all") ? 0 : to_count(v); }},
      {"batch_size", [](TrainConfig& c, std::string_view v) { c.batch_size = to_count(v); }},
      {"epochs", [](TrainConfig& c, std::string_view v) { c.epochs = to_count(v); }},
      {"learning_rate", [](TrainConfig& c, std::string_view v) { c.learning_rate = to_real(v); }},
      {"lr_decay_every", [](TrainConfig& c, std::string_view v) { c.lr_decay_every = to_count(v); }},
      {"lr_decay_factor", [](TrainConfig& c, std::string_view v) { c.lr_decay_factor = to_real(v); }},
      {"batch_norm",
       [](TrainConfig& c, std::string_view v) { c.encoder.batch_norm = c.head.batch_norm = to_bool(v); }},
      {"dropout", [](TrainConfig& c, std::string_view v) { c.head.dropout = to_real(v); }},
      {"aggregation",
       [](TrainConfig& c, std::string_view v) {
         c.aggregation = voting::parse_aggregation(v);
         c.encoder.variance_head = c.aggregation == voting::Aggregation::voting;
       }},
      {"seed", [](TrainConfig& c, std::string_view v) { c.seed = to_count(v); }},
      {"min_partial_points", [](TrainConfig& c, std::string_view v) { c.min_partial_points = to_count(v); }},
      {"class_names",
       [](TrainConfig& c, std::string_view v) {
         c.class_names.clear();
         for (const auto name : split_list(v)) c.class_names.emplace_back(name);
       }},
  };
  return table;
}

constexpr std::array<std::string_view, 5> kRequired{"n_sets", "radius", "latent_dim", "max_votes_train", "epochs"};

}  // namespace

void TrainConfig::validate() const {
  encoder.validate();
  head.validate();
  require(max_votes_train >= 1, "max_votes_train must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(epochs >= 1, "epochs must be at least 1");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(lr_decay_factor > 0.0, "lr_decay_factor must be positive");
  require(min_partial_points >= 1, "min_partial_points must be at least 1");
  require(encoder.variance_head == (aggregation == voting::Aggregation::voting),
          "the variance head must be enabled exactly when aggregation is voting");
}

ParsedConfig parse_config(std::string_view text, const std::string& source) {
  ParsedConfig parsed;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto newline = text.find('\n', start);
    std::string_view line = text.substr(start, newline == std::string_view::npos ? newline : newline - start);
    start = newline == std::string_view::npos ? text.size() + 1 : newline + 1;
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError(where + "expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ValidationError(where + "unknown config key '" + key + "'");
    if (!parsed.keys.insert(key).second) throw ValidationError(where + "duplicate config key '" + key + "'");
    try {
      it->second(parsed.config, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + "bad value for '" + key + "': " + e.what());
    }
  }
  try {
    parsed.config.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return parsed;
}

ParsedConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

void require_keys(const ParsedConfig& parsed, std::span<const std::string_view> keys) {
  for (const auto key : keys)
    require(parsed.keys.count(std::string(key)) > 0, "missing required config key '" + std::string(key) + "'");
}

std::span<const std::string_view> required_config_keys() { return kRequired; }

std::string to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "task=" << to_string(c.task()) << '\n'
      << "n_sets=" << c.encoder.n_sets << '\n'
      << "radius=" << real_text(c.encoder.radius) << '\n'
      << "max_points_per_set=" << c.encoder.max_points_per_set << '\n'
      << "latent_dim=" << c.encoder.latent_dim << '\n'
      << "point_widths=" << widths_text(c.encoder.point_widths) << '\n'
      << "vote_hidden=" << widths_text(c.encoder.vote_hidden) << '\n'
      << "head_hidden=" << widths_text(c.head.hidden) << '\n'
      << "fold_hidden=" << widths_text(c.head.fold_hidden) << '\n'
      << "num_classes=" << c.head.num_classes << '\n'
      << "num_parts=" << c.head.num_parts << '\n'
      << "num_categories=" << c.head.num_categories << '\n'
      << "category_onehot=" << (c.head.category_onehot ? "true" : "false") << '\n'
      << "output_points=" << c.head.output_points << '\n'
      << "max_votes_train=" << c.max_votes_train << '\n'
      << "votes_test=" << (c.votes_test == 0 ? std::string("all") : std::to_string(c.votes_test)) << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "epochs=" << c.epochs << '\n'
      << "learning_rate=" << real_text(c.learning_rate) << '\n'
      << "lr_decay_every=" << c.lr_decay_every << '\n'
      << "lr_decay_factor=" << real_text(c.lr_decay_factor) << '\n'
      << "batch_norm=" << (c.encoder.batch_norm ? "true" : "false") << '\n'
      << "dropout=" << real_text(c.head.dropout) << '\n'
      << "aggregation=" << voting::to_string(c.aggregation) << '\n'
      << "seed=" << c.seed << '\n'
      << "min_partial_points=" << c.min_partial_points << '\n';
  out << "class_names=";
  for (std::size_t i = 0; i < c.class_names.size(); ++i) out << (i ? "," : "") << c.class_names[i];
  out << '\n';
  return out.str();
}

}  // namespace psv::pipeline
