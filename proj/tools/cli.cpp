#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lga/error.hpp"
#include "lga/evaluate.hpp"
#include "lga/fusion.hpp"
#include "lga/llm_client.hpp"
#include "lga/store.hpp"
#include "lga/synthetic.hpp"
#include "lga/text_anatomy.hpp"

namespace lga::cli {

namespace {

// Config files may be TOML/INI (CLI11's native format) or a flat JSON
// object whose keys are option long names.
class TomlOrJsonConfig : public CLI::ConfigBase {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::stringstream buf;
    buf << input.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream again(text);
      return CLI::ConfigBase::from_config(again);
    }
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw CLI::ConversionError("config", "config file is not a valid JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }
};

struct DatasetAlpha {
  const char* tag;
  double alpha;
};

// Visual-branch weight per benchmark.
constexpr DatasetAlpha kDatasetAlpha[] = {
    {"hmdb51", 0.0250}, {"kinetics", 0.0625}, {"ucf101", 0.1125},
    {"ssv2", 0.2},      {"ssv2-small", 0.2},  {"ssv2-full", 0.2},
};

std::optional<double> dataset_alpha(const std::string& tag) {
  for (const auto& d : kDatasetAlpha) {
    if (tag == d.tag) return d.alpha;
  }
  return std::nullopt;
}

std::size_t default_threads() {
  const auto hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

struct EvalOptions {
  std::string store;
  std::string weights;
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t episodes = 10000;
  std::uint64_t seed = 0;
  std::size_t queries_per_class = 0;  // 0: one query per episode
  std::size_t phases = 3;
  std::size_t overlap = 1;
  std::string seg_method = "cluster";
  std::string metric = "ab_mhm";
  std::string kshot_reduction = "mean_distance";
  std::optional<double> alpha;
  std::string dataset;
  double temperature = 1.0;
  std::string text_fusion = "auto";
  bool attention_residual = false;
  bool layer_norm = false;
  std::size_t heads = 1;
  std::size_t hidden = 0;
  double sharpness = 1.0;
  std::size_t threads = default_threads();
  std::string ci = "normal";
  std::string out;
  std::string episode_log;
};

void add_eval_options(CLI::App* app, EvalOptions& o) {
  app->add_option("--store", o.store, "Store manifest (JSON)")->required();
  app->add_option("--weights", o.weights,
                  "Fusion weights file (LGAW); identity-projection weights when omitted");
  app->add_option("-n,--n,--way", o.way, "Classes per episode (N)")->capture_default_str();
  app->add_option("-k,--k,--shot", o.shot, "Support videos per class (K)")->capture_default_str();
  app->add_option("--episodes", o.episodes, "Number of episodes")->capture_default_str();
  app->add_option("--seed", o.seed, "Run seed")->capture_default_str();
  app->add_option("--queries-per-class", o.queries_per_class,
                  "Queries per class; 0 draws a single query per episode")
      ->capture_default_str();
  app->add_option("-L,--L,--phases", o.phases, "Atomic phases per video (L)")->capture_default_str();
  app->add_option("--overlap", o.overlap, "Frames duplicated into each neighbouring phase")
      ->capture_default_str();
  app->add_option("--seg-method", o.seg_method, "cluster | hard")->capture_default_str();
  app->add_option("--metric", o.metric, "ab_mhm | bi_mhm")->capture_default_str();
  app->add_option("--kshot-reduction", o.kshot_reduction, "mean_distance | min_distance")
      ->capture_default_str();
  app->add_option("--alpha", o.alpha, "Weight of the video-video branch in [0,1] (default 1, or per --dataset)");
  app->add_option("--dataset", o.dataset, "Dataset tag for the alpha default: hmdb51, kinetics, ucf101, ssv2");
  app->add_option("--temperature", o.temperature, "Video-text logit temperature")->capture_default_str();
  app->add_option("--text-fusion", o.text_fusion, "auto | on | off")->capture_default_str();
  app->add_flag("--attention-residual", o.attention_residual, "Add the query back after attention");
  app->add_flag("--layer-norm", o.layer_norm, "Layer-normalize the attention output");
  app->add_option("--heads", o.heads, "Attention heads for the default weights")->capture_default_str();
  app->add_option("--hidden", o.hidden, "FFN width for the default weights (default 4C)");
  app->add_option("--sharpness", o.sharpness, "W_Q scale for the default weights")->capture_default_str();
  app->add_option("--threads", o.threads, "Worker threads")->envname("LGA_THREADS")->capture_default_str();
  app->add_option("--ci", o.ci, "normal | exact")->capture_default_str();
  app->add_option("--out", o.out, "Write the report here instead of stdout");
  app->add_option("--episode-log", o.episode_log, "Write a per-episode CSV log");
}

struct Resolved {
  FeatureStore store;
  FusionWeights weights;
  EvalConfig config;
};

EvalConfig to_eval_config(const EvalOptions& o) {
  EvalConfig cfg;
  cfg.shape.way = o.way;
  cfg.shape.shot = o.shot;
  cfg.shape.single_query = o.queries_per_class == 0;
  cfg.shape.queries_per_class = o.queries_per_class == 0 ? 1 : o.queries_per_class;
  cfg.episodes = o.episodes;
  cfg.seed = o.seed;
  cfg.pipeline.seg_method = parse_seg_method(o.seg_method);
  cfg.pipeline.phases = o.phases;
  cfg.pipeline.overlap = o.overlap;
  cfg.pipeline.text_fusion = parse_text_fusion(o.text_fusion);
  cfg.pipeline.fusion.attention_residual = o.attention_residual;
  cfg.pipeline.fusion.layer_norm = o.layer_norm;
  cfg.pipeline.match.metric = parse_metric(o.metric);
  cfg.pipeline.match.kshot_reduction = parse_kshot_reduction(o.kshot_reduction);
  cfg.pipeline.match.temperature_vt = o.temperature;
  double alpha = 1.0;
  if (!o.dataset.empty()) {
    const auto a = dataset_alpha(o.dataset);
    if (!a) fail(ErrorKind::invalid_argument, "unknown dataset tag '" + o.dataset + "'");
    alpha = *a;
  }
  if (o.alpha) alpha = *o.alpha;
  cfg.pipeline.match.alpha = alpha;
  cfg.threads = std::max<std::size_t>(1, o.threads);
  if (o.ci == "normal") {
    cfg.ci = CiMethod::normal;
  } else if (o.ci == "exact") {
    cfg.ci = CiMethod::exact;
  } else {
    fail(ErrorKind::invalid_argument, "unknown CI method '" + o.ci + "' (normal|exact)");
  }
  cfg.keep_episode_log = !o.episode_log.empty();
  cfg.validate();
  return cfg;
}

Resolved resolve(const EvalOptions& o) {
  Resolved r;
  r.config = to_eval_config(o);
  r.store = load_store(o.store);
  if (o.weights.empty()) {
    const std::size_t hidden = o.hidden == 0 ? 4 * r.store.dim : o.hidden;
    r.weights = passthrough_weights(r.store.dim, o.heads, hidden, o.sharpness);
  } else {
    r.weights = read_weights(o.weights);
  }
  return r;
}

nlohmann::ordered_json resolved_json(const EvalOptions& o, const Resolved& r) {
  auto j = config_to_json(r.config);
  j["store"] = o.store;
  j["weights"] = o.weights.empty() ? std::string("identity") : o.weights;
  if (!o.dataset.empty()) j["dataset"] = o.dataset;
  j["heads"] = r.weights.heads;
  return j;
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::io, "cannot open for writing", path);
  f << text;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
      return kExitConfig;
    case ErrorKind::invalid_data:
    case ErrorKind::io:
    case ErrorKind::missing_blob:
    case ErrorKind::corrupt_file:
    case ErrorKind::truncated_file:
    case ErrorKind::dim_mismatch:
    case ErrorKind::dangling_reference:
    case ErrorKind::degenerate_feature:
    case ErrorKind::degenerate_phase:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  Resolved r = resolve(o);
  EvalReport report = evaluate(r.store, r.weights, r.config);
  report.config = resolved_json(o, r);
  write_text(o.out, to_json(report).dump(2) + "\n", out);
  if (!o.episode_log.empty()) write_text(o.episode_log, episode_log_csv(report), out);
  return kExitOk;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> values;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) values.push_back(cur.substr(b, e - b + 1));
  }
  return values;
}

int cmd_sweep(const EvalOptions& base, const std::string& axis, const std::vector<std::string>& raw_values,
              std::ostream& out) {
  std::vector<std::string> values;
  for (const auto& v : raw_values) {
    for (auto& piece : split_values(v)) values.push_back(std::move(piece));
  }
  if (values.empty()) fail(ErrorKind::invalid_argument, "sweep needs at least one value");
  if (axis != "alpha" && axis != "L" && axis != "metric" && axis != "seg_method") {
    fail(ErrorKind::invalid_argument, "unknown sweep axis '" + axis + "' (alpha|L|metric|seg_method)");
  }

  std::vector<EvalOptions> variants;
  for (const auto& v : values) {
    EvalOptions o = base;
    try {
      if (axis == "alpha") {
        o.alpha = std::stod(v);
      } else if (axis == "L") {
        o.phases = std::stoul(v);
      } else if (axis == "metric") {
        o.metric = v;
      } else {
        o.seg_method = v;
      }
    } catch (const std::logic_error&) {
      fail(ErrorKind::invalid_argument, "cannot parse sweep value '" + v + "' for axis " + axis);
    }
    to_eval_config(o);  // surface bad values before running anything
    variants.push_back(std::move(o));
  }

  Resolved shared = resolve(base);
  std::ostringstream csv;
  csv << "sweep_axis,value,accuracy,ci95,episodes,seed\n";
  csv.precision(6);
  csv << std::fixed;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const EvalConfig cfg = to_eval_config(variants[i]);
    const EvalReport report = evaluate(shared.store, shared.weights, cfg);
    csv << axis << ',' << values[i] << ',' << report.accuracy << ',' << report.ci95_halfwidth << ','
        << report.episodes << ',' << cfg.seed << '\n';
  }
  write_text(base.out, csv.str(), out);
  return kExitOk;
}

struct SynthOptions {
  SyntheticParams params;
  std::string out_dir;
  bool shuffle = false;
  std::uint64_t shuffle_seed = 0;
  std::string weights_out;
  std::size_t heads = 1;
  std::size_t hidden = 0;
  std::uint64_t weights_seed = 0;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  FeatureStore store = generate_synthetic(o.params);
  if (o.shuffle) store = shuffle_labels(std::move(store), o.shuffle_seed);
  const auto manifest = save_store(store, o.out_dir);
  out << manifest.string() << '\n';
  if (!o.weights_out.empty()) {
    const std::size_t hidden = o.hidden == 0 ? 4 * o.params.dim : o.hidden;
    write_weights(o.weights_out, init_weights(o.params.dim, o.heads, hidden, o.weights_seed));
    out << o.weights_out << '\n';
  }
  return kExitOk;
}

struct FetchCliOptions {
  std::string labels;
  std::size_t phases = 3;
  std::string cache = "descriptions.json";
  long long timeout_ms = 30000;
  std::size_t retries = 3;
  long long backoff_ms = 500;
  bool verbose = false;
};

int cmd_fetch(const FetchCliOptions& o, std::ostream& out, std::ostream& err) {
  const LlmEndpoint endpoint = endpoint_from_env();
  std::ifstream in(o.labels);
  if (!in) throw Error(ErrorKind::io, "cannot open labels file", o.labels);
  std::vector<std::string> labels;
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }

  FetchOptions options;
  options.timeout = std::chrono::milliseconds(o.timeout_ms);
  options.retry.max_retries = o.retries;
  options.retry.initial_backoff = std::chrono::milliseconds(o.backoff_ms);
  if (o.verbose) options.debug_log = [&err](std::string_view line) { err << "[debug] " << line << '\n'; };

  DescriptionCache cache = DescriptionCache::load(o.cache);
  std::size_t fetched = 0;
  for (const auto& label : labels) {
    if (cache.find(label, o.phases)) continue;
    auto result = fetch_descriptions(endpoint, label, o.phases, options);
    cache.put(std::move(result.descriptions));
    cache.save(o.cache);
    ++fetched;
  }
  cache.save(o.cache);
  out << "fetched " << fetched << ", cached " << cache.size() << " -> " << o.cache << '\n';
  return kExitOk;
}

int cmd_inspect(const std::string& manifest, std::ostream& out) {
  const FeatureStore store = load_store(manifest);
  std::map<std::size_t, std::size_t> lengths;
  std::map<int, std::size_t> per_class;
  for (const auto& [id, v] : store.videos) {
    ++lengths[v.length()];
    ++per_class[*v.class_id];
  }
  nlohmann::ordered_json j;
  j["manifest"] = manifest;
  j["dim"] = store.dim;
  j["videos"] = store.videos.size();
  j["classes"] = store.classes.size();
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [len, n] : lengths) hist[std::to_string(len)] = n;
  j["frames_histogram"] = hist;
  std::size_t min_videos = per_class.empty() ? 0 : per_class.begin()->second;
  std::size_t max_videos = 0;
  for (const auto& [cid, n] : per_class) {
    min_videos = std::min(min_videos, n);
    max_videos = std::max(max_videos, n);
  }
  j["videos_per_class"] = {{"min", min_videos}, {"max", max_videos}};
  j["text_classes"] = store.text.size();
  const auto phases = store.text_phase_count();
  j["text_phases"] = phases ? nlohmann::ordered_json(*phases) : nlohmann::ordered_json();
  out << j.dump(2) << '\n';
  return kExitOk;
}

// CLI11 only reads config files attached to the root app, so a subcommand's
// --config file is expanded here into --name=value tokens placed right after
// the subcommand name. Explicit flags come later and win (take-last policy).
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty() || args[0].starts_with("-")) return args;
  std::string file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
    if (args[i].starts_with("--config=")) file = args[i].substr(9);
  }
  if (file.empty()) return args;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_argument, "cannot open config file '" + file + "'", file);

  std::vector<std::string> expanded{args[0]};
  for (const auto& item : TomlOrJsonConfig().from_config(in)) {
    if (item.name == "config") continue;
    if (!item.parents.empty() && item.parents != std::vector<std::string>{args[0]}) continue;
    const std::string flag = "--" + item.name;
    if (item.inputs.size() == 1) {
      expanded.push_back(flag + "=" + item.inputs.front());
    } else {
      expanded.push_back(flag);
      expanded.insert(expanded.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Language-guided action anatomy: few-shot matching over precomputed embeddings", "lga"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_file;
  const char* config_help = "TOML or JSON file with option values (flags override)";

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Run an N-way K-shot episodic evaluation");
  eval->add_option("--config", config_file, config_help);
  add_eval_options(eval, eval_opts);

  EvalOptions sweep_opts;
  std::string sweep_axis;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Evaluate once per value of one axis and emit CSV");
  sweep->add_option("--config", config_file, config_help);
  add_eval_options(sweep, sweep_opts);
  sweep->add_option("--axis", sweep_axis, "alpha | L | metric | seg_method")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values for the axis")->required();

  std::string prompt_label;
  std::size_t prompt_phases = 3;
  auto* prompt = app.add_subcommand("prompt", "Print the decomposition prompt for a label");
  prompt->add_option("--label", prompt_label, "Action label")->required();
  prompt->add_option("-L,--L,--phases", prompt_phases, "Number of sub-actions")->capture_default_str();

  FetchCliOptions fetch_opts;
  auto* fetch = app.add_subcommand(
      "fetch", "Fetch atomic descriptions for labels from an OpenAI-compatible endpoint "
               "(env: LGA_LLM_ENDPOINT, LGA_LLM_API_KEY, LGA_LLM_MODEL)");
  fetch->add_option("--labels", fetch_opts.labels, "File with one action label per line")->required();
  fetch->add_option("-L,--L,--phases", fetch_opts.phases, "Number of sub-actions")->capture_default_str();
  fetch->add_option("--cache", fetch_opts.cache, "Description cache file")->capture_default_str();
  fetch->add_option("--timeout-ms", fetch_opts.timeout_ms, "Per-attempt timeout")->capture_default_str();
  fetch->add_option("--retries", fetch_opts.retries, "Retries for transient failures")->capture_default_str();
  fetch->add_option("--backoff-ms", fetch_opts.backoff_ms, "Initial retry backoff")->capture_default_str();
  fetch->add_flag("-v,--verbose", fetch_opts.verbose, "Log requests and replies (key redacted)");

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature store");
  synth->add_option("--config", config_file, config_help);
  auto& sp = synth_opts.params;
  synth->add_option("--out-dir", synth_opts.out_dir, "Output directory")->required();
  synth->add_option("--classes", sp.classes, "Number of classes")->capture_default_str();
  synth->add_option("--videos-per-class", sp.videos_per_class, "Videos per class")->capture_default_str();
  synth->add_option("--frames,-T", sp.frames, "Frames per video (T)")->capture_default_str();
  synth->add_option("--dim,-C", sp.dim, "Embedding dimension (C)")->capture_default_str();
  synth->add_option("--L-true", sp.true_phases, "True phases per video")->capture_default_str();
  synth->add_option("--noise", sp.noise_sigma, "Per-entry Gaussian noise sigma")->capture_default_str();
  synth->add_option("--separation", sp.phase_separation, "Phase mean norm")->capture_default_str();
  synth->add_option("--jitter", sp.boundary_jitter, "Max phase boundary jitter in frames")
      ->capture_default_str();
  synth->add_option("--seed", sp.seed, "Generator seed")->capture_default_str();
  synth->add_flag("--shuffle-labels", synth_opts.shuffle, "Permute labels across videos");
  synth->add_option("--shuffle-seed", synth_opts.shuffle_seed, "Seed for --shuffle-labels")
      ->capture_default_str();
  synth->add_option("--weights-out", synth_opts.weights_out, "Also write randomly initialized fusion weights");
  synth->add_option("--heads", synth_opts.heads, "Heads for --weights-out")->capture_default_str();
  synth->add_option("--hidden", synth_opts.hidden, "FFN width for --weights-out (default 4C)");
  synth->add_option("--weights-seed", synth_opts.weights_seed, "Seed for --weights-out")->capture_default_str();

  std::string inspect_store;
  auto* inspect = app.add_subcommand("inspect", "Summarize a feature store");
  inspect->add_option("--store", inspect_store, "Store manifest")->required();

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const CLI::Error& e) {
    err << "error: config file: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::vector<const char*> argv{"lga"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    const auto* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failing->help();
    return kExitConfig;
  }

  try {
    if (*eval) return cmd_eval(eval_opts, out);
    if (*sweep) return cmd_sweep(sweep_opts, sweep_axis, sweep_values, out);
    if (*prompt) {
      out << build_prompt(prompt_label, prompt_phases);
      return kExitOk;
    }
    if (*fetch) return cmd_fetch(fetch_opts, out, err);
    if (*synth) return cmd_synth(synth_opts, out);
    if (*inspect) return cmd_inspect(inspect_store, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\nraw reply:\n" << e.raw() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace lga::cli
